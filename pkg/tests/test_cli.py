import json

import pytest

from coflowsched.cli import main
from coflowsched.instance import dumps_instance, canonical_json

from conftest import make_instance


@pytest.fixture
def out(tmp_path, monkeypatch):
    d = tmp_path / "out"
    monkeypatch.setenv("COFLOWSCHED_OUT", str(d))
    return d


def write(tmp_path, inst, name="inst.json"):
    p = tmp_path / name
    p.write_text(dumps_instance(inst))
    return str(p)


def body(path):
    return "".join(line for line in path.read_text().splitlines(True) if not line.startswith("#"))


def test_validate_ok(tmp_path, capsys):
    path = write(tmp_path, make_instance(2, [(1, 1, 1, 1), (2, 2, 2, 3)]))
    assert main(["validate", path]) == 0
    assert "ok: m=2 tasks=2 flows=2" in capsys.readouterr().out
    assert main(["validate", "--fixture-siv"]) == 0


def test_validate_bad_pmf(tmp_path, capsys):
    path = write(tmp_path, make_instance(2, [(1, 1, 1, 1)]))
    d = json.loads(open(path).read())
    d["tasks"][0]["flows"][0]["dist"] = [[1, 0.5], [2, 0.4]]
    open(path, "w").write(json.dumps(d))
    assert main(["validate", path]) == 1
    assert "pmf-sum" in capsys.readouterr().err


def test_validate_missing_and_garbage(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nope.json")]) == 1
    assert "not found" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["validate", str(bad)]) == 1


def test_generate(tmp_path, capsys):
    cfg = tmp_path / "gen.json"
    cfg.write_text(json.dumps({"m": 3, "n_tasks": 2, "density": 0.3, "family": "geometric"}))
    target = tmp_path / "g.json"
    assert main(["generate", "--config", str(cfg), "--seed", "4", "--output", str(target)]) == 0
    assert main(["validate", str(target)]) == 0
    assert main(["generate", "--config", str(cfg), "--seed", "4"]) == 0
    assert capsys.readouterr().out.endswith(target.read_text())


@pytest.mark.parametrize("flows, value", [([(1, 1, 1, 1)], 1.0), ([(1, 1, 1, 1), (1, 1, 2, 1)], 3.0)])
def test_solve(tmp_path, out, flows, value):
    path = write(tmp_path, make_instance(1, flows))
    assert main(["solve", path, "--mps"]) == 0
    sol = json.loads((out / "solution.json").read_text())
    assert sol["objective"] == pytest.approx(value, abs=1e-7)
    assert sol["header"]["command"] == "solve"
    assert (out / "model.mps").read_text().endswith("ENDATA\n")
    first = (out / "solution.json").read_text()
    assert main(["solve", path]) == 0
    assert (out / "solution.json").read_text() == first


def test_solve_horizon_and_out_flag(tmp_path, out):
    path = write(tmp_path, make_instance(1, [(1, 1, 1, 1)]))
    other = tmp_path / "elsewhere"
    assert main(["solve", path, "--horizon", "3", "--out", str(other)]) == 0
    sol = json.loads((other / "solution.json").read_text())
    assert sol["header"]["horizon"] == 3
    assert not out.exists()


def test_schedule_fixture(out):
    assert main(["schedule", "--fixture-siv", "--seed", "0"]) == 0
    rows = body(out / "schedule.csv").splitlines()
    assert rows[0] == "s,l,i,j,k"
    assert len(rows) - 1 == 19
    assert {r.split(",")[1] for r in rows[1:]} == {"1", "2", "3", "4", "5"}


def test_schedule_same_seed_same_output(tmp_path, out):
    inst = make_instance(3, [(1, 1, 1, 2), (1, 2, 1, 1), (2, 2, 2, 3), (3, 1, 2, 1), (3, 3, 3, 2)])
    path = write(tmp_path, inst)
    assert main(["schedule", path, "--seed", "8"]) == 0
    first = (out / "schedule.csv").read_text(), (out / "assignment.csv").read_text()
    assert main(["schedule", path, "--seed", "8"]) == 0
    assert ((out / "schedule.csv").read_text(), (out / "assignment.csv").read_text()) == first
    assert "# seed=8" in first[0]
    assert main(["schedule", path]) == 1


@pytest.mark.parametrize("policy", ["npscs", "fifo", "wsept"])
@pytest.mark.parametrize("executor", ["barrier", "list"])
def test_simulate(tmp_path, out, policy, executor):
    path = write(tmp_path, make_instance(2, [(1, 1, 1, 1), (2, 2, 2, 1)]))
    args = ["simulate", path, "--seed", "1", "--policy", policy, "--executor", executor, "--trials", "3"]
    assert main(args) == 0
    summary = json.loads((out / "summary.json").read_text())
    # disjoint unit flows: list runs both at 0; barrier serialises separate groups
    expected = {"list": 2.0, "barrier": 3.0 if policy != "npscs" else summary["objective"]}[executor]
    assert summary["mean"] == expected
    assert summary["stderr"] == 0.0
    assert body(out / "result.csv").splitlines()[0] == "k,C_k,w_k"
    assert body(out / "trace.csv").splitlines()[0] == "slot,port_kind,port_id,i,j,k"
    first = (out / "summary.json").read_text()
    assert main(args) == 0
    assert (out / "summary.json").read_text() == first


def test_simulate_fixture(out):
    assert main(["simulate", "--fixture-siv", "--seed", "0"]) == 0
    assert json.loads((out / "summary.json").read_text())["objective"] > 0


def test_bench_twice_identical(tmp_path, out):
    cfg = tmp_path / "bench.json"
    cfg.write_text(canonical_json({
        "generator": {"m": 2, "n_tasks": 2, "density": 0.5, "family": "two-point", "size_cap": 3},
        "instances": 2, "trials": 3, "seed": 5,
    }))
    assert main(["bench", "--config", str(cfg)]) == 0
    first = (out / "bench.csv").read_bytes()
    assert main(["bench", "--config", str(cfg)]) == 0
    assert (out / "bench.csv").read_bytes() == first
    assert (out / "bench_summary.txt").exists()


def test_runtime_error_exit_code(tmp_path, out):
    cfg = tmp_path / "bench.json"
    cfg.write_text(json.dumps({"generator": {"m": 2, "n_tasks": 1}, "policies": ["srpt"], "instances": 1, "trials": 1}))
    assert main(["bench", "--config", str(cfg)]) == 2
