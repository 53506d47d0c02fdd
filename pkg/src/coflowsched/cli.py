"""Command-line entry point.

    coflowsched validate FILE
    coflowsched generate --config GEN.json --seed S [--output FILE]
    coflowsched solve FILE [--horizon N] [--mps]
    coflowsched schedule FILE --seed S
    coflowsched simulate FILE --seed S [--policy P] [--executor E] [--trials T]
    coflowsched bench --config BENCH.json

``--fixture-siv`` replaces FILE with the built-in worked example.  Outputs go
to ``--out`` (default: ``$COFLOWSCHED_OUT`` or ``./out``).  Exit status is 0 on
success, 1 on validation failures (including unreadable input), 2 on runtime
or solver failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .bench import BenchConfig, bench_csv, run_bench, summary_table
from .executor import EXECUTORS, POLICIES, make_policy, monte_carlo_eval, realize_sizes, trial_seeds
from .fixtures import SLOT_GROUP_SIZES, five_server_instance, slot_group_instance
from .gljd import schedule_from_assignment
from .instance import (
    GeneratorConfig,
    InstanceFormatError,
    canonical_json,
    dumps_instance,
    generate_instance,
    load_instance,
    validate_instance,
)
from .lp import LpError, build_lp, compute_horizon, solve_relaxation, write_mps
from .npscs import TentativeAssignment

OUT_ENV = "COFLOWSCHED_OUT"


class ValidationFailure(Exception):
    pass


def _header(args, **extra) -> dict:
    d = {"tool": "coflowsched", "version": __version__, "command": args.command}
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    d.update(extra)
    return d


def _csv_header(meta: dict) -> str:
    return "".join(f"# {k}={meta[k]}\n" for k in sorted(meta))


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    if getattr(args, "fixture_siv", False):
        return five_server_instance()
    if not args.file:
        raise ValidationFailure("no instance file given")
    path = Path(args.file)
    if not path.exists():
        raise ValidationFailure(f"{path}: not found")
    try:
        inst = load_instance(path)
    except InstanceFormatError as e:
        raise ValidationFailure(f"{path}: {e}") from e
    issues = validate_instance(inst)
    if issues:
        raise ValidationFailure("\n".join(str(i) for i in issues))
    return inst


def cmd_validate(args) -> int:
    inst = _load(args)
    print(f"ok: m={inst.m} tasks={inst.n_tasks} flows={len(inst.flows)}")
    return 0


def cmd_generate(args) -> int:
    cfg = GeneratorConfig.from_dict(json.loads(Path(args.config).read_text()))
    text = dumps_instance(generate_instance(cfg, args.seed))
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_solve(args) -> int:
    inst = _load(args)
    h = compute_horizon(inst)
    horizon = args.horizon if args.horizon is not None else h.F
    sol = solve_relaxation(inst, horizon)
    out = _out_dir(args)
    summary = {
        "header": _header(args, horizon=horizon, F1=h.F1, F2=h.F2),
        "objective": sol.objective,
        "c_task": {str(k): v for k, v in sorted(sol.c_task.items())},
    }
    (out / "solution.json").write_text(canonical_json(summary))
    if args.mps:
        write_mps(build_lp(inst, horizon), out / "model.mps")
    print(f"objective {sol.objective!r} (horizon F={horizon})")
    for k, v in sorted(sol.c_task.items()):
        print(f"  C_{k}^LP = {v!r}")
    return 0


def cmd_schedule(args) -> int:
    if args.fixture_siv:
        inst = slot_group_instance()
        assign = TentativeAssignment({f: 0 for f in SLOT_GROUP_SIZES}, seed=args.seed)
        sched = schedule_from_assignment(inst, assign, SLOT_GROUP_SIZES)
    else:
        if args.seed is None:
            raise ValidationFailure("--seed is required")
        inst = _load(args)
        sched = make_policy("npscs", inst)(args.seed)
    out = _out_dir(args)
    meta = _header(args, policy="npscs", generator=sched.assignment.generator)
    (out / "schedule.csv").write_text(_csv_header(meta) + sched.to_csv())
    (out / "assignment.csv").write_text(_csv_header(meta) + sched.assignment.to_csv())
    print(f"{len(sched.rows())} rows in {len(sched.groups)} groups -> {out / 'schedule.csv'}")
    return 0


def cmd_simulate(args) -> int:
    if args.seed is None:
        raise ValidationFailure("--seed is required")
    inst = _load(args)
    out = _out_dir(args)
    meta = _header(args, policy=args.policy, executor=args.executor, trials=args.trials)
    sched_seed, real_seed = trial_seeds(args.seed, 0)
    sched = make_policy(args.policy, inst)(sched_seed)
    res = EXECUTORS[args.executor](sched, realize_sizes(inst, real_seed), inst)
    (out / "schedule.csv").write_text(_csv_header(meta) + sched.to_csv())
    (out / "trace.csv").write_text(_csv_header(meta) + res.trace_csv())
    (out / "result.csv").write_text(_csv_header(meta) + res.result_csv(inst))
    summary = {"header": meta, "objective": res.objective}
    if args.trials > 1:
        est = monte_carlo_eval(inst, args.policy, args.trials, args.seed, args.executor)
        summary["mean"] = est.mean
        summary["stderr"] = est.stderr
    (out / "summary.json").write_text(canonical_json(summary))
    print(f"objective {res.objective!r}" + (f", mean over {args.trials} trials {summary['mean']!r}" if args.trials > 1 else ""))
    return 0


def cmd_bench(args) -> int:
    cfg = BenchConfig.from_dict(json.loads(Path(args.config).read_text()))
    reports = run_bench(cfg)
    out = _out_dir(args)
    (out / "bench.csv").write_text(bench_csv(cfg, reports))
    table = summary_table(reports)
    (out / "bench_summary.txt").write_text(table)
    print(table, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coflowsched", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"coflowsched {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def with_instance(sp):
        sp.add_argument("file", nargs="?")
        sp.add_argument("--fixture-siv", action="store_true", help="use the built-in worked example")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
        return sp

    with_instance(sub.add_parser("validate", help="check an instance file"))

    g = sub.add_parser("generate", help="write a random instance")
    g.add_argument("--config", required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--output")

    s = with_instance(sub.add_parser("solve", help="solve the LP relaxation"))
    s.add_argument("--horizon", type=int)
    s.add_argument("--mps", action="store_true", help="also export the model as free MPS")

    sc = with_instance(sub.add_parser("schedule", help="build an NPSCS schedule"))
    sc.add_argument("--seed", type=int)

    sim = with_instance(sub.add_parser("simulate", help="execute one schedule"))
    sim.add_argument("--seed", type=int)
    sim.add_argument("--policy", choices=POLICIES, default="npscs")
    sim.add_argument("--executor", choices=sorted(EXECUTORS), default="barrier")
    sim.add_argument("--trials", type=int, default=1)

    b = sub.add_parser("bench", help="ratio reports across policies and seeds")
    b.add_argument("--config", required=True)
    b.add_argument("--out")
    return p


COMMANDS = {
    "validate": cmd_validate,
    "generate": cmd_generate,
    "solve": cmd_solve,
    "schedule": cmd_schedule,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (FileNotFoundError, json.JSONDecodeError, InstanceFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (LpError, ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
