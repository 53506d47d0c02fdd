import pytest
from hypothesis import strategies as st

from coflowsched.instance import CoflowTask, DiscreteDist, FlowSpec, Instance

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    def record(label, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {label}" + (f"  ({detail})" if detail else ""))

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def unit():
    return DiscreteDist.deterministic(1)


def make_instance(m, flows, weights=None):
    """flows: iterable of (i, j, k, dist_or_size[, release])."""
    by_task = {}
    for spec in flows:
        i, j, k, d = spec[:4]
        rel = spec[4] if len(spec) > 4 else 0
        if isinstance(d, int):
            d = DiscreteDist.deterministic(d)
        by_task.setdefault(k, []).append(FlowSpec(i, j, k, d, rel))
    weights = weights or {}
    tasks = tuple(CoflowTask(k, tuple(v), weights.get(k, 1.0)) for k, v in sorted(by_task.items()))
    return Instance(m, tasks)


@st.composite
def dists(draw, max_size=8, max_points=4):
    sizes = draw(st.lists(st.integers(1, max_size), min_size=1, max_size=max_points, unique=True))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=len(sizes), max_size=len(sizes)))
    total = sum(raw)
    return DiscreteDist(tuple(sorted((s, w / total) for s, w in zip(sizes, raw))))
