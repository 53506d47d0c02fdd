"""Built-in worked example: the 5-server topology and the single-slot group.

``five_server_instance`` is the three-task, five-server topology used to
illustrate port contention.  ``slot_group_instance`` holds the 19 flows that
share one tentative start slot in the decomposition walk-through; their
expected sizes (all below one slot, so they cannot be carried by an integer
size distribution) live in ``SLOT_GROUP_SIZES`` and are passed to the
grouping step explicitly.
"""

from __future__ import annotations

import numpy as np

from .instance import CoflowTask, DiscreteDist, FlowId, FlowSpec, Instance

FIVE_SERVER_FLOWS: dict[int, tuple[tuple[int, int], ...]] = {
    1: ((1, 1), (2, 4), (4, 3)),
    2: ((1, 1), (2, 2), (5, 5)),
    3: ((2, 1), (2, 2), (3, 4), (5, 1)),
}

SLOT_GROUP_SIZES: dict[FlowId, float] = {
    (1, 1, 1): 0.38, (2, 1, 3): 0.11, (4, 1, 1): 0.20, (4, 1, 3): 0.31,
    (1, 4, 1): 0.40, (2, 4, 1): 0.05, (3, 4, 2): 0.33,
    (2, 2, 2): 0.24, (3, 2, 1): 0.19, (3, 2, 2): 0.31, (3, 2, 3): 0.03,
    (4, 2, 2): 0.23, (4, 4, 1): 0.22,
    (1, 3, 2): 0.22, (2, 3, 1): 0.20, (2, 3, 2): 0.20, (2, 3, 3): 0.20,
    (3, 3, 3): 0.14, (4, 3, 3): 0.04,
}

SLOT_GROUP_MATRIX = np.array([
    [0.38, 0.00, 0.22, 0.40],
    [0.11, 0.24, 0.60, 0.05],
    [0.00, 0.53, 0.14, 0.33],
    [0.51, 0.23, 0.04, 0.22],
])

# pass-by-pass links of the reference decomposition
SLOT_GROUP_PASSES: tuple[frozenset[tuple[int, int]], ...] = (
    frozenset({(1, 4), (2, 3), (3, 2), (4, 1)}),
    frozenset({(1, 1), (2, 2), (3, 4), (4, 3)}),
    frozenset({(1, 3), (2, 1), (4, 2)}),
    frozenset({(3, 3), (4, 4)}),
    frozenset({(2, 4)}),
)


def _build(m: int, flows_by_task: dict[int, list[tuple[int, int]]], dist: DiscreteDist, name: str) -> Instance:
    tasks = tuple(
        CoflowTask(k, tuple(FlowSpec(i, j, k, dist) for i, j in sorted(links)))
        for k, links in sorted(flows_by_task.items())
    )
    return Instance(m, tasks, {"fixture": name})


def five_server_instance(dist: DiscreteDist | None = None) -> Instance:
    """Ten flows on five servers; every flow gets ``dist`` (unit size by default)."""
    dist = dist or DiscreteDist.deterministic(1)
    return _build(5, {k: list(v) for k, v in FIVE_SERVER_FLOWS.items()}, dist, "five-server")


def slot_group_instance(dist: DiscreteDist | None = None) -> Instance:
    dist = dist or DiscreteDist.deterministic(1)
    by_task: dict[int, list[tuple[int, int]]] = {}
    for i, j, k in SLOT_GROUP_SIZES:
        by_task.setdefault(k, []).append((i, j))
    return _build(4, by_task, dist, "slot-group")
