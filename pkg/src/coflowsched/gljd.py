"""Greedy low-jitter decomposition and schedule assembly.

A load matrix is split into pseudo-permutation matrices (conflict-free port
matchings) by repeated greedy passes over its nonzero entries sorted by value.
Each matching selects the flows of one slot group that run together; the
schedule is all such flow groups ordered by ``(slot, pass)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .instance import FlowId, Instance
from .lp import LpSolution
from .npscs import GroupMatrix, TentativeAssignment, group_by_start, sample_assignment


@dataclass(frozen=True)
class PseudoPermutation:
    """Binary ``m x m`` matrix with at most one 1 per row and column.

    Stored as its 1-entries (1-based ``(source, sink)`` links) in pick order.
    """

    m: int
    links: tuple[tuple[int, int], ...]

    def __post_init__(self):
        rows = [i for i, _ in self.links]
        cols = [j for _, j in self.links]
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise ValueError(f"not a pseudo-permutation: {self.links}")

    @property
    def link_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.links)

    def matrix(self) -> np.ndarray:
        X = np.zeros((self.m, self.m), dtype=int)
        for i, j in self.links:
            X[i - 1, j - 1] = 1
        return X


def gljd_decompose(D) -> list[PseudoPermutation]:
    D = np.asarray(D, dtype=float)
    m = D.shape[0]
    # ties: value descending, then row, then column
    entries = sorted((-D[i, j], i, j) for i in range(m) for j in range(m) if D[i, j] > 0)
    out = []
    while entries:
        used_rows, used_cols = set(), set()
        picked, rest = [], []
        for e in entries:
            _, i, j = e
            if i in used_rows or j in used_cols:
                rest.append(e)
                continue
            used_rows.add(i)
            used_cols.add(j)
            picked.append((i + 1, j + 1))
        out.append(PseudoPermutation(m, tuple(picked)))
        entries = rest
    return out


def decomposition_cost(Xs: list[PseudoPermutation], D) -> float:
    """Sum over passes of the largest entry each pass covers."""
    D = np.asarray(D, dtype=float)
    return float(sum(max(D[i - 1, j - 1] for i, j in X.links) for X in Xs))


def decomposition_rows(Xs: list[PseudoPermutation]) -> list[tuple[int, int, int]]:
    return [(l, i, j) for l, X in enumerate(Xs, 1) for i, j in sorted(X.links)]


@dataclass(frozen=True)
class FlowGroup:
    s: int
    l: int
    members: tuple[FlowId, ...]


def map_groups(g: GroupMatrix, Xs: list[PseudoPermutation]) -> list[FlowGroup]:
    groups = []
    for l, X in enumerate(Xs, 1):
        links = X.link_set
        members = tuple(sorted(f for f in g.members if (f[0], f[1]) in links))
        groups.append(FlowGroup(g.s, l, members))
    return groups


@dataclass(frozen=True)
class Schedule:
    groups: tuple[FlowGroup, ...]
    policy: str = "npscs"
    seed: object = None
    assignment: TentativeAssignment | None = field(default=None, compare=False)

    def flat(self) -> list[FlowId]:
        return [f for g in self.groups for f in g.members]

    def rows(self) -> list[tuple[int, int, int, int, int]]:
        return [(g.s, g.l, *f) for g in self.groups for f in g.members]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "l", "i", "j", "k"])
        w.writerows(self.rows())
        return buf.getvalue()


def schedule_from_assignment(
    inst: Instance,
    assign: TentativeAssignment,
    expected: dict[FlowId, float] | None = None,
    policy: str = "npscs",
) -> Schedule:
    groups = []
    for g in group_by_start(assign, inst, expected):
        groups.extend(map_groups(g, gljd_decompose(g.D)))
    return Schedule(tuple(groups), policy, assign.seed, assign)


def build_schedule(inst: Instance, sol: LpSolution, seed) -> Schedule:
    return schedule_from_assignment(inst, sample_assignment(inst, sol, seed))
