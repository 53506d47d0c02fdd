"""Tentative start times and per-slot grouping.

Each flow's tentative start is ``t + r`` where ``t`` is drawn from the flow's
LP start distribution and ``r`` from ``Pr(r = b) = Pr(S >= b + 1) / E[S]``.
Flows sharing a tentative start are then summarized by an ``m x m`` matrix of
expected loads.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .instance import DiscreteDist, FlowId, Instance
from .lp import LpSolution

GENERATOR = "numpy.PCG64"
RENORM_TOL = 1e-6


def clean_yrow(yrow) -> np.ndarray:
    """Clamp solver noise to a proper pmf; reject rows that are far from one."""
    y = np.clip(np.asarray(yrow, dtype=float), 0.0, None)
    total = y.sum()
    if abs(total - 1.0) > RENORM_TOL:
        raise ValueError(f"start distribution sums to {total!r}")
    return y / total


def residual_pmf(dist: DiscreteDist) -> np.ndarray:
    return dist.tails / dist.mean


def _inverse_cdf(pmf: np.ndarray, u):
    cdf = np.cumsum(pmf)
    idx = np.searchsorted(cdf, np.asarray(u) * cdf[-1], side="right")
    return np.minimum(idx, len(pmf) - 1)


def sample_tentative_start(yrow, dist: DiscreteDist, rng: np.random.Generator, size: int | None = None):
    """Draw ``t + r``.  Consumes two uniforms per draw, in (t, r) order.

    With ``size`` given, returns an array of that many independent draws; the
    stream is identical to ``size`` consecutive scalar calls.
    """
    y = clean_yrow(yrow)
    rp = residual_pmf(dist)
    if size is None:
        u = rng.random(2)
        return int(_inverse_cdf(y, u[0]) + _inverse_cdf(rp, u[1]))
    u = rng.random(2 * size).reshape(size, 2)
    return _inverse_cdf(y, u[:, 0]) + _inverse_cdf(rp, u[:, 1])


def tentative_pmf(yrow, dist: DiscreteDist) -> np.ndarray:
    """Exact pmf of the tentative start: convolution of start and residual pmfs."""
    return np.convolve(clean_yrow(yrow), residual_pmf(dist))


@dataclass(frozen=True)
class TentativeAssignment:
    starts: dict[FlowId, int]
    seed: object = None
    generator: str = GENERATOR

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "k", "s"])
        for key in sorted(self.starts):
            w.writerow([*key, self.starts[key]])
        return buf.getvalue()


def sample_assignment(inst: Instance, sol: LpSolution, seed) -> TentativeAssignment:
    """Sample every flow's tentative start, flows visited in ``(i, j, k)`` order."""
    rng = np.random.default_rng(seed)
    starts = {f.key: sample_tentative_start(sol.y[f.key], f.dist, rng) for f in inst.flows}
    return TentativeAssignment(starts, seed)


@dataclass(frozen=True)
class GroupMatrix:
    s: int
    D: np.ndarray
    members: tuple[FlowId, ...]


def group_by_start(
    assign: TentativeAssignment,
    inst: Instance,
    expected: dict[FlowId, float] | None = None,
) -> list[GroupMatrix]:
    """Group flows by tentative start.

    ``expected`` overrides the per-flow expected sizes that fill ``D``; by
    default each flow contributes its distribution mean.
    """
    missing = set(inst.flow_map) - set(assign.starts)
    if missing:
        raise ValueError(f"assignment misses flows {sorted(missing)}")
    by_s: dict[int, list[FlowId]] = {}
    for key in sorted(assign.starts):
        by_s.setdefault(assign.starts[key], []).append(key)
    groups = []
    for s in sorted(by_s):
        D = np.zeros((inst.m, inst.m))
        for i, j, k in by_s[s]:
            e = expected[(i, j, k)] if expected is not None else inst.flow_map[(i, j, k)].dist.mean
            D[i - 1, j - 1] += e
        groups.append(GroupMatrix(s, D, tuple(by_s[s])))
    return groups


def efficient_size(D) -> float:
    D = np.asarray(D, dtype=float)
    if D.size == 0:
        return 0.0
    return float(max(D.sum(axis=1).max(), D.sum(axis=0).max()))
