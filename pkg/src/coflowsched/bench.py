"""Verification harness: exact oracle, ratio bounds, numeric identities, reports."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from . import __version__
from .executor import monte_carlo_eval
from .instance import (
    DiscreteDist,
    GeneratorConfig,
    Instance,
    canonical_json,
    dist_cv_squared,
    generate_instance,
    instance_delta,
)
from .lp import LpSolution, lp_lower_bound, solve_relaxation

ORACLE_MAX_FLOWS = 8
ORACLE_MAX_TOTAL_SIZE = 12


class RatioBound(NamedTuple):
    base2: float
    natural: float


def theoretical_ratio(m: int, delta: float, release_mode: str = "zero") -> RatioBound:
    """Approximation factor for NPSCS, with log base 2 and natural log.

    zero release:    (2 log m + 1)(1 + sqrt(m) D)(1 + m D)(3 + D) / 2
    general release: (2 log m + 1)(1 + sqrt(m) D)(1 + m D)(2 + D)
    """
    if m < 2:
        raise ValueError(f"bound needs m >= 2, got {m}")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if release_mode == "zero":
        tail = (3 + delta) / 2
    elif release_mode == "general":
        tail = 2 + delta
    else:
        raise ValueError(f"unknown release mode {release_mode!r}")
    rest = (1 + math.sqrt(m) * delta) * (1 + m * delta) * tail
    return RatioBound((2 * math.log2(m) + 1) * rest, (2 * math.log(m) + 1) * rest)


def prop54_check(dist: DiscreteDist) -> tuple[float, float, float]:
    """Both sides of  sum_r (r + 1/2) Pr(S >= r+1) / E[S] = (1 + CV^2) / 2 * E[S]."""
    tails = dist.tails
    r = np.arange(len(tails))
    lhs = math.fsum((r + 0.5) * tails) / dist.mean
    rhs = (1 + dist_cv_squared(dist)) / 2 * dist.mean
    return lhs, rhs, abs(lhs - rhs)


def cv_sum_check(dists: Sequence[DiscreteDist]) -> tuple[float, float, bool]:
    """CV of a sum of independent sizes against the largest component CV."""
    if not dists:
        raise ValueError("need at least one distribution")
    mean = math.fsum(d.mean for d in dists)
    var = math.fsum(d.variance for d in dists)
    cv_sum = math.sqrt(var) / mean
    cv_max = max(math.sqrt(d.variance) / d.mean for d in dists)
    return cv_sum, cv_max, cv_sum <= cv_max + 1e-12


def emax_bound_check(dists: Sequence[DiscreteDist], samples: int = 10_000, seed=0) -> tuple[float, float, bool]:
    """Monte-Carlo E[max] of independent draws versus max mean + sqrt(n) max std."""
    if not dists:
        raise ValueError("need at least one distribution")
    if samples < 10_000:
        raise ValueError("samples must be >= 10^4")
    rng = np.random.default_rng(seed)
    draws = np.stack([rng.choice(np.array(d.sizes), size=samples, p=np.array(d.probs) / sum(d.probs)) for d in dists])
    mx = draws.max(axis=0).astype(float)
    est = float(mx.mean())
    se = float(mx.std(ddof=1) / math.sqrt(samples))
    bound = max(d.mean for d in dists) + math.sqrt(len(dists)) * max(math.sqrt(d.variance) for d in dists)
    return est, bound, est <= bound + 3 * se


# --------------------------------------------------------------------------
# exact oracle for small deterministic instances


class OracleError(ValueError):
    pass


def _oracle_inputs(inst: Instance, max_flows: int, max_total: int):
    flows = inst.flows
    if any(not f.dist.is_deterministic for f in flows):
        raise OracleError("oracle handles deterministic sizes only")
    if len(flows) > max_flows:
        raise OracleError(f"{len(flows)} flows exceed the oracle budget of {max_flows}")
    total = sum(f.dist.sizes[0] for f in flows)
    if total > max_total:
        raise OracleError(f"total size {total} exceeds the oracle budget of {max_total}")
    return flows


def brute_force_opt(inst: Instance) -> float:
    """Minimum weighted completion over all non-preemptive schedules.

    Searches start decisions at event times only (releases and completions):
    shifting every flow left as far as feasibility allows never hurts, and in
    a fully left-shifted schedule each flow starts at its release or at the
    completion of a flow sharing one of its ports.
    """
    flows = _oracle_inputs(inst, ORACLE_MAX_FLOWS, ORACLE_MAX_TOTAL_SIZE)
    n = len(flows)
    size = [f.dist.sizes[0] for f in flows]
    rel = [f.release for f in flows]
    src = [f.source for f in flows]
    snk = [f.sink for f in flows]
    task_ids = sorted({f.task for f in flows})
    tpos = {k: p for p, k in enumerate(task_ids)}
    tix = [tpos[f.task] for f in flows]
    weight = [inst.weights[k] for k in task_ids]
    task_mask = [0] * len(task_ids)
    for x in range(n):
        task_mask[tix[x]] |= 1 << x

    @lru_cache(maxsize=None)
    def search(t: int, active: tuple, remaining: int, partial: tuple) -> float:
        # active: sorted (flow, end) pairs with end > t; partial: per-task max end so far
        if not remaining:
            return 0.0
        busy_src = {src[x] for x, _ in active}
        busy_snk = {snk[x] for x, _ in active}
        ready = [x for x in range(n) if remaining >> x & 1 and rel[x] <= t
                 and src[x] not in busy_src and snk[x] not in busy_snk]
        best = math.inf
        for r in range(len(ready) + 1):
            for subset in itertools.combinations(ready, r):
                if len({src[x] for x in subset}) < r or len({snk[x] for x in subset}) < r:
                    continue
                rem = remaining
                part = list(partial)
                cost = 0.0
                for x in subset:
                    rem &= ~(1 << x)
                    part[tix[x]] = max(part[tix[x]], t + size[x])
                for p, mask in enumerate(task_mask):
                    if remaining & mask and not rem & mask:
                        cost += weight[p] * part[p]
                if not rem:
                    best = min(best, cost)
                    continue
                new_active = tuple(sorted(active + tuple((x, t + size[x]) for x in subset)))
                events = [e for _, e in new_active] + [rel[x] for x in range(n) if rem >> x & 1 and rel[x] > t]
                if not events:
                    continue
                t2 = min(events)
                still = tuple((x, e) for x, e in new_active if e > t2)
                part_key = tuple(part[p] if rem & task_mask[p] else 0 for p in range(len(task_mask)))
                best = min(best, cost + search(t2, still, rem, part_key))
        return best

    return float(search(0, (), (1 << n) - 1, tuple(0 for _ in task_ids)))


def brute_force_slots(inst: Instance, max_flows: int = 4) -> float:
    """Exhaustive slot-by-slot search over every start vector (tiny instances)."""
    flows = _oracle_inputs(inst, max_flows, 10**9)
    size = [f.dist.sizes[0] for f in flows]
    T = max(f.release for f in flows) + sum(size)
    ranges = [range(f.release, T + 1) for f in flows]
    pairs = [(a, b) for a, b in itertools.combinations(range(len(flows)), 2)
             if flows[a].source == flows[b].source or flows[a].sink == flows[b].sink]
    best = math.inf
    for starts in itertools.product(*ranges):
        if any(starts[a] < starts[b] + size[b] and starts[b] < starts[a] + size[a] for a, b in pairs):
            continue
        c: dict[int, int] = {}
        for f, st, sz in zip(flows, starts, size):
            c[f.task] = max(c.get(f.task, 0), st + sz)
        best = min(best, math.fsum(inst.weights[k] * v for k, v in c.items()))
    return float(best)


# --------------------------------------------------------------------------
# ratio reports


def release_mode(inst: Instance) -> str:
    return "zero" if inst.max_release == 0 else "general"


@dataclass
class RatioReport:
    instance_id: str
    policy: str
    executor: str
    m: int
    n_tasks: int
    n_flows: int
    delta: float
    release_mode: str
    lp_bound: float
    mean: float
    stderr: float
    ratio: float
    bound: float | None
    bound_ln: float | None
    log_base: str = "2"
    exceeds: bool = False

    FIELDS = (
        "instance_id", "policy", "executor", "m", "n_tasks", "n_flows", "delta", "release_mode",
        "lp_bound", "mean", "stderr", "ratio", "bound", "bound_ln", "log_base", "exceeds",
    )

    def row(self) -> list[str]:
        out = []
        for name in self.FIELDS:
            v = getattr(self, name)
            out.append("" if v is None else repr(v) if isinstance(v, float) else str(v))
        return out


def ratio_report(
    inst: Instance,
    policy: str,
    trials: int,
    seed: int,
    executor: str = "barrier",
    solution: LpSolution | None = None,
    instance_id: str = "",
) -> RatioReport:
    """Empirical ratio of ``policy`` to the LP bound, next to the theoretical factor.

    ``exceeds`` is only raised for NPSCS, when the mean ratio is above the
    bound by more than three standard errors.
    """
    sol = solution if solution is not None else solve_relaxation(inst)
    lb = lp_lower_bound(sol)
    est = monte_carlo_eval(inst, policy, trials, seed, executor, sol)
    delta = instance_delta(inst)
    mode = release_mode(inst)
    bound = theoretical_ratio(inst.m, delta, mode) if inst.m >= 2 else None
    ratio = est.mean / lb
    exceeds = (
        policy == "npscs"
        and bound is not None
        and ratio - 3 * est.stderr / lb > bound.base2
    )
    return RatioReport(
        instance_id, policy, executor, inst.m, inst.n_tasks, len(inst.flows), delta, mode,
        lb, est.mean, est.stderr, ratio,
        None if bound is None else bound.base2,
        None if bound is None else bound.natural,
        exceeds=exceeds,
    )


@dataclass(frozen=True)
class BenchConfig:
    generator: GeneratorConfig
    instances: int = 5
    trials: int = 20
    seed: int = 0
    policies: tuple[str, ...] = ("npscs", "fifo", "wsept")
    executor: str = "barrier"

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        d = dict(d)
        gen = GeneratorConfig.from_dict(d.pop("generator", {}))
        if "policies" in d:
            d["policies"] = tuple(d["policies"])
        return cls(generator=gen, **d)

    def to_dict(self) -> dict:
        return {
            "generator": self.generator.to_dict(),
            "instances": self.instances,
            "trials": self.trials,
            "seed": self.seed,
            "policies": list(self.policies),
            "executor": self.executor,
        }


def instance_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def run_bench(cfg: BenchConfig) -> list[RatioReport]:
    reports = []
    for n in range(cfg.instances):
        inst = generate_instance(cfg.generator, instance_seed(cfg.seed, n))
        sol = solve_relaxation(inst)
        for policy in cfg.policies:
            reports.append(ratio_report(inst, policy, cfg.trials, cfg.seed, cfg.executor, sol, f"inst{n:03d}"))
    return reports


def bench_csv(cfg: BenchConfig, reports: list[RatioReport]) -> str:
    buf = io.StringIO()
    buf.write(f"# coflowsched {__version__}\n")
    buf.write(f"# seed={cfg.seed}\n")
    buf.write("# config=" + canonical_json(cfg.to_dict(), indent=0).replace("\n", "") + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RatioReport.FIELDS)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def summary_table(reports: list[RatioReport]) -> str:
    head = f"{'instance':<9} {'policy':<6} {'m':>2} {'delta':>6} {'LP':>9} {'mean':>9} {'ratio':>7} {'bound':>7}  flag"
    lines = [head, "-" * len(head)]
    for r in reports:
        bound = "-" if r.bound is None else f"{r.bound:7.3f}"
        lines.append(
            f"{r.instance_id:<9} {r.policy:<6} {r.m:>2} {r.delta:6.3f} {r.lp_bound:9.3f} "
            f"{r.mean:9.3f} {r.ratio:7.3f} {bound:>7}  {'EXCEEDS' if r.exceeds else ''}"
        )
    return "\n".join(lines) + "\n"
