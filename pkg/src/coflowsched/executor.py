"""Execute schedules under realized flow sizes.

Two execution modes are provided.  ``execute_barrier`` runs the flow groups
strictly one after another: a group starts when the previous one has fully
finished (and its members are all released), flows sharing a link inside a
group run back-to-back in task order, and the group ends when its longest link
drains.  ``execute_list`` dispatches flows in schedule order, each at the
earliest slot where its release has passed and both ports are free.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gljd import FlowGroup, Schedule, build_schedule, gljd_decompose, map_groups
from .instance import FlowId, Instance
from .lp import LpSolution, solve_relaxation
from .npscs import GroupMatrix


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Realization:
    sizes: dict[FlowId, int]
    seed: object = None


@dataclass(frozen=True)
class Occupancy:
    slot: int
    port_kind: str  # "src" or "snk"
    port_id: int
    flow: FlowId


@dataclass
class SimResult:
    start: dict[FlowId, int]
    completion: dict[FlowId, int]
    task_completion: dict[int, int]
    objective: float
    trace: list[Occupancy]
    group_spans: list[tuple[int, int]] | None = None

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["slot", "port_kind", "port_id", "i", "j", "k"])
        for ev in self.trace:
            w.writerow([ev.slot, ev.port_kind, ev.port_id, *ev.flow])
        return buf.getvalue()

    def result_csv(self, inst: Instance) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "C_k", "w_k"])
        for k in sorted(self.task_completion):
            w.writerow([k, self.task_completion[k], repr(inst.weights[k])])
        return buf.getvalue()


def realize_sizes(inst: Instance, seed) -> Realization:
    rng = np.random.default_rng(seed)
    u = rng.random(len(inst.flows))
    sizes = {}
    for f, x in zip(inst.flows, u):
        cdf = np.cumsum(f.dist.probs)
        idx = min(int(np.searchsorted(cdf, x * cdf[-1], side="right")), len(cdf) - 1)
        sizes[f.key] = f.dist.sizes[idx]
    return Realization(sizes, seed)


def _check_coverage(schedule: Schedule, real: Realization, inst: Instance):
    flat = schedule.flat()
    if len(flat) != len(set(flat)) or set(flat) != set(inst.flow_map):
        raise ScheduleError("schedule does not cover every flow exactly once")
    if set(real.sizes) != set(inst.flow_map):
        raise ScheduleError("realization does not cover every flow")


def _finish(inst: Instance, start: dict, real: Realization, spans=None) -> SimResult:
    completion = {f: start[f] + real.sizes[f] for f in start}
    task_c: dict[int, int] = {}
    for (i, j, k), c in completion.items():
        task_c[k] = max(task_c.get(k, 0), c)
    trace = []
    for f in sorted(start, key=lambda f: (start[f], f)):
        for slot in range(start[f], completion[f]):
            trace.append(Occupancy(slot, "src", f[0], f))
            trace.append(Occupancy(slot, "snk", f[1], f))
    trace.sort(key=lambda e: (e.slot, e.port_kind, e.port_id))
    res = SimResult(start, completion, task_c, 0.0, trace, spans)
    res.objective = weighted_completion(res, inst)
    return res


def execute_barrier(schedule: Schedule, real: Realization, inst: Instance) -> SimResult:
    _check_coverage(schedule, real, inst)
    fmap = inst.flow_map
    start: dict[FlowId, int] = {}
    spans = []
    now = 0
    for g in schedule.groups:
        if not g.members:
            continue
        links: dict[tuple[int, int], list[FlowId]] = {}
        for f in g.members:
            links.setdefault((f[0], f[1]), []).append(f)
        srcs = [i for i, _ in links]
        snks = [j for _, j in links]
        if len(set(srcs)) != len(srcs) or len(set(snks)) != len(snks):
            raise ScheduleError(f"group (s={g.s}, l={g.l}) has conflicting links")
        g_start = max(now, max(fmap[f].release for f in g.members))
        g_end = g_start
        for flows in links.values():
            cursor = g_start
            for f in sorted(flows, key=lambda f: f[2]):
                start[f] = cursor
                cursor += real.sizes[f]
            g_end = max(g_end, cursor)
        spans.append((g_start, g_end))
        now = g_end
    return _finish(inst, start, real, spans)


def execute_list(schedule: Schedule, real: Realization, inst: Instance) -> SimResult:
    _check_coverage(schedule, real, inst)
    fmap = inst.flow_map
    src_free: dict[int, int] = {}
    snk_free: dict[int, int] = {}
    start = {}
    for f in schedule.flat():
        i, j, _ = f
        st = max(fmap[f].release, src_free.get(i, 0), snk_free.get(j, 0))
        start[f] = st
        src_free[i] = snk_free[j] = st + real.sizes[f]
    return _finish(inst, start, real)


EXECUTORS: dict[str, Callable[[Schedule, Realization, Instance], SimResult]] = {
    "barrier": execute_barrier,
    "list": execute_list,
}


def weighted_completion(res: SimResult, inst: Instance) -> float:
    return math.fsum(inst.weights[k] * c for k, c in res.task_completion.items())


def verify_result(res: SimResult, real: Realization, inst: Instance) -> list[str]:
    """Replay ``res`` and report capacity, contiguity and release violations."""
    problems = []
    for f, spec in inst.flow_map.items():
        if res.start[f] < spec.release:
            problems.append(f"{f} starts at {res.start[f]} before release {spec.release}")
        if res.completion[f] - res.start[f] != real.sizes[f]:
            problems.append(f"{f} runs {res.completion[f] - res.start[f]} slots, size {real.sizes[f]}")
    busy = Counter((e.slot, e.port_kind, e.port_id) for e in res.trace)
    problems += [f"port {kind}{pid} double-booked at slot {slot}" for (slot, kind, pid), n in busy.items() if n > 1]
    slots_by_flow: dict[FlowId, list[int]] = {}
    for e in res.trace:
        if e.port_kind == "src":
            slots_by_flow.setdefault(e.flow, []).append(e.slot)
    for f, slots in slots_by_flow.items():
        slots.sort()
        if slots != list(range(res.start[f], res.start[f] + real.sizes[f])):
            problems.append(f"{f} occupancy is not one contiguous run")
    if sum(real.sizes.values()) != sum(1 for e in res.trace if e.port_kind == "src"):
        problems.append("trace source occupancy does not match total size")
    for k, c in res.task_completion.items():
        if c != max(res.completion[f] for f in res.completion if f[2] == k):
            problems.append(f"task {k} completion mismatch")
    return problems


# --------------------------------------------------------------------------
# baselines


def schedule_fifo(inst: Instance, seed=None) -> Schedule:
    """One singleton group per flow, ordered by (release, task, source, sink)."""
    order = sorted(inst.flows, key=lambda f: (f.release, f.task, f.source, f.sink))
    return Schedule(tuple(FlowGroup(n, 1, (f.key,)) for n, f in enumerate(order)), "fifo", seed)


def wsept_order(inst: Instance) -> list[int]:
    def ratio(t):
        return t.weight / math.fsum(f.dist.mean for f in t.flows)

    return [t.id for t in sorted(inst.tasks, key=lambda t: (-ratio(t), t.id))]


def schedule_wsept(inst: Instance, seed=None) -> Schedule:
    """Tasks by descending weight over total expected size.

    Each task's flows are split into conflict-free groups by the greedy
    decomposition of its own load matrix, so the groups run under barriers.
    """
    groups = []
    for rank, k in enumerate(wsept_order(inst)):
        task = inst.task(k)
        D = np.zeros((inst.m, inst.m))
        for f in task.flows:
            D[f.source - 1, f.sink - 1] += f.dist.mean
        g = GroupMatrix(rank, D, tuple(sorted(f.key for f in task.flows)))
        groups.extend(map_groups(g, gljd_decompose(D)))
    return Schedule(tuple(groups), "wsept", seed)


POLICIES = ("npscs", "fifo", "wsept")


def make_policy(name: str, inst: Instance, solution: LpSolution | None = None) -> Callable[[object], Schedule]:
    """Return ``seed -> Schedule`` for a named policy.  NPSCS solves the LP once."""
    if name == "npscs":
        sol = solution if solution is not None else solve_relaxation(inst)
        return lambda seed: build_schedule(inst, sol, seed)
    if name == "fifo":
        return lambda seed: schedule_fifo(inst, seed)
    if name == "wsept":
        return lambda seed: schedule_wsept(inst, seed)
    raise ValueError(f"unknown policy {name!r}; expected one of {POLICIES}")


def trial_seeds(seed: int, trial: int) -> tuple[list[int], list[int]]:
    """(schedule seed, realization seed) for one Monte-Carlo trial."""
    return [seed, trial, 0], [seed, trial, 1]


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    task_means: dict[int, float]
    trials: int
    objectives: tuple[float, ...]


def monte_carlo_eval(
    inst: Instance,
    policy: str,
    trials: int,
    seed: int,
    executor: str = "barrier",
    solution: LpSolution | None = None,
) -> Estimate:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    run = EXECUTORS[executor]
    make = make_policy(policy, inst, solution)
    objs = []
    task_sums: dict[int, list[float]] = {t.id: [] for t in inst.tasks}
    for tau in range(trials):
        s_seed, r_seed = trial_seeds(seed, tau)
        res = run(make(s_seed), realize_sizes(inst, r_seed), inst)
        objs.append(res.objective)
        for k, c in res.task_completion.items():
            task_sums[k].append(c)
    mean = math.fsum(objs) / trials
    if trials > 1:
        var = math.fsum((x - mean) ** 2 for x in objs) / (trials - 1)
        stderr = math.sqrt(var / trials)
    else:
        stderr = 0.0
    task_means = {k: math.fsum(v) / trials for k, v in task_sums.items()}
    return Estimate(mean, stderr, task_means, trials, tuple(objs))


def schedule_from_rows(rows) -> Schedule:
    """Rebuild a schedule from ``(s, l, i, j, k)`` rows (e.g. a schedule CSV)."""
    groups: dict[tuple[int, int], list[FlowId]] = {}
    for s, l, i, j, k in rows:
        groups.setdefault((int(s), int(l)), []).append((int(i), int(j), int(k)))
    return Schedule(tuple(FlowGroup(s, l, tuple(m)) for (s, l), m in groups.items()))
