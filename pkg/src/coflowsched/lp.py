"""Time-indexed LP relaxation of stochastic non-preemptive co-flow scheduling.

Variables ``y[f, t]`` give the probability that flow ``f`` starts in slot
``t`` (``t = 0 .. F``) and ``C[k]`` the expected completion time of task
``k``.  The model minimizes ``sum_k w_k C_k`` subject to

* assignment: ``sum_t y[f, t] == 1`` for every flow,
* port capacity: for every source (resp. sink) port and slot ``s``,
  ``sum_f sum_{t <= s} y[f, t] * Pr(S_f >= s - t + 1) <= 1``,
* completion: ``C_k >= sum_t y[f, t] * (t + E[S_f])`` for every flow of task k,
* ``y >= 0`` and ``y[f, t] == 0`` for ``t`` before the flow's release.

The horizon ``F`` comes from :func:`compute_horizon`; an optimal solution
with no start mass beyond ``F`` always exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .instance import FlowId, FlowSpec, Instance, check_instance

FEAS_TOL = 1e-7


class LpError(RuntimeError):
    pass


class LpInfeasible(LpError):
    pass


class LpNumericalError(LpError):
    pass


@dataclass(frozen=True)
class Horizon:
    F: int
    F1: float
    F2: float


def compute_horizon(inst: Instance) -> Horizon:
    m, n = inst.m, inst.n_tasks
    means = [f.dist.mean for f in inst.flows]
    F1 = m * n * (inst.max_release + math.fsum(means))
    F2 = 2 * m * n * max(means)
    # guard against ceil() of values like 24.000000000000004
    F = math.ceil(2 * F1 + F2 - 1e-9)
    return Horizon(F, F1, F2)


@dataclass
class LpModel:
    flows: tuple[FlowSpec, ...]
    tasks: tuple[int, ...]
    horizon: int
    n_slots: int  # capacity rows cover s = 0 .. n_slots - 1
    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    eq_rows: list[tuple]
    ub_rows: list[tuple]

    @property
    def n_y(self) -> int:
        return len(self.flows) * (self.horizon + 1)

    def y_col(self, flow_index: int, t: int) -> int:
        return flow_index * (self.horizon + 1) + t

    def c_col(self, k: int) -> int:
        return self.n_y + self.tasks.index(k)

    def column_names(self) -> list[str]:
        names = [f"y_{f.source}_{f.sink}_{f.task}_{t}" for f in self.flows for t in range(self.horizon + 1)]
        return names + [f"C_{k}" for k in self.tasks]

    @staticmethod
    def row_name(row: tuple) -> str:
        return "_".join(str(x) for x in row)


def build_lp(inst: Instance, h: Horizon | int) -> LpModel:
    F = h.F if isinstance(h, Horizon) else int(h)
    flows = inst.flows
    tasks = tuple(sorted(t.id for t in inst.tasks))
    n_t = F + 1
    n_y = len(flows) * n_t
    n_cols = n_y + len(tasks)
    n_slots = F + inst.max_size + 1
    task_pos = {k: p for p, k in enumerate(tasks)}

    c = np.zeros(n_cols)
    for k in tasks:
        c[n_y + task_pos[k]] = inst.weights[k]

    lb = np.zeros(n_cols)
    ub = np.full(n_cols, np.inf)
    for fi, f in enumerate(flows):
        ub[fi * n_t: fi * n_t + min(f.release, n_t)] = 0.0

    eq_rows = [("assign",) + f.key for f in flows]
    eq_r = np.repeat(np.arange(len(flows)), n_t)
    A_eq = sp.csr_matrix((np.ones(n_y), (eq_r, np.arange(n_y))), shape=(len(flows), n_cols))
    b_eq = np.ones(len(flows))

    # capacity: flow started at t contributes tails[s - t] to slot s
    cap_entries: dict[tuple[str, int], list[tuple[np.ndarray, np.ndarray, np.ndarray]]] = {}
    ts = np.arange(n_t)
    for fi, f in enumerate(flows):
        tails = f.dist.tails
        L = len(tails)
        rr = np.repeat(np.arange(L), n_t)  # offset r = s - t
        tt = np.tile(ts, L)
        vals = tails[rr]
        keep = vals > 0
        slots, cols, vals = (tt + rr)[keep], fi * n_t + tt[keep], vals[keep]
        for port in (("src", f.source), ("snk", f.sink)):
            cap_entries.setdefault(port, []).append((slots, cols, vals))

    ub_rows: list[tuple] = []
    rows, cols, vals = [], [], []
    for port in sorted(cap_entries):
        parts = cap_entries[port]
        slots = np.concatenate([p[0] for p in parts])
        present = np.unique(slots)
        base = len(ub_rows)
        ub_rows.extend(port + (int(s),) for s in present)
        rows.append(base + np.searchsorted(present, slots))
        cols.append(np.concatenate([p[1] for p in parts]))
        vals.append(np.concatenate([p[2] for p in parts]))
    n_cap = len(ub_rows)

    for fi, f in enumerate(flows):
        r = n_cap + fi
        ub_rows.append(("comp",) + f.key)
        rows.append(np.full(n_t + 1, r))
        cols.append(np.concatenate([fi * n_t + ts, [n_y + task_pos[f.task]]]))
        vals.append(np.concatenate([ts + f.dist.mean, [-1.0]]))

    A_ub = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(ub_rows), n_cols),
    )
    b_ub = np.concatenate([np.ones(n_cap), np.zeros(len(flows))])
    return LpModel(flows, tasks, F, n_slots, c, A_eq, b_eq, A_ub, b_ub, lb, ub, eq_rows, ub_rows)


@dataclass
class LpSolution:
    y: dict[FlowId, np.ndarray]
    c_task: dict[int, float]
    c_flow: dict[FlowId, float]
    objective: float
    horizon: int
    means: dict[FlowId, float] = field(repr=False, default_factory=dict)

    def yrow(self, flow: FlowId) -> np.ndarray:
        return self.y[flow]


def capacity_loads(inst: Instance, y: dict[FlowId, np.ndarray]) -> dict[tuple[str, int], np.ndarray]:
    """Left-hand sides of the port capacity rows, one array over slots per port."""
    n_t = len(next(iter(y.values())))
    n_slots = n_t + inst.max_size
    loads: dict[tuple[str, int], np.ndarray] = {}
    for f in inst.flows:
        occ = np.convolve(y[f.key], f.dist.tails)[:n_slots]
        occ = np.pad(occ, (0, n_slots - len(occ)))
        for port in (("src", f.source), ("snk", f.sink)):
            loads[port] = loads.get(port, 0) + occ
    return loads


def solve_relaxation(inst: Instance, horizon: Horizon | int | None = None) -> LpSolution:
    """Solve the relaxation with HiGHS dual simplex (basic optimal solution)."""
    check_instance(inst)
    h = compute_horizon(inst) if horizon is None else horizon
    model = build_lp(inst, h)
    res = linprog(
        model.c,
        A_ub=model.A_ub,
        b_ub=model.b_ub,
        A_eq=model.A_eq,
        b_eq=model.b_eq,
        bounds=np.column_stack([model.lb, model.ub]),
        method="highs-ds",
        options={"primal_feasibility_tolerance": FEAS_TOL, "dual_feasibility_tolerance": FEAS_TOL},
    )
    if res.status == 2:
        raise LpInfeasible(f"relaxation infeasible: {res.message}")
    if res.status != 0:
        raise LpNumericalError(f"solver failed (status {res.status}): {res.message}")

    n_t = model.horizon + 1
    x = res.x
    y = {f.key: np.array(x[fi * n_t:(fi + 1) * n_t]) for fi, f in enumerate(model.flows)}
    means = {f.key: f.dist.mean for f in model.flows}
    ts = np.arange(n_t)
    c_flow = {key: math.fsum(row * (ts + means[key])) for key, row in y.items()}
    c_task = {k: float(x[model.c_col(k)]) for k in model.tasks}
    objective = math.fsum(inst.weights[k] * c_task[k] for k in model.tasks)

    sol = LpSolution(y, c_task, c_flow, objective, model.horizon, means)
    _check_solution(inst, sol)
    return sol


def _check_solution(inst: Instance, sol: LpSolution):
    for key, row in sol.y.items():
        if row.min() < -FEAS_TOL or abs(row.sum() - 1.0) > FEAS_TOL:
            raise LpNumericalError(f"assignment of {key} off by {row.sum() - 1.0:.3g}")
    for port, load in capacity_loads(inst, sol.y).items():
        if load.max() > 1.0 + FEAS_TOL:
            raise LpNumericalError(f"capacity of {port} exceeded: {load.max():.12g}")
    for f in inst.flows:
        if sol.c_task[f.task] < sol.c_flow[f.key] - FEAS_TOL:
            raise LpNumericalError(f"completion row for {f.key} violated")


def lp_lower_bound(sol: LpSolution) -> float:
    return sol.objective


# --------------------------------------------------------------------------
# free-format MPS export


def _num(x: float) -> str:
    return format(float(x), ".17g")


def write_mps(model: LpModel, path: str | Path | None = None, name: str = "COFLOW") -> str:
    """Serialize ``model`` as free MPS.

    Rows appear as: objective, equality rows, inequality rows (model order).
    Columns appear in model order with their entries sorted by row order.
    Released-before-start columns get ``FX`` bounds; all others use the
    default ``[0, inf)``.
    """
    eq_names = [model.row_name(r) for r in model.eq_rows]
    ub_names = [model.row_name(r) for r in model.ub_rows]
    row_names = eq_names + ub_names
    A = sp.vstack([model.A_eq, model.A_ub]).tocsc()
    col_names = model.column_names()

    lines = [f"NAME {name}", "ROWS", " N OBJ"]
    lines += [f" E {r}" for r in eq_names]
    lines += [f" L {r}" for r in ub_names]
    lines.append("COLUMNS")
    for j, cname in enumerate(col_names):
        if model.c[j] != 0:
            lines.append(f" {cname} OBJ {_num(model.c[j])}")
        lo, hi = A.indptr[j], A.indptr[j + 1]
        for r, v in sorted(zip(A.indices[lo:hi], A.data[lo:hi])):
            lines.append(f" {cname} {row_names[r]} {_num(v)}")
    lines.append("RHS")
    for r, v in zip(row_names, np.concatenate([model.b_eq, model.b_ub])):
        if v != 0:
            lines.append(f" RHS {r} {_num(v)}")
    bounds = [f" FX BND {col_names[j]} 0" for j in range(len(col_names)) if model.ub[j] == 0.0]
    if bounds:
        lines.append("BOUNDS")
        lines += bounds
    lines.append("ENDATA")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
