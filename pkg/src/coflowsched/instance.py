"""Stochastic co-flow instances: size distributions, flows, tasks.

A flow is identified by the triple ``(source, sink, task)``; servers and tasks
are numbered from 1.  Flow sizes are positive integer slot counts drawn from a
finite :class:`DiscreteDist`.

Occupancy convention used throughout the package: a flow started at slot ``t``
occupies slot ``s`` iff its size is at least ``s - t + 1``, so the occupancy
probability is ``dist_tail(dist, s - t) == Pr(S >= s - t + 1)``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

FlowId = tuple[int, int, int]

PMF_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteDist:
    """Finite pmf over positive integer sizes, stored as ``(size, prob)`` pairs."""

    support: tuple[tuple[int, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "support", tuple((int(s), float(p)) for s, p in self.support)
        )

    @classmethod
    def deterministic(cls, size: int) -> "DiscreteDist":
        return cls(((size, 1.0),))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "DiscreteDist":
        return cls(tuple(sorted((int(s), float(p)) for s, p in pairs)))

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.support)

    @property
    def probs(self) -> tuple[float, ...]:
        return tuple(p for _, p in self.support)

    @property
    def max_size(self) -> int:
        return max(self.sizes)

    @property
    def is_deterministic(self) -> bool:
        return len(self.support) == 1

    @cached_property
    def mean(self) -> float:
        return math.fsum(s * p for s, p in self.support)

    @cached_property
    def second_moment(self) -> float:
        return math.fsum(s * s * p for s, p in self.support)

    @cached_property
    def variance(self) -> float:
        mu = self.mean
        return math.fsum(p * (s - mu) ** 2 for s, p in self.support)

    @cached_property
    def tails(self) -> np.ndarray:
        """``tails[r] = Pr(S >= r + 1)`` for ``r = 0 .. max_size - 1``."""
        pmf = np.zeros(self.max_size)
        for s, p in self.support:
            pmf[s - 1] += p
        return np.cumsum(pmf[::-1])[::-1].copy()

    def issues(self) -> list[tuple[str, str]]:
        out = []
        if not self.support:
            return [("pmf-empty", "distribution has no support points")]
        sizes = self.sizes
        if any(s < 1 for s in sizes):
            out.append(("size-range", f"sizes must be >= 1, got {sizes}"))
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            out.append(("size-order", f"sizes must be strictly increasing, got {sizes}"))
        if any(not (0.0 <= p <= 1.0) for p in self.probs):
            out.append(("prob-range", f"probabilities must lie in [0, 1], got {self.probs}"))
        total = math.fsum(self.probs)
        if abs(total - 1.0) > PMF_TOL:
            out.append(("pmf-sum", f"probabilities sum to {total!r}, not 1"))
        return out


def dist_mean(dist: DiscreteDist) -> float:
    return dist.mean


def dist_cv_squared(dist: DiscreteDist) -> float:
    """Squared coefficient of variation ``Var[S] / E[S]^2``."""
    return dist.variance / dist.mean**2


def dist_tail(dist: DiscreteDist, r: int) -> float:
    """Probability that a flow is still running ``r`` slots after it started."""
    if r < 0:
        raise ValueError(f"r must be nonnegative, got {r}")
    tails = dist.tails
    return float(tails[r]) if r < len(tails) else 0.0


@dataclass(frozen=True)
class FlowSpec:
    source: int
    sink: int
    task: int
    dist: DiscreteDist
    release: int = 0

    @property
    def key(self) -> FlowId:
        return (self.source, self.sink, self.task)

    @property
    def link(self) -> tuple[int, int]:
        return (self.source, self.sink)


@dataclass(frozen=True)
class CoflowTask:
    id: int
    flows: tuple[FlowSpec, ...]
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(self.flows))
        object.__setattr__(self, "weight", float(self.weight))


@dataclass(frozen=True)
class Instance:
    m: int
    tasks: tuple[CoflowTask, ...]
    metadata: dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @cached_property
    def flows(self) -> tuple[FlowSpec, ...]:
        """All flows sorted by ``(source, sink, task)``."""
        return tuple(sorted((f for t in self.tasks for f in t.flows), key=lambda f: f.key))

    @cached_property
    def flow_map(self) -> dict[FlowId, FlowSpec]:
        return {f.key: f for f in self.flows}

    @cached_property
    def weights(self) -> dict[int, float]:
        return {t.id: t.weight for t in self.tasks}

    def task(self, k: int) -> CoflowTask:
        for t in self.tasks:
            if t.id == k:
                return t
        raise KeyError(k)

    @property
    def max_release(self) -> int:
        return max((f.release for f in self.flows), default=0)

    @property
    def max_size(self) -> int:
        return max((f.dist.max_size for f in self.flows), default=1)


def instance_delta(inst: Instance) -> float:
    """Largest squared coefficient of variation over all flows."""
    return max((dist_cv_squared(f.dist) for f in inst.flows), default=0.0)


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Issue:
    code: str
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.code}: {self.message}"


class InstanceError(ValueError):
    def __init__(self, issues: list[Issue]):
        self.issues = issues
        super().__init__("; ".join(str(i) for i in issues))


def validate_instance(inst: Instance) -> list[Issue]:
    """Return every invariant violation in ``inst``; an empty list means valid."""
    issues = []
    if inst.m < 1:
        issues.append(Issue("server-count", "m", f"m must be >= 1, got {inst.m}"))
    ids = [t.id for t in inst.tasks]
    if sorted(ids) != list(range(1, len(ids) + 1)):
        issues.append(Issue("task-ids", "tasks", f"task ids must be 1..N, got {sorted(ids)}"))
    for ti, task in enumerate(inst.tasks):
        tpath = f"tasks[{ti}]"
        if not task.weight > 0:
            issues.append(Issue("weight", f"{tpath}.weight", f"weight must be > 0, got {task.weight}"))
        if not task.flows:
            issues.append(Issue("empty-task", tpath, "task has no flows"))
        seen = set()
        for fi, flow in enumerate(task.flows):
            fpath = f"{tpath}.flows[{fi}]"
            for name in ("source", "sink"):
                v = getattr(flow, name)
                if not 1 <= v <= inst.m:
                    issues.append(Issue("server-range", f"{fpath}.{name}", f"{v} not in 1..{inst.m}"))
            if flow.task != task.id:
                issues.append(Issue("task-mismatch", f"{fpath}.task", f"flow carries task {flow.task}, owner is {task.id}"))
            if flow.release < 0:
                issues.append(Issue("release", f"{fpath}.release", f"release must be >= 0, got {flow.release}"))
            if flow.link in seen:
                issues.append(Issue("duplicate-link", fpath, f"link {flow.link} appears twice in task {task.id}"))
            seen.add(flow.link)
            for code, msg in flow.dist.issues():
                issues.append(Issue(code, f"{fpath}.dist", msg))
    return issues


def check_instance(inst: Instance) -> Instance:
    issues = validate_instance(inst)
    if issues:
        raise InstanceError(issues)
    return inst


# --------------------------------------------------------------------------
# synthetic generation


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters for :func:`generate_instance`.

    ``density`` is the fraction of all ``m * m * n_tasks`` possible flows that
    are present (rounded, at least one flow per task).  ``family`` is one of
    ``deterministic``, ``two-point`` or ``geometric``; sizes never exceed
    ``size_cap``.  ``max_cv2`` rejects two-point draws whose squared CV is
    larger.  Releases are zero, or uniform on ``0..release_bound``.
    """

    m: int = 3
    n_tasks: int = 3
    density: float = 0.3
    family: str = "deterministic"
    size_cap: int = 3
    weight_range: tuple[float, float] = (1.0, 1.0)
    release: str = "zero"
    release_bound: int = 0
    max_cv2: float | None = None

    FAMILIES = ("deterministic", "two-point", "geometric")

    def check(self):
        if self.m < 1 or self.n_tasks < 1:
            raise ValueError("m and n_tasks must be >= 1")
        if not 0.0 < self.density <= 1.0:
            raise ValueError(f"density must be in (0, 1], got {self.density}")
        if self.family not in self.FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.size_cap < 1:
            raise ValueError("size_cap must be >= 1")
        lo, hi = self.weight_range
        if not 0 < lo <= hi:
            raise ValueError(f"weight_range must satisfy 0 < lo <= hi, got {self.weight_range}")
        if self.release not in ("zero", "uniform"):
            raise ValueError(f"unknown release mode {self.release!r}")
        if self.release_bound < 0:
            raise ValueError("release_bound must be >= 0")
        if self.max_cv2 is not None and self.max_cv2 < 0:
            raise ValueError("max_cv2 must be >= 0")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GeneratorConfig":
        d = dict(d)
        if "weight_range" in d:
            d["weight_range"] = tuple(d["weight_range"])
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["weight_range"] = list(self.weight_range)
        return d


def _draw_dist(cfg: GeneratorConfig, rng: np.random.Generator) -> DiscreteDist:
    cap = cfg.size_cap
    if cfg.family == "deterministic" or cap == 1:
        return DiscreteDist.deterministic(int(rng.integers(1, cap + 1)))
    if cfg.family == "two-point":
        for _ in range(1000):
            a, b = sorted(int(x) for x in rng.choice(np.arange(1, cap + 1), size=2, replace=False))
            q = float(rng.uniform(0.1, 0.9))
            dist = DiscreteDist(((a, q), (b, 1.0 - q)))
            if cfg.max_cv2 is None or dist_cv_squared(dist) <= cfg.max_cv2:
                return dist
        raise ValueError(f"could not draw a two-point dist with cv^2 <= {cfg.max_cv2}")
    # truncated geometric on 1..cap
    p = float(rng.uniform(0.2, 0.8))
    w = (1.0 - p) ** np.arange(cap) * p
    w /= w.sum()
    return DiscreteDist(tuple((s + 1, float(x)) for s, x in enumerate(w)))


def generate_instance(cfg: GeneratorConfig, seed) -> Instance:
    """Random instance, a deterministic function of ``(cfg, seed)``."""
    cfg.check()
    rng = np.random.default_rng(seed)
    m, n = cfg.m, cfg.n_tasks
    n_links = m * m
    total = min(max(round(cfg.density * n_links * n), n), n_links * n)

    chosen = set()
    for k in range(n):
        chosen.add(k * n_links + int(rng.integers(n_links)))
    rest = np.array(sorted(set(range(n_links * n)) - chosen))
    if total > len(chosen):
        chosen.update(int(x) for x in rng.choice(rest, size=total - len(chosen), replace=False))

    per_task: dict[int, list[FlowSpec]] = {k: [] for k in range(1, n + 1)}
    for idx in sorted(chosen):
        k, link = divmod(idx, n_links)
        i, j = divmod(link, m)
        dist = _draw_dist(cfg, rng)
        release = int(rng.integers(0, cfg.release_bound + 1)) if cfg.release == "uniform" else 0
        per_task[k + 1].append(FlowSpec(i + 1, j + 1, k + 1, dist, release))

    lo, hi = cfg.weight_range
    tasks = []
    for k in range(1, n + 1):
        w = lo if lo == hi else float(rng.uniform(lo, hi))
        tasks.append(CoflowTask(k, tuple(per_task[k]), w))
    return Instance(m, tuple(tasks), {"generator": cfg.family, "seed": str(seed)})


# --------------------------------------------------------------------------
# canonical JSON


class InstanceFormatError(ValueError):
    pass


def _fmt_real(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite real {x!r}")
    return format(x, ".17g")


def _dump(obj, indent: int, level: int = 0) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_real(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dump(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple)) for x in obj):
            return "[" + ", ".join(_dump(x, indent, level + 1) for x in obj) + "]"
        items = [f"{pad}{_dump(x, indent, level + 1)}" for x in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, reals with 17 significant digits."""
    return _dump(obj, indent) + "\n"


def instance_to_dict(inst: Instance) -> dict[str, Any]:
    tasks = []
    for task in sorted(inst.tasks, key=lambda t: t.id):
        flows = [
            {
                "source": f.source,
                "sink": f.sink,
                "release": f.release,
                "dist": [[s, float(p)] for s, p in sorted(f.dist.support)],
            }
            for f in sorted(task.flows, key=lambda f: f.link)
        ]
        tasks.append({"id": task.id, "weight": float(task.weight), "flows": flows})
    return {"m": inst.m, "tasks": tasks, "metadata": {str(k): str(v) for k, v in inst.metadata.items()}}


def instance_from_dict(d: dict[str, Any]) -> Instance:
    try:
        tasks = []
        for td in d["tasks"]:
            k = int(td["id"])
            flows = tuple(
                FlowSpec(
                    int(fd["source"]),
                    int(fd["sink"]),
                    k,
                    DiscreteDist(tuple((int(s), float(p)) for s, p in fd["dist"])),
                    int(fd.get("release", 0)),
                )
                for fd in td["flows"]
            )
            tasks.append(CoflowTask(k, flows, float(td.get("weight", 1.0))))
        return Instance(int(d["m"]), tuple(tasks), dict(d.get("metadata", {})))
    except (KeyError, TypeError, ValueError) as e:
        raise InstanceFormatError(f"malformed instance document: {e!r}") from e


def dumps_instance(inst: Instance) -> str:
    return canonical_json(instance_to_dict(inst))


def loads_instance(text: str) -> Instance:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceFormatError(f"invalid JSON: {e}") from e
    return instance_from_dict(d)


def load_instance(path: str | Path) -> Instance:
    return loads_instance(Path(path).read_text())


def save_instance(inst: Instance, path: str | Path):
    Path(path).write_text(dumps_instance(inst))
