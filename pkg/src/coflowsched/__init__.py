"""Stochastic non-preemptive co-flow scheduling via a time-indexed LP relaxation."""

__version__ = "0.1.0"

from .instance import (  # noqa: E402
    CoflowTask,
    DiscreteDist,
    FlowSpec,
    GeneratorConfig,
    Instance,
    dist_cv_squared,
    dist_mean,
    dist_tail,
    generate_instance,
    instance_delta,
    validate_instance,
)
from .lp import compute_horizon, lp_lower_bound, solve_relaxation  # noqa: E402
from .gljd import build_schedule, gljd_decompose  # noqa: E402
from .executor import execute_barrier, execute_list, monte_carlo_eval, realize_sizes  # noqa: E402
