"""Numerical laboratory for the Riemannian Einstein Cauchy problem.

Cauchy data ``(g, W, lam)`` on periodic grids or Lie group frames, their
constraint equations, the normal-geodesic evolution ``dt^2 + g_t``, formal
power-series solutions, and generalized Killing spinors.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CauchyLabError,
    ChartError,
    ConfigError,
    HypothesisError,
    NotPositiveDefiniteError,
    PreconditionError,
    RankMismatchError,
    SnapshotFormatError,
)
from .tensor import Chart, Field  # noqa: E402
from .state import MetricState, Trajectory  # noqa: E402
from .constraints import constraint_residual, einstein_residual  # noqa: E402
from .evolution import evolve, monitor_propagation  # noqa: E402
from .jets import formal_solution, jet_einstein_residual  # noqa: E402

__all__ = [
    "__version__",
    "CauchyLabError",
    "ChartError",
    "ConfigError",
    "HypothesisError",
    "NotPositiveDefiniteError",
    "PreconditionError",
    "RankMismatchError",
    "SnapshotFormatError",
    "Chart",
    "Field",
    "MetricState",
    "Trajectory",
    "constraint_residual",
    "einstein_residual",
    "evolve",
    "monitor_propagation",
    "formal_solution",
    "jet_einstein_residual",
]
