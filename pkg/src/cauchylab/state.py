"""Cauchy data and trajectories of the normal-geodesic evolution."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .tensor import Chart, Field, check_positive_definite

__all__ = ["MetricState", "Trajectory", "sample_trajectory"]

_SYM_TOL = 1e-12


def _scale(a):
    return max(1.0, float(np.max(np.abs(a), initial=0.0)))


@dataclass(frozen=True, eq=False)
class MetricState:
    """Cauchy data ``(g, W, lam)``.

    ``g`` is the metric, ``W`` the Weingarten endomorphism (symmetric with
    respect to ``g``) and ``lam`` the Einstein constant in ``Ric = lam * g``.
    """

    g: Field
    W: Field
    lam: float = 0.0

    def __post_init__(self):
        if self.g.rank != "sym-2-cov" or self.W.rank != "endomorphism":
            raise PreconditionError("MetricState needs a sym-2-cov metric and an endomorphism W")
        if not self.g.chart.compatible(self.W.chart):
            raise PreconditionError("g and W live on different charts")
        g = self.g.data
        if self.g.symmetry_defect() > _SYM_TOL * _scale(g):
            raise PreconditionError("metric components are not symmetric")
        check_positive_definite(self.g.chart, g)
        gW = np.einsum("...ij,...jk->...ik", g, self.W.data)
        if np.max(np.abs(gW - np.swapaxes(gW, -1, -2)), initial=0.0) > _SYM_TOL * _scale(gW):
            raise PreconditionError("W is not symmetric with respect to g")
        object.__setattr__(self, "lam", float(self.lam))

    @classmethod
    def from_arrays(cls, chart, g, W, lam=0.0):
        return cls(Field(chart, g, "sym-2-cov"), Field(chart, W, "endomorphism"), lam)

    @property
    def chart(self):
        return self.g.chart

    @property
    def n(self):
        return self.g.chart.n


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled family ``(t_k, g_k, W_k)`` of the metric ``dt^2 + g_t``.

    ``g`` and ``W`` are arrays with the sample index first.  ``status`` is
    ``"ok"``, ``"degenerate"`` or ``"blow-up"``; in the latter two cases the
    samples stop at the last accepted step and ``status_time`` records where
    integration was abandoned.
    """

    chart: Chart
    times: np.ndarray
    g: np.ndarray
    W: np.ndarray
    lam: float
    dt: float
    integrator: str = "rk4"
    kmax: int | None = None
    status: str = "ok"
    status_time: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("times", "g", "W"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if len(self.times) > 1:
            steps = np.diff(self.times)
            if np.any(steps * np.sign(self.dt) <= 0):
                raise PreconditionError("trajectory times must be strictly monotone")

    def __len__(self):
        return len(self.times)

    @property
    def n(self):
        return self.chart.n

    @property
    def message(self):
        if self.status == "degenerate":
            return f"metric degenerated at t={self.status_time:.6g}"
        if self.status == "blow-up":
            return f"blow-up at t={self.status_time:.6g}"
        return "ok"

    def state(self, k):
        return MetricState.from_arrays(self.chart, self.g[k], self.W[k], self.lam)

    def index_of(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 0.5 * abs(self.dt) + 1e-12:
            raise PreconditionError(f"t={t} is not a sample time of the trajectory")
        return k

    def interior(self, width=2):
        """Indices with ``width`` samples available on both sides."""
        return range(width, len(self) - width)

    def mean_curvature(self):
        """``H(t) = tr W_t`` at every sample."""
        return np.einsum("k...ii->k...", self.W)

    def to_diagonal_csv(self):
        """Rows ``t,A,B,C,WA,WB,WC`` for diagonal left-invariant trajectories."""
        if self.chart.is_grid or self.n != 3:
            raise PreconditionError("diagonal CSV export needs a 3-dimensional frame chart")
        lines = ["t,A,B,C,WA,WB,WC"]
        for t, g, W in zip(self.times, self.g, self.W):
            vals = [t, *np.diag(g), *np.diag(W)]
            lines.append(",".join(f"{v:.17g}" for v in vals))
        return "\n".join(lines) + "\n"

    @classmethod
    def concatenate(cls, backward, forward):
        """Join a backward run (from the same initial state) with a forward run."""
        if backward.dt * forward.dt >= 0 or abs(abs(backward.dt) - abs(forward.dt)) > 1e-15:
            raise PreconditionError("runs must share |dt| and go in opposite directions")
        rev = slice(None, 0, -1)
        status = forward.status if forward.status != "ok" else backward.status
        when = forward.status_time if forward.status != "ok" else backward.status_time
        return cls(
            chart=forward.chart,
            times=np.concatenate([backward.times[rev], forward.times]),
            g=np.concatenate([backward.g[rev], forward.g]),
            W=np.concatenate([backward.W[rev], forward.W]),
            lam=forward.lam,
            dt=forward.dt,
            integrator=forward.integrator,
            kmax=forward.kmax,
            status=status,
            status_time=when,
            meta=dict(forward.meta),
        )


def sample_trajectory(chart, g_of_t, t0, t1, dt, lam=0.0, W_of_t=None):
    """Build a :class:`Trajectory` by sampling an analytic family ``g_of_t``.

    ``W_of_t`` defaults to ``-1/2 g^{-1} dg/dt`` with a 4th-order centred
    difference of step ``dt * 1e-2``.
    """
    m = int(round((t1 - t0) / dt))
    times = t0 + dt * np.arange(m + 1)
    gs = np.stack([np.asarray(g_of_t(t), dtype=float) for t in times])
    if W_of_t is None:
        h = abs(dt) * 1e-2

        def W_of_t(t):
            gd = (g_of_t(t - 2 * h) - 8 * g_of_t(t - h) + 8 * g_of_t(t + h) - g_of_t(t + 2 * h)) / (12 * h)
            return -0.5 * np.linalg.solve(g_of_t(t), gd)

    Ws = np.stack([np.asarray(W_of_t(t), dtype=float) for t in times])
    return Trajectory(chart, times, gs, Ws, lam, dt, integrator="sampled")
