"""Left-invariant metrics on SU(2).

The invariant frame satisfies ``[e_1, e_2] = 2 e_3`` and cyclic, so
``diag(1, 1, 1)`` is the round metric of sectional curvature 1.  The
right-invariant trivialization is modelled by the opposite structure
constants.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .clifford import SpinorField, frame_connection, killing_constant
from .curvature import curvature
from .errors import PreconditionError
from .evolution import evolve
from .state import MetricState
from .tensor import Chart, Field

__all__ = [
    "LeftInvariantMetric",
    "FrameCurvature",
    "su2_chart",
    "frame_curvature",
    "evolve_homogeneous",
    "killing_spinor_check",
]

ROUND_RTOL = 1e-12


def _levi_civita():
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[j, i, k] = -1.0
    return eps


def su2_chart(chirality="left"):
    """Frame chart of SU(2); ``right`` flips the sign of the brackets."""
    if chirality not in ("left", "right"):
        raise PreconditionError(f"chirality must be 'left' or 'right', got {chirality!r}")
    sign = 1.0 if chirality == "left" else -1.0
    # c[k, i, j]: [e_i, e_j] = c^k_ij e_k
    c = 2.0 * sign * np.einsum("ijk->kij", _levi_civita())
    return Chart.frame(c)


@dataclass(frozen=True)
class LeftInvariantMetric:
    """Diagonal left-invariant metric ``diag(A, B, C)`` in the invariant frame."""

    A: float
    B: float
    C: float

    def __post_init__(self):
        for name in ("A", "B", "C"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v <= 0:
                raise PreconditionError(f"{name} must be positive, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def round(cls, s=1.0):
        return cls(s, s, s)

    @property
    def diagonal(self):
        return np.array([self.A, self.B, self.C])

    def is_round(self, rtol=ROUND_RTOL):
        d = self.diagonal
        return float(np.max(d) - np.min(d)) <= rtol * float(np.max(d))

    def field(self, chirality="left"):
        return Field(su2_chart(chirality), np.diag(self.diagonal), "sym-2-cov")


@dataclass(frozen=True)
class FrameCurvature:
    """Invariant-frame curvature of a left-invariant metric.

    ``omega[a, b, c] = g(nabla_{E_a} E_b, E_c)`` in the orthonormal frame
    ``E_a = e_a / sqrt(g_aa)``; ``ricci`` is the Ricci form in the invariant
    frame.
    """

    metric: np.ndarray
    christoffel: np.ndarray
    omega: np.ndarray
    ricci: np.ndarray
    scalar: float

    @property
    def ricci_eigenvalues(self):
        """Eigenvalues of the Ricci endomorphism ``g^{-1} Ric``."""
        return np.diag(self.ricci) / np.diag(self.metric)


def frame_curvature(m, chirality="left"):
    g = m.field(chirality)
    bundle = curvature(g)
    return FrameCurvature(
        metric=np.array(g.data),
        christoffel=np.array(bundle.christoffel.data),
        omega=frame_connection(g),
        ricci=np.array(bundle.ricci.data),
        scalar=float(bundle.scalar.data),
    )


def evolve_homogeneous(m0, W0, lam, T, dt, chirality="left", backfill=0, **kwargs):
    """Evolve diagonal left-invariant data; the diagonal ansatz is preserved.

    Parameters
    ----------
    m0 : LeftInvariantMetric
    W0 : array_like
        Either the three diagonal entries of ``W`` or a diagonal 3x3 matrix.
    """
    W0 = np.asarray(W0, dtype=float)
    if W0.shape == (3,):
        W0 = np.diag(W0)
    if W0.shape != (3, 3) or np.any(W0 != np.diag(np.diag(W0))):
        raise PreconditionError("homogeneous evolution needs a diagonal W")
    g = m0.field(chirality)
    state = MetricState(g, Field(g.chart, W0, "endomorphism"), lam)
    traj = evolve(state, T, dt, backfill=backfill, **kwargs)
    off = traj.g - np.einsum("kii,ij->kij", traj.g, np.eye(3))
    if np.max(np.abs(off), initial=0.0) > 0:
        warnings.warn("diagonal ansatz not preserved to roundoff", stacklevel=2)
    return traj


_BASIS = (np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0j]) / np.sqrt(2))


def killing_spinor_check(m, chirality="left"):
    """Killing constant of invariant spinors on a round metric.

    Returns
    -------
    kappa : float
    residual : float
        ``sup |nabla_X psi - kappa X . psi|`` over a spanning set of invariant
        spinors.
    """
    if not m.is_round():
        raise PreconditionError("Killing check requires round metric")
    g = m.field(chirality)
    kappas, residual = [], 0.0
    for psi in _BASIS:
        k, r = killing_constant(SpinorField(g.chart, psi), g)
        kappas.append(k)
        residual = max(residual, r)
    kappa = float(np.mean(kappas))
    residual = max(residual, float(np.max(np.abs(np.array(kappas) - kappa))))
    return kappa, residual
