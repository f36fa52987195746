"""Hypersurface constraints and the ambient Ricci tensor of ``dt^2 + g_t``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._algebra import PointwiseOps
from .curvature import _divergence, _exterior, _gamma, _ricci
from .errors import HypothesisError, PreconditionError
from .tensor import Field, check_positive_definite

__all__ = [
    "ConstraintResidual",
    "AmbientRicci",
    "constraint_residual",
    "constraint_fields",
    "umbilical_alpha",
    "ambient_ricci",
    "einstein_residual",
    "time_derivatives",
]

GRID_TOL = 1e-7
CLOSED_FORM_TOL = 1e-9


@dataclass(frozen=True)
class ConstraintResidual:
    """Constraint violation ``f`` (scalar) and ``omega`` (1-form) of Cauchy data.

    ``f = 1/2((n-1) lam - Scal - tr W^2 + (tr W)^2)`` and
    ``omega = d tr W + div W``.  Norms are sup-norms and volume-weighted RMS
    values; ``|omega|`` is measured with the metric.
    """

    f: Field
    omega: Field
    H: Field
    f_sup: float
    f_l2: float
    omega_sup: float
    omega_l2: float

    def satisfied(self, tol=None):
        if tol is None:
            tol = GRID_TOL if self.f.chart.is_grid else CLOSED_FORM_TOL
        return self.f_sup <= tol and self.omega_sup <= tol

    def as_dict(self):
        return {
            "f_sup": self.f_sup,
            "f_l2": self.f_l2,
            "omega_sup": self.omega_sup,
            "omega_l2": self.omega_l2,
            "H_min": float(np.min(self.H.data)),
            "H_max": float(np.max(self.H.data)),
        }


def constraint_fields(chart, g, W, lam):
    """Arrays ``(f, omega, H, ginv, Gamma)`` for raw metric/Weingarten arrays."""
    ops = PointwiseOps(chart)
    ginv = np.linalg.inv(g)
    c = chart.structure
    G = _gamma(ops, c, g, ginv)
    Ric = _ricci(ops, c, G)
    scal = np.einsum("...ij,...ij->...", ginv, Ric)
    H = np.einsum("...ii->...", W)
    trW2 = np.einsum("...ij,...ji->...", W, W)
    f = 0.5 * ((chart.n - 1) * lam - scal - trW2 + H * H)
    omega = _exterior(ops, H, chart.n) + _divergence(ops, g, ginv, G, W)
    return f, omega, H, ginv, G


def _norms(chart, g, ginv, f, omega):
    vol = np.sqrt(np.linalg.det(g))
    w2 = np.einsum("...ij,...i,...j->...", ginv, omega, omega)
    total = float(np.sum(vol)) if chart.is_grid else float(vol)
    f_l2 = math.sqrt(float(np.sum(f * f * vol)) / total)
    w_l2 = math.sqrt(float(np.sum(np.abs(w2) * vol)) / total)
    return (
        float(np.max(np.abs(f), initial=0.0)),
        f_l2,
        float(np.max(np.sqrt(np.abs(w2)), initial=0.0)),
        w_l2,
    )


def constraint_residual(state):
    """Evaluate the Gauss and Codazzi constraints on ``state``."""
    chart = state.chart
    g, W = state.g.data, state.W.data
    f, omega, H, ginv, _ = constraint_fields(chart, g, W, state.lam)
    f_sup, f_l2, w_sup, w_l2 = _norms(chart, g, ginv, f, omega)
    return ConstraintResidual(
        f=Field(chart, f, "scalar"),
        omega=Field(chart, omega, "1-form"),
        H=Field(chart, H, "scalar"),
        f_sup=f_sup,
        f_l2=f_l2,
        omega_sup=w_sup,
        omega_l2=w_l2,
    )


def umbilical_alpha(scal, n, lam):
    """Umbilical factor ``alpha`` with ``W = alpha * Id`` solving the constraints.

    Requires constant scalar curvature and ``lam <= scal / (n - 1)``.
    """
    radicand = scal / (n * (n - 1)) - lam / n
    if radicand < 0:
        if radicand > -1e-14 * max(1.0, abs(scal), abs(lam)):
            return 0.0
        raise HypothesisError(
            f"umbilical data need lam <= Scal/(n-1); got lam={lam}, Scal/(n-1)={scal / (n - 1)}"
        )
    return math.sqrt(radicand)


# ---------------------------------------------------------------------------
# ambient curvature

def time_derivatives(traj, k):
    """Fourth-order centred ``(dg/dt, d2g/dt2)`` at sample ``k``."""
    if k < 2 or k > len(traj) - 3:
        raise PreconditionError(
            f"sample {k} needs two neighbours on each side (trajectory has {len(traj)} samples)"
        )
    g = traj.g
    dt = traj.dt
    gd = (g[k - 2] - 8 * g[k - 1] + 8 * g[k + 1] - g[k + 2]) / (12 * dt)
    gdd = (-g[k - 2] + 16 * g[k - 1] - 30 * g[k] + 16 * g[k + 1] - g[k + 2]) / (12 * dt * dt)
    return gd, gdd


@dataclass(frozen=True)
class AmbientRicci:
    """Components of the Ricci tensor of ``dt^2 + g_t`` at one time.

    ``gauss_lhs`` is ``Scal_Z - 2 Ric(nu, nu)`` computed from the ambient
    components and ``gauss_rhs`` is ``Scal + tr W^2 - (tr W)^2`` computed
    intrinsically; the two agree identically.
    """

    t: float
    nu_nu: Field
    nu_x: Field
    xy: Field
    scal: Field
    scal_from_trace: Field
    gauss_lhs: Field
    gauss_rhs: Field
    g: Field


def ambient_ricci(traj, t):
    """Ricci tensor of the ambient metric at sample time ``t``.

    ``W_t`` is recovered from the sampled metrics through
    ``g(W X, Y) = -1/2 dg/dt (X, Y)``, so the result checks the trajectory
    itself rather than the integrator's Weingarten samples.
    """
    k = traj.index_of(t)
    chart = traj.chart
    gd, gdd = time_derivatives(traj, k)
    g = traj.g[k]
    check_positive_definite(chart, g)
    ops = PointwiseOps(chart)
    ginv = np.linalg.inv(g)
    W = -0.5 * np.einsum("...ij,...jk->...ik", ginv, gd)
    c = chart.structure
    G = _gamma(ops, c, g, ginv)
    Ric = _ricci(ops, c, G)
    scal = np.einsum("...ij,...ij->...", ginv, Ric)

    H = np.einsum("...ii->...", W)
    trW2 = np.einsum("...ij,...ji->...", W, W)
    tr_gdd = np.einsum("...ij,...ij->...", ginv, gdd)
    gWW = np.einsum("...ia,...ab,...bj->...ij", g, W, W)

    nu_nu = trW2 - 0.5 * tr_gdd
    nu_x = _exterior(ops, H, chart.n) + _divergence(ops, g, ginv, G, W)
    xy = Ric + 2 * gWW + 0.5 * H[..., None, None] * gd - 0.5 * gdd
    scal_z = scal + 3 * trW2 - H * H - tr_gdd
    scal_tr = nu_nu + np.einsum("...ij,...ij->...", ginv, xy)
    return AmbientRicci(
        t=float(traj.times[k]),
        nu_nu=Field(chart, nu_nu, "scalar"),
        nu_x=Field(chart, nu_x, "1-form"),
        xy=Field(chart, xy, "sym-2-cov"),
        scal=Field(chart, scal_z, "scalar"),
        scal_from_trace=Field(chart, scal_tr, "scalar"),
        gauss_lhs=Field(chart, scal_z - 2 * nu_nu, "scalar"),
        gauss_rhs=Field(chart, scal + trW2 - H * H, "scalar"),
        g=Field(chart, g, "sym-2-cov"),
    )


def einstein_residual(traj, lam=None):
    """``sup |Ric_Z - lam g_Z|`` over components at every interior sample.

    Returns
    -------
    times, residual : ndarray
    """
    if lam is None:
        lam = traj.lam
    if len(traj) < 5:
        raise PreconditionError("einstein_residual needs at least 5 samples")
    idx = list(traj.interior())
    out = np.empty(len(idx))
    for j, k in enumerate(idx):
        amb = ambient_ricci(traj, traj.times[k])
        r = max(
            float(np.max(np.abs(amb.nu_nu.data - lam))),
            float(np.max(np.abs(amb.nu_x.data))),
            float(np.max(np.abs(amb.xy.data - lam * amb.g.data))),
        )
        out[j] = r
    return traj.times[idx].copy(), out

