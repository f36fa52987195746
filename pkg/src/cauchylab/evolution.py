"""Normal-geodesic evolution of Cauchy data and constraint propagation.

The Einstein condition ``Ric_Z = lam g_Z`` for ``g_Z = dt^2 + g_t`` is
integrated as the first-order system

    dg/dt = -2 g(W., .)
    dW/dt = -g^{-1} Ric(g) + tr(W) W + lam Id

with classical RK4.  On grid charts the right-hand side is projected onto
Fourier modes ``|k_i| <= kmax``; the untruncated problem is elliptic and
amplifies mode ``k`` like ``exp(|k| t)``, so grid runs are meant for short
horizons only.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._algebra import PointwiseOps
from .constraints import constraint_fields, constraint_residual
from .curvature import _codifferential, _exterior, _gamma, _ricci
from .errors import PreconditionError
from .state import Trajectory
from .tensor import Field, galerkin_truncate

__all__ = [
    "evolution_rhs",
    "evolve",
    "PropagationReport",
    "monitor_propagation",
    "propagation_convergence",
    "DEFAULT_WARN_TOL",
]

log = logging.getLogger(__name__)

DEFAULT_WARN_TOL = 1e-6
# g is declared degenerate once its smallest eigenvalue falls below this
# fraction of the initial one.
DEGENERACY_RATIO = 1e-8
# Steps with |dt| * |eig W| above this no longer resolve the solution.
RESOLUTION_LIMIT = 0.2


def _default_kmax(chart):
    return chart.N // 4 if chart.is_grid else None


def _rhs_cov(chart, g, S, lam, kmax):
    """Derivatives of ``(g, S)`` with ``S = g W`` symmetric.

    ``dS/dt = -Ric + H S - 2 S g^{-1} S + lam g`` follows from the ``W``
    equation and ``dg/dt = -2 S``.  Both derivatives are symmetric, so the
    Galerkin projection keeps ``S`` symmetric and band-limited.
    """
    ops = PointwiseOps(chart)
    ginv = np.linalg.inv(g)
    c = chart.structure
    Ric = _ricci(ops, c, _gamma(ops, c, g, ginv))
    W = np.einsum("...ij,...jk->...ik", ginv, S)
    H = np.einsum("...ii->...", W)
    gdot = -2 * S
    Sdot = -Ric + H[..., None, None] * S - 2 * np.einsum("...ij,...jk->...ik", S, W) + lam * g
    Sdot = 0.5 * (Sdot + np.swapaxes(Sdot, -1, -2))
    if chart.is_grid and kmax is not None:
        gdot = galerkin_truncate(chart, gdot, kmax)
        Sdot = galerkin_truncate(chart, Sdot, kmax)
    return gdot, Sdot


def _rhs(chart, g, W, lam, kmax):
    """``(dg/dt, dW/dt)`` obtained from :func:`_rhs_cov`."""
    S = np.einsum("...ij,...jk->...ik", g, W)
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    gdot, Sdot = _rhs_cov(chart, g, S, lam, kmax)
    Wdot = np.linalg.solve(g, Sdot - np.einsum("...ij,...jk->...ik", gdot, W))
    return gdot, Wdot


def evolution_rhs(state, kmax=None):
    """Time derivatives ``(dg/dt, dW/dt)`` of the evolution system at ``state``.

    On grid charts the result is Galerkin-projected to ``|k_i| <= kmax``
    (default ``N // 4``).
    """
    chart = state.chart
    if kmax is None:
        kmax = _default_kmax(chart)
    gdot, Wdot = _rhs(chart, state.g.data, state.W.data, state.lam, kmax)
    return Field(chart, gdot, "sym-2-cov"), Field(chart, Wdot, "endomorphism")


def _symmetrize(g, S):
    return 0.5 * (g + np.swapaxes(g, -1, -2)), 0.5 * (S + np.swapaxes(S, -1, -2))


def _weingarten(g, S):
    return np.linalg.solve(g, S)


def _min_eig(g):
    return float(np.min(np.linalg.eigvalsh(g)))


def evolve(state0, T, dt, kmax=None, backfill=0, warn_tol=DEFAULT_WARN_TOL):
    """Integrate the evolution system from ``state0`` over ``[0, T]``.

    Parameters
    ----------
    state0 : MetricState
    T : float
        End time; negative values integrate backward.
    dt : float
        Positive step size.
    kmax : int, optional
        Galerkin mode cap on grid charts (default ``N // 4``).
    backfill : int
        Number of steps integrated backward from ``t = 0`` and prepended, so
        that ``t = 0`` becomes an interior sample for centred differences.
    warn_tol : float
        A warning is issued when the initial data violate the constraints by
        more than this.

    Returns
    -------
    Trajectory
        Integration stops early with status ``"degenerate"`` when the metric
        loses positive definiteness and ``"blow-up"`` on overflow; samples
        after that point are never emitted.
    """
    if dt <= 0:
        raise PreconditionError("dt must be positive")
    chart = state0.chart
    if kmax is None:
        kmax = _default_kmax(chart)
    res = constraint_residual(state0)
    if max(res.f_sup, res.omega_sup) > warn_tol:
        warnings.warn(
            f"initial data violate the constraints (f_sup={res.f_sup:.3g}, "
            f"omega_sup={res.omega_sup:.3g}); evolving anyway",
            stacklevel=2,
        )
    forward = _integrate(state0, T, dt, kmax)
    if backfill:
        backward = _integrate(state0, -backfill * dt, dt, kmax)
        return Trajectory.concatenate(backward, forward)
    return forward


def _integrate(state0, T, dt, kmax):
    chart = state0.chart
    lam = state0.lam
    h = math.copysign(dt, T) if T != 0 else dt
    nsteps = int(round(abs(T) / dt))
    g = np.array(state0.g.data)
    g, S = _symmetrize(g, np.einsum("...ij,...jk->...ik", g, np.array(state0.W.data)))
    g0_min = _min_eig(g)
    times, gs, Ws = [0.0], [g], [_weingarten(g, S)]
    status, when = "ok", None

    def f(gg, SS):
        return _rhs_cov(chart, gg, SS, lam, kmax)

    for step in range(1, nsteps + 1):
        t_new = step * h
        with np.errstate(all="ignore"):
            k1g, k1S = f(g, S)
            k2g, k2S = f(g + 0.5 * h * k1g, S + 0.5 * h * k1S)
            k3g, k3S = f(g + 0.5 * h * k2g, S + 0.5 * h * k2S)
            k4g, k4S = f(g + h * k3g, S + h * k3S)
            g_new = g + (h / 6) * (k1g + 2 * k2g + 2 * k3g + k4g)
            S_new = S + (h / 6) * (k1S + 2 * k2S + 2 * k3S + k4S)
        finite = np.all(np.isfinite(g_new)) and np.all(np.isfinite(S_new))
        if finite:
            try:
                np.linalg.cholesky(g_new)
                pd = True
            except np.linalg.LinAlgError:
                pd = False
        if not finite or not pd:
            near_degenerate = _min_eig(g) < 1e-3 * g0_min
            status = "degenerate" if (finite or near_degenerate) else "blow-up"
            when = t_new
            break
        g_new, S_new = _symmetrize(g_new, S_new)
        if _min_eig(g_new) < DEGENERACY_RATIO * g0_min:
            status, when = "degenerate", t_new
            break
        W_new = _weingarten(g_new, S_new)
        eig = np.linalg.eigvals(W_new).real * math.copysign(1.0, h)
        if abs(h) * float(np.max(np.abs(eig))) > RESOLUTION_LIMIT:
            # W ~ 1/(t* - t) with positive sign means g collapses at t*
            status = "degenerate" if np.max(eig) >= -np.min(eig) else "blow-up"
            when = t_new
            break
        g, S = g_new, S_new
        times.append(t_new)
        gs.append(g)
        Ws.append(W_new)

    if status != "ok":
        log.info("integration stopped: %s at t=%.6g", status, when)
    return Trajectory(
        chart=chart,
        times=np.array(times),
        g=np.stack(gs),
        W=np.stack(Ws),
        lam=lam,
        dt=h,
        kmax=kmax,
        status=status,
        status_time=when,
    )


# ---------------------------------------------------------------------------
# constraint propagation

@dataclass(frozen=True)
class PropagationReport:
    """Comparison of centred time derivatives of ``(f, omega)`` with their
    predicted rates ``(codiff(omega) + 2 H f, df + H omega)``.

    Arrays are indexed by interior sample.  ``order`` is filled in when the
    report was produced with ``refine=True``.
    """

    times: np.ndarray
    f: np.ndarray
    omega: np.ndarray
    f_rate: np.ndarray
    f_predicted: np.ndarray
    omega_rate: np.ndarray
    omega_predicted: np.ndarray
    f_mismatch: np.ndarray
    omega_mismatch: np.ndarray
    sup_mismatch: float
    order: float | None = None

    def at(self, t):
        return int(np.argmin(np.abs(self.times - t)))


def _centred(arr, k, dt):
    return (arr[k - 2] - 8 * arr[k - 1] + 8 * arr[k + 1] - arr[k + 2]) / (12 * dt)


def monitor_propagation(traj, refine=False, window=None):
    """Check the linear propagation system for the constraint quantities.

    Parameters
    ----------
    traj : Trajectory
        At least 5 samples.
    refine : bool
        Re-integrate from the first sample with ``dt / 2`` and report the
        observed convergence order of the mismatch.
    window : (float, float), optional
        Time window over which ``sup_mismatch`` is taken.  Defaults to all
        interior samples.
    """
    if len(traj) < 5:
        raise PreconditionError("monitor_propagation needs at least 5 samples")
    chart = traj.chart
    ops = PointwiseOps(chart)
    fs, ws, Hs, preds_f, preds_w = [], [], [], [], []
    for k in range(len(traj)):
        f, w, H, ginv, G = constraint_fields(chart, traj.g[k], traj.W[k], traj.lam)
        fs.append(f)
        ws.append(w)
        Hs.append(H)
        preds_f.append(_codifferential(ops, ginv, G, w) + 2 * H * f)
        preds_w.append(_exterior(ops, f, chart.n) + H[..., None] * w)
    fs, ws = np.stack(fs), np.stack(ws)
    idx = np.array(list(traj.interior()))
    f_rate = np.stack([_centred(fs, k, traj.dt) for k in idx])
    w_rate = np.stack([_centred(ws, k, traj.dt) for k in idx])
    f_pred = np.stack([preds_f[k] for k in idx])
    w_pred = np.stack([preds_w[k] for k in idx])
    axes_f = tuple(range(1, f_rate.ndim))
    axes_w = tuple(range(1, w_rate.ndim))
    f_mis = np.max(np.abs(f_rate - f_pred), axis=axes_f) if axes_f else np.abs(f_rate - f_pred)
    w_mis = np.max(np.abs(w_rate - w_pred), axis=axes_w)
    times = traj.times[idx]
    sel = np.ones(len(idx), dtype=bool)
    if window is not None:
        lo, hi = min(window), max(window)
        sel = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    sup = float(max(np.max(f_mis[sel], initial=0.0), np.max(w_mis[sel], initial=0.0)))

    order = None
    if refine:
        t0, t1 = traj.times[0], traj.times[-1]
        start = traj.state(0)
        fine = _integrate(start, t1 - t0, abs(traj.dt) / 2, traj.kmax)
        fine = Trajectory(
            chart, fine.times + t0, fine.g, fine.W, fine.lam, fine.dt, kmax=fine.kmax
        )
        lo = min(t0, t1) + 2 * abs(traj.dt)
        hi = max(t0, t1) - 2 * abs(traj.dt)
        coarse = monitor_propagation(traj, window=(lo, hi))
        finer = monitor_propagation(fine, window=(lo, hi))
        if finer.sup_mismatch > 0 and coarse.sup_mismatch > 0:
            order = math.log2(coarse.sup_mismatch / finer.sup_mismatch)

    return PropagationReport(
        times=times,
        f=fs[idx],
        omega=ws[idx],
        f_rate=f_rate,
        f_predicted=f_pred,
        omega_rate=w_rate,
        omega_predicted=w_pred,
        f_mismatch=f_mis,
        omega_mismatch=w_mis,
        sup_mismatch=sup,
        order=order,
    )


def propagation_convergence(state0, T, dts, backfill=0, kmax=None):
    """Propagation mismatch for several step sizes and the observed orders.

    The mismatch is measured on the window common to all runs.

    Returns
    -------
    errors : list of float
    orders : list of float
        ``log2`` ratios between consecutive entries of ``dts``.
    """
    dts = sorted(dts, reverse=True)
    widest = dts[0]
    lo = -backfill * dts[-1] + 2 * widest
    hi = T - 2 * widest
    errors = []
    for dt in dts:
        steps_back = int(round(backfill * dts[-1] / dt))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            traj = evolve(state0, T, dt, kmax=kmax, backfill=steps_back)
        errors.append(monitor_propagation(traj, window=(lo, hi)).sup_mismatch)
    orders = [
        math.log(errors[i] / errors[i + 1]) / math.log(dts[i] / dts[i + 1])
        for i in range(len(errors) - 1)
    ]
    return errors, orders
