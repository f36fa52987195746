"""Clifford modules, spin connections and generalized Killing spinors.

Conventions
-----------
* Clifford relations ``e_i e_j + e_j e_i = -2 delta_ij``.  For ``n = 3``,
  ``gamma_j = i sigma_j`` so that ``gamma_1 gamma_2 gamma_3 = +Id``.  For
  ``n = 4`` the module is doubled: ``Gamma_j = sigma_x (x) gamma_j`` and
  ``Gamma_4 = i sigma_z (x) Id``.
* The orthonormal frame is ``E = L^{-T}`` with ``g = L L^T`` (Cholesky), so
  ``E[..., j, a]`` is the ``j``-th chart component of ``E_a``.  On the unit
  round SU(2) chart this is the invariant frame itself.
* ``omega[..., a, b, c] = g(nabla_{E_a} E_b, E_c)`` and the spinor covariant
  derivative is ``E_a(psi) + 1/4 sum_{b,c} omega_abc gamma_b gamma_c psi``.
* Spinor inner products are Hermitian; real parts are taken where a real
  pairing is needed.
* Endomorphisms in orthonormal components are ``E^{-1} A E``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._algebra import PointwiseOps
from .constraints import constraint_fields
from .curvature import _gamma, _nabla_endo, _ricci
from .errors import PreconditionError, RankMismatchError
from .tensor import Chart, check_positive_definite, spectral_derivative

__all__ = [
    "CliffordRep",
    "SpinorField",
    "orthonormal_frame",
    "frame_connection",
    "spinor_derivative",
    "dirac",
    "clifford_contraction",
    "gks_residual",
    "StressEnergy",
    "stress_energy_from_spinor",
    "GKSConstraints",
    "gks_implies_constraints",
    "spin_curvature_residual",
    "Extension",
    "extend_parallel",
    "killing_constant",
]

_SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


class CliffordRep:
    """Complex Clifford module of ``R^n`` for ``1 <= n <= 4``.

    Attributes
    ----------
    gammas : ndarray, shape (n, dim, dim)
    """

    def __init__(self, n):
        if n not in (1, 2, 3, 4):
            raise PreconditionError(f"Clifford modules are provided for 1 <= n <= 4, got {n}")
        self.n = n
        self.dim = 2 ** (n // 2)
        if n == 1:
            g = np.array([[[1j]]])
        elif n in (2, 3):
            g = 1j * _SIGMA[:n]
        else:
            inner = 1j * _SIGMA
            g = np.stack(
                [np.kron(_SIGMA[0], inner[j]) for j in range(3)]
                + [np.kron(1j * _SIGMA[2], np.eye(2))]
            )
        g.setflags(write=False)
        self.gammas = g

    def multiply(self, X, psi):
        """Clifford product ``X . psi`` with ``X`` in orthonormal components.

        ``X[..., a]`` and ``psi[..., s]`` broadcast over leading axes.
        """
        return np.einsum("...a,ast,...t->...s", X, self.gammas, psi)

    def relation_defect(self):
        g = self.gammas
        eye = np.eye(self.dim)
        return max(
            float(np.max(np.abs(g[i] @ g[j] + g[j] @ g[i] + 2 * (i == j) * eye)))
            for i in range(self.n)
            for j in range(self.n)
        )

    def volume_element(self):
        out = np.eye(self.dim, dtype=complex)
        for gi in self.gammas:
            out = out @ gi
        return out


@dataclass(frozen=True, eq=False)
class SpinorField:
    """Spinor components in the orthonormal frame of a metric.

    ``psi`` has shape ``(*grid, dim)``.  On frame charts ``psi`` is a single
    invariant spinor; ``dpsi`` optionally carries chart-frame derivatives
    ``e_j(psi)`` at the base point (shape ``(n, dim)``), which describe
    non-invariant spinors to first order.
    """

    chart: Chart
    psi: np.ndarray
    dpsi: np.ndarray | None = None

    def __post_init__(self):
        rep_dim = 2 ** (self.chart.n // 2)
        psi = np.array(self.psi, dtype=complex, copy=True)
        if psi.shape != (*self.chart.grid_shape, rep_dim):
            raise RankMismatchError(
                f"spinor components must have shape {(*self.chart.grid_shape, rep_dim)}, got {psi.shape}"
            )
        if not np.all(np.isfinite(psi)):
            raise PreconditionError("spinor components must be finite")
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        if self.dpsi is not None:
            if self.chart.is_grid:
                raise PreconditionError("dpsi is only used on frame charts")
            d = np.array(self.dpsi, dtype=complex, copy=True)
            if d.shape != (self.chart.n, rep_dim):
                raise RankMismatchError(f"dpsi must have shape {(self.chart.n, rep_dim)}")
            d.setflags(write=False)
            object.__setattr__(self, "dpsi", d)

    @property
    def n(self):
        return self.chart.n

    def norm(self):
        return np.sqrt(np.sum(np.abs(self.psi) ** 2, axis=-1))

    def chart_derivatives(self):
        """``e_j(psi)`` as an array ``[..., j, s]``."""
        if self.chart.is_grid:
            return np.stack(
                [spectral_derivative(self.chart, self.psi, j) for j in range(self.n)], axis=-2
            )
        if self.dpsi is None:
            return np.zeros((self.n, self.psi.shape[-1]), dtype=complex)
        return np.array(self.dpsi)


def _data(x):
    return getattr(x, "data", x)


def orthonormal_frame(g):
    """Cholesky frame ``E = L^{-T}``; columns are the orthonormal vectors."""
    g = np.asarray(_data(g))
    L = np.linalg.cholesky(g)
    return np.swapaxes(np.linalg.inv(L), -1, -2)


@dataclass
class _Geometry:
    chart: Chart
    g: np.ndarray
    ginv: np.ndarray
    G: np.ndarray
    E: np.ndarray
    Einv: np.ndarray
    omega: np.ndarray


def _geometry(chart, g):
    check_positive_definite(chart, g)
    ops = PointwiseOps(chart)
    ginv = np.linalg.inv(g)
    G = _gamma(ops, chart.structure, g, ginv)
    E = orthonormal_frame(g)
    n = chart.n
    dE = np.stack([spectral_derivative(chart, E, i) for i in range(n)], axis=-3)
    nabE = np.einsum("...ia,...ijb->...ajb", E, dE) + np.einsum("...ia,...jik,...kb->...ajb", E, G, E)
    omega = np.einsum("...jl,...ajb,...lc->...abc", g, nabE, E)
    return _Geometry(chart, g, ginv, G, E, np.linalg.inv(E), omega)


def frame_connection(g):
    """Connection forms ``omega[..., a, b, c] = g(nabla_{E_a} E_b, E_c)``."""
    chart = g.chart
    return _geometry(chart, np.asarray(g.data)).omega


def _check(psi, g):
    if not psi.chart.compatible(g.chart):
        raise PreconditionError("spinor and metric live on different charts")
    return CliffordRep(psi.n), _geometry(g.chart, np.asarray(g.data))


def _spin_op(rep, omega):
    """``1/4 sum_bc omega_abc gamma_b gamma_c`` as ``[..., a, s, t]``."""
    gg = np.einsum("bsu,cut->bcst", rep.gammas, rep.gammas)
    return 0.25 * np.einsum("...abc,bcst->...ast", omega, gg)


def _nabla(rep, geo, psi_arr, dpsi_arr):
    frame_d = np.einsum("...ja,...js->...as", geo.E, dpsi_arr)
    return frame_d + np.einsum("...ast,...t->...as", _spin_op(rep, geo.omega), psi_arr)


def spinor_derivative(psi, g):
    """Covariant derivatives ``nabla_{E_a} psi`` as an array ``[..., a, s]``."""
    rep, geo = _check(psi, g)
    return _nabla(rep, geo, psi.psi, psi.chart_derivatives())


def _clifford_sum(rep, phi):
    """``sum_a gamma_a phi_a`` for ``phi[..., a, s]``."""
    return np.einsum("ast,...at->...s", rep.gammas, phi)


def dirac(psi, g):
    """Dirac operator ``D psi = sum_a E_a . nabla_{E_a} psi``."""
    rep, geo = _check(psi, g)
    nab = _nabla(rep, geo, psi.psi, psi.chart_derivatives())
    return SpinorField(psi.chart, _clifford_sum(rep, nab))


def _on_endo(geo, A):
    return np.einsum("...ac,...ci,...ib->...ab", geo.Einv, A, geo.E)


def _endo_action(rep, A_on, psi_arr):
    """``A(E_a) . psi`` for every ``a`` as ``[..., a, s]``."""
    return np.einsum("...ba,bst,...t->...as", A_on, rep.gammas, psi_arr)


def clifford_contraction(psi, A, g):
    """``sum_a E_a . A(E_a) . psi`` for an endomorphism field ``A``."""
    rep, geo = _check(psi, g)
    act = _endo_action(rep, _on_endo(geo, np.asarray(_data(A))), psi.psi)
    return SpinorField(psi.chart, _clifford_sum(rep, act))


def _gks_field(rep, geo, psi, W):
    nab = _nabla(rep, geo, psi.psi, psi.chart_derivatives())
    act = _endo_action(rep, _on_endo(geo, W), psi.psi)
    return np.max(np.linalg.norm(nab - 0.5 * act, axis=-1), axis=-1)


def gks_residual(psi, W, g):
    """Pointwise ``max_a |nabla_{E_a} psi - 1/2 W(E_a) . psi|`` and its sup.

    Returns
    -------
    field : ndarray
    sup : float
    """
    rep, geo = _check(psi, g)
    W = np.asarray(_data(W))
    gW = np.einsum("...ij,...jk->...ik", geo.g, W)
    if np.max(np.abs(gW - np.swapaxes(gW, -1, -2)), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(gW))):
        raise PreconditionError("W is not symmetric with respect to g")
    field = _gks_field(rep, geo, psi, W)
    return field, float(np.max(field))


# ---------------------------------------------------------------------------
# stress-energy of a unit spinor

@dataclass(frozen=True)
class StressEnergy:
    """``A`` with ``g(A X, Y) = Re <nabla_X psi, Y . psi>``.

    ``A`` is an endomorphism in chart components; ``symmetry_defect`` is
    ``sup |A - A^T|`` in orthonormal components and ``reconstruction`` is
    ``sup |nabla_X psi - A(X) . psi|``.  The generalized Killing tensor is
    ``W = 2 A``.
    """

    A: np.ndarray
    A_orthonormal: np.ndarray
    symmetry_defect: float
    reconstruction: float

    @property
    def W(self):
        return 2 * self.A


def stress_energy_from_spinor(psi, g, unit_tol=1e-8):
    if psi.n != 3:
        raise PreconditionError("stress-energy extraction is implemented for n = 3")
    dev = float(np.max(np.abs(psi.norm() - 1.0)))
    if dev > unit_tol:
        raise PreconditionError(f"spinor must have unit length (deviation {dev:.3g})")
    rep, geo = _check(psi, g)
    nab = _nabla(rep, geo, psi.psi, psi.chart_derivatives())
    Ypsi = np.einsum("bst,...t->...bs", rep.gammas, psi.psi)
    A_on = np.real(np.einsum("...as,...bs->...ba", np.conj(nab), Ypsi))
    sym = float(np.max(np.abs(A_on - np.swapaxes(A_on, -1, -2))))
    recon = float(np.max(np.abs(nab - _endo_action(rep, A_on, psi.psi))))
    A = np.einsum("...ia,...ab,...bj->...ij", geo.E, A_on, geo.Einv)
    return StressEnergy(A, A_on, sym, recon)


# ---------------------------------------------------------------------------
# constraints implied by a generalized Killing spinor

@dataclass(frozen=True)
class GKSConstraints:
    """Einstein constant inferred from a generalized Killing spinor and the
    constraint residuals it implies."""

    lam: float
    lam_spread: float
    f_sup: float
    omega_sup: float
    ric1_residual: float


def gks_implies_constraints(psi, W, g, gks_tol=1e-8, lam_tol=1e-8):
    """Infer ``lam = (Scal + tr W^2 - (tr W)^2) / (n - 1)`` and check the
    constraints together with the identity

        Ric(X) psi = tr(W) W(X) psi - W^2(X) psi + X(tr W) psi
                     + sum_i e_i (nabla_{e_i} W)(X) psi.
    """
    rep, geo = _check(psi, g)
    n = psi.n
    if n < 2:
        raise PreconditionError("need n >= 2 to infer the Einstein constant")
    W = np.asarray(_data(W))
    res = float(np.max(_gks_field(rep, geo, psi, W)))
    if res > gks_tol:
        raise PreconditionError(f"spinor is not a generalized Killing spinor (residual {res:.3g})")
    chart = psi.chart
    ops = PointwiseOps(chart)
    Ric = _ricci(ops, chart.structure, geo.G)
    scal = np.einsum("...ij,...ij->...", geo.ginv, Ric)
    H = np.einsum("...ii->...", W)
    WW = np.einsum("...ij,...jk->...ik", W, W)
    lam_field = (scal + np.einsum("...ii->...", WW) - H * H) / (n - 1)
    lam = float(np.mean(lam_field))
    spread = float(np.max(np.abs(lam_field - lam)))
    if spread > lam_tol:
        raise PreconditionError(f"inferred Einstein constant is not constant (spread {spread:.3g})")
    f, omega, _, _, _ = constraint_fields(chart, geo.g, W, lam)

    p = psi.psi
    ric_endo = np.einsum("...ij,...jk->...ik", geo.ginv, Ric)
    lhs = _endo_action(rep, _on_endo(geo, ric_endo), p)
    rhs = H[..., None, None] * _endo_action(rep, _on_endo(geo, W), p)
    rhs = rhs - _endo_action(rep, _on_endo(geo, WW), p)
    dH = np.stack([spectral_derivative(chart, H, j) for j in range(n)], axis=-1)
    dH_on = np.einsum("...j,...ja->...a", dH, geo.E)
    rhs = rhs + dH_on[..., :, None] * p[..., None, :]
    nabW = _nabla_endo(ops, geo.G, W)  # [..., p, c, q]
    nabW_on = np.einsum("...pi,...pcq,...qa,...bc->...iba", geo.E, nabW, geo.E, geo.Einv)
    # sum_i gamma_i gamma_b psi (nabla_i W)^b_a
    gg = np.einsum("ist,btu->ibsu", rep.gammas, rep.gammas)
    rhs = rhs + np.einsum("...iba,ibsu,...u->...as", nabW_on, gg, p)
    ric1 = float(np.max(np.abs(lhs - rhs)))
    return GKSConstraints(
        lam=lam,
        lam_spread=spread,
        f_sup=float(np.max(np.abs(f))),
        omega_sup=float(np.max(np.abs(omega))),
        ric1_residual=ric1,
    )


# ---------------------------------------------------------------------------
# spin curvature

def spin_curvature_residual(psi, g):
    """Sup over ``X = E_a`` of ``|sum_i E_i . R_{X,E_i} psi + 1/2 Ric(X) . psi|``.

    The spin curvature is evaluated as
    ``nabla_a nabla_b psi - nabla_b nabla_a psi - nabla_{[E_a, E_b]} psi``.
    """
    if psi.dpsi is not None:
        raise PreconditionError("spin curvature needs an invariant spinor on frame charts")
    rep, geo = _check(psi, g)
    chart = psi.chart
    n = psi.n
    S = _spin_op(rep, geo.omega)
    phi = _nabla(rep, geo, psi.psi, psi.chart_derivatives())  # [..., b, s]
    # nabla_a phi_b, each phi_b treated as a spinor field
    if chart.is_grid:
        dphi = np.stack([spectral_derivative(chart, phi, j) for j in range(n)], axis=-3)
    else:
        dphi = np.zeros((n, n, phi.shape[-1]), dtype=complex)
    frame_d = np.einsum("...ja,...jbs->...abs", geo.E, dphi)
    nn = frame_d + np.einsum("...ast,...bt->...abs", S, phi)
    bracket = geo.omega - np.swapaxes(geo.omega, -2, -3)  # [a, b, c]
    R = nn - np.swapaxes(nn, -2, -3) - np.einsum("...abc,...cs->...abs", bracket, phi)
    contracted = np.einsum("bst,...abt->...as", rep.gammas, R)
    ops = PointwiseOps(chart)
    Ric = _ricci(ops, chart.structure, geo.G)
    ric_endo = np.einsum("...ij,...jk->...ik", geo.ginv, Ric)
    ric_act = _endo_action(rep, _on_endo(geo, ric_endo), psi.psi)
    return float(np.max(np.abs(contracted + 0.5 * ric_act)))


# ---------------------------------------------------------------------------
# parallel extension along the normal geodesics

def _intertwiner(rep3, rep4):
    """Isometric ``V`` with ``(Gamma_4 Gamma_i) V = V gamma_i``."""
    d3, d4 = rep3.dim, rep4.dim
    rows = []
    for i in range(3):
        beta = rep4.gammas[3] @ rep4.gammas[i]
        # vec(beta V - V gamma) with V in row-major order
        rows.append(np.kron(beta, np.eye(d3)) - np.kron(np.eye(d4), rep3.gammas[i].T))
    M = np.concatenate(rows)
    _, s, vh = np.linalg.svd(M)
    null = vh[np.sum(s > 1e-10):].conj()
    if len(null) == 0:
        raise PreconditionError("no intertwiner between the Clifford modules")
    V = null[0].reshape(d4, d3)
    u, _, wh = np.linalg.svd(V, full_matrices=False)
    return u @ wh


@dataclass(frozen=True)
class Extension:
    """Result of :func:`extend_parallel`.

    ``times`` are the sample times at which ``Psi`` is available (every
    second trajectory sample); ``a`` is the horizontal residual
    ``sup_X |nabla^Z_X Psi|``; ``restriction_residual`` compares
    ``nabla^Z_X Psi`` at ``t = 0`` with ``nabla_X psi - 1/2 W(X) psi``.
    """

    times: np.ndarray
    Psi: np.ndarray
    a: np.ndarray
    restriction_residual: float
    gks_residual: float
    einstein_residual: float | None
    intertwiner: np.ndarray


def _ambient_horizontal(rep3, rep4, geo, W, Psi, dPsi):
    """``nabla^Z_{E_i} Psi`` as ``[..., i, s]`` for 4-spinors on a slice."""
    E = geo.E
    frame_d = np.einsum("...ja,...js->...as", E, dPsi)
    G = rep4.gammas
    gg = np.einsum("bsu,cut->bcst", G[:3], G[:3])
    spin = 0.25 * np.einsum("...abc,bcst,...t->...as", geo.omega, gg, Psi)
    W_on = _on_endo(geo, W)  # [b, a] = W(E_a)^b
    g4 = np.einsum("bsu,ut->bst", G[:3], G[3])
    normal = 0.5 * np.einsum("...ba,bst,...t->...as", W_on, g4, Psi)
    return frame_d + spin + normal


def _transport_generator(rep4, g, W):
    """``M`` with ``dPsi/dt = M Psi`` for parallel transport along ``d/dt``."""
    E = orthonormal_frame(g)
    S = np.einsum("...ia,...ij,...jk,...kb->...ab", E, g, W, E)
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    om = np.tril(S, -1)
    om = om - np.swapaxes(om, -1, -2)  # omega_{nu a b}
    G = rep4.gammas
    gg = np.einsum("bsu,cut->bcst", G[:3], G[:3])
    return -0.25 * np.einsum("...ab,abst->...st", om, gg)


def _psi_derivs(chart, Psi, dPsi_frame):
    if chart.is_grid:
        return np.stack([spectral_derivative(chart, Psi, j) for j in range(chart.n)], axis=-2)
    return dPsi_frame


def extend_parallel(psi0, traj, strict=True, gks_tol=1e-8, einstein_tol=1e-6):
    """Extend ``psi0`` to the ambient metric ``dt^2 + g_t`` by parallel transport.

    Parameters
    ----------
    psi0 : SpinorField
        Spinor on the initial slice (``n = 3``).
    traj : Trajectory
        Ricci-flat trajectory whose first sample is the initial slice.
    strict : bool
        Enforce the preconditions (generalized Killing spinor for ``W_0`` and
        an Einstein-verified trajectory with ``lam = 0``).  With
        ``strict=False`` the extension is carried out regardless and the
        residuals report the violation.

    Notes
    -----
    Transport uses RK4 with step ``2 dt``, the intermediate trajectory sample
    serving as the midpoint.
    """
    from .constraints import einstein_residual

    if psi0.n != 3 or traj.n != 3:
        raise PreconditionError("parallel extension is implemented for n = 3")
    if not psi0.chart.compatible(traj.chart):
        raise PreconditionError("spinor and trajectory live on different charts")
    if traj.lam != 0.0 and strict:
        raise PreconditionError("parallel extension needs a Ricci-flat trajectory (lam = 0)")
    if len(traj) < 5:
        raise PreconditionError("trajectory too short for parallel extension")
    chart = traj.chart
    rep3, rep4 = CliffordRep(3), CliffordRep(4)
    geo0 = _geometry(chart, np.array(traj.g[0]))
    gks = float(np.max(_gks_field(rep3, geo0, psi0, np.array(traj.W[0]))))
    ein = None
    if strict:
        if gks > gks_tol:
            raise PreconditionError(f"initial spinor is not a generalized Killing spinor (residual {gks:.3g})")
        _, ein_res = einstein_residual(traj)
        ein = float(np.max(ein_res))
        if ein > einstein_tol:
            raise PreconditionError(f"trajectory is not Einstein (residual {ein:.3g})")

    V = _intertwiner(rep3, rep4)
    Psi = np.einsum("st,...t->...s", V, psi0.psi)
    dPsi = None if chart.is_grid else np.einsum("st,jt->js", V, psi0.chart_derivatives())

    # restriction identity at t = 0
    lhs = _ambient_horizontal(rep3, rep4, geo0, np.array(traj.W[0]), Psi, _psi_derivs(chart, Psi, dPsi))
    nab = _nabla(rep3, geo0, psi0.psi, psi0.chart_derivatives())
    act = _endo_action(rep3, _on_endo(geo0, np.array(traj.W[0])), psi0.psi)
    rhs = np.einsum("st,...at->...as", V, nab - 0.5 * act)
    restriction = float(np.max(np.abs(lhs - rhs)))

    gens = [_transport_generator(rep4, traj.g[k], traj.W[k]) for k in range(len(traj))]
    h = 2 * traj.dt

    def step(k, y):
        def f(M, v):
            return np.einsum("...st,...t->...s", M, v)

        k1 = f(gens[k], y)
        k2 = f(gens[k + 1], y + 0.5 * h * k1)
        k3 = f(gens[k + 1], y + 0.5 * h * k2)
        k4 = f(gens[k + 2], y + h * k3)
        return y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

    times, Psis, a = [], [], []
    k = 0
    while True:
        geo = geo0 if k == 0 else _geometry(chart, np.array(traj.g[k]))
        hz = _ambient_horizontal(rep3, rep4, geo, np.array(traj.W[k]), Psi, _psi_derivs(chart, Psi, dPsi))
        times.append(float(traj.times[k]))
        Psis.append(Psi)
        a.append(float(np.max(np.linalg.norm(hz, axis=-1))))
        if k + 2 >= len(traj):
            break
        Psi = step(k, Psi)
        if dPsi is not None:
            dPsi = step(k, dPsi)
        k += 2
    return Extension(
        times=np.array(times),
        Psi=np.stack(Psis),
        a=np.array(a),
        restriction_residual=restriction,
        gks_residual=gks,
        einstein_residual=ein,
        intertwiner=V,
    )


def killing_constant(psi, g):
    """Best-fit ``kappa`` with ``nabla_X psi = kappa X . psi`` and its residual."""
    rep, geo = _check(psi, g)
    nab = _nabla(rep, geo, psi.psi, psi.chart_derivatives())
    Xpsi = np.einsum("ast,...t->...as", rep.gammas, psi.psi)
    num = np.sum(np.real(np.conj(Xpsi) * nab))
    den = np.sum(np.abs(Xpsi) ** 2)
    kappa = float(num / den)
    return kappa, float(np.max(np.abs(nab - kappa * Xpsi)))

