"""Intrinsic curvature of a metric on a chart.

Index conventions (all arrays carry grid axes first):

* ``Gamma[..., d, a, b]`` is :math:`\\Gamma^d_{ab}` with
  :math:`\\nabla_{e_a} e_b = \\Gamma^d_{ab} e_d`.  On grid charts ``e_a`` is the
  coordinate frame and Gamma is symmetric in ``a, b``; on frame charts the
  bracket terms of the Koszul formula enter.
* ``Riem[..., d, c, a, b]`` is :math:`R^d_{cab}` with
  :math:`R(e_a, e_b) e_c = R^d_{cab} e_d`, where
  :math:`R(X,Y) = \\nabla_X\\nabla_Y - \\nabla_Y\\nabla_X - \\nabla_{[X,Y]}`.
* ``Ric[..., b, c] = R^a_{cab}``, the trace of ``X -> R(X, e_b) e_c``.
* Endomorphisms ``A[..., c, i]`` map ``e_i`` to ``A^c_i e_c``.
* The divergence of an endomorphism is
  ``div(A)(X) = -sum_i g((nabla_{e_i} A)(e_i), X)`` over an orthonormal frame,
  which in a general frame is ``-g_bc g^ai (nabla_a A)^c_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._algebra import PointwiseOps
from .tensor import Field, check_positive_definite, metric_inverse

__all__ = [
    "CurvatureBundle",
    "curvature",
    "christoffel",
    "ricci",
    "scalar_curvature",
    "divergence",
    "codifferential",
    "exterior_derivative",
    "gradient",
    "volume_density",
    "covariant_derivative_endomorphism",
    "divergence_variation_residual",
]


# ---------------------------------------------------------------------------
# ring-generic kernels (see _algebra)

def _dstack(ops, a, n):
    """Stack ``d_a`` of ``a`` along a new index placed before a's components."""
    ncomp = a.ndim - ops.lead - ops.chart.n * ops.chart.is_grid
    return np.stack([ops.d(a, k) for k in range(n)], axis=a.ndim - ncomp)


def _gamma(ops, c, g, ginv):
    n = g.shape[-1]
    dg = _dstack(ops, g, n)  # dg[..., a, b, c] = d_a g_bc
    low = 0.5 * (
        np.einsum("...abc->...cab", dg)  # d_a g_bc
        + np.einsum("...bac->...cab", dg)  # d_b g_ac
        - dg  # d_c g_ab
    )
    # bracket terms: g([e_a,e_b],e_c) - g([e_a,e_c],e_b) - g([e_b,e_c],e_a)
    if np.any(c):
        low = low + 0.5 * (
            np.einsum("mab,...mc->...cab", c, g)
            - np.einsum("mac,...mb->...cab", c, g)
            - np.einsum("mbc,...ma->...cab", c, g)
        )
    return ops.mul("...dc,...cab->...dab", ginv, low)


def _riemann(ops, c, G):
    n = G.shape[-1]
    dG = _dstack(ops, G, n)  # dG[..., e, d, a, b] = d_e Gamma^d_ab
    # d_a Gamma^d_bc - d_b Gamma^d_ac
    t1 = np.einsum("...adbc->...dcab", dG)
    t2 = np.einsum("...bdac->...dcab", dG)
    t3 = ops.mul("...mbc,...dam->...dcab", G, G)
    t4 = ops.mul("...mac,...dbm->...dcab", G, G)
    out = t1 - t2 + t3 - t4
    if np.any(c):
        out = out - np.einsum("mab,...dmc->...dcab", c, G)
    return out


def _ricci(ops, c, G):
    n = G.shape[-1]
    div_g = sum(ops.d(G[..., a, :, :], a) for a in range(n))
    trace = np.einsum("...aam->...m", G)
    dtrace = _dstack(ops, trace, n)  # [b, c] = d_b tr_c
    out = (
        div_g
        - dtrace
        + ops.mul("...mbc,...m->...bc", G, trace)
        - ops.mul("...mac,...abm->...bc", G, G)
    )
    if np.any(c):
        out = out - np.einsum("mab,...amc->...bc", c, G)
    return out


def _nabla_endo(ops, G, A):
    """(nabla_a A)^c_i as array [..., a, c, i]."""
    n = A.shape[-1]
    dA = _dstack(ops, A, n)
    return dA + ops.mul("...cam,...mi->...aci", G, A) - ops.mul("...mai,...cm->...aci", G, A)


def _divergence(ops, g, ginv, G, A):
    nab = _nabla_endo(ops, G, A)
    t = ops.mul("...ai,...aci->...c", ginv, nab)
    return -ops.mul("...bc,...c->...b", g, t)


def _codifferential(ops, ginv, G, w):
    n = w.shape[-1]
    dw = _dstack(ops, w, n)  # [a, b] = d_a w_b
    nab = dw - ops.mul("...cab,...c->...ab", G, w)
    return -ops.mul("...ab,...ab->...", ginv, nab)


def _exterior(ops, f, n):
    return _dstack(ops, f, n)


# ---------------------------------------------------------------------------
# public field-level API

@dataclass(frozen=True)
class CurvatureBundle:
    """Curvature quantities of one metric."""

    christoffel: Field
    riemann: Field
    ricci: Field
    scalar: Field
    volume: Field


def _prep(g):
    check_positive_definite(g.chart, g.data)
    ops = PointwiseOps(g.chart)
    ginv = metric_inverse(g).data
    return ops, ginv


def christoffel(g):
    """Connection coefficients of the Levi-Civita connection of ``g``."""
    ops, ginv = _prep(g)
    return Field(g.chart, _gamma(ops, g.chart.structure, g.data, ginv), "connection")


def curvature(g):
    """Christoffel symbols, Riemann and Ricci tensors, scalar curvature, volume."""
    ops, ginv = _prep(g)
    c = g.chart.structure
    G = _gamma(ops, c, g.data, ginv)
    R = _riemann(ops, c, G)
    Ric = np.einsum("...acab->...bc", R)
    scal = np.einsum("...ij,...ij->...", ginv, Ric)
    return CurvatureBundle(
        christoffel=Field(g.chart, G, "connection"),
        riemann=Field(g.chart, R, "riemann"),
        ricci=Field(g.chart, Ric, "sym-2-cov"),
        scalar=Field(g.chart, scal, "scalar"),
        volume=volume_density(g),
    )


def ricci(g):
    """Ricci tensor of ``g`` as a covariant two-tensor."""
    ops, ginv = _prep(g)
    c = g.chart.structure
    G = _gamma(ops, c, g.data, ginv)
    return Field(g.chart, _ricci(ops, c, G), "sym-2-cov")


def scalar_curvature(g):
    ops, ginv = _prep(g)
    c = g.chart.structure
    Ric = _ricci(ops, c, _gamma(ops, c, g.data, ginv))
    return Field(g.chart, np.einsum("...ij,...ij->...", ginv, Ric), "scalar")


def volume_density(g):
    """``sqrt(det g)``."""
    return Field(g.chart, np.sqrt(np.linalg.det(g.data)), "scalar")


def divergence(g, A):
    """Divergence of an endomorphism field, returned as a 1-form."""
    ops, ginv = _prep(g)
    G = _gamma(ops, g.chart.structure, g.data, ginv)
    return Field(g.chart, _divergence(ops, g.data, ginv, G, A.data), "1-form")


def codifferential(g, omega):
    """``-sum_i (nabla_{e_i} omega)(e_i)`` for a 1-form ``omega``."""
    ops, ginv = _prep(g)
    G = _gamma(ops, g.chart.structure, g.data, ginv)
    return Field(g.chart, _codifferential(ops, ginv, G, omega.data), "scalar")


def exterior_derivative(f):
    ops = PointwiseOps(f.chart)
    return Field(f.chart, _exterior(ops, f.data, f.chart.n), "1-form")


def gradient(g, f):
    ginv = metric_inverse(g).data
    df = exterior_derivative(f).data
    return Field(g.chart, np.einsum("...ij,...j->...i", ginv, df), "vector")


def covariant_derivative_endomorphism(g, A):
    """``(nabla_{e_a} A)^c_i`` as a plain array indexed ``[..., a, c, i]``."""
    ops, ginv = _prep(g)
    G = _gamma(ops, g.chart.structure, g.data, ginv)
    return _nabla_endo(ops, G, A.data)


# ---------------------------------------------------------------------------
# variation of the divergence along a family of metrics

def divergence_variation_residual(g_of_t, A_of_t, t0, h):
    """Residuals of the first-variation formula for the divergence.

    For a family of metrics ``g_t`` with ``W_t = -1/2 g_t^{-1} dg_t/dt`` and a
    family ``A_t`` of ``g_t``-symmetric endomorphisms, compares a centred
    difference of ``div_{g_t}(A_t)`` at ``t0`` with

        g(A(grad tr W), X) - <nabla_X W, A> + div(dA/dt)(X)

    and ``d vol_t/dt`` with ``-tr(W) vol``.  Time derivatives of the families
    use the same centred stencil with step ``h``, so both residuals are
    ``O(h**2)``.

    ``dA/dt`` is generally not ``g_t``-symmetric even when every ``A_t`` is.
    The identity holds with ``div`` applied to the ``g``-adjoint of
    ``dA/dt``, the operator obtained by integrating ``tr(B o nabla X)`` by
    parts; the two agree when ``dA/dt`` is symmetric.

    Parameters
    ----------
    g_of_t, A_of_t : callable
        ``t -> Field`` (sym-2-cov and endomorphism respectively).
    t0, h : float

    Returns
    -------
    (float, float)
        Sup-norm residual of the divergence identity and of the volume
        identity.
    """
    gm, g0, gp = (g_of_t(t0 - h), g_of_t(t0), g_of_t(t0 + h))
    Am, A0, Ap = (A_of_t(t0 - h), A_of_t(t0), A_of_t(t0 + h))
    for gi in (gm, g0, gp):
        check_positive_definite(gi.chart, gi.data)

    chart = g0.chart
    ops = PointwiseOps(chart)
    c = chart.structure
    lhs = (divergence(gp, Ap).data - divergence(gm, Am).data) / (2 * h)

    ginv = metric_inverse(g0).data
    gdot = (gp.data - gm.data) / (2 * h)
    Adot = (Ap.data - Am.data) / (2 * h)
    W = -0.5 * np.einsum("...ij,...jk->...ik", ginv, gdot)
    G = _gamma(ops, c, g0.data, ginv)

    trW = np.einsum("...ii->...", W)
    grad_trW = np.einsum("...ij,...j->...i", ginv, _exterior(ops, trW, chart.n))
    term1 = np.einsum("...bc,...ci,...i->...b", g0.data, A0.data, grad_trW)
    nabW = _nabla_endo(ops, G, W)
    term2 = np.einsum("...cd,...ij,...aci,...dj->...a", g0.data, ginv, nabW, A0.data)
    Adot_adj = np.einsum("...ij,...kj,...kl->...il", ginv, Adot, g0.data)
    term3 = _divergence(ops, g0.data, ginv, G, Adot_adj)
    rhs = term1 - term2 + term3

    vol = lambda gg: np.sqrt(np.linalg.det(gg.data))  # noqa: E731
    dvol = (vol(gp) - vol(gm)) / (2 * h)
    vol_res = dvol + trW * vol(g0)
    return float(np.max(np.abs(lhs - rhs))), float(np.max(np.abs(vol_res)))
