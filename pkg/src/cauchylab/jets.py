"""Formal power-series solutions ``g_t = sum_k g^(k) t^k`` of the evolution system.

The second-order form of the tangential Einstein equation,

    d2g/dt2 = 2 Ric(g) + dg g^{-1} dg - 1/2 tr(g^{-1} dg) dg - 2 lam g,

determines ``g^(k+2)`` from ``g^(0..k+1)``.  Curvature of a series metric is
obtained by running the coordinate formulas of :mod:`cauchylab.curvature` in
the ring of truncated series (:class:`cauchylab._algebra.SeriesOps`).  Every
coefficient is computed from series truncated to exactly the orders it
depends on, so the coefficients do not depend on the requested final order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._algebra import SeriesOps
from .curvature import _divergence, _exterior, _gamma, _ricci
from .errors import PreconditionError
from .tensor import Chart, Field, check_positive_definite

__all__ = [
    "TruncatedSeries",
    "series_algebra",
    "JetSeries",
    "JetResidual",
    "formal_solution",
    "jet_einstein_residual",
]


# ---------------------------------------------------------------------------
# truncated series of scalars or matrices

@dataclass(frozen=True)
class TruncatedSeries:
    """Coefficients ``c[0..K]`` of ``sum_k c[k] t^k``.

    ``matrix=True`` means the trailing two axes of each coefficient form a
    square matrix and products are matrix products; otherwise products are
    elementwise.
    """

    coeffs: np.ndarray
    matrix: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float, copy=True)
        if c.ndim == 0:
            raise PreconditionError("series needs at least one coefficient axis")
        if self.matrix and (c.ndim < 3 or c.shape[-1] != c.shape[-2]):
            raise PreconditionError("matrix series need square trailing axes")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self):
        return len(self.coeffs) - 1

    @classmethod
    def from_list(cls, values, matrix=False):
        return cls(np.array(values, dtype=float), matrix=matrix)

    def evaluate(self, t):
        out = np.zeros_like(self.coeffs[0])
        for c in self.coeffs[::-1]:
            out = out * t + c
        return out


def _spec(matrix):
    return "...ij,...jk->...ik" if matrix else "...,...->..."


def series_algebra(a, b=None, op="mul"):
    """Arithmetic on :class:`TruncatedSeries`.

    Parameters
    ----------
    a, b : TruncatedSeries
        ``b`` is required for ``mul`` and ``add``.  Both operands must have
        the same order.
    op : {"mul", "add", "invert", "trace"}

    Returns
    -------
    TruncatedSeries
    """
    if op in ("mul", "add"):
        if b is None:
            raise PreconditionError(f"{op} needs two operands")
        if a.order != b.order:
            raise PreconditionError(f"order mismatch: {a.order} vs {b.order}")
        if a.matrix != b.matrix:
            raise PreconditionError("cannot combine scalar and matrix series")
        if op == "add":
            return TruncatedSeries(a.coeffs + b.coeffs, a.matrix)
        out = SeriesOps(None).mul(_spec(a.matrix), a.coeffs, b.coeffs)
        return TruncatedSeries(out, a.matrix)
    if op == "invert":
        c = a.coeffs
        if a.matrix:
            if np.any(np.abs(np.linalg.det(c[0])) < 1e-300):
                raise PreconditionError("singular leading coefficient")
            return TruncatedSeries(SeriesOps(None).inv(c), True)
        if np.any(c[0] == 0):
            raise PreconditionError("singular leading coefficient")
        out = [1.0 / c[0]]
        for k in range(1, len(c)):
            acc = c[1] * out[k - 1]
            for j in range(2, k + 1):
                acc = acc + c[j] * out[k - j]
            out.append(-acc / c[0])
        return TruncatedSeries(np.stack(out), False)
    if op == "trace":
        if not a.matrix:
            raise PreconditionError("trace needs a matrix series")
        return TruncatedSeries(np.einsum("k...ii->k...", a.coeffs), False)
    raise PreconditionError(f"unknown series operation {op!r}")


# ---------------------------------------------------------------------------
# jets of the evolution

@dataclass(frozen=True, eq=False)
class JetSeries:
    """Taylor coefficients ``g^(0..K)`` of ``g_t`` at ``t = 0``."""

    chart: Chart
    coeffs: np.ndarray
    lam: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float, copy=True)
        n = self.chart.n
        want = (*self.chart.grid_shape, n, n)
        if c.ndim != len(want) + 1 or c.shape[1:] != want:
            raise PreconditionError(f"jet coefficients must have shape (K+1, {want}), got {c.shape}")
        if len(c) < 2:
            raise PreconditionError("jet order must be at least 1")
        check_positive_definite(self.chart, c[0])
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def order(self):
        return len(self.coeffs) - 1

    def coefficient(self, k):
        return Field(self.chart, self.coeffs[k], "sym-2-cov")

    def evaluate(self, t):
        """Taylor polynomial ``sum_k g^(k) t^k`` as a metric field."""
        out = np.zeros_like(self.coeffs[0])
        for c in self.coeffs[::-1]:
            out = out * t + c
        return Field(self.chart, out, "sym-2-cov")

    def truncate(self, K):
        if K > self.order:
            raise PreconditionError(f"jet has order {self.order} < {K}")
        return JetSeries(self.chart, self.coeffs[: K + 1], self.lam)


def _derivative(g):
    """Coefficients of d/dt of a series, one order shorter."""
    k = np.arange(1, len(g)).reshape((-1,) + (1,) * (g.ndim - 1))
    return k * g[1:]


def _bracket(ops, c, g, lam):
    """Order ``0..len(g)-2`` coefficients of the right-hand side for ``d2g/dt2``."""
    m = len(g) - 1
    gd = _derivative(g)
    gm = g[:m]
    ginv = ops.inv(gm)
    Ric = _ricci(ops, c, _gamma(ops, c, gm, ginv))
    B = ops.mul("...ij,...jk->...ik", ginv, gd)
    quad = ops.mul("...ij,...jk->...ik", gd, B)
    trB = np.einsum("k...ii->k...", B)
    lin = ops.mul("...,...ij->...ij", trB, gd)
    return 2 * Ric + quad - 0.5 * lin - 2 * lam * gm


def formal_solution(state0, K):
    """Jet of order ``K`` of the metric family evolving from ``state0``.

    ``g^(0) = g`` and ``g^(1) = -2 g(W., .)``; higher coefficients follow the
    recursion above.  The constraints are not required: the tangential
    equation can always be solved formally.
    """
    if K < 2:
        raise PreconditionError("jet order K must be at least 2")
    chart = state0.chart
    ops = SeriesOps(chart)
    c = chart.structure
    g0 = np.array(state0.g.data)
    gW = np.einsum("...ij,...jk->...ik", g0, state0.W.data)
    coeffs = [g0, -(gW + np.swapaxes(gW, -1, -2))]
    for k in range(K - 1):
        rhs = _bracket(ops, c, np.stack(coeffs), state0.lam)[k]
        nxt = rhs / ((k + 2) * (k + 1))
        coeffs.append(0.5 * (nxt + np.swapaxes(nxt, -1, -2)))
    return JetSeries(chart, np.stack(coeffs), state0.lam)


@dataclass(frozen=True)
class JetResidual:
    """Per-order sup norms of the Taylor coefficients of ``Ric_Z - lam g_Z``.

    ``tangential`` is the ``(X, Y)`` block, ``mixed`` the ``(nu, X)`` block,
    ``nu_nu`` the normal component and ``gauss`` the coefficient of
    ``Scal + tr W^2 - (tr W)^2 - (n - 1) lam``, which equals ``-2 f``.
    Raw coefficients are reported; no gauge normalization is applied.
    """

    tangential: np.ndarray
    mixed: np.ndarray
    nu_nu: np.ndarray
    gauss: np.ndarray

    @property
    def order(self):
        return len(self.tangential) - 1

    def max_norm(self):
        return float(max(np.max(self.tangential), np.max(self.mixed),
                         np.max(self.nu_nu), np.max(self.gauss)))

    def as_rows(self):
        return [
            (k, float(self.tangential[k]), float(self.mixed[k]),
             float(self.nu_nu[k]), float(self.gauss[k]))
            for k in range(len(self.tangential))
        ]


def _sup_per_order(a):
    return np.max(np.abs(a.reshape(len(a), -1)), axis=1)


def jet_einstein_residual(jet, order):
    """Taylor coefficients of the ambient Einstein residual through ``order``.

    Requires ``order <= jet.order - 2``.
    """
    if order < 0 or order > jet.order - 2:
        raise PreconditionError(
            f"residual order {order} exceeds jet order {jet.order} minus 2"
        )
    chart = jet.chart
    ops = SeriesOps(chart)
    c = chart.structure
    lam = jet.lam
    n = chart.n
    m = order + 1
    g_full = jet.coeffs[: order + 3]
    gd_full = _derivative(g_full)
    gdd = _derivative(gd_full)[:m]
    gd = gd_full[:m]
    g = g_full[:m]

    ginv = ops.inv(g)
    G = _gamma(ops, c, g, ginv)
    Ric = _ricci(ops, c, G)
    W = -0.5 * ops.mul("...ij,...jk->...ik", ginv, gd)
    WW = ops.mul("...ij,...jk->...ik", W, W)
    H = np.einsum("k...ii->k...", W)
    trW2 = np.einsum("k...ii->k...", WW)
    scal = ops.mul("...ij,...ij->...", ginv, Ric)
    tr_gdd = ops.mul("...ij,...ij->...", ginv, gdd)

    xy = Ric + 2 * ops.mul("...ia,...aj->...ij", g, WW) \
        + 0.5 * ops.mul("...,...ij->...ij", H, gd) - 0.5 * gdd - lam * g
    nu_nu = trW2 - 0.5 * tr_gdd
    nu_nu[0] = nu_nu[0] - lam
    mixed = _exterior(ops, H, n) + _divergence(ops, g, ginv, G, W)
    gauss = scal + trW2 - ops.mul("...,...->...", H, H)
    gauss[0] = gauss[0] - (n - 1) * lam
    return JetResidual(
        tangential=_sup_per_order(xy),
        mixed=_sup_per_order(mixed),
        nu_nu=_sup_per_order(nu_nu),
        gauss=_sup_per_order(gauss),
    )
