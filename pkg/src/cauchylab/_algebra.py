"""Coefficient rings that the curvature formulas are evaluated in.

The coordinate formulas for Christoffel symbols, Ricci curvature and the
divergence only need products, metric inversion and spatial derivatives.
Writing them against the small interface below lets the same code compute
pointwise curvature of a metric field (:class:`PointwiseOps`) and the Taylor
coefficients of the curvature of a metric given as a truncated power series
in ``t`` (:class:`SeriesOps`).
"""

from __future__ import annotations

import numpy as np

from .tensor import spectral_derivative


class PointwiseOps:
    lead = 0

    def __init__(self, chart):
        self.chart = chart

    def mul(self, spec, a, b):
        return np.einsum(spec, a, b)

    def inv(self, g):
        return np.linalg.inv(g)

    def d(self, a, axis):
        return spectral_derivative(self.chart, a, axis, lead=self.lead)


class SeriesOps(PointwiseOps):
    """Truncated power series with coefficient index on axis 0.

    Products truncate at the lower of the operand orders.
    """

    lead = 1

    def mul(self, spec, a, b):
        order = min(len(a), len(b))
        out = []
        for k in range(order):
            acc = np.einsum(spec, a[0], b[k])
            for j in range(1, k + 1):
                acc = acc + np.einsum(spec, a[j], b[k - j])
            out.append(acc)
        return np.stack(out)

    def inv(self, g):
        b0 = np.linalg.inv(g[0])
        out = [b0]
        for k in range(1, len(g)):
            acc = g[1] @ out[k - 1]
            for j in range(2, k + 1):
                acc = acc + g[j] @ out[k - j]
            out.append(-(b0 @ acc))
        return np.stack(out)
