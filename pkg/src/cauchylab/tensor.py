"""Charts, tensor fields and pointwise tensor algebra.

Two chart kinds are supported:

``grid``
    A periodic n-torus sampled on a uniform ``N**n`` grid.  Fields are arrays of
    shape ``(N,)*n + component_shape`` and spatial derivatives are computed
    spectrally.

``frame``
    A Lie group with a left-invariant frame ``e_1..e_n`` whose brackets are
    ``[e_i, e_j] = c[k, i, j] e_k``.  Only invariant fields are represented, so
    a field is a single component tuple and frame derivatives vanish.

Component arrays always place the grid axes first and the tensor indices
last.  Flattening in C order therefore gives row-major point order with all
components of a point stored contiguously.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartError, NotPositiveDefiniteError, RankMismatchError

__all__ = [
    "Chart",
    "Field",
    "RANKS",
    "partial_derivative",
    "metric_inverse",
    "pointwise_algebra",
    "spectral_derivative",
    "galerkin_truncate",
    "check_positive_definite",
]

# rank tag -> number of tensor indices
RANKS = {
    "scalar": 0,
    "1-form": 1,
    "vector": 1,
    "sym-2-cov": 2,
    "sym-2-contra": 2,
    "endomorphism": 2,
    "connection": 3,
    "riemann": 4,
}

_JACOBI_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class Chart:
    """Coordinate domain on which fields live.

    Use :meth:`grid` or :meth:`frame` rather than the raw constructor.
    """

    n: int
    kind: str
    N: int = 1
    periods: tuple = ()
    structure: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ChartError(f"dimension must be >= 1, got {self.n}")
        if self.kind == "grid":
            if self.N < 4 or self.N & (self.N - 1):
                raise ChartError(f"grid size N must be a power of two >= 4, got {self.N}")
            if len(self.periods) != self.n or min(self.periods) <= 0:
                raise ChartError("periods must be n positive reals")
            c = np.zeros((self.n,) * 3)
        elif self.kind == "frame":
            if self.structure is None:
                c = np.zeros((self.n,) * 3)
            else:
                c = np.array(self.structure, dtype=float)
            if c.shape != (self.n,) * 3:
                raise ChartError(f"structure constants must have shape {(self.n,) * 3}")
            if np.max(np.abs(c + c.transpose(0, 2, 1)), initial=0.0) > 0:
                raise ChartError("structure constants must be antisymmetric in the lower indices")
            # sum over cyclic (i, j, k) of [[e_i, e_j], e_k]
            jac = (
                np.einsum("mij,lmk->lijk", c, c)
                + np.einsum("mjk,lmi->lijk", c, c)
                + np.einsum("mki,lmj->lijk", c, c)
            )
            scale = max(1.0, float(np.max(np.abs(c), initial=0.0))) ** 2
            if np.max(np.abs(jac), initial=0.0) > _JACOBI_TOL * scale:
                raise ChartError("structure constants violate the Jacobi identity")
        else:
            raise ChartError(f"unknown chart kind {self.kind!r}")
        c.setflags(write=False)
        object.__setattr__(self, "structure", c)

    @classmethod
    def grid(cls, n, N, periods=None):
        """Periodic grid chart with ``N`` points per axis (default period 2*pi)."""
        if periods is None:
            periods = (2 * np.pi,) * n
        return cls(n=int(n), kind="grid", N=int(N), periods=tuple(float(p) for p in periods))

    @classmethod
    def frame(cls, structure):
        """Left-invariant frame chart with structure constants ``c[k, i, j]``."""
        c = np.asarray(structure, dtype=float)
        return cls(n=c.shape[0], kind="frame", structure=c)

    @classmethod
    def abelian(cls, n):
        """Frame chart of the flat torus (all brackets vanish)."""
        return cls(n=int(n), kind="frame", structure=np.zeros((n, n, n)))

    @property
    def is_grid(self):
        return self.kind == "grid"

    @property
    def grid_shape(self):
        return (self.N,) * self.n if self.is_grid else ()

    @property
    def npoints(self):
        return int(np.prod(self.grid_shape, dtype=int))

    def cell_volume(self):
        if not self.is_grid:
            return 1.0
        return float(np.prod([p / self.N for p in self.periods]))

    def coordinates(self):
        """Coordinate arrays ``x[0..n-1]``, each of shape :attr:`grid_shape`."""
        if not self.is_grid:
            raise ChartError("frame charts have no coordinate grid")
        axes = [np.arange(self.N) * (p / self.N) for p in self.periods]
        return np.meshgrid(*axes, indexing="ij")

    def compatible(self, other):
        if self is other:
            return True
        return (
            self.n == other.n
            and self.kind == other.kind
            and self.N == other.N
            and self.periods == other.periods
            and np.array_equal(self.structure, other.structure)
        )

    def describe(self):
        """JSON-friendly description, used in manifests and reports."""
        out = {"kind": self.kind, "n": self.n}
        if self.is_grid:
            out.update(N=self.N, periods=list(self.periods))
        else:
            out["structure"] = self.structure.tolist()
        return out


@dataclass(frozen=True, eq=False)
class Field:
    """Immutable tensor field on a chart.

    ``data`` has shape ``chart.grid_shape + (n,) * RANKS[rank]``.
    """

    chart: Chart
    data: np.ndarray
    rank: str

    def __post_init__(self):
        if self.rank not in RANKS:
            raise RankMismatchError(f"unknown rank tag {self.rank!r}")
        data = np.array(self.data, dtype=float, copy=True)
        expected = self.chart.grid_shape + (self.chart.n,) * RANKS[self.rank]
        if data.shape != expected:
            raise RankMismatchError(
                f"{self.rank} field on this chart needs shape {expected}, got {data.shape}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def constant(cls, chart, value, rank):
        value = np.asarray(value, dtype=float)
        data = np.broadcast_to(value, chart.grid_shape + value.shape)
        return cls(chart, data, rank)

    @property
    def n(self):
        return self.chart.n

    def sup(self):
        return float(np.max(np.abs(self.data), initial=0.0))

    def symmetry_defect(self):
        """Largest ``|T_ij - T_ji|`` for two-index fields."""
        if RANKS[self.rank] != 2:
            raise RankMismatchError("symmetry is defined for two-index fields only")
        return float(np.max(np.abs(self.data - np.swapaxes(self.data, -1, -2)), initial=0.0))

    def with_data(self, data, rank=None):
        return Field(self.chart, data, rank or self.rank)


# ---------------------------------------------------------------------------
# spectral machinery

def _wavenumbers(chart, axis):
    k = np.fft.fftfreq(chart.N, d=1.0 / chart.N) * (2 * np.pi / chart.periods[axis])
    if chart.N % 2 == 0:
        k[chart.N // 2] = 0.0  # Nyquist mode has no well-defined odd derivative
    return k


def spectral_derivative(chart, arr, axis, lead=0):
    """Derivative of ``arr`` along grid axis ``axis``.

    ``lead`` counts the non-grid axes that precede the grid axes (for
    instance the order axis of a power series).  On frame charts the result
    is zero, since invariant fields have vanishing frame derivatives.
    """
    arr = np.asarray(arr)
    if not chart.is_grid:
        return np.zeros_like(arr)
    pos = lead + axis
    shape = [1] * arr.ndim
    shape[pos] = chart.N
    k = _wavenumbers(chart, axis).reshape(shape)
    out = np.fft.ifft(1j * k * np.fft.fft(arr, axis=pos), axis=pos)
    return out.real if not np.iscomplexobj(arr) else out


def _mode_mask(chart, kmax):
    ints = np.fft.fftfreq(chart.N, d=1.0 / chart.N)
    keep = np.abs(ints) <= kmax
    mask = np.ones((chart.N,) * chart.n, dtype=bool)
    for ax in range(chart.n):
        shape = [1] * chart.n
        shape[ax] = chart.N
        mask = mask & keep.reshape(shape)
    return mask


def galerkin_truncate(chart, arr, kmax, lead=0):
    """Project onto Fourier modes with ``|k_i| <= kmax`` on every axis."""
    if not chart.is_grid or kmax is None or kmax >= chart.N // 2:
        return np.asarray(arr)
    arr = np.asarray(arr)
    axes = tuple(range(lead, lead + chart.n))
    spec = np.fft.fftn(arr, axes=axes)
    mask = _mode_mask(chart, kmax)
    shape = [1] * lead + list(mask.shape) + [1] * (arr.ndim - lead - chart.n)
    spec = spec * mask.reshape(shape)
    out = np.fft.ifftn(spec, axes=axes)
    return out.real if not np.iscomplexobj(arr) else out


def partial_derivative(field, axis):
    """Spectral partial derivative of a grid field along coordinate ``axis``."""
    chart = field.chart
    if not chart.is_grid:
        raise ChartError(
            "partial_derivative needs a periodic grid; invariant fields on a frame "
            "chart are constant"
        )
    if not 0 <= axis < chart.n:
        raise ChartError(f"axis {axis} out of range for n={chart.n}")
    return field.with_data(spectral_derivative(chart, field.data, axis))


# ---------------------------------------------------------------------------
# metrics

def check_positive_definite(chart, g):
    """Raise :class:`NotPositiveDefiniteError` if ``g`` fails anywhere."""
    g = np.asarray(g)
    if not np.all(np.isfinite(g)):
        bad = np.argwhere(~np.all(np.isfinite(g), axis=(-1, -2)))
        idx = tuple(bad[0]) if bad.size else ()
        raise NotPositiveDefiniteError(idx, 1, float("nan"))
    try:
        np.linalg.cholesky(g)
        return
    except np.linalg.LinAlgError:
        pass
    n = g.shape[-1]
    for m in range(1, n + 1):
        minors = np.linalg.det(g[..., :m, :m])
        bad = np.argwhere(np.atleast_1d(minors <= 0))
        if bad.size:
            idx = tuple(bad[0]) if np.ndim(minors) else ()
            value = minors[idx] if np.ndim(minors) else minors
            raise NotPositiveDefiniteError(idx, m, value)
    # leading minors positive but Cholesky failed: numerically singular
    raise NotPositiveDefiniteError((), n, 0.0)


def metric_inverse(g):
    """Pointwise inverse of a positive-definite metric field."""
    check_positive_definite(g.chart, g.data)
    inv = np.linalg.inv(g.data)
    return Field(g.chart, 0.5 * (inv + np.swapaxes(inv, -1, -2)), "sym-2-contra")


# ---------------------------------------------------------------------------
# pointwise algebra

def _require_same_chart(a, b):
    if not a.chart.compatible(b.chart):
        raise ChartError("operands live on different charts")


def _dealiased(chart, arr, on):
    if on and chart.is_grid:
        return galerkin_truncate(chart, arr, chart.N // 3)
    return arr


def pointwise_algebra(a, b=None, op="add", dealias=False):
    """Pointwise tensor algebra on fields.

    Operations
    ----------
    add, sub
        ``a + b`` / ``a - b`` for fields of equal rank.
    scale
        ``b * a`` where ``b`` is a number or a scalar field.
    contract
        Full contraction.  Two endomorphisms give ``tr(a b)``; a 1-form and a
        vector give ``a(b)``; two-index forms need a metric, so use ``raise``
        first.
    trace
        Trace of an endomorphism (``b`` ignored) or the metric trace of a
        covariant two-tensor with respect to the metric ``b``.
    raise
        Raise the first index of a covariant 2-tensor or a 1-form using the
        metric ``b`` (sym-2-cov -> endomorphism, 1-form -> vector).
    lower
        Inverse of ``raise`` (endomorphism -> sym-2-cov, vector -> 1-form).

    With ``dealias=True`` products on grid charts obey the 2/3 rule.
    """
    if op in ("add", "sub"):
        _require_same_chart(a, b)
        if a.rank != b.rank:
            raise RankMismatchError(f"cannot {op} {a.rank} and {b.rank}")
        return a.with_data(a.data + b.data if op == "add" else a.data - b.data)

    if op == "scale":
        if isinstance(b, Field):
            _require_same_chart(a, b)
            if b.rank != "scalar":
                raise RankMismatchError("scale needs a scalar field or a number")
            factor = b.data.reshape(b.data.shape + (1,) * RANKS[a.rank])
            data = _dealiased(a.chart, _dealiased(a.chart, factor, dealias) * _dealiased(a.chart, a.data, dealias), dealias)
            return a.with_data(data)
        return a.with_data(float(b) * a.data)

    if op == "trace":
        if a.rank == "endomorphism":
            return Field(a.chart, np.einsum("...ii->...", a.data), "scalar")
        if a.rank in ("sym-2-cov",) and b is not None:
            ginv = metric_inverse(b).data
            prod = np.einsum("...ij,...ij->...", _dealiased(a.chart, ginv, dealias), _dealiased(a.chart, a.data, dealias))
            return Field(a.chart, _dealiased(a.chart, prod, dealias), "scalar")
        raise RankMismatchError(f"trace is not defined for {a.rank} without a metric")

    if op == "contract":
        _require_same_chart(a, b)
        x = _dealiased(a.chart, a.data, dealias)
        y = _dealiased(a.chart, b.data, dealias)
        if a.rank == "endomorphism" and b.rank == "endomorphism":
            out = np.einsum("...ij,...ji->...", x, y)
        elif {a.rank, b.rank} == {"1-form", "vector"}:
            out = np.einsum("...i,...i->...", x, y)
        else:
            raise RankMismatchError(f"cannot contract {a.rank} with {b.rank}")
        return Field(a.chart, _dealiased(a.chart, out, dealias), "scalar")

    if op in ("raise", "lower"):
        _require_same_chart(a, b)
        if b.rank != "sym-2-cov":
            raise RankMismatchError("raise/lower need a metric (sym-2-cov) as second operand")
        m = metric_inverse(b).data if op == "raise" else b.data
        m = _dealiased(a.chart, m, dealias)
        x = _dealiased(a.chart, a.data, dealias)
        table = {
            ("raise", "sym-2-cov"): ("...ij,...jk->...ik", "endomorphism"),
            ("raise", "1-form"): ("...ij,...j->...i", "vector"),
            ("lower", "endomorphism"): ("...ij,...jk->...ik", "sym-2-cov"),
            ("lower", "vector"): ("...ij,...j->...i", "1-form"),
        }
        try:
            spec, rank = table[(op, a.rank)]
        except KeyError:
            raise RankMismatchError(f"cannot {op} a {a.rank} field") from None
        return Field(a.chart, _dealiased(a.chart, np.einsum(spec, m, x), dealias), rank)

    raise ValueError(f"unknown operation {op!r}")
