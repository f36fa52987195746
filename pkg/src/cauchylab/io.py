"""Plain-text snapshot formats and CSV reports.

Field snapshot::

    EFIELD v1 kind=grid n=3 N=16 rank=sym-2-cov [periods=a,b,c]
    EFIELD v1 kind=frame n=3 N=1 rank=sym-2-cov [c=v1,...,v27]

followed by one line per grid point (row-major point order) holding that
point's components, each with 17 significant digits.  Frame charts carry
their structure constants ``c[k, i, j]`` flattened in C order; without the
key the frame is abelian.  Jet files are an ``EJET v1 K=<K> lambda=<lam>``
line followed by ``K + 1`` field blocks; spinor files are
``ESPIN v1 n=<n> dim=<dim>`` followed by interleaved real and imaginary
parts.
"""

from __future__ import annotations

import hashlib
import math
from pathlib import Path

import numpy as np

from .errors import SnapshotFormatError
from .tensor import RANKS, Chart, Field

__all__ = [
    "format_field",
    "parse_field",
    "read_field",
    "write_field",
    "format_jet",
    "parse_jet",
    "read_jet",
    "write_jet",
    "format_spinor",
    "parse_spinor",
    "read_spinor",
    "write_spinor",
    "git_blob_hash",
    "residual_csv",
    "einstein_csv",
    "jet_residual_csv",
    "fmt",
]


def fmt(v):
    """17-significant-digit decimal text of a float."""
    return f"{float(v):.17g}"


def git_blob_hash(data):
    """SHA-1 of ``data`` as git hashes a blob."""
    if isinstance(data, str):
        data = data.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


# ---------------------------------------------------------------------------
# headers

def _chart_keys(chart):
    keys = [f"kind={chart.kind}", f"n={chart.n}", f"N={chart.N if chart.is_grid else 1}"]
    extra = []
    if chart.is_grid:
        if any(abs(p - 2 * math.pi) > 0 for p in chart.periods):
            extra.append("periods=" + ",".join(fmt(p) for p in chart.periods))
    elif np.any(chart.structure):
        extra.append("c=" + ",".join(fmt(v) for v in np.asarray(chart.structure).ravel()))
    return keys, extra


def _parse_header(line, magic):
    parts = line.split()
    if len(parts) < 2 or parts[0] != magic or parts[1] != "v1":
        raise SnapshotFormatError(f"expected '{magic} v1' header, got {line[:40]!r}")
    keys = {}
    for p in parts[2:]:
        if "=" not in p:
            raise SnapshotFormatError(f"malformed header entry {p!r}")
        k, v = p.split("=", 1)
        keys[k] = v
    return keys


def _int(keys, name):
    try:
        return int(keys[name])
    except (KeyError, ValueError) as exc:
        raise SnapshotFormatError(f"header needs integer {name}=") from exc


def _chart_from_keys(keys):
    kind = keys.get("kind", "grid")
    n = _int(keys, "n")
    if kind == "grid":
        periods = None
        if "periods" in keys:
            periods = [float(x) for x in keys["periods"].split(",")]
        return Chart.grid(n, _int(keys, "N"), periods)
    if kind == "frame":
        if "c" in keys:
            vals = np.array([float(x) for x in keys["c"].split(",")])
            if vals.size != n ** 3:
                raise SnapshotFormatError(f"structure constants need {n ** 3} values")
            return Chart.frame(vals.reshape(n, n, n))
        return Chart.abelian(n)
    raise SnapshotFormatError(f"unknown chart kind {kind!r}")


# ---------------------------------------------------------------------------
# fields

def format_field(field):
    keys, extra = _chart_keys(field.chart)
    head = " ".join(["EFIELD v1", *keys, f"rank={field.rank}", *extra])
    data = np.asarray(field.data)
    ncomp = 1 if data.ndim == len(field.chart.grid_shape) else int(np.prod(data.shape[len(field.chart.grid_shape):]))
    flat = data.reshape(-1, ncomp)
    lines = [head] + [" ".join(fmt(v) for v in row) for row in flat]
    return "\n".join(lines) + "\n"


def _read_block(lines, pos, magic="EFIELD"):
    keys = _parse_header(lines[pos], magic)
    chart = _chart_from_keys(keys)
    rank = keys.get("rank")
    if rank not in RANKS:
        raise SnapshotFormatError(f"unknown rank tag {rank!r}")
    comp_shape = (chart.n,) * RANKS[rank]
    npts = chart.npoints if chart.is_grid else 1
    rows = lines[pos + 1 : pos + 1 + npts]
    if len(rows) != npts:
        raise SnapshotFormatError(f"expected {npts} data lines, found {len(rows)}")
    ncomp = int(np.prod(comp_shape)) if comp_shape else 1
    vals = _rows(rows, ncomp, "components")
    data = vals.reshape(*chart.grid_shape, *comp_shape)
    return Field(chart, data, rank), pos + 1 + npts


def _rows(rows, width, what):
    out = np.empty((len(rows), width))
    for i, r in enumerate(rows):
        parts = r.split()
        if len(parts) != width:
            raise SnapshotFormatError(f"expected {width} {what} per point, line {i + 1} has {len(parts)}")
        try:
            out[i] = [float(x) for x in parts]
        except ValueError as exc:
            raise SnapshotFormatError(f"non-numeric component: {exc}") from exc
    return out


def _lines(text):
    return [ln for ln in text.splitlines() if ln.strip()]


def parse_field(text):
    lines = _lines(text)
    if not lines:
        raise SnapshotFormatError("empty snapshot")
    field, end = _read_block(lines, 0)
    if end != len(lines):
        raise SnapshotFormatError("trailing data after field block")
    return field


def read_field(path):
    return parse_field(Path(path).read_text())


def write_field(path, field):
    text = format_field(field)
    Path(path).write_text(text)
    return git_blob_hash(text)


# ---------------------------------------------------------------------------
# jets

def format_jet(jet):
    out = [f"EJET v1 K={jet.order} lambda={fmt(jet.lam)}\n"]
    out += [format_field(jet.coefficient(k)) for k in range(jet.order + 1)]
    return "".join(out)


def parse_jet(text):
    from .jets import JetSeries

    lines = _lines(text)
    keys = _parse_header(lines[0], "EJET")
    K = _int(keys, "K")
    lam = float(keys.get("lambda", 0.0))
    pos, coeffs, chart = 1, [], None
    for _ in range(K + 1):
        f, pos = _read_block(lines, pos)
        chart = chart or f.chart
        coeffs.append(f.data)
    if pos != len(lines):
        raise SnapshotFormatError("trailing data after jet blocks")
    return JetSeries(chart, np.stack(coeffs), lam)


def read_jet(path):
    return parse_jet(Path(path).read_text())


def write_jet(path, jet):
    text = format_jet(jet)
    Path(path).write_text(text)
    return git_blob_hash(text)


# ---------------------------------------------------------------------------
# spinors

def format_spinor(spinor):
    chart = spinor.chart
    keys, extra = _chart_keys(chart)
    dim = spinor.psi.shape[-1]
    head = " ".join(["ESPIN v1", f"n={chart.n}", f"dim={dim}", keys[0], keys[2], *extra])
    flat = spinor.psi.reshape(-1, dim)
    lines = [head]
    for row in flat:
        lines.append(" ".join(f"{fmt(z.real)} {fmt(z.imag)}" for z in row))
    return "\n".join(lines) + "\n"


def parse_spinor(text):
    from .clifford import SpinorField

    lines = _lines(text)
    keys = _parse_header(lines[0], "ESPIN")
    keys.setdefault("kind", "frame")
    chart = _chart_from_keys(keys)
    dim = _int(keys, "dim")
    if dim != 2 ** (chart.n // 2):
        raise SnapshotFormatError(f"dim={dim} does not match n={chart.n}")
    npts = chart.npoints if chart.is_grid else 1
    rows = lines[1:]
    if len(rows) != npts:
        raise SnapshotFormatError(f"expected {npts} data lines, found {len(rows)}")
    vals = _rows(rows, 2 * dim, "values")
    psi = (vals[:, 0::2] + 1j * vals[:, 1::2]).reshape(*chart.grid_shape, dim)
    return SpinorField(chart, psi)


def read_spinor(path):
    return parse_spinor(Path(path).read_text())


def write_spinor(path, spinor):
    text = format_spinor(spinor)
    Path(path).write_text(text)
    return git_blob_hash(text)


# ---------------------------------------------------------------------------
# CSV reports

def residual_csv(traj, einstein=True):
    """``t,f_sup,omega_sup,einstein_sup`` per sample.

    ``einstein_sup`` needs two neighbours on each side and is left empty at
    the first and last two samples.
    """
    from .constraints import constraint_residual, einstein_residual

    ein = {}
    if einstein and len(traj) >= 5:
        times, res = einstein_residual(traj)
        ein = {k: r for k, r in zip(traj.interior(), res)}
    lines = ["t,f_sup,omega_sup,einstein_sup"]
    for k, t in enumerate(traj.times):
        r = constraint_residual(traj.state(k))
        e = fmt(ein[k]) if k in ein else ""
        lines.append(f"{fmt(t)},{fmt(r.f_sup)},{fmt(r.omega_sup)},{e}")
    return "\n".join(lines) + "\n"


def einstein_csv(traj):
    """``t,einstein_sup`` over interior samples."""
    from .constraints import einstein_residual

    times, res = einstein_residual(traj)
    lines = ["t,einstein_sup"] + [f"{fmt(t)},{fmt(r)}" for t, r in zip(times, res)]
    return "\n".join(lines) + "\n"


def jet_residual_csv(res):
    lines = ["order,tangential,mixed,nu_nu,gauss"]
    for k, a, b, c, d in res.as_rows():
        lines.append(f"{k},{fmt(a)},{fmt(b)},{fmt(c)},{fmt(d)}")
    return "\n".join(lines) + "\n"
