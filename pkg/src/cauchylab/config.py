"""Run configuration and built-in scenarios.

A configuration is a JSON object.  Values are resolved in the order

    built-in defaults < ``--config`` file < command-line flags

Random fields are drawn from ``numpy.random.default_rng(seed)`` (PCG64), so a
given seed produces the same data on every platform.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constraints import umbilical_alpha
from .curvature import scalar_curvature
from .errors import ConfigError, HypothesisError
from .homogeneous import LeftInvariantMetric
from .state import MetricState
from .tensor import Chart, Field

__all__ = [
    "DEFAULTS",
    "SCENARIOS",
    "RunConfig",
    "load_config",
    "config_hash",
    "build_state",
    "band_limited",
    "random_metric",
]

SCENARIOS = ("flat-torus", "round-sphere", "berger", "conformal-perturbation", "file")

DEFAULTS = {
    "scenario": "round-sphere",
    "chart": {"kind": None, "n": 3, "N": 16, "chirality": "left"},
    "scale": 1.0,
    "berger": {"A": 1.0, "C": 4.0},
    "perturbation": {"amplitude": 0.05, "mode": 2},
    "metric_file": None,
    "W": {"type": "umbilical"},
    "lambda": 0.0,
    "dt": 1e-3,
    "T": 0.5,
    "kmax": None,
    "K": 6,
    "backfill": 0,
    "snap_every": 0,
    "seed": 42,
    "spinor": {"psi": [1.0, 0.0, 0.0, 0.0], "extend": True},
    "tolerances": {"constraint": None, "einstein": 1e-6, "gks": 1e-8, "extension": 1e-6},
}

_LIMITS = {"dt": (1e-7, 0.5), "T": (-100.0, 100.0), "K": (2, 16)}


def _merge(base, over):
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    """Resolved configuration; ``values`` is the merged JSON object."""

    values: dict
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def hash(self):
        return config_hash(self.values)

    def path(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def validate(self):
        v = self.values
        if v["scenario"] not in SCENARIOS:
            raise ConfigError(f"unknown scenario {v['scenario']!r}; choose from {', '.join(SCENARIOS)}")
        for key, (lo, hi) in _LIMITS.items():
            x = v[key]
            if not isinstance(x, (int, float)) or not (lo <= x <= hi):
                raise ConfigError(f"{key}={x!r} outside the range [{lo}, {hi}]")
        if v["scenario"] == "file" and not v.get("metric_file"):
            raise ConfigError("scenario 'file' needs metric_file")
        for key in ("metric_file",):
            if v.get(key) and not self.path(v[key]).is_file():
                raise ConfigError(f"missing snapshot file: {v[key]}")
        W = v["W"]
        if W.get("type") == "file":
            if not W.get("path") or not self.path(W["path"]).is_file():
                raise ConfigError(f"missing snapshot file: {W.get('path')}")
        if not isinstance(v["seed"], int) or v["seed"] < 0:
            raise ConfigError("seed must be a non-negative integer")
        return self


def load_config(path=None, overrides=None):
    """Merge defaults, an optional JSON file and flag overrides."""
    values = json.loads(json.dumps(DEFAULTS))
    base = Path.cwd()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            values = _merge(values, json.loads(p.read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        base = p.resolve().parent
    if overrides:
        values = _merge(values, overrides)
    return RunConfig(values, base).validate()


def config_hash(values):
    """SHA-256 of the canonical JSON encoding."""
    text = json.dumps(values, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# random band-limited data

def band_limited(chart, mode, rng, shape=()):
    """Random real field with Fourier modes ``|k_i| <= mode`` and unit sup norm."""
    X = chart.coordinates()
    ks = [k for k in np.ndindex(*(2 * mode + 1,) * chart.n)]
    out = np.zeros(chart.grid_shape + tuple(shape))
    for k in ks:
        kv = np.array(k) - mode
        if not np.any(kv):
            continue
        phase = sum(kv[i] * X[i] * (2 * math.pi / chart.periods[i]) for i in range(chart.n))
        a = rng.standard_normal(shape)
        b = rng.standard_normal(shape)
        out = out + np.cos(phase)[(...,) + (None,) * len(shape)] * a
        out = out + np.sin(phase)[(...,) + (None,) * len(shape)] * b
    return out / np.max(np.abs(out))


def random_metric(chart, amplitude=0.1, mode=2, seed=42, conformal=False):
    """Band-limited perturbation of the flat metric on a grid chart.

    ``conformal=True`` returns ``exp(2 phi) delta``; otherwise
    ``delta + amplitude * h`` with a random symmetric band-limited ``h``.
    """
    rng = np.random.default_rng(seed)
    n = chart.n
    if conformal:
        phi = amplitude * band_limited(chart, mode, rng)
        return Field(chart, np.exp(2 * phi)[..., None, None] * np.eye(n), "sym-2-cov")
    h = band_limited(chart, mode, rng, (n, n))
    h = 0.5 * (h + np.swapaxes(h, -1, -2))
    return Field(chart, np.eye(n) + amplitude * h, "sym-2-cov")


# ---------------------------------------------------------------------------
# scenarios

def _chart(cfg, default_kind):
    spec = cfg["chart"]
    kind = spec.get("kind") or default_kind
    n = int(spec.get("n", 3))
    if kind == "grid":
        return Chart.grid(n, int(spec.get("N", 16)), spec.get("periods"))
    if kind == "frame":
        return Chart.abelian(n)
    raise ConfigError(f"unknown chart kind {kind!r}")


def _metric(cfg):
    from .io import read_field

    sc = cfg["scenario"]
    chir = cfg["chart"].get("chirality", "left")
    if cfg["W"].get("type") == "killing":
        chir = cfg["W"].get("chirality", chir)
    if sc == "flat-torus":
        chart = _chart(cfg, "grid")
        g = np.broadcast_to(np.eye(chart.n), chart.grid_shape + (chart.n, chart.n)).copy()
        return Field(chart, g, "sym-2-cov")
    if sc == "round-sphere":
        return LeftInvariantMetric.round(float(cfg["scale"])).field(chir)
    if sc == "berger":
        b = cfg["berger"]
        return LeftInvariantMetric(b["A"], b["A"], b["C"]).field(chir)
    if sc == "conformal-perturbation":
        chart = _chart(cfg, "grid")
        if not chart.is_grid:
            raise ConfigError("conformal-perturbation needs a grid chart")
        p = cfg["perturbation"]
        seed = int(p.get("seed", cfg["seed"]))
        return random_metric(chart, p["amplitude"], int(p["mode"]), seed, conformal=True)
    g = read_field(cfg.path(cfg["metric_file"]))
    if g.rank != "sym-2-cov":
        raise ConfigError("metric_file must hold a sym-2-cov field")
    return g


def _weingarten(cfg, g, lam):
    from .io import read_field

    chart = g.chart
    n = chart.n
    spec = cfg["W"]
    kind = spec.get("type", "umbilical")
    eye = np.broadcast_to(np.eye(n), chart.grid_shape + (n, n))
    if kind == "umbilical":
        alpha = spec.get("alpha")
        if alpha is None:
            scal = np.asarray(scalar_curvature(g).data)
            mean = float(np.mean(scal))
            if np.max(np.abs(scal - mean), initial=0.0) > 1e-10 * max(1.0, abs(mean)):
                raise HypothesisError("umbilical data need constant scalar curvature")
            alpha = umbilical_alpha(mean, n, lam)
        return Field(chart, float(alpha) * eye, "endomorphism")
    if kind == "scalar":
        return Field(chart, float(spec.get("value", 0.0)) * eye, "endomorphism")
    if kind == "diagonal":
        vals = np.asarray(spec.get("values"), dtype=float)
        if vals.shape != (n,):
            raise ConfigError(f"diagonal W needs {n} values")
        return Field(chart, np.broadcast_to(np.diag(vals), eye.shape).copy(), "endomorphism")
    if kind == "killing":
        if chart.is_grid:
            raise ConfigError("killing W needs the round-sphere scenario")
        m = LeftInvariantMetric(*np.diag(g.data))
        if not m.is_round():
            raise HypothesisError("Killing check requires round metric")
        s = m.A
        sign = -1.0 if spec.get("chirality", cfg["chart"].get("chirality", "left")) == "left" else 1.0
        kappa = 0.5 * sign / math.sqrt(s)
        return Field(chart, 2 * kappa * eye, "endomorphism")
    if kind == "file":
        W = read_field(cfg.path(spec["path"]))
        if W.rank != "endomorphism":
            raise ConfigError("W file must hold an endomorphism field")
        return W
    raise ConfigError(f"unknown W type {kind!r}")


def build_state(cfg):
    """Initial :class:`MetricState` described by ``cfg``."""
    lam = float(cfg["lambda"])
    g = _metric(cfg)
    W = _weingarten(cfg, g, lam)
    if not g.chart.compatible(W.chart):
        raise ConfigError("metric and W snapshots live on different charts")
    return MetricState(g, W, lam)
