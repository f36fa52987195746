import warnings

import numpy as np
import pytest

from cauchylab import Chart, Field, MetricState
from cauchylab.config import random_metric
from cauchylab.homogeneous import LeftInvariantMetric, evolve_homogeneous


@pytest.fixture(scope="session")
def round_sphere():
    return LeftInvariantMetric.round(1.0).field("left")


@pytest.fixture(scope="session")
def cone_traj():
    """Criterion-1 trajectory ``(1 - t)^2 sigma``, dt = 1e-3 to T = 0.5."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return evolve_homogeneous(LeftInvariantMetric.round(), [1, 1, 1], 0.0, 0.5, 1e-3)


@pytest.fixture(scope="session")
def sphere_traj():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return evolve_homogeneous(LeftInvariantMetric.round(), [0, 0, 0], 3.0, 0.9, 1e-3)


@pytest.fixture(scope="session")
def grid16():
    return Chart.grid(3, 16)


@pytest.fixture(scope="session")
def random_g16(grid16):
    return random_metric(grid16, amplitude=0.1, mode=2, seed=42)


def flat_state(chart, W=0.0, lam=0.0):
    n = chart.n
    eye = np.broadcast_to(np.eye(n), chart.grid_shape + (n, n))
    return MetricState(
        Field(chart, eye, "sym-2-cov"), Field(chart, W * eye, "endomorphism"), lam
    )


@pytest.fixture(scope="session")
def random_g32():
    return random_metric(Chart.grid(3, 32), amplitude=0.1, mode=2, seed=42)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
