import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cauchylab import Chart, Field, MetricState
from cauchylab.config import random_metric
from cauchylab.errors import PreconditionError
from cauchylab.evolution import evolve
from cauchylab.homogeneous import su2_chart
from cauchylab.jets import (
    JetSeries,
    TruncatedSeries,
    formal_solution,
    jet_einstein_residual,
    series_algebra,
)

from conftest import flat_state


def _round(W, lam):
    return MetricState.from_arrays(su2_chart(), np.eye(3), W * np.eye(3), lam)


def test_invert_geometric_series():
    s = series_algebra(TruncatedSeries.from_list([1, -2, 0, 0, 0]), op="invert")
    assert np.array_equal(s.coeffs, [1, 2, 4, 8, 16])


def test_multiply_binomials():
    a = TruncatedSeries.from_list([1, 1, 0])
    b = TruncatedSeries.from_list([1, -1, 0])
    assert np.array_equal(series_algebra(a, b, op="mul").coeffs, [1, 0, -1])
    assert np.array_equal(series_algebra(a, b, op="add").coeffs, [2, 0, 0])


def test_invert_matrix_series():
    eye = np.eye(3)
    g = TruncatedSeries(np.stack([eye, -2 * eye, eye, 0 * eye]), matrix=True)
    inv = series_algebra(g, op="invert")
    for k, want in enumerate([1, 2, 3, 4]):
        assert np.max(np.abs(inv.coeffs[k] - want * eye)) <= 1e-15
    tr = series_algebra(inv, op="trace")
    assert np.allclose(tr.coeffs, [3, 6, 9, 12])


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1), st.integers(min_value=1, max_value=6))
def test_invert_is_right_inverse(seed, K):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((K + 1, 3, 3))
    a[0] = np.eye(3) + 0.2 * a[0]
    s = TruncatedSeries(a, matrix=True)
    prod = series_algebra(s, series_algebra(s, op="invert"), op="mul").coeffs
    want = np.zeros_like(prod)
    want[0] = np.eye(3)
    assert np.max(np.abs(prod - want)) <= 1e-12 * max(1.0, np.max(np.abs(a))) ** (K + 1)


def test_series_errors():
    a = TruncatedSeries.from_list([1, 2])
    with pytest.raises(PreconditionError, match="order mismatch"):
        series_algebra(a, TruncatedSeries.from_list([1, 2, 3]), op="mul")
    with pytest.raises(PreconditionError, match="singular"):
        series_algebra(TruncatedSeries.from_list([0, 1]), op="invert")
    with pytest.raises(PreconditionError):
        series_algebra(a, op="trace")


def test_series_evaluate():
    s = TruncatedSeries.from_list([1, -2, 1])
    assert s.evaluate(0.3) == pytest.approx(0.49)


def test_cone_jet():
    jet = formal_solution(_round(1.0, 0.0), 5)
    for k, want in enumerate([1, -2, 1, 0, 0, 0]):
        assert np.max(np.abs(jet.coefficient(k).data - want * np.eye(3))) <= 1e-10


def test_sphere_jet():
    jet = formal_solution(_round(0.0, 3.0), 4)
    for k, want in enumerate([1, 0, -1, 0, 1 / 3]):
        assert np.max(np.abs(jet.coefficient(k).data - want * np.eye(3))) <= 1e-10


def test_flat_jet_vanishes():
    jet = formal_solution(flat_state(Chart.grid(3, 8)), 6)
    assert np.all(jet.coeffs[1:] == 0)
    assert jet_einstein_residual(jet, 4).max_norm() == 0.0


def test_first_coefficient_from_cauchy_data():
    c = Chart.grid(3, 8)
    g = random_metric(c, amplitude=0.05, mode=1, seed=3)
    W = Field(c, 0.3 * np.broadcast_to(np.eye(3), c.grid_shape + (3, 3)), "endomorphism")
    jet = formal_solution(MetricState(g, W, 0.0), 3)
    assert np.max(np.abs(jet.coefficient(1).data + 0.6 * g.data)) <= 1e-15


def test_cone_jet_residual():
    res = jet_einstein_residual(formal_solution(_round(1.0, 0.0), 5), 3)
    assert res.order == 3
    assert res.max_norm() <= 1e-10


def test_constraint_violating_jet_residual():
    jet = formal_solution(flat_state(Chart.grid(3, 8), W=1.0), 6)
    res = jet_einstein_residual(jet, 2)
    assert np.max(res.tangential) <= 1e-10
    assert np.max(res.mixed) <= 1e-10
    assert res.nu_nu[0] == pytest.approx(6.0, abs=1e-12)
    assert res.gauss[0] == pytest.approx(6.0, abs=1e-12)  # = 2 f with f = 3


def test_jet_is_deterministic_and_truncation_stable():
    state = _round(1.0, 0.0)
    a = formal_solution(state, 6)
    b = formal_solution(state, 6)
    assert np.array_equal(a.coeffs, b.coeffs)
    long = formal_solution(state, 8)
    assert np.array_equal(long.coeffs[:7], a.coeffs)
    assert np.array_equal(long.truncate(6).coeffs, a.coeffs)


def test_grid_jet_truncation_stable():
    c = Chart.grid(3, 8)
    g = random_metric(c, amplitude=0.05, mode=1, seed=9)
    W = Field(c, np.zeros(c.grid_shape + (3, 3)), "endomorphism")
    state = MetricState(g, W, 0.0)
    assert np.array_equal(formal_solution(state, 5).coeffs[:4], formal_solution(state, 3).coeffs)


def test_jet_matches_evolution():
    state = _round(1.0, 0.0)
    jet = formal_solution(state, 8)
    traj = evolve(state, 0.1, 1e-4)
    worst = max(
        np.max(np.abs(jet.evaluate(t).data - traj.g[k]))
        for k, t in enumerate(traj.times)
    )
    assert worst <= 1e-8


def test_jet_order_checks():
    with pytest.raises(PreconditionError):
        formal_solution(_round(1.0, 0.0), 1)
    jet = formal_solution(_round(1.0, 0.0), 4)
    with pytest.raises(PreconditionError):
        jet_einstein_residual(jet, 3)
    with pytest.raises(PreconditionError):
        JetSeries(jet.chart, np.zeros((3, 2, 2)))
