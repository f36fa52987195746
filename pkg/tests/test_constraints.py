import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cauchylab import Chart, Field, MetricState
from cauchylab.config import band_limited, random_metric
from cauchylab.constraints import (
    ambient_ricci,
    constraint_residual,
    einstein_residual,
    umbilical_alpha,
)
from cauchylab.errors import HypothesisError, PreconditionError
from cauchylab.homogeneous import su2_chart
from cauchylab.state import sample_trajectory

from conftest import flat_state
from oracles import cone, sphere


def _round(W=0.0, lam=0.0, s=1.0):
    c = su2_chart()
    return MetricState.from_arrays(c, s * np.eye(3), W * np.eye(3), lam)


def test_flat_static_data_satisfy_constraints():
    r = constraint_residual(flat_state(Chart.grid(3, 8)))
    assert r.f_sup == 0.0 and r.omega_sup == 0.0
    assert r.satisfied()


def test_round_sphere_umbilic_data():
    r = constraint_residual(_round(W=1.0, lam=0.0))
    assert r.f_sup <= 1e-12 and r.omega_sup <= 1e-12


def test_flat_with_identity_W_violates_gauss():
    r = constraint_residual(flat_state(Chart.grid(3, 8), W=1.0))
    assert np.allclose(r.f.data, 3.0, rtol=0, atol=1e-14)
    assert r.omega_sup == 0.0
    assert not r.satisfied()
    d = r.as_dict()
    assert d["f_sup"] == pytest.approx(3.0) and d["H_min"] == pytest.approx(3.0)


@pytest.mark.parametrize(
    "scal,lam,alpha", [(6.0, 0.0, 1.0), (6.0, 3.0, 0.0), (0.0, 0.0, 0.0)]
)
def test_umbilical_alpha(scal, lam, alpha):
    assert umbilical_alpha(scal, 3, lam) == pytest.approx(alpha, abs=1e-15)


def test_umbilical_alpha_rejects_large_lambda():
    with pytest.raises(HypothesisError):
        umbilical_alpha(6.0, 3, 4.0)


def test_constant_umbilic_W_has_no_codazzi_defect(random_g16):
    c = random_g16.chart
    W = Field(c, 0.7 * np.broadcast_to(np.eye(3), c.grid_shape + (3, 3)), "endomorphism")
    r = constraint_residual(MetricState(random_g16, W, 0.0))
    assert r.omega_sup <= 1e-12


@pytest.mark.parametrize("scale", [0.5, 2.0, 3.3])
def test_scaling_equivariance(random_g32, scale):
    c = random_g32.chart
    rng = np.random.default_rng(5)
    w = band_limited(c, 2, rng, (3, 3))
    gw = np.einsum("...ij,...jk->...ik", random_g32.data, w)
    W = np.einsum("...ij,...jk->...ik", np.linalg.inv(random_g32.data), gw + np.swapaxes(gw, -1, -2))
    lam = 0.8
    r1 = constraint_residual(MetricState.from_arrays(c, random_g32.data, W, lam))
    r2 = constraint_residual(
        MetricState.from_arrays(c, scale**2 * random_g32.data, W / scale, lam / scale**2)
    )
    assert np.max(np.abs(r2.f.data - r1.f.data / scale**2)) <= 1e-10


def _cone_traj(t0, t1, dt=1e-3):
    return sample_trajectory(
        su2_chart(), lambda t: cone(t)[0] * np.eye(3), t0, t1, dt,
        W_of_t=lambda t: cone(t)[1] * np.eye(3),
    )


def _sphere_traj(t0, t1, dt=1e-3):
    return sample_trajectory(
        su2_chart(), lambda t: sphere(t)[0] * np.eye(3), t0, t1, dt, lam=3.0,
        W_of_t=lambda t: sphere(t)[1] * np.eye(3),
    )


def test_ambient_ricci_of_cone_vanishes():
    amb = ambient_ricci(_cone_traj(0.25, 0.35), 0.3)
    for part in (amb.nu_nu, amb.nu_x, amb.xy, amb.scal):
        assert part.sup() <= 1e-8


def test_ambient_ricci_of_sphere():
    amb = ambient_ricci(_sphere_traj(0.25, 0.35), 0.3)
    assert abs(float(amb.nu_nu.data) - 3.0) <= 1e-7
    assert np.max(np.abs(amb.xy.data - 3 * amb.g.data)) <= 1e-7
    assert amb.nu_x.sup() <= 1e-12


def test_gauss_identity_and_trace_identity():
    amb = ambient_ricci(_sphere_traj(0.1, 0.5), 0.3)
    assert abs(float(amb.gauss_lhs.data - amb.gauss_rhs.data)) <= 1e-9
    assert abs(float(amb.scal.data - amb.scal_from_trace.data)) <= 1e-9
    assert abs(float(amb.scal.data) - 12.0) <= 1e-7


def test_einstein_residual_of_exact_solutions():
    _, res = einstein_residual(_cone_traj(0.1, 0.5))
    assert np.max(res) <= 1e-7
    _, res = einstein_residual(_sphere_traj(0.1, 0.9))
    assert np.max(res) <= 1e-7


def test_einstein_residual_detects_wrong_lambda():
    _, res = einstein_residual(_sphere_traj(0.1, 0.3), lam=0.0)
    assert np.min(res) > 1.0


def test_ambient_ricci_needs_neighbours():
    traj = _cone_traj(0.0, 0.01)
    with pytest.raises(PreconditionError):
        ambient_ricci(traj, 0.0)


@settings(max_examples=10, deadline=None)
@given(st.floats(min_value=0.2, max_value=5.0), st.floats(min_value=-2.0, max_value=2.0))
def test_gauss_constraint_closed_form(s, w):
    # round metric s*sigma: Scal = 6/s; f = 1/2(2 lam - 6/s - 3 w^2 + 9 w^2)
    lam = 1.5
    r = constraint_residual(_round(W=w, lam=lam, s=s))
    expected = 0.5 * (2 * lam - 6 / s + 6 * w * w)
    assert float(r.f.data) == pytest.approx(expected, abs=1e-12 * max(1.0, abs(expected)))
    assert r.omega_sup <= 1e-14


def test_residual_norms_on_grid():
    c = Chart.grid(3, 16)
    g = random_metric(c, amplitude=0.05, mode=1, seed=1)
    W = Field(c, np.broadcast_to(np.eye(3), c.grid_shape + (3, 3)), "endomorphism")
    r = constraint_residual(MetricState(g, W, 0.0))
    assert r.f_l2 <= r.f_sup + 1e-15
    assert r.omega_l2 <= r.omega_sup + 1e-15
    assert math.isfinite(r.f_l2)
