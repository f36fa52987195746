import math
import warnings

import numpy as np
import pytest

from cauchylab import Chart, Field, MetricState
from cauchylab.config import random_metric
from cauchylab.constraints import constraint_residual
from cauchylab.errors import PreconditionError
from cauchylab.evolution import evolution_rhs, evolve, monitor_propagation, propagation_convergence
from cauchylab.homogeneous import LeftInvariantMetric, evolve_homogeneous, su2_chart

from conftest import flat_state


def _round(W, lam, s=1.0):
    return MetricState.from_arrays(su2_chart(), s * np.eye(3), W * np.eye(3), lam)


def _quiet(fn, *a, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fn(*a, **kw)


def test_rhs_sphere_solution():
    t = 0.3
    gd, Wd = evolution_rhs(_round(math.tan(t), 3.0, s=math.cos(t) ** 2))
    assert np.max(np.abs(Wd.data - np.eye(3) / math.cos(t) ** 2)) <= 1e-12
    assert np.max(np.abs(gd.data + 2 * math.cos(t) * math.sin(t) * np.eye(3))) <= 1e-12


def test_rhs_cone_solution():
    t = 0.5
    _, Wd = evolution_rhs(_round(1 / (1 - t), 0.0, s=(1 - t) ** 2))
    assert np.max(np.abs(Wd.data - 4 * np.eye(3))) <= 1e-12


def test_rhs_flat_is_zero():
    gd, Wd = evolution_rhs(flat_state(Chart.grid(3, 8)))
    assert gd.sup() == 0.0 and Wd.sup() == 0.0


def test_cone_trajectory(cone_traj):
    assert cone_traj.status == "ok"
    exact = (1 - cone_traj.times)[:, None, None] ** 2 * np.eye(3)
    assert np.max(np.abs(cone_traj.g - exact)) <= 1e-8
    assert np.allclose(cone_traj.times[-1], 0.5)
    assert len(cone_traj) == 501


def test_flat_fixed_point():
    traj = evolve(flat_state(Chart.grid(3, 8)), 0.2, 1e-2)
    assert np.array_equal(traj.g, np.broadcast_to(np.eye(3), traj.g.shape))
    assert np.all(traj.W == 0)


def test_sphere_trajectory_to_one():
    traj = _quiet(evolve, _round(0.0, 3.0), 1.0, 1e-3)
    exact = np.cos(traj.times)[:, None, None] ** 2 * np.eye(3)
    assert np.max(np.abs(traj.g - exact)) <= 1e-8


def test_metric_equation_holds_along_trajectory(cone_traj):
    k = 200
    dt = cone_traj.dt
    gd = (cone_traj.g[k - 2] - 8 * cone_traj.g[k - 1] + 8 * cone_traj.g[k + 1] - cone_traj.g[k + 2]) / (12 * dt)
    assert np.max(np.abs(gd + 2 * cone_traj.g[k] @ cone_traj.W[k])) <= 1e-9


def test_rk4_order_on_cone():
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        traj = evolve_homogeneous(LeftInvariantMetric.round(), [1, 1, 1], 0.0, 0.5, dt)
        errs.append(np.max(np.abs(traj.g - (1 - traj.times)[:, None, None] ** 2 * np.eye(3))))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(14 <= r <= 18 for r in ratios), ratios


def test_backward_forward_consistency(cone_traj):
    end = cone_traj.state(len(cone_traj) - 1)
    back = evolve(end, -0.5, 1e-3)
    assert np.max(np.abs(back.g[-1] - np.eye(3))) <= 1e-7
    assert np.max(np.abs(back.W[-1] - np.eye(3))) <= 1e-7


def test_time_reversal_symmetry():
    fwd = _quiet(evolve, _round(0.0, 3.0), 0.5, 1e-3)
    bwd = _quiet(evolve, _round(0.0, 3.0), -0.5, 1e-3)
    assert np.max(np.abs(fwd.g - bwd.g)) <= 1e-12
    assert np.max(np.abs(fwd.W + bwd.W)) <= 1e-12


def test_constraint_preservation_on_cone(cone_traj):
    worst = max(
        max(r.f_sup, r.omega_sup)
        for r in (constraint_residual(cone_traj.state(k)) for k in range(0, len(cone_traj), 25))
    )
    assert worst <= 1e-8


def test_cone_past_singularity_degenerates():
    traj = evolve(_round(1.0, 0.0), 1.2, 1e-3)
    assert traj.status == "degenerate"
    assert 0.9 < traj.status_time <= 1.0
    assert np.all(np.isfinite(traj.g)) and np.all(np.isfinite(traj.W))
    assert "degenerated" in traj.message


def test_expanding_direction_is_reported_as_blow_up():
    # flat Kasner-type data: W_t = W_0 / (1 - t) and g_ii = (1 - t)^(2 w_i),
    # so the direction with w = -4 expands without bound as t -> 1; with a
    # coarse step the run stops while that direction dominates
    c = Chart.abelian(3)
    state = MetricState.from_arrays(c, np.eye(3), np.diag([-4.0, 2.0, 3.0]), 0.0)
    traj = _quiet(evolve, state, 2.0, 1e-2)
    assert traj.status == "blow-up"
    assert 0.7 < traj.status_time <= 1.0
    assert "blow-up" in traj.message
    assert np.all(np.isfinite(traj.g)) and np.all(np.isfinite(traj.W))


def test_evolve_warns_on_constraint_violation():
    with pytest.warns(UserWarning, match="constraint"):
        evolve(flat_state(Chart.abelian(3), W=1.0), 0.01, 1e-3)


def test_flat_identity_propagation_rate():
    traj = _quiet(evolve, flat_state(Chart.abelian(3), W=1.0), 0.01, 1e-4, backfill=10)
    rep = monitor_propagation(traj)
    k = rep.at(0.0)
    assert rep.times[k] == pytest.approx(0.0, abs=1e-15)
    assert float(rep.f[k]) == pytest.approx(3.0, abs=1e-12)
    assert abs(float(rep.f_rate[k]) - 18.0) <= 1e-6
    assert abs(float(rep.f_predicted[k]) - 18.0) <= 1e-12


def test_propagation_converges():
    _, orders = propagation_convergence(
        flat_state(Chart.abelian(3), W=1.0), 0.05, [4e-3, 2e-3, 1e-3], backfill=10
    )
    assert min(orders) >= 3.5


def test_propagation_of_cone_data(cone_traj):
    rep = monitor_propagation(cone_traj)
    assert np.max(np.abs(rep.f)) <= 1e-8
    assert np.max(np.abs(rep.omega)) <= 1e-8


def test_static_flat_propagation_is_zero():
    traj = evolve(flat_state(Chart.grid(2, 8)), 0.01, 1e-3)
    rep = monitor_propagation(traj)
    assert rep.sup_mismatch == 0.0


def test_monitor_needs_five_samples():
    traj = evolve(flat_state(Chart.abelian(3)), 0.003, 1e-3)
    with pytest.raises(PreconditionError):
        monitor_propagation(traj)


def test_grid_evolution_is_galerkin_truncated():
    c = Chart.grid(3, 16)
    g = random_metric(c, amplitude=0.05, mode=2, seed=42)
    W = Field(c, np.zeros(c.grid_shape + (3, 3)), "endomorphism")
    traj = _quiet(evolve, MetricState(g, W, 0.0), 0.02, 1e-3)
    assert traj.status == "ok"
    assert traj.kmax == 4
    S = np.einsum("...ij,...jk->...ik", traj.g, traj.W)
    spec = np.fft.fftn(S[-1] - S[0], axes=(0, 1, 2))
    ks = np.abs(np.fft.fftfreq(16, 1 / 16))
    high = (ks[:, None, None] > 4) | (ks[None, :, None] > 4) | (ks[None, None, :] > 4)
    assert np.max(np.abs(spec[high])) <= 1e-10
    assert np.max(np.abs(traj.g - np.swapaxes(traj.g, -1, -2))) == 0.0


def test_evolve_is_deterministic():
    a = evolve(_round(1.0, 0.0), 0.05, 1e-3)
    b = evolve(_round(1.0, 0.0), 0.05, 1e-3)
    assert np.array_equal(a.g, b.g) and np.array_equal(a.W, b.W)
