import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cauchylab import Chart, Field
from cauchylab.clifford import (
    CliffordRep,
    SpinorField,
    clifford_contraction,
    dirac,
    extend_parallel,
    gks_implies_constraints,
    gks_residual,
    killing_constant,
    spin_curvature_residual,
    spinor_derivative,
    stress_energy_from_spinor,
)
from cauchylab.config import band_limited, random_metric
from cauchylab.errors import PreconditionError
from cauchylab.evolution import evolve
from cauchylab import MetricState
from cauchylab.homogeneous import LeftInvariantMetric

from conftest import flat_state


def _eye_field(chart, scale=1.0):
    return Field(chart, scale * np.broadcast_to(np.eye(3), chart.grid_shape + (3, 3)), "endomorphism")


def _const_spinor(chart, psi=(1.0, 0.0)):
    return SpinorField(chart, np.broadcast_to(np.asarray(psi, complex), chart.grid_shape + (len(psi),)))


def _unit_spinor_field(chart, seed=42, amplitude=0.5):
    """Pointwise-rotated unit spinor with band-limited angles."""
    rng = np.random.default_rng(seed)
    th = amplitude * band_limited(chart, 1, rng)
    ph = amplitude * band_limited(chart, 1, rng)
    return SpinorField(chart, np.stack([np.cos(th), np.sin(th) * np.exp(1j * ph)], axis=-1))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_clifford_relations_exact(n):
    rep = CliffordRep(n)
    g = rep.gammas
    for i in range(n):
        for j in range(n):
            anti = g[i] @ g[j] + g[j] @ g[i]
            assert np.array_equal(anti, -2.0 * (i == j) * np.eye(rep.dim))
    assert rep.relation_defect() == 0.0


def test_volume_element_n3():
    assert np.array_equal(CliffordRep(3).volume_element(), np.eye(2))


def test_rejects_large_dimension():
    with pytest.raises(PreconditionError):
        CliffordRep(5)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_clifford_multiplication_is_isometric(seed):
    rng = np.random.default_rng(seed)
    rep = CliffordRep(3)
    X = rng.standard_normal(3)
    psi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    lhs = np.linalg.norm(rep.multiply(X, psi))
    assert lhs == pytest.approx(np.linalg.norm(X) * np.linalg.norm(psi), rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_trace_identity_symmetric_A(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 3))
    m = np.eye(3) + 0.3 * (a @ a.T)
    g = Field(Chart.abelian(3), m, "sym-2-cov")
    s = rng.standard_normal((3, 3))
    A = np.linalg.solve(m, s + s.T)  # g-symmetric
    psi = SpinorField(g.chart, rng.standard_normal(2) + 1j * rng.standard_normal(2))
    out = clifford_contraction(psi, Field(g.chart, A, "endomorphism"), g).psi
    assert np.max(np.abs(out + np.trace(A) * psi.psi)) <= 1e-12 * max(1.0, np.max(np.abs(A)))


def test_trace_identity_identity_endomorphism():
    c = Chart.grid(3, 8)
    g = random_metric(c, amplitude=0.05, mode=1, seed=2)
    psi = _unit_spinor_field(c)
    out = clifford_contraction(psi, _eye_field(c), g).psi
    assert np.max(np.abs(out + 3 * psi.psi)) <= 1e-12


def test_constant_spinor_is_parallel_on_flat_torus():
    c = Chart.grid(3, 8)
    g = Field(c, _eye_field(c).data, "sym-2-cov")
    psi = _const_spinor(c)
    assert np.max(np.abs(spinor_derivative(psi, g))) == 0.0
    assert np.max(np.abs(dirac(psi, g).psi)) == 0.0
    assert gks_residual(psi, _eye_field(c, 0.0), g)[1] == 0.0
    field, sup = gks_residual(psi, _eye_field(c), g)
    assert np.allclose(field, 0.5, rtol=0, atol=1e-15) and sup == pytest.approx(0.5)


def test_left_invariant_spinor_is_killing(round_sphere):
    rep = CliffordRep(3)
    for psi in ([1, 0], [0, 1], [0.6, 0.8j]):
        sp = SpinorField(round_sphere.chart, psi)
        nab = spinor_derivative(sp, round_sphere)
        want = -0.5 * np.einsum("ast,t->as", rep.gammas, sp.psi)
        assert np.max(np.abs(nab - want)) <= 1e-15
        assert np.max(np.abs(dirac(sp, round_sphere).psi - 1.5 * sp.psi)) <= 1e-12
        assert gks_residual(sp, -np.eye(3), round_sphere)[1] <= 1e-12


def test_killing_constant_both_chiralities():
    for chir, want in (("left", -0.5), ("right", 0.5)):
        g = LeftInvariantMetric.round().field(chir)
        k, r = killing_constant(SpinorField(g.chart, [1, 0]), g)
        assert k == pytest.approx(want, abs=1e-12) and r <= 1e-12
        D = dirac(SpinorField(g.chart, [1, 0]), g).psi
        assert np.max(np.abs(D + 3 * want * np.array([1, 0]))) <= 1e-12


def test_derivative_is_metric_compatible():
    c = Chart.grid(3, 32)
    g = random_metric(c, amplitude=0.05, mode=1, seed=4)
    psi = _unit_spinor_field(c, seed=1)
    phi = _unit_spinor_field(c, seed=2)
    from cauchylab.clifford import orthonormal_frame
    from cauchylab.tensor import spectral_derivative

    E = orthonormal_frame(g)
    inner = np.real(np.sum(np.conj(psi.psi) * phi.psi, axis=-1))
    d = np.stack([spectral_derivative(c, inner, j) for j in range(3)], axis=-1)
    lhs = np.einsum("...ja,...j->...a", E, d)
    npsi, nphi = spinor_derivative(psi, g), spinor_derivative(phi, g)
    rhs = np.real(
        np.einsum("...as,...s->...a", np.conj(npsi), phi.psi)
        + np.einsum("...s,...as->...a", np.conj(psi.psi), nphi)
    )
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_unit_spinor_derivative_is_orthogonal():
    c = Chart.grid(3, 32)
    g = random_metric(c, amplitude=0.05, mode=1, seed=4)
    psi = _unit_spinor_field(c, seed=3)
    nab = spinor_derivative(psi, g)
    assert np.max(np.abs(np.real(np.einsum("...as,...s->...a", np.conj(nab), psi.psi)))) <= 1e-10


def test_stress_energy_of_killing_spinor(round_sphere):
    se = stress_energy_from_spinor(SpinorField(round_sphere.chart, [1, 0]), round_sphere)
    assert np.max(np.abs(se.A + 0.5 * np.eye(3))) <= 1e-12
    assert se.symmetry_defect <= 1e-12 and se.reconstruction <= 1e-12
    assert np.allclose(se.W, -np.eye(3))


def test_stress_energy_of_parallel_spinor():
    c = Chart.grid(3, 8)
    g = Field(c, _eye_field(c).data, "sym-2-cov")
    se = stress_energy_from_spinor(_const_spinor(c), g)
    assert np.max(np.abs(se.A)) == 0.0


def test_stress_energy_needs_eigenspinor():
    c = Chart.grid(3, 16)
    g = Field(c, _eye_field(c).data, "sym-2-cov")
    se = stress_energy_from_spinor(_unit_spinor_field(c, seed=42), g)
    assert se.symmetry_defect > 0.01


def test_stress_energy_preconditions(round_sphere):
    with pytest.raises(PreconditionError, match="unit length"):
        stress_energy_from_spinor(SpinorField(round_sphere.chart, [2, 0]), round_sphere)


def test_gks_implies_constraints_on_sphere(round_sphere):
    r = gks_implies_constraints(SpinorField(round_sphere.chart, [1, 0]), -np.eye(3), round_sphere)
    assert abs(r.lam) <= 1e-10 and r.f_sup <= 1e-10 and r.omega_sup <= 1e-10
    assert r.ric1_residual <= 1e-8


def test_gks_implies_constraints_right_model():
    g = LeftInvariantMetric.round().field("right")
    r = gks_implies_constraints(SpinorField(g.chart, [0, 1]), np.eye(3), g)
    assert abs(r.lam) <= 1e-10 and r.ric1_residual <= 1e-8


def test_gks_implies_constraints_flat():
    c = Chart.grid(3, 8)
    g = Field(c, _eye_field(c).data, "sym-2-cov")
    r = gks_implies_constraints(_const_spinor(c), _eye_field(c, 0.0), g)
    assert r.lam == 0.0 and r.f_sup == 0.0 and r.ric1_residual == 0.0


def test_gks_precondition_enforced(round_sphere):
    with pytest.raises(PreconditionError, match="generalized Killing"):
        gks_implies_constraints(SpinorField(round_sphere.chart, [1, 0]), np.eye(3), round_sphere)


def test_gks_residual_needs_symmetric_W(round_sphere):
    with pytest.raises(PreconditionError, match="symmetric"):
        gks_residual(SpinorField(round_sphere.chart, [1, 0]), np.triu(np.ones((3, 3))), round_sphere)


def test_spin_curvature_identity():
    c = Chart.grid(3, 8)
    g = Field(c, _eye_field(c).data, "sym-2-cov")
    assert spin_curvature_residual(_const_spinor(c), g) == 0.0
    for chir in ("left", "right"):
        s = LeftInvariantMetric.round().field(chir)
        assert spin_curvature_residual(SpinorField(s.chart, [0.6, 0.8]), s) <= 1e-10
    b = LeftInvariantMetric(1.0, 2.0, 3.0).field()
    assert spin_curvature_residual(SpinorField(b.chart, [1, 0]), b) <= 1e-12


def test_spin_curvature_on_conformal_torus():
    c = Chart.grid(3, 32)
    g = random_metric(c, amplitude=0.1, mode=1, seed=42, conformal=True)
    assert spin_curvature_residual(_unit_spinor_field(c), g) <= 1e-7


def test_gks_has_constant_length(round_sphere):
    # invariant spinors on the frame chart: length is constant by construction
    sp = SpinorField(round_sphere.chart, [0.6, 0.8j])
    assert abs(float(sp.norm()) - 1.0) <= 1e-15


def test_parallel_extension_on_flat_product():
    c = Chart.abelian(3)
    traj = evolve(flat_state(c), 0.02, 1e-3)
    ext = extend_parallel(SpinorField(c, [1, 0]), traj)
    assert np.max(ext.a) == 0.0
    assert ext.restriction_residual == 0.0
    V = ext.intertwiner
    assert np.allclose(V.conj().T @ V, np.eye(2))


def test_parallel_extension_of_killing_spinor(cone_traj):
    # the right-invariant spinor carries W = +Id, i.e. the cone (1 - t)^2
    g = LeftInvariantMetric.round().field("right")
    import warnings

    from cauchylab.homogeneous import evolve_homogeneous

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        traj = evolve_homogeneous(LeftInvariantMetric.round(), [1, 1, 1], 0.0, 0.5, 1e-3, chirality="right")
    ext = extend_parallel(SpinorField(g.chart, [1, 0]), traj)
    assert np.max(ext.a) <= 1e-6
    assert ext.restriction_residual <= 1e-8
    assert ext.times[-1] == pytest.approx(0.5)


def test_parallel_extension_preconditions(cone_traj):
    psi = SpinorField(cone_traj.chart, [1, 0])  # left spinor is not a GKS for W = +Id
    with pytest.raises(PreconditionError, match="generalized Killing"):
        extend_parallel(psi, cone_traj)
    ext = extend_parallel(psi, cone_traj, strict=False)
    assert ext.a[0] >= 0.5


def test_parallel_extension_needs_ricci_flat():
    g = LeftInvariantMetric.round().field()
    traj = evolve(MetricState(g, Field(g.chart, np.zeros((3, 3)), "endomorphism"), 3.0), 0.05, 1e-3)
    with pytest.raises(PreconditionError, match="Ricci-flat"):
        extend_parallel(SpinorField(g.chart, [1, 0]), traj)


def test_spinor_shape_checked(round_sphere):
    from cauchylab.errors import RankMismatchError

    with pytest.raises(RankMismatchError):
        SpinorField(round_sphere.chart, [1, 0, 0])
    with pytest.raises(PreconditionError):
        SpinorField(round_sphere.chart, [np.nan, 0])
