import numpy as np
import pytest
from numpy.testing import assert_allclose

from models.matrices import SymMatrix
from models.oscillator import ModulationProfile
from models.rigid_body import InertiaSpec, RigidBodyState
from models.trajectory import IntegratorConfig
from numerics.errors import PositiveDefinitenessViolation, SingularInertia
from numerics.linalg import random_positive_definite
from services.euler_top_service import (euler_rhs, hamiltonian, iterate_t_shift, lax_residual,
                                        modulated_flow, polynomial_shift_identity, probe_eigenvalues,
                                        random_skew,
                                        skew_from_vector, solve_omega, spectral_invariants,
                                        vector_from_skew)

SINE_MODULATION = ModulationProfile.sinusoidal(0.0, 0.3, 1.0)


@pytest.fixture
def tight():
    return IntegratorConfig(abs_tol=1e-10, rel_tol=1e-10)


def test_three_dimensional_top_is_the_classical_one():
    m = np.array([0.3, -1.2, 0.7])
    J = SymMatrix.diagonal([1.0, 2.0, 3.0])
    inertia = InertiaSpec(J)
    dM, _ = euler_rhs(RigidBodyState(skew_from_vector(m)), inertia)
    omega = vector_from_skew(solve_omega(skew_from_vector(m), J))
    assert_allclose(vector_from_skew(dM), np.cross(m, omega), atol=1e-14)


def test_omega_solves_the_sylvester_equation(rng):
    M = random_skew(4, rng)
    J = random_positive_definite(4, rng)
    omega = solve_omega(M, J).entries
    assert_allclose(omega @ J.entries + J.entries @ omega, M.entries, atol=1e-12)


def test_singular_inertia():
    with pytest.raises(SingularInertia):
        solve_omega(random_skew(2, np.random.default_rng(1)), SymMatrix.diagonal([0.0, 1.0]))


def test_hamiltonian_is_positive(rng):
    assert hamiltonian(random_skew(3, rng), SymMatrix.diagonal([1.0, 2.0, 3.0])) > 0


def test_three_dimensional_invariant_is_the_momentum_norm():
    invariants = spectral_invariants(skew_from_vector([1.0, 2.0, 2.0]), SymMatrix.identity(3))
    assert invariants[(0, 1)] == pytest.approx(-9.0)
    assert invariants.labels() == ['P0_l0_m1', 'P0_l1_m0']


def test_invariants_match_the_determinant(rng):
    M = random_skew(4, rng)
    J0 = random_positive_definite(4, rng)
    invariants = spectral_invariants(M, J0)
    J0_squared = J0.entries @ J0.entries
    for lam, mu in [(0.0, 0.0), (0.5, -1.0), (-1.5, 2.0)]:
        direct = np.linalg.det(M.entries + lam * J0_squared - mu * np.eye(4))
        assert invariants.evaluate(lam, mu) == pytest.approx(direct, rel=1e-9, abs=1e-9)


def test_lax_pair_reproduces_the_flow(rng):
    M = random_skew(4, rng)
    inertia = InertiaSpec(SymMatrix.diagonal([1.0, 2.0, 3.0, 4.0]), SINE_MODULATION)
    for t in (0.0, 0.2, 0.7):
        for lam in (0.0, 1.0, -2.0):
            assert lax_residual(M, inertia, t, lam) <= 1e-9


def test_probe_spectra_are_those_of_the_lax_matrix(rng):
    M = random_skew(3, rng)
    J0 = SymMatrix.diagonal([1.0, 2.0, 3.0])
    spectra = probe_eigenvalues(M, J0, [0.0, 1.0])
    # A real skew matrix has a purely imaginary spectrum
    assert_allclose(np.real(spectra[0]), 0.0, atol=1e-12)
    # trace(M + J0^2) = 1 + 4 + 9
    assert np.sum(spectra[1]).real == pytest.approx(14.0)


def test_shifted_polynomial_identity():
    rng = np.random.default_rng(7)
    for trial in range(20):
        n = 2 + trial % 4
        M = random_skew(n, rng)
        J0 = random_positive_definite(n, rng)
        f_value = rng.uniform(-0.5, 0.5)
        assert polynomial_shift_identity(M, J0, f_value) <= 1e-9


@pytest.mark.parametrize('n', [3, 4])
def test_modulated_top_keeps_its_invariants(n, rng, tight):
    inertia = InertiaSpec(SymMatrix.diagonal(np.arange(1.0, n + 1)), SINE_MODULATION)
    flow = modulated_flow(RigidBodyState(random_skew(n, rng)), inertia, 20.0, tight)
    assert flow.coefficient_drift <= 1e-7
    assert flow.probe_drift <= 1e-7
    assert flow.skewness <= 1e-10
    assert flow.periodicity_defect('hamiltonian', 1.0) <= 1e-7


def test_frame_stays_orthogonal(rng, tight):
    inertia = InertiaSpec(SymMatrix.diagonal([1.0, 2.0, 3.0]), SINE_MODULATION)
    flow = modulated_flow(RigidBodyState(random_skew(3, rng), X=np.eye(3)), inertia, 5.0, tight)
    assert flow.orthogonality <= 1e-8
    assert flow.final_state().X is not None


def test_unmodulated_energy_is_conserved(rng, tight):
    inertia = InertiaSpec(SymMatrix.diagonal([1.0, 2.0, 3.0]))
    flow = modulated_flow(RigidBodyState(random_skew(3, rng)), inertia, 10.0, tight)
    assert flow.relative_drift('hamiltonian') <= 1e-8


def test_period_map_preserves_invariants(rng):
    inertia = InertiaSpec(SymMatrix.diagonal([1.0, 2.0, 3.0]), SINE_MODULATION)
    orbit, drift = iterate_t_shift(inertia, random_skew(3, rng), 50, IntegratorConfig(abs_tol=1e-11, rel_tol=1e-11))
    assert len(orbit) == 51
    assert drift <= 5e-6


def test_modulation_leaving_positive_cone():
    with pytest.raises(PositiveDefinitenessViolation):
        InertiaSpec(SymMatrix.identity(3), ModulationProfile.sinusoidal(0.0, 2.0, 1.0))


def test_frame_must_be_orthogonal(rng):
    with pytest.raises(ValueError):
        RigidBodyState(random_skew(3, rng), X=2 * np.eye(3))
