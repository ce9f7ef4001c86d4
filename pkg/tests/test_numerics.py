import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from models.matrices import SkewMatrix, SymMatrix
from models.trajectory import IntegratorConfig, Trajectory
from numerics.errors import (InvalidSampling, NumericalBlowup, PositiveDefinitenessViolation,
                             ProjectionFailure, StepBudgetExceeded)
from numerics.integrator import Constraint, integrate, project_to_constraints
from numerics.linalg import random_positive_definite, sym_eigen, sym_sqrt_psd
from numerics.quadrature import cumulative_quadrature


def rotation_field(t, y):
    return np.array([y[1], -y[0]])


class TestMatrices:
    def test_symmetric_input_is_symmetrized(self):
        S = SymMatrix([[1.0, 2.0], [2.0 + 1e-14, 3.0]])
        assert S.entries[0, 1] == S.entries[1, 0]

    def test_non_symmetric_input_rejected(self):
        with pytest.raises(ValueError):
            SymMatrix([[1.0, 2.0], [0.0, 1.0]])

    def test_skew_diagonal_is_exactly_zero(self):
        A = SkewMatrix([[1e-15, 1.0], [-1.0, 0.0]])
        assert A.entries[0, 0] == 0.0
        assert_array_equal(A.entries, -A.entries.T)

    def test_entries_are_read_only(self):
        with pytest.raises(ValueError):
            SymMatrix.identity(2).entries[0, 0] = 5.0


class TestLinalg:
    def test_eigen_reconstructs(self, rng):
        S = random_positive_definite(5, rng)
        decomposition = sym_eigen(S)
        assert_allclose(decomposition.reconstruct(), S.entries, atol=1e-12)
        assert np.all(np.diff(decomposition.values) >= 0)

    def test_square_root_of_diagonal(self):
        root = sym_sqrt_psd(SymMatrix.diagonal([4.0, 9.0]))
        assert_allclose(root.entries, np.diag([2.0, 3.0]), atol=1e-14)

    def test_square_root_squares_back(self, rng):
        S = random_positive_definite(4, rng)
        root = sym_sqrt_psd(S).entries
        assert_allclose(root @ root, S.entries, atol=1e-12)

    def test_indefinite_matrix_reports_time(self):
        with pytest.raises(PositiveDefinitenessViolation) as info:
            sym_sqrt_psd(SymMatrix.diagonal([1.0, -0.5]), time=2.5)
        assert info.value.time == 2.5
        assert info.value.min_eigenvalue == pytest.approx(-0.5)


class TestIntegrator:
    def test_adaptive_circle_closes(self):
        trajectory = integrate(rotation_field, [0.0, 1.0], (0.0, 2 * math.pi),
                               IntegratorConfig(abs_tol=1e-12, rel_tol=1e-12))
        assert_allclose(trajectory.final_state, [0.0, 1.0], atol=1e-9)
        assert trajectory.steps > 0

    def test_samples_land_on_requested_times(self):
        times = np.linspace(0.0, 3.0, 7)
        trajectory = integrate(rotation_field, [1.0, 0.0], (0.0, 3.0), sample_times=times)
        assert_array_equal(trajectory.times, times)
        assert_allclose(trajectory.states[:, 0], np.cos(times), atol=1e-8)

    def test_rk4_is_fourth_order(self):
        def error(dt):
            cfg = IntegratorConfig(method='rk4_fixed', dt=dt)
            final = integrate(rotation_field, [1.0, 0.0], (0.0, 1.0), cfg).final_state
            return abs(final[0] - math.cos(1.0))

        ratio = error(0.02) / error(0.01)
        assert 12 < ratio < 20

    def test_step_budget(self):
        with pytest.raises(StepBudgetExceeded):
            integrate(rotation_field, [1.0, 0.0], (0.0, 100.0),
                      IntegratorConfig(method='rk4_fixed', dt=0.01, max_steps=5))

    def test_non_finite_field(self):
        with pytest.raises(NumericalBlowup) as info:
            integrate(lambda t, y: np.array([np.nan]), [1.0], (0.0, 1.0),
                      IntegratorConfig(method='rk4_fixed'))
        assert info.value.last_time == 0.0

    def test_backwards_span_rejected(self):
        with pytest.raises(InvalidSampling):
            integrate(rotation_field, [1.0, 0.0], (1.0, 0.0))

    def test_projection_keeps_circle(self):
        circle = Constraint(lambda y: float(y @ y - 1.0), lambda y: 2 * y, 'circle')
        trajectory = integrate(rotation_field, [1.0, 0.0], (0.0, 50.0),
                               IntegratorConfig(method='rk4_fixed', dt=0.1),
                               projector=lambda y: project_to_constraints(y, [circle]))
        radii = np.linalg.norm(trajectory.states, axis=1)
        assert np.max(np.abs(radii - 1.0)) < 1e-11


class TestProjection:
    circle = Constraint(lambda y: float(y @ y - 1.0), lambda y: 2 * y)

    def test_projects_onto_circle(self):
        projected = project_to_constraints([3.0, 4.0], [self.circle])
        assert_allclose(projected, [0.6, 0.8], atol=1e-12)

    def test_satisfied_input_unchanged(self):
        y = np.array([0.6, 0.8])
        assert_array_equal(project_to_constraints(y, [self.circle]), y)

    def test_projects_far_out_on_a_hyperbola(self):
        hyperbola = Constraint(lambda y: float(y[0] ** 2 - y[1] ** 2 - 1.0),
                               lambda y: np.array([2 * y[0], -2 * y[1]]))
        on_curve = np.array([np.cosh(14.0), np.sinh(14.0)])
        off_curve = on_curve + np.array([1e-3, 0.0])
        # x^2 - y^2 cannot get below ~1e-5 absolute at |y| ~ 1e6
        assert abs(hyperbola.value(off_curve)) > 100.0
        projected = project_to_constraints(off_curve, [hyperbola])
        scale = np.linalg.norm(hyperbola.gradient(projected)) * np.linalg.norm(projected)
        assert abs(hyperbola.value(projected)) <= 1e-12 * scale
        assert np.linalg.norm(projected - off_curve) <= 1e-8 * np.linalg.norm(on_curve)

    def test_unsatisfiable_constraint(self):
        impossible = Constraint(lambda y: float(y[0] ** 2 + 1.0), lambda y: np.array([2 * y[0]]))
        with pytest.raises(ProjectionFailure) as info:
            project_to_constraints([1.0], [impossible])
        assert info.value.iterations == 20


class TestQuadrature:
    def test_linear_integrand_is_exact(self):
        times = np.array([0.0, 0.3, 1.0, 2.5])
        _, G = cumulative_quadrature(times, 2 * times + 1)
        assert_allclose(G, times ** 2 + times, atol=1e-12)

    def test_non_monotone_times(self):
        with pytest.raises(InvalidSampling):
            cumulative_quadrature([0.0, 2.0, 1.0], [1.0, 1.0, 1.0])

    def test_mismatched_shapes(self):
        with pytest.raises(InvalidSampling):
            cumulative_quadrature([0.0, 1.0], [1.0])


class TestTrajectory:
    def test_invariant_columns_and_csv(self):
        trajectory = Trajectory([0.0, 0.5], [[1.0, 2.0], [3.0, 4.0]], labels=['p', 'q'])
        with_energy = trajectory.with_invariant('energy', [1.0, 1.25])
        assert 'energy' not in trajectory.invariants
        assert with_energy.drift('energy') == pytest.approx(0.25)
        lines = with_energy.to_csv('t').splitlines()
        assert lines[0] == 't,p,q,energy'
        assert lines[2] == '0.5,3,4,1.25'

    def test_config_round_trip(self):
        cfg = IntegratorConfig(method='rk4_fixed', dt=0.05)
        assert IntegratorConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
        assert cfg.replace(dt=0.1).dt == 0.1

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            IntegratorConfig(method='euler')
