import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import gamma

from models.quadric import GeodesicState, Quadric
from models.trajectory import IntegratorConfig
from numerics.errors import DegeneratePoint, KnoerrerUndefined
from services.quadrics_service import (central_projection, gauss_map, generator_line_state,
                                       hyperbolic_escape, integrate_geodesic, integrate_neumann,
                                       joachimsthal, knoerrer_start, knoerrer_transform,
                                       lagrange_multiplier, libration_period, neumann_energy,
                                       neumann_mu, neumann_residual, neumann_return_defect,
                                       neumann_state, psi0_series, return_time, tau_limit)

# tau(infinity) for the vertex geodesic of x^2 - y^2 = 1
HYPERBOLA_TAU_LIMIT = 0.25 * math.sqrt(math.pi) * gamma(0.25) / gamma(0.75)


def test_multiplier_on_the_circle():
    s = GeodesicState([1.0, 0.0], [0.0, 1.0])
    assert lagrange_multiplier(s, Quadric.sphere(2)) == -1.0


def test_multiplier_and_integral_on_an_ellipse():
    s = GeodesicState([1.0, 0.0], [0.0, 1.0])
    Q = Quadric([1.0, 4.0])
    assert lagrange_multiplier(s, Q) == -4.0
    assert joachimsthal(s, Q) == 4.0


def test_central_projection_lands_on_the_sphere():
    assert_allclose(central_projection([3.0, 0.0, -4.0]), [0.6, 0.0, -0.8])
    with pytest.raises(DegeneratePoint):
        central_projection([0.0, 0.0])


def test_multiplier_needs_a_normal():
    with pytest.raises(DegeneratePoint):
        lagrange_multiplier(GeodesicState([0.0, 0.0], [1.0, 0.0]), Quadric([1.0, 4.0]))


@pytest.mark.parametrize('quadric, x0', [
    ('ellipsoid', [1.0, 0.4, 0.2]),
    ('one_sheet', [1.0, 0.4, 0.2]),
    ('two_sheets', [1.5, 0.3, 0.2]),
])
def test_joachimsthal_is_conserved(quadric, x0, request, cfg):
    Q = request.getfixturevalue(quadric)
    s0 = Q.geodesic_state(x0, [0.0, 1.0, -0.6])
    flow = integrate_geodesic(s0, Q, 50.0, cfg)
    assert flow.joachimsthal_drift <= 1e-8
    assert flow.lambda_identity <= 1e-10
    assert flow.constraint_residual <= 1e-8
    assert flow.state(len(flow.s) - 1).is_valid(Q, 1e-8)


def test_great_circle(cfg):
    Q = Quadric.sphere(3)
    flow = integrate_geodesic(Q.geodesic_state([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), Q, math.pi, cfg)
    assert_allclose(flow.positions[-1], [-1.0, 0.0, 0.0], atol=1e-9)


def _ellipsoid_image(ellipsoid, cfg, samples):
    s0 = ellipsoid.geodesic_state([1.0, 0.4, 0.2], [0.0, 1.0, -0.6])
    flow = integrate_geodesic(s0, ellipsoid, 10.0, cfg, samples=samples)
    return knoerrer_transform(flow, ellipsoid)


def test_knoerrer_image_solves_the_neumann_system(ellipsoid, cfg):
    image = _ellipsoid_image(ellipsoid, cfg, samples=5001)
    assert image.regime == 'direct'
    assert neumann_residual(image) <= 1e-5
    assert np.max(np.abs(psi0_series(image, ellipsoid))) <= 1e-5
    assert all(image.state(i).is_valid(1e-9) for i in (0, len(image) // 2, len(image) - 1))


def test_knoerrer_residual_is_second_order(ellipsoid):
    tight = IntegratorConfig(abs_tol=1e-12, rel_tol=1e-12)
    coarse = neumann_residual(_ellipsoid_image(ellipsoid, tight, samples=501))
    fine = neumann_residual(_ellipsoid_image(ellipsoid, tight, samples=1001))
    assert 3.0 <= coarse / fine <= 5.0


def test_knoerrer_start_matches_the_image(ellipsoid, cfg):
    image = _ellipsoid_image(ellipsoid, cfg, samples=11)
    start = knoerrer_start(ellipsoid.geodesic_state([1.0, 0.4, 0.2], [0.0, 1.0, -0.6]), ellipsoid)
    assert_allclose(start.q, image.q[0], atol=1e-14)
    assert_allclose(start.qp, image.qp[0], atol=1e-12)
    assert_allclose(gauss_map([1.0, 0.0, 0.0], ellipsoid), [1.0, 0.0, 0.0])


def test_image_follows_the_integrated_neumann_orbit(ellipsoid, cfg):
    image = _ellipsoid_image(ellipsoid, cfg, samples=2001)
    flow = integrate_neumann(image.state(0), image.potential, image.tau[-1] - image.tau[0], cfg, samples=2)
    assert_allclose(flow.final_state().q, image.q[-1], atol=1e-5)


def test_generator_lines_have_no_image(one_sheet, cfg):
    s0 = generator_line_state(one_sheet)
    assert joachimsthal(s0, one_sheet) == pytest.approx(0.0, abs=1e-15)
    flow = integrate_geodesic(s0, one_sheet, 1.0, cfg, samples=11)
    with pytest.raises(KnoerrerUndefined):
        knoerrer_transform(flow, one_sheet)


def test_ellipsoids_have_no_generator_lines(ellipsoid):
    with pytest.raises(ValueError):
        generator_line_state(ellipsoid)


class TestNeumann:
    def test_multiplier_keeps_the_motion_on_the_sphere(self):
        # mu = <Bq, q> - |q'|^2
        assert neumann_mu([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [3.0, 2.0, 1.0]) == 2.0
        assert neumann_mu([0.0, 0.6, 0.8], [0.0, 0.0, 0.0], [1.0, 2.0, 3.0]) == pytest.approx(2.64)

    def test_energy_and_constraints(self, cfg):
        s0 = neumann_state([1.0, 0.2, 0.1], [0.0, 0.5, 0.3])
        flow = integrate_neumann(s0, [1.0, 2.0, 3.0], 50.0, cfg)
        assert flow.energy_drift <= 1e-8
        assert flow.constraint_consistency <= 1e-10
        assert flow.trajectory.drift('psi0') <= 1e-7
        assert flow.trajectory.invariants['energy'][0] == pytest.approx(
            neumann_energy(s0.q, s0.qp, [1.0, 2.0, 3.0]))

    @pytest.mark.parametrize('z', [-1.0, 0.5, 2.0])
    def test_shifting_the_potential_leaves_orbits_alone(self, z, cfg):
        s0 = neumann_state([1.0, 0.2, 0.1], [0.0, 0.5, 0.3])
        b = np.array([1.0, 2.0, 3.0])
        base = integrate_neumann(s0, b, 20.0, cfg, samples=101)
        shifted = integrate_neumann(s0, b - z, 20.0, cfg, samples=101)
        assert np.max(np.abs(shifted.trajectory.states - base.trajectory.states)) <= 1e-7

    def test_zero_potential_entries_skip_psi0(self, cfg):
        flow = integrate_neumann(neumann_state([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), [0.0, 1.0, 2.0], 1.0, cfg)
        assert 'psi0' not in flow.trajectory.invariants

    def test_free_motion_returns_after_a_great_circle(self, cfg):
        s0 = neumann_state([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        assert return_time(s0, [1.0, 1.0, 1.0], 8.0, cfg) == pytest.approx(2 * math.pi, abs=1e-8)
        assert neumann_return_defect(s0, [1.0, 1.0, 1.0], 2 * math.pi, cfg) <= 1e-8

    def test_no_return(self, cfg):
        s0 = neumann_state([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        with pytest.raises(ValueError):
            return_time(s0, [1.0, 1.0, 1.0], 3.0, cfg)


class TestTauLimit:
    def test_power_law_tail(self):
        s = np.geomspace(1.0, 1e4, 200)
        limit = tau_limit(s, np.zeros_like(s), 2.0 * s ** -3)
        assert limit.exponent == pytest.approx(3.0)
        assert limit.coefficient == pytest.approx(2.0)
        assert limit.tail == pytest.approx(1e-8)

    def test_divergent_tail(self):
        s = np.geomspace(1.0, 1e4, 200)
        with pytest.raises(ValueError):
            tau_limit(s, np.zeros_like(s), 1.0 / s)


@pytest.fixture(scope='module')
def hyperbola_escape():
    Q = Quadric([1.0, -1.0])
    s0 = Q.geodesic_state([1.0, 0.0], [0.0, 1.0])
    cfg = IntegratorConfig(abs_tol=1e-11, rel_tol=1e-11)
    return Q, s0, cfg, hyperbolic_escape(s0, Q, 1e4, cfg)


@pytest.mark.slow
def test_hyperbola_reaches_infinity_in_finite_time(hyperbola_escape):
    _, _, _, limit = hyperbola_escape
    assert abs(limit.exponent - 2.0) <= 1e-3
    assert 0 < limit.tail < 1e-3 * limit.value
    assert limit.value == pytest.approx(HYPERBOLA_TAU_LIMIT, abs=1e-6)


@pytest.mark.slow
def test_regularized_hyperbola_orbit_is_periodic(hyperbola_escape):
    Q, s0, cfg, limit = hyperbola_escape
    start = knoerrer_start(s0, Q)
    assert_allclose(start.q, [1.0, 0.0])
    assert_allclose(np.abs(start.qp), [0.0, 1.0])
    potential = Q.b if joachimsthal(s0, Q) > 0 else -Q.b
    assert neumann_return_defect(start, potential, 4 * limit.value, cfg) <= 1e-6


@pytest.mark.slow
def test_off_vertex_hyperbola_orbit_is_periodic():
    Q = Quadric([1.0, -1.0])
    s0 = Q.geodesic_state([math.sqrt(1.25), 0.5], [0.5, math.sqrt(1.25)])
    cfg = IntegratorConfig(abs_tol=1e-11, rel_tol=1e-11)
    period, forward, backward = libration_period(s0, Q, 1e4, cfg)
    # Every geodesic covers the whole branch, so the period does not depend on the start
    assert forward.value < HYPERBOLA_TAU_LIMIT < backward.value
    assert period == pytest.approx(4 * HYPERBOLA_TAU_LIMIT, abs=1e-5)
    potential = Q.b if joachimsthal(s0, Q) > 0 else -Q.b
    assert neumann_return_defect(knoerrer_start(s0, Q), potential, period, cfg) <= 1e-6
