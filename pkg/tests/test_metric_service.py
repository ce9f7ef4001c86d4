import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from models.quadric import Quadric
from numerics.errors import ChartSwitchError, DegenerateChartPoint
from services.metric_service import (GraphChart, affine_to_chart, chart_to_affine,
                                     closure_equation, compare_traces, equiv_metric_geodesic,
                                     points_at_infinity, projective_chart_metric,
                                     restricted_metric_signature, second_metric, trace_distance)


def _affine_samples(Q, count, rng):
    samples = []
    while len(samples) < count:
        x = rng.standard_normal(Q.ambient_dimension)
        if Q.value(x) <= 0 or abs(x[0]) < 1e-2:
            continue
        state = Q.geodesic_state(x, rng.standard_normal(Q.ambient_dimension))
        samples.append((state.x, state.xp))
    return samples


def test_second_metric_on_the_sphere_is_the_round_one():
    assert second_metric([0.6, 0.8, 0.0], [0.0, 0.0, 2.0], Quadric.sphere(3)) == pytest.approx(4.0)


class TestGraphChart:
    def test_embedding_inverts_the_chart(self, ellipsoid, rng):
        for x, _ in _affine_samples(ellipsoid, 10, rng):
            chart = GraphChart.best_for(x, ellipsoid)
            assert_allclose(chart.embed(chart.to_chart(x)), x, atol=1e-13)

    def test_jacobian_is_tangent(self, one_sheet, rng):
        for x, _ in _affine_samples(one_sheet, 10, rng):
            chart = GraphChart.best_for(x, one_sheet)
            J = chart.jacobian(chart.to_chart(x))
            assert_allclose(one_sheet.normal(x) @ J, 0.0, atol=1e-12)

    def test_pulled_back_metric(self, ellipsoid, rng):
        for x, v in _affine_samples(ellipsoid, 10, rng):
            chart = GraphChart.best_for(x, ellipsoid)
            u, du = chart.to_chart(x, v)
            assert du @ chart.metric(u) @ du == pytest.approx(second_metric(x, v, ellipsoid), rel=1e-12)

    def test_leaving_the_chart(self, ellipsoid):
        chart = GraphChart(ellipsoid, 0, 1.0)
        with pytest.raises(ChartSwitchError):
            chart.embed(np.array([1.0, 1.0]))


def test_second_geodesic_on_the_sphere_is_a_great_circle(cfg):
    Q = Quadric.sphere(3)
    geodesic = equiv_metric_geodesic(Q.geodesic_state([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), Q, math.pi, cfg)
    assert_allclose(geodesic.positions[-1], [-1.0, 0.0, 0.0], atol=1e-6)
    assert len(set(geodesic.charts)) > 1
    assert len(geodesic.to_trajectory()) == len(geodesic)


@pytest.mark.parametrize('quadric, x0', [
    ('ellipsoid', [1.0, 0.4, 0.2]),
    ('one_sheet', [1.0, 0.4, 0.2]),
    ('two_sheets', [1.5, 0.3, 0.2]),
])
def test_traces_agree(quadric, x0, request, cfg):
    Q = request.getfixturevalue(quadric)
    s0 = Q.geodesic_state(x0, [0.0, 1.0, -0.6])
    comparison = compare_traces(s0, Q, 3.0, cfg)
    assert comparison['trace_distance'] <= 1e-5
    assert comparison['parameter_defect'] <= 1e-6
    assert comparison['parameter_slope'] == pytest.approx(1.0, rel=1e-3)


def test_trace_distance_to_a_polyline():
    curve = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    assert trace_distance(np.array([[0.5, 0.1], [1.5, -0.2]]), curve) == pytest.approx(0.2)


class TestProjectiveChart:
    def test_chart_metric_matches_the_affine_metric(self, one_sheet, rng):
        for x, v in _affine_samples(one_sheet, 100, rng):
            y, dy = affine_to_chart(x, v)
            assert abs(closure_equation(y, one_sheet)) <= 1e-12 * max(1.0, float(np.dot(y, y)))
            affine = second_metric(x, v, one_sheet)
            assert projective_chart_metric(y, dy, one_sheet) == pytest.approx(affine, rel=1e-9)

    def test_chart_coordinates_convert_back(self, one_sheet):
        x, v = np.array([1.2, 0.3, 0.7]), np.array([0.1, -0.4, 0.2])
        back_x, back_v = chart_to_affine(*affine_to_chart(x, v))
        assert_allclose(back_x, x)
        assert_allclose(back_v, v)

    def test_metric_is_finite_at_infinity(self, one_sheet, rng):
        for y, dy in points_at_infinity(one_sheet, 20, rng):
            assert y[0] == 0.0
            assert abs(closure_equation(y, one_sheet)) <= 1e-12
            assert math.isfinite(projective_chart_metric(y, dy, one_sheet))

    def test_ellipsoids_have_no_points_at_infinity(self, ellipsoid, rng):
        with pytest.raises(ValueError):
            points_at_infinity(ellipsoid, 1, rng, max_tries=100)

    def test_affine_chart_excludes_the_first_hyperplane(self):
        with pytest.raises(DegenerateChartPoint):
            affine_to_chart([0.0, 1.0, 0.0])
        with pytest.raises(DegenerateChartPoint):
            chart_to_affine([0.0, 1.0, 0.0])


class TestSignatures:
    def test_one_sheet_at_infinity(self, one_sheet, rng):
        for y, _ in points_at_infinity(one_sheet, 5, rng):
            assert restricted_metric_signature(one_sheet, y=y) == (1, 1)

    def test_two_sheets_at_infinity(self, two_sheets, rng):
        for y, _ in points_at_infinity(two_sheets, 5, rng):
            assert restricted_metric_signature(two_sheets, y=y) == (0, 2)

    def test_ellipsoid_is_riemannian(self, ellipsoid):
        assert restricted_metric_signature(ellipsoid, x=[1.0, 0.0, 0.0]) == (2, 0)

    def test_exactly_one_point(self, ellipsoid):
        with pytest.raises(ValueError):
            restricted_metric_signature(ellipsoid)
