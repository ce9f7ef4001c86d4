import numpy as np
import pytest

from models.curve import BachetCurve, CurvePoint, rational_to_str, to_rational
from models.experiment import DriftReport, ExperimentConfig
from models.quadric import GeodesicState, NeumannState, Quadric
from models.torus import ExtendedTorusState, ToralAutomorphism
from numerics.errors import ConfigError
from services.catmap_service import hyperbolic_data

CONFIG_TOML = """
experiment = "bachet"
seed = 3

[parameters]
c = "-2"
start = "3,5"
steps = 2

[integrator]
method = "rk4_fixed"
dt = 0.005

[output]
format = "json"
"""


class TestExperimentConfig:
    def test_reads_toml(self):
        config = ExperimentConfig.from_toml(CONFIG_TOML)
        assert config.experiment == 'bachet'
        assert config.seed == 3
        assert config.parameters['start'] == '3,5'
        assert config.integrator_config().dt == 0.005
        assert config.output['format'] == 'json'

    def test_toml_round_trip(self):
        config = ExperimentConfig.from_toml(CONFIG_TOML)
        assert ExperimentConfig.from_toml(config.to_toml()) == config

    def test_syntax_error_reports_the_line(self):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_toml('experiment = "bachet"\nseed = = 1\n')
        assert info.value.line == 2

    def test_unknown_keys(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({'experiment': 'bachet', 'colour': 'red'})

    def test_missing_experiment(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({'seed': 1})

    def test_bad_integrator_table(self):
        with pytest.raises(ConfigError):
            ExperimentConfig('oscillator', integrator={'method': 'leapfrog'})
        with pytest.raises(ConfigError):
            ExperimentConfig('oscillator', integrator={'order': 4})

    def test_bad_output_format(self):
        with pytest.raises(ConfigError):
            ExperimentConfig('oscillator', output={'format': 'xml'})

    def test_output_directory(self):
        assert ExperimentConfig('oscillator').output_directory is None
        assert ExperimentConfig('oscillator', output={'directory': 'runs/a'}).output_directory == 'runs/a'
        with pytest.raises(ConfigError):
            ExperimentConfig('oscillator', output={'directory': 3})

    def test_overrides_win(self):
        config = ExperimentConfig.from_toml(CONFIG_TOML)
        changed = config.with_overrides(parameters={'steps': 3}, integrator={'abs_tol': 1e-9}, seed=9)
        assert changed.parameters == {'c': '-2', 'start': '3,5', 'steps': 3}
        assert changed.integrator['abs_tol'] == 1e-9
        assert changed.seed == 9
        assert config.parameters['steps'] == 2

    def test_hash_tracks_content(self):
        config = ExperimentConfig.from_toml(CONFIG_TOML)
        assert config.config_hash() == ExperimentConfig.from_dict(config.to_dict()).config_hash()
        assert config.config_hash() != config.with_overrides(seed=4).config_hash()

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.load(str(tmp_path / 'absent.toml'))


class TestDriftReport:
    def test_passes_only_when_every_row_does(self):
        report = DriftReport().add('energy', 1.0, 1e-12, 1e-8)
        assert report.passed
        report.add('action', 0.5, 1e-6, 1e-8)
        assert not report.passed
        assert [row.name for row in report.failures()] == ['action']

    def test_nan_drift_fails(self):
        assert not DriftReport().add('energy', 1.0, float('nan'), 1e-8).passed


class TestCurve:
    def test_rationals(self):
        assert to_rational('383/1000') == to_rational(383) / 1000
        assert rational_to_str(to_rational(-4)) == '-4'
        with pytest.raises(ValueError):
            to_rational(0.1)

    def test_point_dictionary(self):
        curve = BachetCurve(-2)
        point = curve.point('129/100', '383/1000')
        assert point.to_dict() == {'x': '129/100', 'y': '383/1000', 'infinity': False}
        assert CurvePoint.from_dict(curve, point.to_dict()) == point
        assert CurvePoint.from_dict(curve, curve.infinity().to_dict()).is_infinity

    def test_half_given_point(self):
        with pytest.raises(ValueError):
            CurvePoint(BachetCurve(1), to_rational(0), None)


class TestTorus:
    def test_state_reduces_coordinates(self):
        data = hyperbolic_data(ToralAutomorphism(2, 1, 1, 1))
        state = ExtendedTorusState(data, (1.25, -0.5), (1.0, 2.0))
        assert state.x == (0.25, 0.5)
        assert state.p_v == pytest.approx(2.0)

    def test_from_matrix(self):
        assert ToralAutomorphism.from_matrix([[2, 1], [1, 1]]) == ToralAutomorphism(2, 1, 1, 1)


class TestQuadric:
    @pytest.mark.parametrize('b, kind', [
        ([1.0, 2.0, 3.0], 'ellipsoid'),
        ([1.0, 2.0, -1.0], 'hyperboloid_one_sheet'),
        ([1.0, -2.0, -1.0], 'hyperboloid_two_sheets'),
        ([1.0, -1.0], 'hyperbola'),
        ([-1.0, -1.0, -1.0], 'empty'),
    ])
    def test_kind(self, b, kind):
        assert Quadric(b).kind == kind

    def test_rejects_zero_entries(self):
        with pytest.raises(ValueError):
            Quadric([1.0, 0.0, 2.0])

    def test_geodesic_state_lands_on_the_quadric(self, one_sheet):
        state = one_sheet.geodesic_state([2.0, 1.0, 1.0], [1.0, 1.0, 1.0])
        assert state.is_valid(one_sheet)

    def test_geodesic_state_needs_a_meeting_ray(self, one_sheet):
        with pytest.raises(ValueError):
            one_sheet.geodesic_state([0.0, 0.0, 1.0], [1.0, 0.0, 0.0])

    def test_dual_contains_the_normals(self, ellipsoid):
        x = ellipsoid.geodesic_state([1.0, 1.0, 1.0], [0.0, 1.0, 0.0]).x
        assert ellipsoid.dual().value(ellipsoid.normal(x)) == pytest.approx(1.0)

    def test_state_arrays(self):
        state = GeodesicState.from_array(np.arange(6.0), s=2.0)
        assert state.x.tolist() == [0.0, 1.0, 2.0]
        assert NeumannState([1.0, 0.0], [0.0, 1.0]).is_valid()
