"""
Experiment registry and runner.

Each experiment turns a parameter dictionary into a DriftReport plus
optional data (a trajectory or a Bachet chain). Parameters start from the
experiment's DEFAULTS, then the config file, then command-line overrides.
"""
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from models.curve import BachetCurve, rational_to_str
from models.experiment import DriftReport, ExperimentConfig
from models.matrices import SymMatrix
from models.oscillator import ModulationProfile, OscillatorState
from models.quadric import Quadric
from models.rigid_body import InertiaSpec, RigidBodyState
from models.torus import ToralAutomorphism
from models.trajectory import IntegratorConfig, Trajectory
from numerics.errors import ConfigError, ExperimentError, IntegrableError
from services import (bachet_service, catmap_service, euler_top_service, metric_service,
                      modulation_service, quadrics_service)
from services.bachet_service import BachetChain, chain_to_json
from services.report_service import report_render

logger = logging.getLogger(__name__)


class ExperimentOutcome:
    # Report plus the data files of one run

    def __init__(self, report: DriftReport, trajectory: Optional[Trajectory] = None,
                 time_label: str = 't', chain: Optional[BachetChain] = None, steps: int = 0):
        self.report = report
        self.trajectory = trajectory
        self.time_label = time_label
        self.chain = chain
        self.steps = steps

    @property
    def passed(self) -> bool:
        return self.report.passed

    def files(self) -> Dict[str, bytes]:
        # Everything is rendered before anything touches the disk
        files = {'report.json': report_render(self.report, 'json')}
        if self.trajectory is not None:
            files['trajectory.csv'] = self.trajectory.to_csv(self.time_label).encode('utf-8')
        if self.chain is not None:
            files['chain.json'] = (chain_to_json(self.chain) + '\n').encode('utf-8')
        return files


class Experiment:
    def __init__(self, name: str, runner: Callable, defaults: Dict[str, Any], description: str):
        self.name = name
        self.runner = runner
        self.defaults = defaults
        self.description = description

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'description': self.description, 'defaults': dict(self.defaults)}


REGISTRY: Dict[str, Experiment] = {}


def experiment(name: str, defaults: Dict[str, Any]):
    # Registers the decorated runner under `name`
    def register(runner: Callable) -> Callable:
        REGISTRY[name] = Experiment(name, runner, defaults, (runner.__doc__ or '').strip())
        return runner
    return register


def _vector(value) -> np.ndarray:
    return np.array([float(Fraction(v)) if isinstance(v, str) else float(v) for v in value])


# Experiments


@experiment('oscillator', {
    'profile': {'kind': 'sinusoidal', 'mean': 1.0, 'amplitude': 0.3, 'period': 2 * math.pi},
    'p0': 1.0, 'q0': 0.0, 't_end': 100.0, 'samples': 1001,
})
def run_oscillator(params: Dict[str, Any], cfg: IntegratorConfig, rng: np.random.Generator) -> ExperimentOutcome:
    """Modulated oscillator: action and phase-versus-tau drift."""
    profile = ModulationProfile.from_dict(params['profile'])
    s0 = OscillatorState(float(params['p0']), float(params['q0']))
    flow = modulation_service.oscillator_flow(s0, profile, float(params['t_end']), cfg,
                                              samples=int(params['samples']))
    report = DriftReport()
    report.add('action', modulation_service.oscillator_action(s0), flow.action_drift, 1e-8)
    report.add('phase_offset', 0.0, flow.phase_drift, 1e-6)
    report.update_metadata(
        profile=profile.name,
        standard_form_action_drift=modulation_service.standard_form_action_drift(
            s0, profile, float(params['t_end']), cfg))
    return ExperimentOutcome(report, flow.trajectory, 't', steps=flow.trajectory.steps)


def _inertia(params: Dict[str, Any]) -> InertiaSpec:
    n = int(params['n'])
    J0 = SymMatrix.diagonal(params.get('j0') or list(range(1, n + 1)))
    modulation = ModulationProfile.sinusoidal(0.0, float(params['amplitude']), float(params['period']))
    return InertiaSpec(J0, modulation)


@experiment('euler-top', {'n': 3, 'amplitude': 0.3, 'period': 1.0, 't_end': 20.0, 'samples': 201})
def run_euler_top(params: Dict[str, Any], cfg: IntegratorConfig, rng: np.random.Generator) -> ExperimentOutcome:
    """Modulated Euler top: spectral invariants and Hamiltonian periodicity."""
    inertia = _inertia(params)
    M0 = euler_top_service.random_skew(inertia.n, rng)
    flow = euler_top_service.modulated_flow(RigidBodyState(M0), inertia, float(params['t_end']), cfg,
                                            samples=int(params['samples']))
    invariants = euler_top_service.spectral_invariants(M0, inertia.J0)
    report = DriftReport()
    report.add('spectral_coefficients', float(np.max(np.abs(invariants.as_vector()), initial=0.0)),
               flow.coefficient_drift, 1e-7)
    report.add('probe_eigenvalues', 0.0, flow.probe_drift, 1e-7)
    report.add('hamiltonian_periodicity', float(flow.series('hamiltonian')[0]),
               flow.periodicity_defect('hamiltonian', inertia.period), 1e-7)
    report.add('skewness', 0.0, flow.skewness, 1e-10)
    return ExperimentOutcome(report, flow.trajectory, 't', steps=flow.trajectory.steps)


@experiment('tshift', {'n': 3, 'amplitude': 0.3, 'period': 1.0, 'iterations': 50})
def run_tshift(params: Dict[str, Any], cfg: IntegratorConfig, rng: np.random.Generator) -> ExperimentOutcome:
    """Iterated period map of the modulated top."""
    inertia = _inertia(params)
    M0 = euler_top_service.random_skew(inertia.n, rng)
    orbit, drift = euler_top_service.iterate_t_shift(inertia, M0, int(params['iterations']), cfg)
    report = DriftReport()
    report.add('cumulative_spectral_drift', 0.0, drift, 5e-6)
    report.update_metadata(iterations=len(orbit) - 1)
    return ExperimentOutcome(report)


@experiment('catmap', {'matrix': [[2, 1], [1, 1]], 'states': 100, 'steps': 10000, 'point': '1/2,1/2'})
def run_catmap(params: Dict[str, Any], cfg: IntegratorConfig, rng: np.random.Generator) -> ExperimentOutcome:
    """Extended cat map: F1, F2 invariance, entropy and exact periods."""
    A = ToralAutomorphism.from_matrix(params['matrix'])
    data = catmap_service.hyperbolic_data(A)
    states = catmap_service.random_extended_states(data, int(params['states']), rng)
    drifts = catmap_service.extended_orbit_report(A, states, int(params['steps']))
    # Independent eigenvalue check of the entropy
    reference = math.log(float(np.max(np.abs(np.linalg.eigvals(A.matrix.astype(float))))))
    point = tuple(Fraction(part.strip()) for part in str(params['point']).split(','))
    period = catmap_service.exact_orbit_period(A, point)
    q = math.lcm(point[0].denominator, point[1].denominator)
    group = catmap_service.group_period(A, q)

    report = DriftReport()
    report.add('F1_step', 0.0, drifts['F1_step_relative'], 1e-12)
    report.add('F1_total', 0.0, drifts['F1_total_relative'], 1e-9)
    report.add('F2_step', 0.0, drifts['F2_step_absolute'], 1e-10)
    report.add('entropy', data.entropy, abs(data.entropy - reference), 1e-12)
    report.add('period_divides_group_period', 0.0, float(group % period), 0.0)
    report.update_metadata(lam=data.lam, entropy=data.entropy, orbit_period=period, group_period=group)
    return ExperimentOutcome(report)


@experiment('bachet', {'c': '-2', 'start': '3,5', 'steps': 2, 'bit_budget': bachet_service.DEFAULT_BIT_BUDGET})
def run_bachet(params: Dict[str, Any], cfg: IntegratorConfig, rng: np.random.Generator) -> ExperimentOutcome:
    """Exact Bachet chain plus the commuting family check."""
    curve = BachetCurve(str(params['c']))
    P0 = bachet_service.parse_point(curve, str(params['start']))
    result = bachet_service.chain(P0, int(params['steps']), int(params['bit_budget']))
    off_curve = sum(0 if bachet_service.on_curve(P) else 1 for P in result.points)
    mismatched = 0
    for P, image in zip(result.points[:-1], result.points[1:]):
        double = bachet_service.chord_tangent_add(P, P)
        if double.is_infinity != image.is_infinity or (not image.is_infinity and double.x != image.x):
            mismatched += 1
    commuting = bachet_service.commutator_is_zero(2, 3, curve.c)

    report = DriftReport()
    report.add('off_curve_points', 0.0, float(off_curve), 0.0)
    report.add('group_law_mismatches', 0.0, float(mismatched), 0.0)
    report.add('B2_B3_commutator', 0.0, 0.0 if commuting else 1.0, 0.0)
    report.update_metadata(c=rational_to_str(curve.c), total_bits=result.total_bits,
                           growth_ratios=result.growth_ratios())
    return ExperimentOutcome(report, chain=result)


def _geodesic_start(params: Dict[str, Any]):
    Q = Quadric(_vector(params['b']))
    return Q, Q.geodesic_state(_vector(params['x0']), _vector(params['direction']))


_GEODESIC_DEFAULTS = {'b': [1.0, 2.0, 3.0], 'x0': [1.0, 0.4, 0.2], 'direction': [0.0, 1.0, -0.6]}


@experiment('geodesic', dict(_GEODESIC_DEFAULTS, s_end=50.0, samples=1001))
def run_geodesic(params: Dict[str, Any], cfg: IntegratorConfig, rng: np.random.Generator) -> ExperimentOutcome:
    """Quadric geodesic: Joachimsthal integral, constraints, lambda-F identity."""
    Q, s0 = _geodesic_start(params)
    flow = quadrics_service.integrate_geodesic(s0, Q, float(params['s_end']), cfg,
                                               samples=int(params['samples']))
    report = DriftReport()
    report.add('joachimsthal', quadrics_service.joachimsthal(s0, Q), flow.joachimsthal_drift, 1e-8)
    report.add('constraints', 0.0, flow.constraint_residual, 1e-8)
    report.add('lambda_identity', quadrics_service.lagrange_multiplier(s0, Q), flow.lambda_identity, 1e-10)
    report.update_metadata(quadric=Q.kind)
    return ExperimentOutcome(report, flow.trajectory, 's', steps=flow.trajectory.steps)


@experiment('knoerrer', dict(_GEODESIC_DEFAULTS, s_end=10.0, samples=5001, s_max=1e4))
def run_knoerrer(params: Dict[str, Any], cfg: IntegratorConfig, rng: np.random.Generator) -> ExperimentOutcome:
    """
    Knoerrer image of a geodesic. On a hyperbola the escape to infinity is
    followed instead and the finite tau limit is certified.
    """
    Q, s0 = _geodesic_start(params)
    report = DriftReport()
    if Q.kind == 'hyperbola':
        period, forward, backward = quadrics_service.libration_period(s0, Q, float(params['s_max']), cfg)
        start = quadrics_service.knoerrer_start(s0, Q)
        potential = Q.b if quadrics_service.joachimsthal(s0, Q) > 0 else -Q.b
        defect = quadrics_service.neumann_return_defect(start, potential, period, cfg)
        report.add('alpha_decay_exponent', 2.0,
                   max(abs(forward.exponent - 2.0), abs(backward.exponent - 2.0)), 1e-3)
        report.add('libration_return', 0.0, defect, 1e-6)
        report.update_metadata(period=period,
                               **{f"forward_{key}": value for key, value in forward.to_dict().items()},
                               **{f"backward_{key}": value for key, value in backward.to_dict().items()})
        return ExperimentOutcome(report)

    flow = quadrics_service.integrate_geodesic(s0, Q, float(params['s_end']), cfg,
                                               samples=int(params['samples']))
    image = quadrics_service.knoerrer_transform(flow, Q)
    psi = quadrics_service.psi0_series(image, Q)
    report.add('neumann_residual', 0.0, quadrics_service.neumann_residual(image), 1e-5)
    report.add('psi0', float(psi[0]), float(np.max(np.abs(psi))), 1e-5)
    report.update_metadata(regime=image.regime, tau_end=float(image.tau[-1]))
    states = np.hstack([image.q, image.qp])
    dim = Q.ambient_dimension
    labels = [f"q{i}" for i in range(dim)] + [f"qp{i}" for i in range(dim)]
    trajectory = Trajectory(image.tau, states, labels).with_invariant('psi0', psi)
    return ExperimentOutcome(report, trajectory, 'tau', steps=flow.trajectory.steps)


@experiment('neumann', {'b': [1.0, 2.0, 3.0], 'q0': [1.0, 0.2, 0.1], 'qp0': [0.0, 0.5, 0.3],
                        'tau_end': 100.0, 'samples': 1001, 'shifts': [-1.0, 0.5, 2.0], 'shift_tau': 10.0})
def run_neumann(params: Dict[str, Any], cfg: IntegratorConfig, rng: np.random.Generator) -> ExperimentOutcome:
    """Neumann system: energy, constraint consistency and shift invariance."""
    b = _vector(params['b'])
    s0 = quadrics_service.neumann_state(_vector(params['q0']), _vector(params['qp0']))
    flow = quadrics_service.integrate_neumann(s0, b, float(params['tau_end']), cfg,
                                              samples=int(params['samples']))
    report = DriftReport()
    report.add('energy', quadrics_service.neumann_energy(s0.q, s0.qp, b), flow.energy_drift, 1e-8)
    report.add('constraint_consistency', 0.0, flow.constraint_consistency, 1e-10)
    if 'psi0' in flow.trajectory.invariants:
        report.add('psi0', float(flow.trajectory.invariants['psi0'][0]), flow.trajectory.drift('psi0'), 1e-7)
    shift_tau = float(params['shift_tau'])
    base = quadrics_service.integrate_neumann(s0, b, shift_tau, cfg, samples=101)
    for z in params['shifts']:
        shifted = quadrics_service.integrate_neumann(s0, b - float(z), shift_tau, cfg, samples=101)
        deviation = float(np.max(np.abs(shifted.trajectory.states - base.trajectory.states)))
        report.add(f"shift_{float(z):g}", 0.0, deviation, 1e-7)
    return ExperimentOutcome(report, flow.trajectory, 'tau', steps=flow.trajectory.steps)


@experiment('geodesic-equivalence', dict(_GEODESIC_DEFAULTS, length=5.0))
def run_geodesic_equivalence(params: Dict[str, Any], cfg: IntegratorConfig,
                             rng: np.random.Generator) -> ExperimentOutcome:
    """Traces of ds^2 and dr^2 geodesics from the same initial data."""
    Q, s0 = _geodesic_start(params)
    comparison = metric_service.compare_traces(s0, Q, float(params['length']), cfg)
    report = DriftReport()
    report.add('trace_distance', 0.0, comparison['trace_distance'], 1e-5)
    report.add('parameter_defect', 0.0, comparison['parameter_defect'], 1e-6)
    report.update_metadata(parameter_slope=comparison['parameter_slope'])
    return ExperimentOutcome(report)


def _random_affine_samples(Q: Quadric, count: int, rng: np.random.Generator):
    samples = []
    while len(samples) < count:
        x = rng.standard_normal(Q.ambient_dimension)
        if Q.value(x) <= 0 or abs(x[0]) < 1e-3:
            continue
        state = Q.geodesic_state(x, rng.standard_normal(Q.ambient_dimension))
        samples.append((state.x, state.xp))
    return samples


@experiment('projective-chart', {'b': [1.0, 1.0, -1.0], 'samples': 100, 'infinity_samples': 20})
def run_projective_chart(params: Dict[str, Any], cfg: IntegratorConfig,
                         rng: np.random.Generator) -> ExperimentOutcome:
    """Second metric in the projective chart, including the points at infinity."""
    Q = Quadric(_vector(params['b']))
    worst = 0.0
    for x, v in _random_affine_samples(Q, int(params['samples']), rng):
        affine = metric_service.second_metric(x, v, Q)
        y, dy = metric_service.affine_to_chart(x, v)
        chart = metric_service.projective_chart_metric(y, dy, Q)
        worst = max(worst, abs(chart - affine) / max(abs(affine), 1e-300))
    report = DriftReport()
    report.add('chart_metric_relative', 0.0, worst, 1e-9)
    try:
        at_infinity = metric_service.points_at_infinity(Q, int(params['infinity_samples']), rng)
    except ValueError:
        at_infinity = []
    values = [metric_service.projective_chart_metric(y, dy, Q) for y, dy in at_infinity]
    report.add('nonfinite_at_infinity', 0.0, float(sum(not math.isfinite(v) for v in values)), 0.0)
    signatures = sorted({metric_service.restricted_metric_signature(Q, y=y) for y, _ in at_infinity})
    report.update_metadata(points_at_infinity=len(at_infinity),
                           signatures_at_infinity=[list(s) for s in signatures])
    return ExperimentOutcome(report)


class ExperimentService:
    """Resolves configs against the registry, runs them and writes their files."""

    def __init__(self, registry: Optional[Dict[str, Experiment]] = None):
        self._registry = registry if registry is not None else REGISTRY

    def list_experiments(self) -> List[Dict[str, Any]]:
        return [self._registry[name].to_dict() for name in sorted(self._registry)]

    def get(self, name: str) -> Experiment:
        if name not in self._registry:
            raise ConfigError(f"Unknown experiment {name!r}. Known: {sorted(self._registry)}")
        return self._registry[name]

    def resolve_parameters(self, config: ExperimentConfig) -> Dict[str, Any]:
        entry = self.get(config.experiment)
        unknown = set(config.parameters) - set(entry.defaults)
        if unknown:
            raise ConfigError(f"Unknown parameters for {config.experiment}: {sorted(unknown)}")
        params = dict(entry.defaults)
        params.update(config.parameters)
        return params

    def run(self, config: ExperimentConfig) -> ExperimentOutcome:
        entry = self.get(config.experiment)
        params = self.resolve_parameters(config)
        cfg = config.integrator_config()
        rng = np.random.default_rng(config.seed)
        started = time.perf_counter()
        try:
            outcome = entry.runner(params, cfg, rng)
        except ConfigError:
            raise
        except (IntegrableError, ValueError, ArithmeticError) as e:
            logger.debug("Experiment %s failed", config.experiment, exc_info=True)
            raise ExperimentError(config.experiment, e) from e
        outcome.report.update_metadata(
            experiment=config.experiment,
            config_hash=config.config_hash(),
            seed=config.seed,
            steps=outcome.steps,
            wall_time=round(time.perf_counter() - started, 3),
        )
        status = 'passed' if outcome.passed else 'failed'
        logger.info("Experiment %s %s (%d rows)", config.experiment, status, len(outcome.report))
        return outcome

    @staticmethod
    def run_directory(root: str, config: ExperimentConfig) -> str:
        return os.path.join(root, f"{config.experiment}-{config.config_hash()[:8]}")

    def write_outputs(self, outcome: ExperimentOutcome, directory: str) -> List[str]:
        files = outcome.files()
        os.makedirs(directory, exist_ok=True)
        written = []
        for name, content in files.items():
            path = os.path.join(directory, name)
            with open(path, 'wb') as handle:
                handle.write(content)
            written.append(path)
        return written

    def run_many(self, configs: List[ExperimentConfig], jobs: int = 1) -> List[ExperimentOutcome]:
        # Experiments share nothing, so they fan out over processes
        if jobs <= 1 or len(configs) <= 1:
            return [self.run(config) for config in configs]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_config, [config.to_dict() for config in configs]))


def _run_config(data: Dict[str, Any]) -> ExperimentOutcome:
    return ExperimentService().run(ExperimentConfig.from_dict(data))
