"""
Modulated harmonic oscillator H = omega(t)(p^2 + q^2)/2.

Any modulation omega(t) keeps the action I = (p^2 + q^2)/2 exactly
conserved; the angle advances by tau(t) = integral of omega.
"""
import logging
import math
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from models.oscillator import ModulationProfile, OscillatorState
from models.trajectory import IntegratorConfig, Trajectory
from numerics.integrator import integrate
from numerics.quadrature import cumulative_quadrature

logger = logging.getLogger(__name__)

# Quadrature grid for tau(t), independent of the integrator's samples
TAU_GRID_SPACING = 1e-3


def _omega_at(omega: Callable, t: float) -> float:
    return float(omega(t))


def oscillator_rhs(s: OscillatorState, omega: Callable) -> Tuple[float, float]:
    # (dp/dt, dq/dt) = (-omega q, omega p)
    w = _omega_at(omega, s.t)
    return -w * s.q, w * s.p


def oscillator_action(s: OscillatorState) -> float:
    return 0.5 * (s.p ** 2 + s.q ** 2)


def hamiltonian_value(s: OscillatorState, omega: Callable) -> float:
    # Not an integral once omega depends on t
    return 0.5 * _omega_at(omega, s.t) * (s.p ** 2 + s.q ** 2)


def wrap_angle(angle: np.ndarray) -> np.ndarray:
    # Into (-pi, pi]
    return -((-np.asarray(angle) + math.pi) % (2 * math.pi) - math.pi)


def tau_samples(omega: Callable, t_end: float, times: np.ndarray) -> np.ndarray:
    """
    tau(t) = int_0^t omega on a fine trapezoid grid, read off at `times`.
    The grid contains every requested time so no interpolation error enters.
    """
    count = max(2, int(math.ceil(t_end / TAU_GRID_SPACING)) + 1)
    grid = np.union1d(np.linspace(0.0, t_end, count), times)
    profile = omega if isinstance(omega, ModulationProfile) else ModulationProfile(omega)
    grid, tau = cumulative_quadrature(grid, profile.evaluate(grid))
    return tau[np.searchsorted(grid, times)]


class OscillatorFlow:
    # Result of oscillator_flow: trajectory plus tau(t) and postcondition measurements.

    def __init__(self, trajectory: Trajectory, tau: np.ndarray):
        self._trajectory = trajectory
        self._tau = tau

    @property
    def trajectory(self) -> Trajectory:
        return self._trajectory

    @property
    def tau(self) -> np.ndarray:
        return self._tau

    @property
    def action_drift(self) -> float:
        return self._trajectory.drift('action')

    @property
    def phase_drift(self) -> float:
        # max |(atan2(q,p) - tau) - (value at t=0)| mod 2 pi
        return float(np.max(np.abs(self._trajectory.invariants['phase_offset'])))

    def final_state(self) -> OscillatorState:
        p, q = self._trajectory.final_state
        return OscillatorState(p, q, self._trajectory.times[-1])

    def report(self) -> Dict[str, float]:
        return {'action_drift': self.action_drift, 'phase_drift': self.phase_drift}


def oscillator_flow(s0: OscillatorState, omega: Callable, t_end: float,
                    cfg: Optional[IntegratorConfig] = None, samples: int = 1001) -> OscillatorFlow:
    """
    Integrates dp/dt = -omega(t) q, dq/dt = omega(t) p from s0 over [s0.t, s0.t + t_end].
    """
    cfg = cfg or IntegratorConfig()
    t0 = s0.t

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        w = _omega_at(omega, t)
        return np.array([-w * y[1], w * y[0]])

    sample_times = np.linspace(t0, t0 + t_end, samples)
    trajectory = integrate(rhs, s0.as_array(), (t0, t0 + t_end), cfg,
                           sample_times=sample_times, labels=['p', 'q'])

    times = trajectory.times
    shifted_omega = (lambda t: omega(np.asarray(t) + t0)) if t0 != 0 else omega
    tau = tau_samples(shifted_omega, t_end, times - t0)

    p, q = trajectory.states[:, 0], trajectory.states[:, 1]
    action = 0.5 * (p ** 2 + q ** 2)
    offset = np.arctan2(q, p) - tau
    trajectory = (trajectory
                  .with_invariant('action', action)
                  .with_invariant('tau', tau)
                  .with_invariant('phase_offset', wrap_angle(offset - offset[0])))
    flow = OscillatorFlow(trajectory, tau)
    logger.debug("Oscillator flow to t=%g: action drift %.3e, phase drift %.3e",
                 t_end, flow.action_drift, flow.phase_drift)
    return flow


def standard_form_action_drift(s0: OscillatorState, omega: Callable, t_end: float,
                               cfg: Optional[IntegratorConfig] = None) -> float:
    """
    Same modulation applied to H = (p^2 + omega^2 q^2)/2 instead. Its
    adiabatic action (p^2/omega + omega q^2)/2 is only approximately kept,
    so the returned drift is visibly nonzero for a genuine modulation.
    """
    cfg = cfg or IntegratorConfig()

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        w = _omega_at(omega, t)
        return np.array([-w * w * y[1], y[0]])

    trajectory = integrate(rhs, s0.as_array(), (s0.t, s0.t + t_end), cfg,
                           sample_times=np.linspace(s0.t, s0.t + t_end, 1001))
    w = np.array([_omega_at(omega, t) for t in trajectory.times])
    p, q = trajectory.states[:, 0], trajectory.states[:, 1]
    action = 0.5 * (p ** 2 / w + w * q ** 2)
    return float(np.max(np.abs(action - action[0])))
