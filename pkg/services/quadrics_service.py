"""
Geodesics on central quadrics and the Knoerrer map to the Neumann system.

A geodesic x(s) of (Bx, x) = 1 solves x'' = lambda B x with
lambda = -(Bx', x')/|Bx|^2. Its Gauss image q = Bx/|Bx|, reparametrised by
d tau = sqrt(|lambda|) ds, solves q'' = -Bq + mu q on the unit sphere
(with B replaced by -B when the Joachimsthal value is negative).
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from models.quadric import GeodesicState, KnoerrerImage, NeumannState, Quadric
from models.trajectory import IntegratorConfig, Trajectory
from numerics.errors import DegeneratePoint, KnoerrerUndefined
from numerics.integrator import Constraint, integrate, project_to_constraints
from numerics.quadrature import cumulative_quadrature

logger = logging.getLogger(__name__)

DEGENERATE_NORMAL = 1e-12
# |F| below this counts as a generator line
GENERATOR_THRESHOLD = 1e-12

Diagonal = Union[Quadric, Sequence[float], np.ndarray]


def _diagonal(potential: Diagonal) -> np.ndarray:
    if isinstance(potential, Quadric):
        return potential.b
    return np.asarray(potential, dtype=float)


# Geodesics


def lagrange_multiplier(s: GeodesicState, Q: Quadric) -> float:
    n = Q.normal(s.x)
    norm_squared = float(np.dot(n, n))
    if np.sqrt(norm_squared) <= DEGENERATE_NORMAL:
        raise DegeneratePoint(f"|Bx| vanishes at x = {s.x.tolist()}")
    return -float(np.dot(Q.normal(s.xp), s.xp)) / norm_squared


def geodesic_rhs(s: GeodesicState, Q: Quadric):
    lam = lagrange_multiplier(s, Q)
    return s.xp.copy(), lam * Q.normal(s.x)


def joachimsthal(s: GeodesicState, Q: Quadric) -> float:
    n = Q.normal(s.x)
    return float(np.dot(n, n) * np.dot(Q.normal(s.xp), s.xp))


def geodesic_constraints(Q: Quadric) -> List[Constraint]:
    b = Q.b
    dim = Q.ambient_dimension

    def split(y):
        return y[:dim], y[dim:]

    level = Constraint(lambda y: float(np.dot(b * split(y)[0], split(y)[0]) - 1.0),
                       lambda y: np.concatenate([2 * b * split(y)[0], np.zeros(dim)]),
                       'level')
    tangency = Constraint(lambda y: float(np.dot(b * split(y)[0], split(y)[1])),
                          lambda y: np.concatenate([b * split(y)[1], b * split(y)[0]]),
                          'tangency')
    speed = Constraint(lambda y: float(np.dot(split(y)[1], split(y)[1]) - 1.0),
                       lambda y: np.concatenate([np.zeros(dim), 2 * split(y)[1]]),
                       'speed')
    return [level, tangency, speed]


class GeodesicFlow:
    # Geodesic samples plus Joachimsthal and constraint measurements.

    def __init__(self, trajectory: Trajectory, quadric: Quadric):
        self._trajectory = trajectory
        self._quadric = quadric

    @property
    def trajectory(self) -> Trajectory:
        return self._trajectory

    @property
    def quadric(self) -> Quadric:
        return self._quadric

    @property
    def s(self) -> np.ndarray:
        return self._trajectory.times

    @property
    def positions(self) -> np.ndarray:
        return self._trajectory.states[:, :self._quadric.ambient_dimension]

    @property
    def velocities(self) -> np.ndarray:
        return self._trajectory.states[:, self._quadric.ambient_dimension:]

    def state(self, index: int) -> GeodesicState:
        return GeodesicState.from_array(self._trajectory.states[index], self.s[index])

    @property
    def joachimsthal_drift(self) -> float:
        # |F(s) - F(0)| / (1 + |F(0)|)
        values = self._trajectory.invariants['joachimsthal']
        return float(np.max(np.abs(values - values[0])) / (1.0 + abs(values[0])))

    @property
    def constraint_residual(self) -> float:
        invariants = self._trajectory.invariants
        return float(max(np.max(invariants[name]) for name in ('level', 'tangency', 'speed')))

    @property
    def lambda_identity(self) -> float:
        invariants = self._trajectory.invariants
        lam = invariants['lambda']
        normal = np.linalg.norm(self._quadric.b * self.positions, axis=1)
        defect = np.abs(lam + invariants['joachimsthal'] / normal ** 4)
        return float(np.max(defect / (1.0 + np.abs(lam))))

    def report(self) -> Dict[str, float]:
        return {'joachimsthal_drift': self.joachimsthal_drift,
                'constraint_residual': self.constraint_residual,
                'lambda_identity': self.lambda_identity}


def integrate_geodesic(s0: GeodesicState, Q: Quadric, s_end: float,
                       cfg: Optional[IntegratorConfig] = None, samples: int = 1001,
                       sample_times: Optional[Sequence[float]] = None) -> GeodesicFlow:
    """
    Integrates x'' = lambda B x from s0 over arclength s_end, projecting
    back onto the level set, tangency and unit speed after every step.
    """
    cfg = cfg or IntegratorConfig()
    dim = Q.ambient_dimension
    if s0.x.size != dim:
        raise ValueError("State and quadric dimensions differ")
    b = Q.b

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        x, xp = y[:dim], y[dim:]
        n = b * x
        norm_squared = np.dot(n, n)
        if np.sqrt(norm_squared) <= DEGENERATE_NORMAL:
            raise DegeneratePoint(f"|Bx| vanishes at s = {t}")
        lam = -np.dot(b * xp, xp) / norm_squared
        return np.concatenate([xp, lam * n])

    constraints = geodesic_constraints(Q)
    if sample_times is None:
        sample_times = np.linspace(s0.s, s0.s + s_end, samples)
    labels = [f"x{i}" for i in range(dim)] + [f"xp{i}" for i in range(dim)]
    trajectory = integrate(rhs, s0.as_array(), (s0.s, s0.s + s_end), cfg,
                           sample_times=sample_times,
                           projector=lambda y: project_to_constraints(y, constraints),
                           labels=labels)

    x, xp = trajectory.states[:, :dim], trajectory.states[:, dim:]
    n = b * x
    normal_squared = np.sum(n * n, axis=1)
    curvature = np.sum(b * xp * xp, axis=1)
    trajectory = (trajectory
                  .with_invariant('joachimsthal', normal_squared * curvature)
                  .with_invariant('lambda', -curvature / normal_squared)
                  .with_invariant('level', np.abs(np.sum(n * x, axis=1) - 1.0))
                  .with_invariant('tangency', np.abs(np.sum(n * xp, axis=1)))
                  .with_invariant('speed', np.abs(np.linalg.norm(xp, axis=1) - 1.0)))
    flow = GeodesicFlow(trajectory, Q)
    logger.debug("Geodesic on %r to s=%g: F drift %.3e", Q, s_end, flow.joachimsthal_drift)
    return flow


def generator_line_state(Q: Quadric, s: float = 0.0) -> GeodesicState:
    """
    A unit-speed state moving along a straight line of Q, available when
    Q has at least two positive and one negative diagonal entry.
    """
    b = Q.b
    positive = np.flatnonzero(b > 0)
    negative = np.flatnonzero(b < 0)
    if positive.size < 2 or negative.size < 1:
        raise ValueError(f"{Q!r} contains no straight lines")
    i, j, k = positive[0], positive[1], negative[0]
    x = np.zeros(b.size)
    x[i] = 1.0 / np.sqrt(b[i])
    direction = np.zeros(b.size)
    direction[j] = 1.0 / np.sqrt(b[j])
    direction[k] = 1.0 / np.sqrt(-b[k])
    return GeodesicState(x, direction / np.linalg.norm(direction), s)


# Knoerrer map


def central_projection(y: Sequence[float]) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    norm = np.linalg.norm(y)
    if norm == 0:
        raise DegeneratePoint("Cannot project the zero vector")
    return y / norm


def gauss_map(x: Sequence[float], Q: Quadric) -> np.ndarray:
    return central_projection(Q.normal(x))


def knoerrer_transform(geodesic: Union[GeodesicFlow, Trajectory], Q: Quadric) -> KnoerrerImage:
    """
    q = Bx/|Bx|, tau = int sqrt(|lambda|) ds, dq/dtau = (dq/ds)/alpha.

    The sign regime is fixed once from F at the first sample, which the
    flow conserves.
    """
    trajectory = geodesic.trajectory if isinstance(geodesic, GeodesicFlow) else geodesic
    dim = Q.ambient_dimension
    b = Q.b
    s = trajectory.times
    x, xp = trajectory.states[:, :dim], trajectory.states[:, dim:]
    n = b * x
    normal = np.linalg.norm(n, axis=1)
    if np.min(normal) <= DEGENERATE_NORMAL:
        raise DegeneratePoint("|Bx| vanishes along the trajectory")
    F = normal ** 2 * np.sum(b * xp * xp, axis=1)
    if abs(F[0]) <= GENERATOR_THRESHOLD:
        raise KnoerrerUndefined("F = 0 along a straight-line geodesic")
    lam = -F / normal ** 4
    if np.any(np.sign(lam) != np.sign(lam[0])):
        raise KnoerrerUndefined("lambda changes sign along the trajectory")
    alpha = np.sqrt(np.abs(lam))
    _, tau = cumulative_quadrature(s, alpha)

    q = n / normal[:, None]
    bxp = b * xp
    dq_ds = (bxp - q * np.sum(q * bxp, axis=1)[:, None]) / normal[:, None]
    qp = dq_ds / alpha[:, None]
    potential = b if F[0] > 0 else -b
    logger.debug("Knoerrer image over s in [%g, %g]: tau(end) = %.12g, regime %s",
                 s[0], s[-1], tau[-1], 'direct' if F[0] > 0 else 'reflected')
    return KnoerrerImage(s, tau, q, qp, potential, float(F[0]), alpha)


def neumann_residual(image: KnoerrerImage) -> float:
    """
    max |d2q/dtau2 + Bq - mu q| over interior samples, the second derivative
    taken as a centered difference of dq/dtau.
    """
    if len(image) < 3:
        raise ValueError("Need at least three samples")
    b = image.potential
    tau, q, qp = image.tau, image.q, image.qp
    qpp = (qp[2:] - qp[:-2]) / (tau[2:] - tau[:-2])[:, None]
    inner_q = q[1:-1]
    mu = np.sum(b * inner_q * inner_q, axis=1) - np.sum(qp[1:-1] ** 2, axis=1)
    residual = qpp + b * inner_q - mu[:, None] * inner_q
    return float(np.max(np.linalg.norm(residual, axis=1)))


def psi0(u: Sequence[float], v: Sequence[float], Q: Diagonal) -> float:
    # (1 - (Au, u))(Av, v) + (Au, v)^2 with A = B^-1
    a = 1.0 / _diagonal(Q)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    Au = a * u
    return float((1.0 - np.dot(Au, u)) * np.dot(a * v, v) + np.dot(Au, v) ** 2)


def psi0_series(image: KnoerrerImage, Q: Quadric) -> np.ndarray:
    return np.array([psi0(image.qp[i], image.q[i], Q) for i in range(len(image))])


# Neumann system


def neumann_mu(q: Sequence[float], qp: Sequence[float], potential: Diagonal) -> float:
    b = _diagonal(potential)
    q = np.asarray(q, dtype=float)
    qp = np.asarray(qp, dtype=float)
    return float(np.dot(b * q, q) - np.dot(qp, qp))


def neumann_energy(q: Sequence[float], qp: Sequence[float], potential: Diagonal) -> float:
    b = _diagonal(potential)
    q = np.asarray(q, dtype=float)
    qp = np.asarray(qp, dtype=float)
    return float(0.5 * np.dot(qp, qp) + 0.5 * np.dot(b * q, q))


def neumann_constraints(dim: int) -> List[Constraint]:
    sphere = Constraint(lambda y: float(np.dot(y[:dim], y[:dim]) - 1.0),
                        lambda y: np.concatenate([2 * y[:dim], np.zeros(dim)]),
                        'sphere')
    tangency = Constraint(lambda y: float(np.dot(y[:dim], y[dim:])),
                          lambda y: np.concatenate([y[dim:], y[:dim]]),
                          'tangency')
    return [sphere, tangency]


def _neumann_rhs(b: np.ndarray):
    dim = b.size

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        q, qp = y[:dim], y[dim:]
        mu = np.dot(b * q, q) - np.dot(qp, qp)
        return np.concatenate([qp, -b * q + mu * q])

    return rhs


class NeumannFlow:
    # Neumann samples with energy and constraint measurements.

    def __init__(self, trajectory: Trajectory, potential: np.ndarray):
        self._trajectory = trajectory
        self._potential = potential

    @property
    def trajectory(self) -> Trajectory:
        return self._trajectory

    @property
    def potential(self) -> np.ndarray:
        return self._potential

    @property
    def tau(self) -> np.ndarray:
        return self._trajectory.times

    @property
    def q(self) -> np.ndarray:
        return self._trajectory.states[:, :self._potential.size]

    @property
    def qp(self) -> np.ndarray:
        return self._trajectory.states[:, self._potential.size:]

    def state(self, index: int) -> NeumannState:
        return NeumannState.from_array(self._trajectory.states[index], self.tau[index])

    def final_state(self) -> NeumannState:
        return self.state(len(self._trajectory) - 1)

    @property
    def energy_drift(self) -> float:
        return self._trajectory.drift('energy')

    @property
    def constraint_consistency(self) -> float:
        return float(np.max(np.abs(self._trajectory.invariants['constraint_consistency'])))

    def report(self) -> Dict[str, float]:
        report = {'energy_drift': self.energy_drift,
                  'constraint_consistency': self.constraint_consistency}
        if 'psi0' in self._trajectory.invariants:
            report['psi0_drift'] = self._trajectory.drift('psi0')
        return report


def integrate_neumann(s0: NeumannState, potential: Diagonal, tau_end: float,
                      cfg: Optional[IntegratorConfig] = None, samples: int = 1001,
                      sample_times: Optional[Sequence[float]] = None) -> NeumannFlow:
    """
    Integrates q'' = -Bq + mu q on the unit sphere with projection onto
    |q| = 1 and (q, qp) = 0. B may have zero entries; Psi0 is only
    tracked when it is invertible.
    """
    cfg = cfg or IntegratorConfig()
    b = _diagonal(potential)
    dim = b.size
    if s0.q.size != dim:
        raise ValueError("State and potential dimensions differ")
    constraints = neumann_constraints(dim)
    if sample_times is None:
        sample_times = np.linspace(s0.tau, s0.tau + tau_end, samples)
    labels = [f"q{i}" for i in range(dim)] + [f"qp{i}" for i in range(dim)]
    rhs = _neumann_rhs(b)
    trajectory = integrate(rhs, s0.as_array(), (s0.tau, s0.tau + tau_end), cfg,
                           sample_times=sample_times,
                           projector=lambda y: project_to_constraints(y, constraints),
                           labels=labels)

    q, qp = trajectory.states[:, :dim], trajectory.states[:, dim:]
    energy = 0.5 * np.sum(qp * qp, axis=1) + 0.5 * np.sum(b * q * q, axis=1)
    # (q'', q) + |q'|^2 vanishes once |q| = 1 holds identically
    qpp = np.array([rhs(0.0, y)[dim:] for y in trajectory.states])
    consistency = np.sum(qpp * q, axis=1) + np.sum(qp * qp, axis=1)
    trajectory = (trajectory
                  .with_invariant('energy', energy)
                  .with_invariant('constraint_consistency', consistency))
    if np.all(b != 0):
        trajectory = trajectory.with_invariant(
            'psi0', [psi0(qp[i], q[i], b) for i in range(len(trajectory))])
    flow = NeumannFlow(trajectory, b)
    logger.debug("Neumann flow to tau=%g: energy drift %.3e", tau_end, flow.energy_drift)
    return flow


def return_time(s0: NeumannState, potential: Diagonal, tau_max: float,
                cfg: Optional[IntegratorConfig] = None, samples: int = 2001) -> float:
    """
    First tau > 0 at which the orbit crosses the section (q - q0, qp0) = 0
    in the starting direction, refined with brentq.
    """
    cfg = cfg or IntegratorConfig()
    b = _diagonal(potential)
    dim = b.size
    flow = integrate_neumann(s0, b, tau_max, cfg, samples=samples)
    q0, qp0 = s0.q, s0.qp
    section = (flow.q - q0) @ qp0
    for i in range(2, len(section)):
        if section[i - 1] < 0 <= section[i]:
            left = flow.state(i - 1)

            def crossing(tau: float) -> float:
                if tau == left.tau:
                    return float(np.dot(left.q - q0, qp0))
                piece = integrate_neumann(left, b, tau - left.tau, cfg, samples=2)
                return float(np.dot(piece.final_state().q - q0, qp0))

            return float(brentq(crossing, flow.tau[i - 1], flow.tau[i], xtol=1e-14, rtol=1e-14))
    raise ValueError(f"No return to the initial section within tau = {tau_max}")


class TauLimit:
    # Extrapolated tau(infinity) from a power-law fit of alpha on the last decade

    def __init__(self, value: float, exponent: float, coefficient: float,
                 tail: float, s_max: float, tau_at_s_max: float):
        self.value = value
        self.exponent = exponent
        self.coefficient = coefficient
        self.tail = tail
        self.s_max = s_max
        self.tau_at_s_max = tau_at_s_max

    def to_dict(self) -> Dict[str, float]:
        return {'tau_limit': self.value, 'exponent': self.exponent,
                'coefficient': self.coefficient, 'tail': self.tail,
                's_max': self.s_max, 'tau_at_s_max': self.tau_at_s_max}


def tau_limit(s: np.ndarray, tau: np.ndarray, alpha: np.ndarray) -> TauLimit:
    """
    Fits alpha ~ C s^-p on s in [s_max/10, s_max] and adds the tail
    C s_max^(1-p) / (p - 1). A fitted p <= 1 means tau diverges.
    """
    s = np.asarray(s, dtype=float)
    window = s >= s[-1] / 10
    if np.count_nonzero(window) < 3 or s[-1] <= 0:
        raise ValueError("Not enough samples in the last decade")
    slope, intercept = np.polyfit(np.log(s[window]), np.log(alpha[window]), 1)
    exponent = -float(slope)
    if exponent <= 1:
        raise ValueError(f"alpha decays like s^-{exponent:.3f}; tau does not converge")
    coefficient = float(np.exp(intercept))
    tail = coefficient * s[-1] ** (1 - exponent) / (exponent - 1)
    return TauLimit(float(tau[-1] + tail), exponent, coefficient, tail, float(s[-1]), float(tau[-1]))


def escape_grid(s_max: float = 1e4, near: float = 10.0) -> np.ndarray:
    # Dense linear grid near the start, geometric beyond
    return np.union1d(np.linspace(0.0, near, 20001), np.geomspace(near, s_max, 20000))


def hyperbolic_escape(s0: GeodesicState, Q: Quadric, s_max: float = 1e4,
                      cfg: Optional[IntegratorConfig] = None) -> TauLimit:
    """
    Follows a geodesic running off to infinity and certifies that its
    Knoerrer time stays finite.
    """
    grid = s0.s + escape_grid(s_max)
    flow = integrate_geodesic(s0, Q, s_max, cfg, sample_times=grid)
    image = knoerrer_transform(flow, Q)
    return tau_limit(image.s - s0.s, image.tau, image.alpha)


def libration_period(s0: GeodesicState, Q: Quadric, s_max: float = 1e4,
                     cfg: Optional[IntegratorConfig] = None) -> Tuple[float, TauLimit, TauLimit]:
    """
    Period of the regularized orbit of a geodesic that escapes at both ends.

    The image runs from one asymptotic direction to the other in the
    Knoerrer time of the whole geodesic, tau(+inf) + tau(-inf), and back.
    """
    forward = hyperbolic_escape(s0, Q, s_max, cfg)
    backward = hyperbolic_escape(GeodesicState(s0.x, -s0.xp, s0.s), Q, s_max, cfg)
    return 2.0 * (forward.value + backward.value), forward, backward


def neumann_return_defect(s0: NeumannState, potential: Diagonal, period: float,
                          cfg: Optional[IntegratorConfig] = None) -> float:
    # |state(tau0 + period) - state(tau0)|
    flow = integrate_neumann(s0, potential, period, cfg, samples=2)
    return float(np.linalg.norm(flow.final_state().as_array() - s0.as_array()))


def knoerrer_start(s0: GeodesicState, Q: Quadric) -> NeumannState:
    """Neumann initial data of the image of s0."""
    n = Q.normal(s0.x)
    normal = np.linalg.norm(n)
    q = n / normal
    bxp = Q.normal(s0.xp)
    dq_ds = (bxp - q * np.dot(q, bxp)) / normal
    alpha = np.sqrt(abs(np.dot(bxp, s0.xp))) / normal
    if alpha == 0:
        raise KnoerrerUndefined("F = 0 along a straight-line geodesic")
    return NeumannState(q, dq_ds / alpha)


def neumann_state(q: Sequence[float], qp: Sequence[float], tau: float = 0.0) -> NeumannState:
    # Normalizes q and removes the radial part of qp
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    qp = np.asarray(qp, dtype=float)
    return NeumannState(q, qp - q * np.dot(q, qp), tau)
