"""
Explicit Runge-Kutta integration with optional post-step constraint projection.

Two schemes are available: classical RK4 with a fixed step and the
Dormand-Prince 5(4) embedded pair with automatic step-size control.
Projection, when a projector is supplied and enabled in the config, runs
after every accepted step so the vector field itself stays untouched.
"""
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from models.trajectory import IntegratorConfig, Trajectory
from numerics.errors import (InvalidSampling, NumericalBlowup, ProjectionFailure,
                             StepBudgetExceeded)

logger = logging.getLogger(__name__)

VectorField = Callable[[float, np.ndarray], np.ndarray]
Projector = Callable[[np.ndarray], np.ndarray]


class Constraint:
    # Scalar constraint g(y) = 0 with its gradient.

    def __init__(self, value: Callable[[np.ndarray], float],
                 gradient: Callable[[np.ndarray], np.ndarray], name: str = ""):
        self.value = value
        self.gradient = gradient
        self.name = name


class ExplicitRungeKutta:
    # Butcher tableau container; subclasses fill in the coefficients.

    def __init__(self):
        self.stages: List[float] = []
        self.BT: List[List[float]] = []
        self.weights: List[float] = []
        self.TR: Optional[List[float]] = None
        self.order = 4
        self.is_adaptive = False

    def step(self, rhs: VectorField, t: float, y: np.ndarray, h: float) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        One step of size h. Returns the new state and, for embedded
        pairs, the local truncation error estimate.
        """
        slopes = []
        for i, c in enumerate(self.stages):
            y_stage = y
            if i > 0:
                y_stage = y + h * sum(a * k for a, k in zip(self.BT[i - 1], slopes) if a != 0)
            k = np.asarray(rhs(t + c * h, y_stage), dtype=float)
            if not np.all(np.isfinite(k)):
                raise NumericalBlowup(t)
            slopes.append(k)

        y_new = y + h * sum(b * k for b, k in zip(self.weights, slopes) if b != 0)
        if self.TR is None:
            return y_new, None
        error = h * sum(e * k for e, k in zip(self.TR, slopes) if e != 0)
        return y_new, error


class RK4(ExplicitRungeKutta):
    # Classical fourth order scheme, fixed step.

    def __init__(self):
        super().__init__()
        self.stages = [0.0, 0.5, 0.5, 1.0]
        self.BT = [
            [0.5],
            [0.0, 0.5],
            [0.0, 0.0, 1.0],
        ]
        self.weights = [1/6, 1/3, 1/3, 1/6]


class RKDP54(ExplicitRungeKutta):
    """
    Dormand-Prince 5(4) pair. Seven stages, 5th order propagation with an
    embedded 4th order solution for the error estimate.
    """

    def __init__(self):
        super().__init__()
        self.order = 5
        self.is_adaptive = True

        #intermediate evaluation times
        self.stages = [0.0, 1/5, 3/10, 4/5, 8/9, 1.0, 1.0]

        #butcher table
        self.BT = [
            [1/5],
            [3/40, 9/40],
            [44/45, -56/15, 32/9],
            [19372/6561, -25360/2187, 64448/6561, -212/729],
            [9017/3168, -355/33, 46732/5247, 49/176, -5103/18656],
            [35/384, 0.0, 500/1113, 125/192, -2187/6784, 11/84],
        ]
        self.weights = [35/384, 0.0, 500/1113, 125/192, -2187/6784, 11/84, 0.0]

        #coefficients for local truncation error estimate
        self.TR = [71/57600, 0.0, -71/16695, 71/1920, -17253/339200, 22/525, -1/40]


SCHEMES = {
    'rk4_fixed': RK4,
    'rk45_adaptive': RKDP54,
}


def _error_norm(error: np.ndarray, y: np.ndarray, y_new: np.ndarray, cfg: IntegratorConfig) -> float:
    scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((error / scale) ** 2)))


def _initial_step(rhs: VectorField, t0: float, y0: np.ndarray, span: float, cfg: IntegratorConfig) -> float:
    if cfg.initial_step is not None:
        return min(cfg.initial_step, span)
    f0 = np.asarray(rhs(t0, y0), dtype=float)
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    return min(h, span, 0.1 * max(span, 1.0))


def integrate(rhs: VectorField, y0: Sequence[float], t_span: Tuple[float, float],
              cfg: Optional[IntegratorConfig] = None,
              sample_times: Optional[Sequence[float]] = None,
              projector: Optional[Projector] = None,
              labels: Optional[List[str]] = None) -> Trajectory:
    """
    Integrates y' = rhs(t, y) over t_span.

    Without sample_times every accepted step is recorded; with them, steps
    are clipped so that samples land exactly on the requested times. Both
    endpoints are always part of the trajectory.
    """
    cfg = cfg or IntegratorConfig()
    t0, t_end = float(t_span[0]), float(t_span[1])
    if not (np.isfinite(t0) and np.isfinite(t_end)) or t_end < t0:
        raise InvalidSampling(f"Invalid time span ({t0}, {t_end})")

    y = np.array(y0, dtype=float)
    if projector is not None and cfg.projection:
        y = projector(y)

    if sample_times is None:
        targets = np.array([t_end])
        record_every_step = True
    else:
        targets = np.unique(np.clip(np.asarray(sample_times, dtype=float), t0, t_end))
        targets = targets[targets > t0]
        if targets.size == 0 or targets[-1] < t_end:
            targets = np.append(targets, t_end)
        record_every_step = False

    scheme = SCHEMES[cfg.method]()
    times = [t0]
    states = [y.copy()]
    t = t0
    attempts = 0
    accepted = 0
    rejected = 0
    h = cfg.dt if not scheme.is_adaptive else _initial_step(rhs, t0, y, max(t_end - t0, 1e-300), cfg)

    target_index = 0
    while target_index < targets.size:
        target = targets[target_index]
        if t_end == t0:
            break
        # Clip the step onto the next sample time
        remaining = target - t
        clipped = h >= remaining * (1 - 1e-12)
        step = remaining if clipped else h

        attempts += 1
        if attempts > cfg.max_steps:
            raise StepBudgetExceeded(cfg.max_steps, t)

        y_new, error = scheme.step(rhs, t, y, step)
        if not np.all(np.isfinite(y_new)):
            raise NumericalBlowup(t)

        if error is not None:
            err = _error_norm(error, y, y_new, cfg)
            factor = 0.9 * err ** (-1.0 / scheme.order) if err > 0 else 5.0
            factor = min(5.0, max(0.2, factor))
            if err > 1.0:
                rejected += 1
                h = step * factor
                continue
            # A clipped step does not grow the controller's step
            h = max(h, step * factor) if clipped else step * factor

        if projector is not None and cfg.projection:
            try:
                y_new = projector(y_new)
            except ProjectionFailure:
                logger.debug("Projection failed at t=%.17g", t + step)
                raise

        t = target if clipped else t + step
        y = y_new
        accepted += 1

        if clipped:
            target_index += 1
            times.append(t)
            states.append(y.copy())
        elif record_every_step:
            times.append(t)
            states.append(y.copy())

    logger.debug("Integrated [%g, %g]: %d accepted, %d rejected steps", t0, t_end, accepted, rejected)
    return Trajectory(times, np.array(states), labels=labels, steps=accepted, rejected=rejected)


def project_to_constraints(y: Sequence[float], constraints: List[Constraint],
                           tolerance: float = 1e-12, max_iterations: int = 20) -> np.ndarray:
    """
    Minimum-norm Newton projection onto {g_i(y) = 0}.
    The displacement lies in the span of the constraint gradients.
    Convergence is measured relative to |grad g_i| * |y| so that states far
    from the origin stay projectable in floating point.
    """
    y = np.array(y, dtype=float)

    def residuals(point: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        values = np.array([c.value(point) for c in constraints], dtype=float)
        gradients = np.array([c.gradient(point) for c in constraints], dtype=float)
        scales = np.maximum(1.0, np.linalg.norm(gradients, axis=1) * np.linalg.norm(point))
        return values, gradients, scales

    values, gradients, scales = residuals(y)
    if np.all(np.abs(values) <= tolerance * scales):
        return y

    for iteration in range(1, max_iterations + 1):
        gram = gradients @ gradients.T
        try:
            multipliers = np.linalg.solve(gram, values)
        except np.linalg.LinAlgError:
            multipliers = np.linalg.lstsq(gram, values, rcond=None)[0]
        y = y - gradients.T @ multipliers
        values, gradients, scales = residuals(y)
        if np.all(np.abs(values) <= tolerance * scales):
            if iteration > 5:
                logger.warning("Constraint projection needed %d Newton iterations", iteration)
            return y

    raise ProjectionFailure(float(np.max(np.abs(values))), max_iterations)
