"""
Hyperbolic toral automorphisms and their lift to the cotangent bundle.

The lift contracts p_u by lambda and expands p_v by lambda, so
F1 = p_u p_v and F2 = exp(-1/F1^2) sin(2 pi log p_u^2 / log lambda^2)
are both first integrals.
"""
import logging
import math
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.torus import ExtendedTorusState, HyperbolicData, ToralAutomorphism, _reduce

logger = logging.getLogger(__name__)

TorusPoint = Tuple[float, float]
RationalPoint = Tuple[Fraction, Fraction]

# Step used by the central-difference Poisson bracket
BRACKET_STEP = 1e-6


def _unit_eigenvector(A: ToralAutomorphism, mu: float) -> np.ndarray:
    a11, a12, a21, a22 = A.entries
    if a12 != 0:
        v = np.array([float(a12), mu - a11])
    else:
        v = np.array([mu - a22, float(a21)])
    v /= np.linalg.norm(v)
    # Positive first component, or positive second when the first vanishes
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return v


def hyperbolic_data(A: ToralAutomorphism) -> HyperbolicData:
    """
    Expanding eigenvalue, eigenbasis and entropy log(lambda).

    For trace < -2 both eigenvalues are negative; lambda is then the modulus
    of the expanding one and the sign is carried separately.
    """
    tr = abs(A.trace)
    sign = 1 if A.trace > 0 else -1
    lam = (tr + math.sqrt(tr * tr - 4)) / 2
    expanding = _unit_eigenvector(A, sign * lam)
    contracting = _unit_eigenvector(A, sign / lam)
    basis = np.column_stack([expanding, contracting])
    logger.debug("Hyperbolic data for %r: lambda=%.15g", A, lam)
    return HyperbolicData(lam, basis, sign)


def torus_step(A: ToralAutomorphism, x: TorusPoint) -> TorusPoint:
    a11, a12, a21, a22 = A.entries
    x1, x2 = x
    return _reduce(a11 * x1 + a12 * x2), _reduce(a21 * x1 + a22 * x2)


def torus_step_exact(A: ToralAutomorphism, x: RationalPoint) -> RationalPoint:
    a11, a12, a21, a22 = A.entries
    x1, x2 = Fraction(x[0]), Fraction(x[1])
    y1 = a11 * x1 + a12 * x2
    y2 = a21 * x1 + a22 * x2
    return y1 - math.floor(y1), y2 - math.floor(y2)


def extended_step(A: ToralAutomorphism, s: ExtendedTorusState) -> ExtendedTorusState:
    """
    Base point by A mod 1, covector by (A^-1)^T.

    In eigen momenta this is (p_u, p_v) -> (sign p_u / lambda, sign lambda p_v),
    recorded by bumping the integer shift.
    """
    data = s.data
    s_u, s_v = s.signs
    return ExtendedTorusState(data, torus_step(A, s.x),
                              (data.sign * s_u, data.sign * s_v),
                              shift=s.shift + 1, log_magnitudes=s.log_base)


def integral_F1(s: ExtendedTorusState) -> float:
    s_u, s_v = s.signs
    if s_u == 0 or s_v == 0:
        return 0.0
    # Shifts cancel before exponentiation
    log_product = s.log_base[0] + s.log_base[1]
    return s_u * s_v * math.exp(log_product)


def integral_F2(s: ExtendedTorusState) -> float:
    s_u, s_v = s.signs
    if s_u == 0 or s_v == 0:
        return 0.0
    f1 = integral_F1(s)
    ell = math.log(s.data.lam)
    # log p_u^2 / log lambda^2 = log|p_u0| / ell - shift; the integer part drops out of sin
    phase = s.log_base[0] / ell - s.shift
    return math.exp(-1.0 / (f1 * f1)) * math.sin(2 * math.pi * (phase % 1.0))


def F1_from_momenta(p_u: float, p_v: float) -> float:
    return p_u * p_v


def F2_from_momenta(p_u: float, p_v: float, lam: float) -> float:
    if p_u == 0 or p_v == 0:
        return 0.0
    return math.exp(-1.0 / (p_u * p_v) ** 2) * math.sin(
        2 * math.pi * math.log(p_u * p_u) / math.log(lam * lam))


def poisson_bracket(F: Callable[[np.ndarray], float], G: Callable[[np.ndarray], float],
                    z: Sequence[float], h: float = BRACKET_STEP) -> float:
    """
    Canonical bracket in (u, v, p_u, p_v) by central differences:
    sum over i of dF/dq_i dG/dp_i - dF/dp_i dG/dq_i.
    """
    z = np.asarray(z, dtype=float)

    def partial(func, k):
        e = np.zeros(4)
        e[k] = h
        return (func(z + e) - func(z - e)) / (2 * h)

    total = 0.0
    for q_index, p_index in ((0, 2), (1, 3)):
        total += partial(F, q_index) * partial(G, p_index) - partial(F, p_index) * partial(G, q_index)
    return float(total)


def orbit(A: ToralAutomorphism, x: TorusPoint, steps: int) -> List[TorusPoint]:
    points = [(_reduce(x[0]), _reduce(x[1]))]
    for _ in range(steps):
        points.append(torus_step(A, points[-1]))
    return points


def exact_orbit_period(A: ToralAutomorphism, point: RationalPoint,
                       max_period: Optional[int] = None) -> int:
    """
    Period of a rational point under exact iteration.
    The orbit stays on the grid (1/q)Z^2 mod 1, so it is at most q^2.
    """
    start = (Fraction(point[0]) % 1, Fraction(point[1]) % 1)
    q = math.lcm(start[0].denominator, start[1].denominator)
    bound = max_period if max_period is not None else q * q
    current = torus_step_exact(A, start)
    for k in range(1, bound + 1):
        if current == start:
            return k
        current = torus_step_exact(A, current)
    raise ValueError(f"No return to {start} within {bound} steps")


def group_period(A: ToralAutomorphism, q: int) -> int:
    # Order of A in GL(2, Z/qZ)
    if q < 1:
        raise ValueError("Modulus must be positive")
    identity = np.eye(2, dtype=np.int64) % q
    base = A.matrix % q
    power = base.copy()
    k = 1
    while not np.array_equal(power, identity):
        power = (power @ base) % q
        k += 1
    return k


def extended_orbit_report(A: ToralAutomorphism, states: Sequence[ExtendedTorusState],
                          steps: int) -> Dict[str, float]:
    """
    Worst per-step and cumulative integral changes over a family of orbits.
    """
    worst_step_f1 = worst_step_f2 = worst_total_f1 = 0.0
    for s in states:
        f1_0, f2_0 = integral_F1(s), integral_F2(s)
        prev_f1, prev_f2 = f1_0, f2_0
        current = s
        for _ in range(steps):
            current = extended_step(A, current)
            f1, f2 = integral_F1(current), integral_F2(current)
            scale = max(abs(prev_f1), 1e-300)
            worst_step_f1 = max(worst_step_f1, abs(f1 - prev_f1) / scale)
            worst_step_f2 = max(worst_step_f2, abs(f2 - prev_f2))
            prev_f1, prev_f2 = f1, f2
        worst_total_f1 = max(worst_total_f1, abs(prev_f1 - f1_0) / max(abs(f1_0), 1e-300))
    return {
        'F1_step_relative': worst_step_f1,
        'F1_total_relative': worst_total_f1,
        'F2_step_absolute': worst_step_f2,
    }


def random_extended_states(data: HyperbolicData, count: int,
                           rng: np.random.Generator) -> List[ExtendedTorusState]:
    states = []
    for _ in range(count):
        x = tuple(rng.random(2))
        p = tuple(rng.uniform(-2.0, 2.0, size=2))
        states.append(ExtendedTorusState.from_covector(data, x, p))
    return states
