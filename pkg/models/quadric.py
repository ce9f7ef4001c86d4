"""
Central quadrics (Bx, x) = 1 with diagonal B, and the states living on them.
"""
from typing import Optional, Sequence, Tuple

import numpy as np

# Tolerance for the state invariants
STATE_TOLERANCE = 1e-10


class Quadric:
    # Diagonal B = A^-1; b holds the n + 1 diagonal entries

    def __init__(self, b: Sequence[float]):
        b = np.array(b, dtype=float)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("A quadric needs at least two diagonal entries")
        if np.any(b == 0) or not np.all(np.isfinite(b)):
            raise ValueError(f"Diagonal entries must be finite and nonzero, got {b.tolist()}")
        b.setflags(write=False)
        self._b = b

    @classmethod
    def sphere(cls, dimension: int) -> 'Quadric':
        # Unit sphere in R^dimension
        return cls(np.ones(dimension))

    @property
    def b(self) -> np.ndarray:
        return self._b

    @property
    def a(self) -> np.ndarray:
        return 1.0 / self._b

    @property
    def ambient_dimension(self) -> int:
        return self._b.size

    @property
    def signature(self) -> Tuple[int, int]:
        return int(np.sum(self._b > 0)), int(np.sum(self._b < 0))

    @property
    def is_ellipsoid(self) -> bool:
        return bool(np.all(self._b > 0))

    @property
    def kind(self) -> str:
        positive, negative = self.signature
        if negative == 0:
            return 'ellipsoid'
        if positive == 0:
            return 'empty'
        if self.ambient_dimension == 2:
            return 'hyperbola'
        if self.ambient_dimension == 3:
            return 'hyperboloid_one_sheet' if negative == 1 else 'hyperboloid_two_sheets'
        return 'hyperboloid'

    def value(self, x: np.ndarray) -> float:
        return float(np.dot(self._b * x, x))

    def normal(self, x: np.ndarray) -> np.ndarray:
        return self._b * np.asarray(x, dtype=float)

    def dual(self) -> 'Quadric':
        # (Ay, y) = 1 contains y = Bx for every x on this quadric
        return Quadric(self.a)

    def geodesic_state(self, x: Sequence[float], direction: Sequence[float],
                       s: float = 0.0) -> 'GeodesicState':
        """
        Scales x onto the quadric, removes the normal part of direction and
        normalizes it to unit speed.
        """
        x = np.array(x, dtype=float)
        level = self.value(x)
        if level <= 0:
            raise ValueError(f"Ray through {x.tolist()} does not meet the quadric")
        x = x / np.sqrt(level)
        n = self.normal(x)
        v = np.array(direction, dtype=float)
        v = v - n * np.dot(n, v) / np.dot(n, n)
        speed = np.linalg.norm(v)
        if speed == 0:
            raise ValueError("Direction is normal to the quadric")
        return GeodesicState(x, v / speed, s)

    def __eq__(self, other) -> bool:
        return isinstance(other, Quadric) and np.array_equal(self._b, other._b)

    def __repr__(self) -> str:
        return f"Quadric(b={self._b.tolist()})"


class GeodesicState:
    # Position, unit tangent velocity and arclength

    def __init__(self, x: Sequence[float], xp: Sequence[float], s: float = 0.0):
        self._x = np.array(x, dtype=float)
        self._xp = np.array(xp, dtype=float)
        if self._x.shape != self._xp.shape or self._x.ndim != 1:
            raise ValueError("Position and velocity must be vectors of the same size")
        self._s = float(s)

    @property
    def x(self) -> np.ndarray:
        return self._x

    @property
    def xp(self) -> np.ndarray:
        return self._xp

    @property
    def s(self) -> float:
        return self._s

    def as_array(self) -> np.ndarray:
        return np.concatenate([self._x, self._xp])

    @classmethod
    def from_array(cls, y: np.ndarray, s: float = 0.0) -> 'GeodesicState':
        half = len(y) // 2
        return cls(y[:half], y[half:], s)

    def residuals(self, quadric: Quadric) -> Tuple[float, float, float]:
        # (level, tangency, speed) deviations
        n = quadric.normal(self._x)
        return (abs(np.dot(n, self._x) - 1.0), abs(np.dot(n, self._xp)),
                abs(np.linalg.norm(self._xp) - 1.0))

    def is_valid(self, quadric: Quadric, tolerance: float = STATE_TOLERANCE) -> bool:
        return max(self.residuals(quadric)) <= tolerance

    def __repr__(self) -> str:
        return f"GeodesicState(x={self._x.tolist()}, xp={self._xp.tolist()}, s={self._s})"


class NeumannState:
    # Unit vector q, tangent velocity qp and time tau

    def __init__(self, q: Sequence[float], qp: Sequence[float], tau: float = 0.0):
        self._q = np.array(q, dtype=float)
        self._qp = np.array(qp, dtype=float)
        if self._q.shape != self._qp.shape or self._q.ndim != 1:
            raise ValueError("q and qp must be vectors of the same size")
        self._tau = float(tau)

    @property
    def q(self) -> np.ndarray:
        return self._q

    @property
    def qp(self) -> np.ndarray:
        return self._qp

    @property
    def tau(self) -> float:
        return self._tau

    def as_array(self) -> np.ndarray:
        return np.concatenate([self._q, self._qp])

    @classmethod
    def from_array(cls, y: np.ndarray, tau: float = 0.0) -> 'NeumannState':
        half = len(y) // 2
        return cls(y[:half], y[half:], tau)

    def is_valid(self, tolerance: float = STATE_TOLERANCE) -> bool:
        return (abs(np.linalg.norm(self._q) - 1.0) <= tolerance
                and abs(np.dot(self._q, self._qp)) <= tolerance)

    def __repr__(self) -> str:
        return f"NeumannState(q={self._q.tolist()}, qp={self._qp.tolist()}, tau={self._tau})"


class KnoerrerImage:
    """
    Samples (tau_i, q_i, dq/dtau_i) of a transformed geodesic.

    `potential` is the diagonal whose Neumann system the samples satisfy:
    b itself when the Joachimsthal value F is positive, -b when it is negative.
    """

    def __init__(self, s: np.ndarray, tau: np.ndarray, q: np.ndarray, qp: np.ndarray,
                 potential: np.ndarray, joachimsthal_value: float,
                 alpha: Optional[np.ndarray] = None):
        self._s = np.asarray(s, dtype=float)
        self._tau = np.asarray(tau, dtype=float)
        self._q = np.asarray(q, dtype=float)
        self._qp = np.asarray(qp, dtype=float)
        self._potential = np.asarray(potential, dtype=float)
        self._F = float(joachimsthal_value)
        self._alpha = None if alpha is None else np.asarray(alpha, dtype=float)

    @property
    def s(self) -> np.ndarray:
        return self._s

    @property
    def tau(self) -> np.ndarray:
        return self._tau

    @property
    def q(self) -> np.ndarray:
        return self._q

    @property
    def qp(self) -> np.ndarray:
        return self._qp

    @property
    def alpha(self) -> Optional[np.ndarray]:
        return self._alpha

    @property
    def potential(self) -> np.ndarray:
        return self._potential

    @property
    def joachimsthal_value(self) -> float:
        return self._F

    @property
    def regime(self) -> str:
        return 'direct' if self._F > 0 else 'reflected'

    def state(self, index: int) -> NeumannState:
        return NeumannState(self._q[index], self._qp[index], self._tau[index])

    def __len__(self) -> int:
        return self._tau.size
