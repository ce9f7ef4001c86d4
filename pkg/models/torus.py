import math
from typing import Optional, Tuple

import numpy as np


class ToralAutomorphism:
    # Hyperbolic matrix in SL(2, Z) acting on the 2-torus.

    def __init__(self, a11: int, a12: int, a21: int, a22: int):
        entries = (a11, a12, a21, a22)
        if not all(isinstance(a, (int, np.integer)) for a in entries):
            raise ValueError("Toral automorphism entries must be integers")
        a11, a12, a21, a22 = (int(a) for a in entries)
        if a11 * a22 - a12 * a21 != 1:
            raise ValueError(f"Determinant must be +1, got {a11 * a22 - a12 * a21}")
        if abs(a11 + a22) <= 2:
            raise ValueError(f"|trace| must exceed 2 for hyperbolicity, got {a11 + a22}")
        self._entries = (a11, a12, a21, a22)

    @property
    def entries(self) -> Tuple[int, int, int, int]:
        return self._entries

    @property
    def trace(self) -> int:
        return self._entries[0] + self._entries[3]

    @property
    def matrix(self) -> np.ndarray:
        a11, a12, a21, a22 = self._entries
        return np.array([[a11, a12], [a21, a22]], dtype=np.int64)

    @property
    def inverse(self) -> np.ndarray:
        # Integer inverse, det = 1
        a11, a12, a21, a22 = self._entries
        return np.array([[a22, -a12], [-a21, a11]], dtype=np.int64)

    @classmethod
    def from_matrix(cls, matrix) -> 'ToralAutomorphism':
        (a11, a12), (a21, a22) = matrix
        return cls(int(a11), int(a12), int(a21), int(a22))

    def __eq__(self, other) -> bool:
        return isinstance(other, ToralAutomorphism) and self._entries == other._entries

    def __hash__(self) -> int:
        return hash(self._entries)

    def __repr__(self) -> str:
        return f"ToralAutomorphism{self._entries!r}"


class HyperbolicData:
    """
    Expanding eigenvalue lambda > 1, eigenbasis columns (unit, positive first
    component) for the expanding and contracting directions, and entropy log lambda.
    `sign` is the sign of the eigenvalues (negative when the trace is below -2).
    """

    def __init__(self, lam: float, eigenbasis: np.ndarray, sign: int):
        self._lambda = float(lam)
        self._eigenbasis = np.array(eigenbasis, dtype=float)
        self._eigenbasis.setflags(write=False)
        self._inverse = np.linalg.inv(self._eigenbasis)
        self._inverse.setflags(write=False)
        self._sign = sign

    @property
    def lam(self) -> float:
        return self._lambda

    @property
    def eigenbasis(self) -> np.ndarray:
        return self._eigenbasis

    @property
    def eigenbasis_inverse(self) -> np.ndarray:
        return self._inverse

    @property
    def sign(self) -> int:
        return self._sign

    @property
    def entropy(self) -> float:
        return math.log(self._lambda)


class ExtendedTorusState:
    """
    Point of T*T^2: torus coordinates in [0, 1) and a covector.

    Eigen momenta p_u = sign_u * exp(log|p_u|) are stored as a base
    logarithm plus an exact integer count of lambda-scalings, so the orbit
    can run far past the float range of p_u and p_v themselves. The standard
    covector p = E^{-T} (p_u, p_v) is derived from them.
    """

    def __init__(self, data: HyperbolicData, x: Tuple[float, float],
                 eigen_momenta: Tuple[float, float], shift: int = 0,
                 log_magnitudes: Optional[Tuple[float, float]] = None):
        x1, x2 = (float(v) for v in x)
        self._x = (_reduce(x1), _reduce(x2))
        self._data = data
        self._shift = int(shift)
        p_u, p_v = eigen_momenta
        self._signs = (int(np.sign(p_u)), int(np.sign(p_v)))
        if log_magnitudes is None:
            log_magnitudes = (math.log(abs(p_u)) if p_u != 0 else -math.inf,
                              math.log(abs(p_v)) if p_v != 0 else -math.inf)
        self._log_base = tuple(float(v) for v in log_magnitudes)

    @classmethod
    def from_covector(cls, data: HyperbolicData, x: Tuple[float, float],
                      p: Tuple[float, float]) -> 'ExtendedTorusState':
        # (p_u, p_v) = E^T p
        p_u, p_v = data.eigenbasis.T @ np.asarray(p, dtype=float)
        return cls(data, x, (p_u, p_v))

    @property
    def data(self) -> HyperbolicData:
        return self._data

    @property
    def x(self) -> Tuple[float, float]:
        return self._x

    @property
    def shift(self) -> int:
        return self._shift

    @property
    def signs(self) -> Tuple[int, int]:
        return self._signs

    @property
    def log_abs_momenta(self) -> Tuple[float, float]:
        # (log|p_u|, log|p_v|) after `shift` steps
        ell = math.log(self._data.lam)
        return (self._log_base[0] - self._shift * ell, self._log_base[1] + self._shift * ell)

    @property
    def log_base(self) -> Tuple[float, float]:
        return self._log_base

    @property
    def p_u(self) -> float:
        return self._signs[0] * math.exp(self.log_abs_momenta[0]) if self._signs[0] else 0.0

    @property
    def p_v(self) -> float:
        return self._signs[1] * math.exp(self.log_abs_momenta[1]) if self._signs[1] else 0.0

    @property
    def uv(self) -> Tuple[float, float]:
        # Eigen coordinates of the reduced base point
        u, v = self._data.eigenbasis_inverse @ np.array(self._x)
        return float(u), float(v)

    @property
    def p(self) -> Tuple[float, float]:
        p1, p2 = self._data.eigenbasis_inverse.T @ np.array([self.p_u, self.p_v])
        return float(p1), float(p2)

    def __repr__(self) -> str:
        return f"ExtendedTorusState(x={self._x!r}, p_u={self.p_u!r}, p_v={self.p_v!r})"


def _reduce(value: float) -> float:
    # Floor-based reduction into [0, 1)
    reduced = value - math.floor(value)
    return 0.0 if reduced >= 1.0 else reduced
