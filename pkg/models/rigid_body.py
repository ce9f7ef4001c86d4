from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from models.matrices import EigenDecomposition, SkewMatrix, SymMatrix
from models.oscillator import ModulationProfile
from numerics.errors import PositiveDefinitenessViolation
from numerics.linalg import PD_EPSILON, sym_eigen

# Drift tolerated on X^T X - I when a frame is carried
FRAME_TOLERANCE = 1e-8
PERIOD_SAMPLES = 256


class RigidBodyState:
    # Angular momentum M in so(N), time t and an optional frame X in SO(N).

    def __init__(self, M: SkewMatrix, t: float = 0.0, X: Optional[np.ndarray] = None):
        if not isinstance(M, SkewMatrix):
            M = SkewMatrix(M)
        self._M = M
        self._t = float(t)
        self._X = None
        if X is not None:
            X = np.array(X, dtype=float)
            if X.shape != (M.n, M.n):
                raise ValueError("Frame and momentum dimensions differ")
            defect = np.linalg.norm(X.T @ X - np.eye(M.n))
            if defect > FRAME_TOLERANCE:
                raise ValueError(f"Frame is not orthogonal (|X^T X - I| = {defect:.3e})")
            X.setflags(write=False)
            self._X = X

    @property
    def M(self) -> SkewMatrix:
        return self._M

    @property
    def t(self) -> float:
        return self._t

    @property
    def X(self) -> Optional[np.ndarray]:
        return self._X

    @property
    def n(self) -> int:
        return self._M.n

    def __repr__(self) -> str:
        frame = ", with frame" if self._X is not None else ""
        return f"RigidBodyState(n={self.n}, t={self._t!r}{frame})"


class InertiaSpec:
    """
    Inertia J(t) with J(t)^2 = J0^2 + f(t) I.
    J0 must be positive definite; with a periodic modulation the PD condition
    on J0^2 + f(t) I is checked over one period at construction.
    """

    def __init__(self, J0: SymMatrix, modulation: Optional[ModulationProfile] = None):
        if not isinstance(J0, SymMatrix):
            J0 = SymMatrix(J0)
        self._J0 = J0
        self._modulation = modulation
        self._eigen = sym_eigen(J0)
        if self._eigen.values[0] <= PD_EPSILON:
            raise ValueError("J0 must be positive definite")
        if modulation is not None and modulation.period is not None:
            grid = np.linspace(0.0, modulation.period, PERIOD_SAMPLES, endpoint=False)
            self.check_positive(grid)

    @property
    def J0(self) -> SymMatrix:
        return self._J0

    @property
    def modulation(self) -> Optional[ModulationProfile]:
        return self._modulation

    @property
    def period(self) -> Optional[float]:
        return None if self._modulation is None else self._modulation.period

    @property
    def eigenbasis(self) -> EigenDecomposition:
        # Eigen-decomposition of J0, computed once
        return self._eigen

    @property
    def n(self) -> int:
        return self._J0.n

    def f(self, t: float) -> float:
        return 0.0 if self._modulation is None else self._modulation(t)

    def squared_at(self, t: float) -> SymMatrix:
        # J0^2 + f(t) I
        J0 = self._J0.entries
        return SymMatrix(J0 @ J0 + self.f(t) * np.eye(self.n))

    def diagonal_at(self, t: float) -> np.ndarray:
        # Eigenvalues of J(t) in the J0 eigenbasis
        squared = self._eigen.values ** 2 + self.f(t)
        if squared.min() <= PD_EPSILON:
            raise PositiveDefinitenessViolation(float(squared.min()), t)
        return np.sqrt(squared)

    def check_positive(self, times: np.ndarray) -> None:
        values = self._eigen.values ** 2
        offsets = np.zeros(len(times)) if self._modulation is None else self._modulation.evaluate(times)
        smallest = values.min() + offsets
        worst = int(np.argmin(smallest))
        if smallest[worst] <= PD_EPSILON:
            raise PositiveDefinitenessViolation(float(smallest[worst]), float(times[worst]))


class SpectralInvariants:
    """
    Coefficients of P0(lambda, mu) = det(M + lambda J0^2 - mu I).

    `coefficients` keeps the entries that depend on M: index (a, b) is the
    power of lambda and of mu, with a + b <= n - 2 and n - a - b even.
    Entries forbidden by the skew-symmetry of M (odd degree in M) are checked
    to vanish when the full table is supplied.
    """

    def __init__(self, n: int, table: np.ndarray, tolerance: float = 1e-8):
        table = np.array(table, dtype=float)
        if table.shape != (n + 1, n + 1):
            raise ValueError("Coefficient table must be (n+1) x (n+1)")
        scale = max(1.0, float(np.max(np.abs(table))))
        self._n = n
        self._coefficients: Dict[Tuple[int, int], float] = {}
        for a in range(n + 1):
            for b in range(n + 1):
                degree_in_m = n - a - b
                value = float(table[a, b])
                forbidden = degree_in_m < 0 or degree_in_m % 2 == 1
                if forbidden and abs(value) > tolerance * scale:
                    raise ValueError(f"Coefficient of lambda^{a} mu^{b} should vanish, got {value:.3e}")
                if not forbidden and degree_in_m >= 2:
                    self._coefficients[(a, b)] = value
        self._table = table
        self._table.setflags(write=False)

    @property
    def n(self) -> int:
        return self._n

    @property
    def coefficients(self) -> Dict[Tuple[int, int], float]:
        return dict(self._coefficients)

    @property
    def table(self) -> np.ndarray:
        # Full interpolated table, constant top-degree terms included
        return self._table

    def __getitem__(self, key: Tuple[int, int]) -> float:
        return self._coefficients[key]

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        return iter(sorted(self._coefficients))

    def as_vector(self) -> np.ndarray:
        return np.array([self._coefficients[key] for key in sorted(self._coefficients)])

    def labels(self):
        return [f"P0_l{a}_m{b}" for a, b in sorted(self._coefficients)]

    def evaluate(self, lam: float, mu: float) -> float:
        # P0(lambda, mu) from the full table
        powers_l = lam ** np.arange(self._n + 1)
        powers_m = mu ** np.arange(self._n + 1)
        return float(powers_l @ self._table @ powers_m)
