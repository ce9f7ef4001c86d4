import numpy as np
from typing import Sequence, Union

ArrayLike = Union[np.ndarray, Sequence[Sequence[float]]]

# Relative asymmetry tolerated on input before storage symmetrizes it
SYMMETRY_TOLERANCE = 1e-12


def _square_array(entries: ArrayLike) -> np.ndarray:
    array = np.array(entries, dtype=float)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError("Matrix entries must be finite")
    return array


class SquareMatrix:
    # Immutable dense n x n real matrix; base for the symmetric and skew roles.

    def __init__(self, entries: ArrayLike):
        self._entries = self._store(_square_array(entries))
        self._entries.setflags(write=False)

    def _store(self, array: np.ndarray) -> np.ndarray:
        return array.copy()

    @property
    def n(self) -> int:
        return self._entries.shape[0]

    @property
    def entries(self) -> np.ndarray:
        # Read-only view of the stored values
        return self._entries

    def norm(self) -> float:
        return float(np.linalg.norm(self._entries))

    def __array__(self, dtype=None, copy=None):
        return np.array(self._entries, dtype=dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SquareMatrix):
            return NotImplemented
        return type(self) is type(other) and np.array_equal(self._entries, other._entries)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self._entries.tolist()!r})"


class SymMatrix(SquareMatrix):
    """
    Symmetric matrix. Inputs within SYMMETRY_TOLERANCE of symmetric are
    accepted and stored as (S + S^T)/2 so entries[i][j] == entries[j][i].
    """

    def _store(self, array: np.ndarray) -> np.ndarray:
        scale = max(1.0, float(np.max(np.abs(array))))
        if np.max(np.abs(array - array.T)) > SYMMETRY_TOLERANCE * scale:
            raise ValueError("Matrix is not symmetric")
        return 0.5 * (array + array.T)

    @classmethod
    def diagonal(cls, values: Sequence[float]) -> 'SymMatrix':
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def identity(cls, n: int) -> 'SymMatrix':
        return cls(np.eye(n))


class SkewMatrix(SquareMatrix):
    # Skew-symmetric matrix with an exactly zero diagonal.

    def _store(self, array: np.ndarray) -> np.ndarray:
        scale = max(1.0, float(np.max(np.abs(array))))
        if np.max(np.abs(array + array.T)) > SYMMETRY_TOLERANCE * scale:
            raise ValueError("Matrix is not skew-symmetric")
        stored = 0.5 * (array - array.T)
        np.fill_diagonal(stored, 0.0)
        return stored

    @classmethod
    def zeros(cls, n: int) -> 'SkewMatrix':
        return cls(np.zeros((n, n)))


class EigenDecomposition:
    # Ascending eigenvalues with orthonormal eigenvector columns.

    def __init__(self, values: np.ndarray, vectors: np.ndarray):
        self._values = np.array(values, dtype=float)
        self._vectors = np.array(vectors, dtype=float)
        self._values.setflags(write=False)
        self._vectors.setflags(write=False)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    def reconstruct(self) -> np.ndarray:
        # Q diag(values) Q^T
        return (self._vectors * self._values) @ self._vectors.T

    def apply(self, function) -> np.ndarray:
        # Spectral calculus: Q f(Lambda) Q^T
        return (self._vectors * function(self._values)) @ self._vectors.T
