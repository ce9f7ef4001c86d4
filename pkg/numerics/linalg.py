import logging

import numpy as np

from models.matrices import EigenDecomposition, SymMatrix
from numerics.errors import EigenNonConvergence, PositiveDefinitenessViolation

logger = logging.getLogger(__name__)

# Smallest eigenvalue accepted as positive definite
PD_EPSILON = 1e-12
RECONSTRUCTION_TOLERANCE = 1e-12


def sym_eigen(S: SymMatrix) -> EigenDecomposition:
    """
    Eigen-decomposition of a symmetric matrix.
    Values are returned ascending, vectors as orthonormal columns.
    """
    entries = S.entries
    try:
        values, vectors = np.linalg.eigh(entries)
    except np.linalg.LinAlgError:
        off_diagonal = entries - np.diag(np.diag(entries))
        raise EigenNonConvergence(float(np.linalg.norm(off_diagonal)))

    decomposition = EigenDecomposition(values, vectors)

    # Post-check the reconstruction the way a Jacobi sweep would check its residual
    scale = max(np.linalg.norm(entries), np.finfo(float).tiny)
    residual = np.linalg.norm(decomposition.reconstruct() - entries)
    if residual > RECONSTRUCTION_TOLERANCE * scale * max(1, S.n):
        rotated = vectors.T @ entries @ vectors
        off = rotated - np.diag(np.diag(rotated))
        raise EigenNonConvergence(float(np.linalg.norm(off)))
    return decomposition


def sym_sqrt_psd(S: SymMatrix, time: float = None) -> SymMatrix:
    # Principal square root through the eigenbasis; never Newton iteration.
    decomposition = sym_eigen(S)
    smallest = float(decomposition.values[0])
    if smallest <= PD_EPSILON:
        raise PositiveDefinitenessViolation(smallest, time)
    return SymMatrix(decomposition.apply(np.sqrt))


def random_rotation(n: int, rng: np.random.Generator) -> np.ndarray:
    # Haar-distributed orthogonal matrix from a QR factorization
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_positive_definite(n: int, rng: np.random.Generator, spread: float = 3.0) -> SymMatrix:
    values = 1.0 + spread * rng.random(n)
    rotation = random_rotation(n, rng)
    return SymMatrix((rotation * values) @ rotation.T)
