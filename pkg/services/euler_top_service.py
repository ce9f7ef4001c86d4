"""
N-dimensional Euler top dM/dt = [M, Omega], M = Omega J + J Omega, with the
Manakov Lax pair L = M + lambda J^2, P = Omega + lambda J.

With J(t)^2 = J0^2 + f(t) I the coefficients of
P0(lambda, mu) = det(M + lambda J0^2 - mu I) stay integrals of motion.
All time stepping runs in the eigenbasis of J0, where Omega is
componentwise and J(t) is diagonal.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from models.matrices import SkewMatrix, SymMatrix
from models.rigid_body import InertiaSpec, RigidBodyState, SpectralInvariants
from models.trajectory import IntegratorConfig, Trajectory
from numerics.errors import SingularInertia
from numerics.integrator import integrate
from numerics.linalg import sym_eigen, sym_sqrt_psd

logger = logging.getLogger(__name__)

SINGULAR_DENOMINATOR = 1e-14
PROBE_LAMBDAS = (0.0, 1.0, -2.0)


def skew_from_vector(m: Sequence[float]) -> SkewMatrix:
    # so(3) <-> R^3: hat(m) v = m x v
    m1, m2, m3 = m
    return SkewMatrix([[0.0, -m3, m2], [m3, 0.0, -m1], [-m2, m1, 0.0]])


def vector_from_skew(M: SkewMatrix) -> np.ndarray:
    entries = M.entries
    return np.array([entries[2, 1], entries[0, 2], entries[1, 0]])


def random_skew(n: int, rng: np.random.Generator) -> SkewMatrix:
    upper = np.triu(rng.standard_normal((n, n)), 1)
    return SkewMatrix(upper - upper.T)


def _omega_in_eigenbasis(M_tilde: np.ndarray, j: np.ndarray) -> np.ndarray:
    denominators = j[:, None] + j[None, :]
    if denominators.min() <= SINGULAR_DENOMINATOR:
        raise SingularInertia(f"j_i + j_j = {denominators.min():.3e} is not invertible")
    return M_tilde / denominators


def solve_omega(M: SkewMatrix, J: SymMatrix) -> SkewMatrix:
    """
    Solves Omega J + J Omega = M for skew Omega.
    In the eigenbasis of J the solution is M_ij / (j_i + j_j).
    """
    decomposition = sym_eigen(J)
    Q = decomposition.vectors
    omega_tilde = _omega_in_eigenbasis(Q.T @ M.entries @ Q, decomposition.values)
    return SkewMatrix(Q @ omega_tilde @ Q.T)


def euler_rhs(s: RigidBodyState, inertia: InertiaSpec) -> Tuple[SkewMatrix, Optional[np.ndarray]]:
    # dM/dt = M Omega - Omega M and, with a frame, dX/dt = X Omega
    J = sym_sqrt_psd(inertia.squared_at(s.t), time=s.t)
    omega = solve_omega(s.M, J).entries
    M = s.M.entries
    dM = SkewMatrix(M @ omega - omega @ M)
    dX = None if s.X is None else s.X @ omega
    return dM, dX


def hamiltonian(M: SkewMatrix, J: SymMatrix) -> float:
    # H = tr(M^T A^{-1}(M)) / 2 with A(Omega) = Omega J + J Omega
    omega = solve_omega(M, J)
    return 0.5 * float(np.sum(M.entries * omega.entries))


def _hamiltonian_in_eigenbasis(M_tilde: np.ndarray, j: np.ndarray) -> float:
    return 0.5 * float(np.sum(M_tilde * _omega_in_eigenbasis(M_tilde, j)))


def _chebyshev_nodes(count: int) -> np.ndarray:
    k = np.arange(count)
    return np.cos(np.pi * (2 * k + 1) / (2 * count))


def characteristic_value(M: np.ndarray, J0_squared: np.ndarray, lam: float, mu: float) -> float:
    # det(M + lambda J0^2 - mu I)
    n = M.shape[0]
    return float(np.linalg.det(M + lam * J0_squared - mu * np.eye(n)))


def _coefficient_table(M: np.ndarray, J0_squared: np.ndarray) -> np.ndarray:
    """
    Bivariate coefficients by evaluation-interpolation: det on a tensor grid
    of Chebyshev nodes, then a solve with the 2-D Vandermonde matrix.
    """
    n = M.shape[0]
    nodes = _chebyshev_nodes(n + 1)
    lams, mus = np.meshgrid(nodes, nodes, indexing='ij')
    lams, mus = lams.ravel(), mus.ravel()
    stacked = M[None, :, :] + lams[:, None, None] * J0_squared[None, :, :] \
        - mus[:, None, None] * np.eye(n)[None, :, :]
    values = np.linalg.det(stacked)
    vandermonde = np.polynomial.polynomial.polyvander2d(lams, mus, [n, n])
    return np.linalg.solve(vandermonde, values).reshape(n + 1, n + 1)


def spectral_invariants(M: SkewMatrix, J0: SymMatrix) -> SpectralInvariants:
    if M.n != J0.n:
        raise ValueError("M and J0 dimensions differ")
    J0_entries = J0.entries
    return SpectralInvariants(M.n, _coefficient_table(M.entries, J0_entries @ J0_entries))


def probe_eigenvalues(M: SkewMatrix, J0: SymMatrix, lambdas: Sequence[float] = PROBE_LAMBDAS) -> List[np.ndarray]:
    # Spectra of the Lax matrix M + lambda J0^2 at fixed probe values
    J0_squared = J0.entries @ J0.entries
    return [np.linalg.eigvals(M.entries + lam * J0_squared) for lam in lambdas]


def spectrum_distance(a: np.ndarray, b: np.ndarray) -> float:
    # Max distance under the best one-to-one matching of two spectra
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def lax_residual(M: SkewMatrix, inertia: InertiaSpec, t: float, lam: float) -> float:
    """
    |dL/dt - [L, P]| for L = M + lambda J0^2, P = Omega + lambda J(t).
    J0 is constant, so dL/dt is the Euler right-hand side.
    """
    J = sym_sqrt_psd(inertia.squared_at(t), time=t).entries
    J0 = inertia.J0.entries
    dM, _ = euler_rhs(RigidBodyState(M, t), inertia)
    omega = solve_omega(M, SymMatrix(J)).entries
    L = M.entries + lam * J0 @ J0
    P = omega + lam * J
    return float(np.linalg.norm(dM.entries - (L @ P - P @ L)))


def polynomial_shift_identity(M: SkewMatrix, J0: SymMatrix, f_value: float,
                              grid: Optional[Sequence[float]] = None) -> float:
    """
    Max relative residual of det(M + lambda (J0^2 + f I) - mu I) = P0(lambda, mu - f lambda)
    over a (lambda, mu) grid; both sides are evaluated as determinants.
    """
    grid = np.linspace(-2.0, 2.0, 9) if grid is None else np.asarray(grid, dtype=float)
    J0_squared = J0.entries @ J0.entries
    shifted = J0_squared + f_value * np.eye(M.n)
    worst = 0.0
    for lam in grid:
        for mu in grid:
            lhs = characteristic_value(M.entries, shifted, lam, mu)
            rhs = characteristic_value(M.entries, J0_squared, lam, mu - f_value * lam)
            scale = max(1.0, abs(lhs), abs(rhs))
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst


class RigidBodyFlow:
    # Modulated Euler trajectory with its invariant-drift report.

    def __init__(self, trajectory: Trajectory, inertia: InertiaSpec, with_frame: bool,
                 coefficient_labels: List[str]):
        self._trajectory = trajectory
        self._inertia = inertia
        self._with_frame = with_frame
        self._coefficient_labels = coefficient_labels

    @property
    def trajectory(self) -> Trajectory:
        return self._trajectory

    @property
    def times(self) -> np.ndarray:
        return self._trajectory.times

    def momentum(self, index: int) -> SkewMatrix:
        # M at sample `index`, in the original basis
        n = self._inertia.n
        Q = self._inertia.eigenbasis.vectors
        M_tilde = self._trajectory.states[index, :n * n].reshape(n, n)
        return SkewMatrix(Q @ M_tilde @ Q.T)

    def frame(self, index: int) -> Optional[np.ndarray]:
        if not self._with_frame:
            return None
        n = self._inertia.n
        Q = self._inertia.eigenbasis.vectors
        return self._trajectory.states[index, n * n:].reshape(n, n) @ Q.T

    def final_state(self) -> RigidBodyState:
        last = len(self._trajectory) - 1
        return RigidBodyState(self.momentum(last), self.times[-1], self.frame(last))

    def series(self, name: str) -> np.ndarray:
        return self._trajectory.invariants[name]

    def relative_drift(self, name: str) -> float:
        # Drift normalized by max(1, |initial value|)
        values = self.series(name)
        return float(np.max(np.abs(values - values[0])) / max(1.0, abs(values[0])))

    @property
    def coefficient_drift(self) -> float:
        return max((self.relative_drift(label) for label in self._coefficient_labels), default=0.0)

    @property
    def probe_drift(self) -> float:
        return float(np.max(self.series('probe_drift')))

    @property
    def skewness(self) -> float:
        return float(np.max(self.series('skewness')))

    @property
    def orthogonality(self) -> float:
        return float(np.max(self.series('orthogonality'))) if self._with_frame else 0.0

    def periodicity_defect(self, name: str, period: float) -> float:
        # max |I(t + T) - I(t)| over sample pairs one period apart
        times = self.times
        values = self.series(name)
        worst = 0.0
        for i, t in enumerate(times):
            j = int(np.searchsorted(times, t + period - 1e-9))
            if j < len(times) and abs(times[j] - (t + period)) <= 1e-9:
                worst = max(worst, abs(values[j] - values[i]))
        return worst

    def report(self) -> Dict[str, float]:
        report = {'coefficient_drift': self.coefficient_drift,
                  'probe_drift': self.probe_drift,
                  'skewness': self.skewness}
        for label in self._coefficient_labels:
            report[label] = self.relative_drift(label)
        if self._with_frame:
            report['orthogonality'] = self.orthogonality
        return report


def _pack(state: RigidBodyState, inertia: InertiaSpec, with_frame: bool) -> np.ndarray:
    Q = inertia.eigenbasis.vectors
    parts = [(Q.T @ state.M.entries @ Q).ravel()]
    if with_frame:
        X = state.X if state.X is not None else np.eye(state.n)
        parts.append((X @ Q).ravel())
    return np.concatenate(parts)


def _eigenbasis_rhs(inertia: InertiaSpec, with_frame: bool):
    n = inertia.n

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        M = y[:n * n].reshape(n, n)
        omega = _omega_in_eigenbasis(M, inertia.diagonal_at(t))
        dM = (M @ omega - omega @ M).ravel()
        if not with_frame:
            return dM
        X = y[n * n:].reshape(n, n)
        return np.concatenate([dM, (X @ omega).ravel()])

    return rhs


def modulated_flow(s0: RigidBodyState, inertia: InertiaSpec, t_end: float,
                   cfg: Optional[IntegratorConfig] = None, samples: int = 201,
                   with_frame: Optional[bool] = None) -> RigidBodyFlow:
    """
    Integrates the Euler equation with J(t) = (J0^2 + f(t) I)^(1/2) over
    [s0.t, s0.t + t_end] and measures every spectral invariant along the way.
    """
    cfg = cfg or IntegratorConfig()
    n = inertia.n
    if s0.n != n:
        raise ValueError("State and inertia dimensions differ")
    with_frame = s0.X is not None if with_frame is None else with_frame
    t0 = s0.t
    sample_times = np.linspace(t0, t0 + t_end, samples)
    inertia.check_positive(sample_times)

    trajectory = integrate(_eigenbasis_rhs(inertia, with_frame), _pack(s0, inertia, with_frame),
                           (t0, t0 + t_end), cfg, sample_times=sample_times)

    j0_squared = np.diag(inertia.eigenbasis.values ** 2)
    reference_probes = None
    table_rows: List[np.ndarray] = []
    probe_drift, skewness, orthogonality, energy, energy0 = [], [], [], [], []
    labels: List[str] = []
    for index, t in enumerate(trajectory.times):
        M_tilde = trajectory.states[index, :n * n].reshape(n, n)
        invariants = SpectralInvariants(n, _coefficient_table(M_tilde, j0_squared))
        labels = invariants.labels()
        table_rows.append(invariants.as_vector())
        probes = [np.linalg.eigvals(M_tilde + lam * j0_squared) for lam in PROBE_LAMBDAS]
        if reference_probes is None:
            reference_probes = probes
        scale = max(1.0, max(float(np.max(np.abs(p))) for p in reference_probes))
        probe_drift.append(max(spectrum_distance(p, r) for p, r in zip(probes, reference_probes)) / scale)
        skewness.append(float(np.linalg.norm(M_tilde + M_tilde.T)))
        energy.append(_hamiltonian_in_eigenbasis(M_tilde, inertia.diagonal_at(t)))
        energy0.append(_hamiltonian_in_eigenbasis(M_tilde, inertia.eigenbasis.values))
        if with_frame:
            X = trajectory.states[index, n * n:].reshape(n, n)
            orthogonality.append(float(np.linalg.norm(X.T @ X - np.eye(n))))

    table = np.array(table_rows)
    for column, label in enumerate(labels):
        trajectory = trajectory.with_invariant(label, table[:, column])
    trajectory = (trajectory
                  .with_invariant('probe_drift', probe_drift)
                  .with_invariant('skewness', skewness)
                  .with_invariant('hamiltonian', energy)
                  .with_invariant('hamiltonian_j0', energy0))
    if with_frame:
        trajectory = trajectory.with_invariant('orthogonality', orthogonality)

    flow = RigidBodyFlow(trajectory, inertia, with_frame, labels)
    logger.debug("Modulated flow n=%d to t=%g: coefficient drift %.3e, probe drift %.3e",
                 n, t_end, flow.coefficient_drift, flow.probe_drift)
    return flow


def t_shift_map(inertia: InertiaSpec, M0: SkewMatrix, cfg: Optional[IntegratorConfig] = None,
                t0: float = 0.0) -> SkewMatrix:
    # M(t0 + T) from M(t0) = M0 along the modulated flow
    period = inertia.period
    if period is None:
        raise ValueError("The modulation has no declared period")
    cfg = cfg or IntegratorConfig()
    trajectory = integrate(_eigenbasis_rhs(inertia, False), _pack(RigidBodyState(M0, t0), inertia, False),
                           (t0, t0 + period), cfg, sample_times=[t0 + period])
    n = inertia.n
    Q = inertia.eigenbasis.vectors
    return SkewMatrix(Q @ trajectory.final_state.reshape(n, n) @ Q.T)


def iterate_t_shift(inertia: InertiaSpec, M0: SkewMatrix, iterations: int,
                    cfg: Optional[IntegratorConfig] = None) -> Tuple[List[SkewMatrix], float]:
    """
    Orbit of the period map. Returns the iterates (M0 first) and the
    cumulative relative drift of the spectral invariants.
    """
    orbit = [M0]
    reference = spectral_invariants(M0, inertia.J0).as_vector()
    scale = np.maximum(1.0, np.abs(reference))
    drift = 0.0
    M = M0
    for _ in range(iterations):
        M = t_shift_map(inertia, M, cfg)
        orbit.append(M)
        current = spectral_invariants(M, inertia.J0).as_vector()
        drift = max(drift, float(np.max(np.abs(current - reference) / scale)) if current.size else 0.0)
    return orbit, drift
