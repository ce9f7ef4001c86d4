"""
The second metric dr^2 = (B dx, dx)/|Bx|^2 on a quadric and its projective chart.

Geodesics of dr^2 are integrated intrinsically, in graph charts of the
quadric with Christoffel symbols taken by central differences of the
pulled-back metric, so that their traces can be compared with the
ordinary geodesics.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree

from models.quadric import GeodesicState, Quadric
from models.trajectory import IntegratorConfig, Trajectory
from numerics.errors import ChartSwitchError, DegenerateChartPoint, DegeneratePoint
from numerics.integrator import integrate
from services.quadrics_service import integrate_geodesic, knoerrer_transform

logger = logging.getLogger(__name__)

CHRISTOFFEL_STEP = 1e-5
SEGMENT_LENGTH = 0.25
DEGENERATE_DENOMINATOR = 1e-14


def second_metric(x: Sequence[float], v: Sequence[float], Q: Quadric) -> float:
    # dr^2(v) at x
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    n = Q.normal(x)
    norm_squared = float(np.dot(n, n))
    if norm_squared <= DEGENERATE_DENOMINATOR:
        raise DegeneratePoint(f"|Bx| vanishes at {x.tolist()}")
    return float(np.dot(Q.b * v, v)) / norm_squared


class GraphChart:
    """
    Solves (Bx, x) = 1 for the coordinate `index`, keeping the sign of x_index.
    Chart coordinates are the remaining components of x.
    """

    def __init__(self, Q: Quadric, index: int, sign: float):
        self.quadric = Q
        self.index = index
        self.sign = 1.0 if sign >= 0 else -1.0
        self._others = [i for i in range(Q.ambient_dimension) if i != index]

    @classmethod
    def best_for(cls, x: np.ndarray, Q: Quadric) -> 'GraphChart':
        # Chart along the largest normal component
        n = Q.normal(x)
        index = int(np.argmax(np.abs(n)))
        if abs(n[index]) <= DEGENERATE_DENOMINATOR:
            raise ChartSwitchError(f"No graph chart at {x.tolist()}")
        return cls(Q, index, x[index])

    def to_chart(self, x: np.ndarray, v: Optional[np.ndarray] = None):
        u = np.asarray(x, dtype=float)[self._others]
        if v is None:
            return u
        return u, np.asarray(v, dtype=float)[self._others]

    def embed(self, u: np.ndarray) -> np.ndarray:
        b = self.quadric.b
        others = b[self._others]
        radicand = (1.0 - np.dot(others * u, u)) / b[self.index]
        if radicand <= 0:
            raise ChartSwitchError(f"Left the domain of chart x{self.index}")
        x = np.empty(self.quadric.ambient_dimension)
        x[self._others] = u
        x[self.index] = self.sign * np.sqrt(radicand)
        return x

    def jacobian(self, u: np.ndarray) -> np.ndarray:
        # Columns are dx/du_i
        b = self.quadric.b
        x = self.embed(u)
        dim = self.quadric.ambient_dimension
        J = np.zeros((dim, dim - 1))
        for column, i in enumerate(self._others):
            J[i, column] = 1.0
            J[self.index, column] = -b[i] * x[i] / (b[self.index] * x[self.index])
        return J

    def metric(self, u: np.ndarray) -> np.ndarray:
        # Pullback of dr^2
        x = self.embed(u)
        J = self.jacobian(u)
        n = self.quadric.normal(x)
        return (J.T * self.quadric.b) @ J / np.dot(n, n)

    def christoffel(self, u: np.ndarray, h: float = CHRISTOFFEL_STEP) -> np.ndarray:
        """
        Gamma[k, i, j] = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij),
        metric derivatives by central differences.
        """
        m = u.size
        dg = np.empty((m, m, m))
        for l in range(m):
            e = np.zeros(m)
            e[l] = h
            dg[l] = (self.metric(u + e) - self.metric(u - e)) / (2 * h)
        # dg[l, i, j] = d_l g_ij
        lowered = 0.5 * _lower(dg)
        return np.einsum('kl,ijl->kij', np.linalg.inv(self.metric(u)), lowered)


def _lower(dg: np.ndarray) -> np.ndarray:
    # [i, j, l] -> d_i g_jl + d_j g_il - d_l g_ij
    return np.einsum('ijl->ijl', dg) + np.einsum('jil->ijl', dg) - np.einsum('lij->ijl', dg)


def _chart_rhs(chart: GraphChart):
    m = chart.quadric.ambient_dimension - 1

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        u, du = y[:m], y[m:]
        gamma = chart.christoffel(u)
        return np.concatenate([du, -np.einsum('kij,i,j->k', gamma, du, du)])

    return rhs


class MetricGeodesic:
    # Ambient samples of a dr^2 geodesic with its affine parameter.

    def __init__(self, parameter: np.ndarray, positions: np.ndarray, velocities: np.ndarray,
                 charts: List[int]):
        self.parameter = np.asarray(parameter, dtype=float)
        self.positions = np.asarray(positions, dtype=float)
        self.velocities = np.asarray(velocities, dtype=float)
        self.charts = charts

    def to_trajectory(self) -> Trajectory:
        dim = self.positions.shape[1]
        labels = [f"x{i}" for i in range(dim)] + [f"xp{i}" for i in range(dim)]
        return Trajectory(self.parameter, np.hstack([self.positions, self.velocities]), labels)

    def __len__(self) -> int:
        return self.parameter.size


def equiv_metric_geodesic(s0: GeodesicState, Q: Quadric, length: float,
                          cfg: Optional[IntegratorConfig] = None,
                          segment: float = SEGMENT_LENGTH, density: int = 200) -> MetricGeodesic:
    """
    Integrates the dr^2 geodesic through s0.x with initial velocity s0.xp / alpha,
    alpha = sqrt(|lambda|), so that its affine parameter is the Knoerrer time.
    The graph chart is re-chosen after every `segment` of parameter.
    """
    cfg = cfg or IntegratorConfig()
    x = s0.x.copy()
    n = Q.normal(x)
    curvature = abs(float(np.dot(Q.b * s0.xp, s0.xp)))
    alpha = np.sqrt(curvature / np.dot(n, n))
    v = s0.xp / alpha if alpha > 0 else s0.xp.copy()

    parameters, positions, velocities, charts = [0.0], [x.copy()], [v.copy()], []
    t = 0.0
    while t < length * (1 - 1e-12):
        chart = GraphChart.best_for(x, Q)
        charts.append(chart.index)
        span = min(segment, length - t)
        u, du = chart.to_chart(x, v)
        count = max(2, int(np.ceil(span * density)) + 1)
        piece = integrate(_chart_rhs(chart), np.concatenate([u, du]), (0.0, span), cfg,
                          sample_times=np.linspace(0.0, span, count))
        m = u.size
        for time, y in zip(piece.times[1:], piece.states[1:]):
            point = chart.embed(y[:m])
            parameters.append(t + time)
            positions.append(point)
            velocities.append(chart.jacobian(y[:m]) @ y[m:])
        t += span
        x, v = positions[-1].copy(), velocities[-1].copy()
    logger.debug("dr^2 geodesic to parameter %g used charts %s", length, sorted(set(charts)))
    return MetricGeodesic(np.array(parameters), np.array(positions), np.array(velocities), charts)


def _closest_on_polyline(curve: np.ndarray, point: np.ndarray, j: int) -> Tuple[float, int, float]:
    # (distance, segment start, fraction) over the two segments around vertex j
    best = (float(np.linalg.norm(point - curve[j])), j, 0.0)
    for a in (j - 1, j):
        if a < 0 or a + 1 >= len(curve):
            continue
        segment = curve[a + 1] - curve[a]
        length_squared = np.dot(segment, segment)
        if length_squared == 0:
            continue
        fraction = float(np.clip(np.dot(point - curve[a], segment) / length_squared, 0.0, 1.0))
        distance = float(np.linalg.norm(point - (curve[a] + fraction * segment)))
        if distance < best[0]:
            best = (distance, a, fraction)
    return best


def trace_distance(points: np.ndarray, curve: np.ndarray) -> float:
    """Max distance from `points` to the polyline through `curve`."""
    curve = np.asarray(curve, dtype=float)
    _, nearest = cKDTree(curve).query(points)
    return max((_closest_on_polyline(curve, p, j)[0] for p, j in zip(points, nearest)), default=0.0)


def compare_traces(s0: GeodesicState, Q: Quadric, length: float = 5.0,
                   cfg: Optional[IntegratorConfig] = None) -> Dict[str, float]:
    """
    Runs both geodesics from the same initial data. Returns the max trace
    distance and how far the dr^2 parameter is from an affine function of
    the Knoerrer time tau(s) at the matching points.
    """
    cfg = cfg or IntegratorConfig()
    overshoot = 1.1 * length
    standard = integrate_geodesic(s0, Q, overshoot, cfg, samples=int(overshoot * 4000) + 1)
    image = knoerrer_transform(standard, Q)
    tau_end = float(np.interp(s0.s + length, image.s, image.tau))
    second = equiv_metric_geodesic(s0, Q, tau_end, cfg)

    curve = standard.positions
    _, nearest = cKDTree(curve).query(second.positions)
    distances, taus = [], []
    for point, j in zip(second.positions, nearest):
        distance, a, fraction = _closest_on_polyline(curve, point, j)
        distances.append(distance)
        b = min(a + 1, len(curve) - 1)
        taus.append(image.tau[a] + fraction * (image.tau[b] - image.tau[a]))
    taus = np.array(taus)
    slope, intercept = np.polyfit(taus, second.parameter, 1)
    defect = float(np.max(np.abs(second.parameter - (slope * taus + intercept))))
    return {'trace_distance': float(max(distances)),
            'parameter_slope': float(slope),
            'parameter_defect': defect}


# Projective chart x_1 = 1/y_0, x_k = y_k/y_0


def affine_to_chart(x: Sequence[float], v: Optional[Sequence[float]] = None):
    x = np.asarray(x, dtype=float)
    if x[0] == 0:
        raise DegenerateChartPoint("x_1 = 0 lies outside the projective chart")
    y = np.empty_like(x)
    y[0] = 1.0 / x[0]
    y[1:] = x[1:] / x[0]
    if v is None:
        return y
    v = np.asarray(v, dtype=float)
    dy = np.empty_like(v)
    dy[0] = -v[0] / x[0] ** 2
    dy[1:] = (v[1:] * x[0] - x[1:] * v[0]) / x[0] ** 2
    return y, dy


def chart_to_affine(y: Sequence[float], dy: Optional[Sequence[float]] = None):
    y = np.asarray(y, dtype=float)
    if y[0] == 0:
        raise DegenerateChartPoint("y_0 = 0 is a point at infinity")
    x = np.empty_like(y)
    x[0] = 1.0 / y[0]
    x[1:] = y[1:] / y[0]
    if dy is None:
        return x
    dy = np.asarray(dy, dtype=float)
    v = np.empty_like(dy)
    v[0] = -dy[0] / y[0] ** 2
    v[1:] = (dy[1:] * y[0] - y[1:] * dy[0]) / y[0] ** 2
    return x, v


def closure_equation(y: Sequence[float], Q: Quadric) -> float:
    # b_1 + sum b_k y_k^2 - y_0^2 vanishes on the closure
    y = np.asarray(y, dtype=float)
    b = Q.b
    return float(b[0] + np.dot(b[1:] * y[1:], y[1:]) - y[0] ** 2)


def projective_chart_metric(y: Sequence[float], dy: Sequence[float], Q: Quadric) -> float:
    """
    (-dy_0^2 + sum b_k dy_k^2) / (b_1^2 + sum b_k^2 y_k^2) on tangent
    vectors of the closure. Regular across y_0 = 0.
    """
    y = np.asarray(y, dtype=float)
    dy = np.asarray(dy, dtype=float)
    b = Q.b
    denominator = b[0] ** 2 + np.dot(b[1:] ** 2, y[1:] ** 2)
    if denominator <= DEGENERATE_DENOMINATOR:
        raise DegenerateChartPoint(f"Chart metric denominator {denominator:.3e}")
    return float((-dy[0] ** 2 + np.dot(b[1:] * dy[1:], dy[1:])) / denominator)


def closure_tangent_basis(y: Sequence[float], Q: Quadric) -> np.ndarray:
    # Columns span the kernel of the closure equation's gradient
    y = np.asarray(y, dtype=float)
    gradient = np.concatenate([[-2 * y[0]], 2 * Q.b[1:] * y[1:]])
    return linalg.null_space(gradient[None, :])


def points_at_infinity(Q: Quadric, count: int, rng: np.random.Generator,
                       max_tries: int = 10_000) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Samples (y, dy) with y_0 = 0 on the projective closure together with a
    random tangent vector. Ellipsoids have no such points.
    """
    b = Q.b
    found = []
    tries = 0
    while len(found) < count:
        tries += 1
        if tries > max_tries:
            raise ValueError(f"{Q!r} gains no points at infinity in this chart")
        w = rng.standard_normal(b.size - 1)
        level = np.dot(b[1:] * w, w)
        if level == 0 or np.sign(level) == np.sign(b[0]):
            continue
        y = np.concatenate([[0.0], w * np.sqrt(-b[0] / level)])
        basis = closure_tangent_basis(y, Q)
        dy = basis @ rng.standard_normal(basis.shape[1])
        found.append((y, dy))
    return found


def _signature(form: np.ndarray, tolerance: float = 1e-12) -> Tuple[int, int]:
    eigenvalues = np.linalg.eigvalsh(0.5 * (form + form.T))
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    return int(np.sum(eigenvalues > tolerance * scale)), int(np.sum(eigenvalues < -tolerance * scale))


def restricted_metric_signature(Q: Quadric, y: Optional[Sequence[float]] = None,
                                x: Optional[Sequence[float]] = None) -> Tuple[int, int]:
    """
    (positive, negative) counts of dr^2 on the tangent space, either at an
    affine point x of Q or at a chart point y of the closure.
    """
    if (x is None) == (y is None):
        raise ValueError("Give exactly one of x or y")
    b = Q.b
    if x is not None:
        x = np.asarray(x, dtype=float)
        n = Q.normal(x)
        basis = linalg.null_space(n[None, :])
        form = (basis.T * b) @ basis / np.dot(n, n)
        return _signature(form)
    y = np.asarray(y, dtype=float)
    basis = closure_tangent_basis(y, Q)
    weights = np.concatenate([[-1.0], b[1:]])
    denominator = b[0] ** 2 + np.dot(b[1:] ** 2, y[1:] ** 2)
    form = (basis.T * weights) @ basis / denominator
    return _signature(form)
