from typing import Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from numerics.errors import InvalidSampling


def cumulative_quadrature(times: Sequence[float], values: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Trapezoid-rule running integral G_i of g from times[0] to times[i].
    Exact for piecewise-linear g.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.ndim != 1 or times.shape != values.shape:
        raise InvalidSampling("Times and values must be one-dimensional and of equal length")
    if times.size == 0:
        raise InvalidSampling("At least one sample is required")
    if np.any(np.diff(times) < 0):
        raise InvalidSampling("Sample times are not monotone")
    return times, cumulative_trapezoid(values, times, initial=0.0)
