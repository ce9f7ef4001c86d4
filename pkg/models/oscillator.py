import math
from typing import Callable, Dict, Optional

import numpy as np

# Tolerance on |f(t+T) - f(t)| when a period is declared
PERIOD_TOLERANCE = 1e-12
PERIOD_CHECK_SAMPLES = 64


class ModulationProfile:
    """
    Scalar modulation f(t) with an optional declared period T.
    The period is checked on a sample grid at construction; it is never inferred.
    Callables must accept numpy arrays as well as floats.
    """

    def __init__(self, f: Callable, period: Optional[float] = None, name: str = "custom",
                 parameters: Optional[Dict] = None):
        if period is not None and not period > 0:
            raise ValueError("Period must be positive")
        self._f = f
        self._period = None if period is None else float(period)
        self._name = name
        self._parameters = dict(parameters or {})
        if self._period is not None:
            self._check_period()

    def _check_period(self) -> None:
        grid = np.linspace(0.0, self._period, PERIOD_CHECK_SAMPLES, endpoint=False)
        values = np.asarray(self.evaluate(grid))
        shifted = np.asarray(self.evaluate(grid + self._period))
        scale = max(1.0, float(np.max(np.abs(values))))
        mismatch = float(np.max(np.abs(shifted - values)))
        if mismatch > PERIOD_TOLERANCE * scale:
            raise ValueError(f"Profile {self._name} is not periodic with period {self._period} "
                             f"(mismatch {mismatch:.3e})")

    def __call__(self, t: float) -> float:
        return float(self._f(t))

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        # Vectorized evaluation over a time grid
        times = np.asarray(times, dtype=float)
        try:
            values = np.asarray(self._f(times), dtype=float)
            if values.shape == times.shape:
                return values
        except (TypeError, ValueError):
            pass
        return np.array([float(self._f(t)) for t in times.ravel()]).reshape(times.shape)

    @property
    def period(self) -> Optional[float]:
        return self._period

    @property
    def name(self) -> str:
        return self._name

    @property
    def parameters(self) -> Dict:
        return dict(self._parameters)

    def to_dict(self) -> Dict:
        return {'kind': self._name, **self._parameters}

    # Profile library

    @classmethod
    def constant(cls, value: float = 0.0) -> 'ModulationProfile':
        # A constant is periodic with any period; report none
        return cls(lambda t: value + 0.0 * np.asarray(t, dtype=float), None, 'constant', {'value': value})

    @classmethod
    def sinusoidal(cls, mean: float = 0.0, amplitude: float = 1.0, period: float = 1.0) -> 'ModulationProfile':
        omega = 2.0 * math.pi / period
        return cls(lambda t: mean + amplitude * np.sin(omega * np.asarray(t, dtype=float)), period,
                   'sinusoidal', {'mean': mean, 'amplitude': amplitude, 'period': period})

    @classmethod
    def two_tone(cls, mean: float = 1.0, amplitude: float = 0.3, period: float = 2 * math.pi) -> 'ModulationProfile':
        omega = 2.0 * math.pi / period

        def f(t):
            t = np.asarray(t, dtype=float)
            return mean + amplitude * (np.sin(omega * t) + 0.5 * np.cos(3 * omega * t))

        return cls(f, period, 'two_tone', {'mean': mean, 'amplitude': amplitude, 'period': period})

    @classmethod
    def smooth_square(cls, mean: float = 1.0, amplitude: float = 0.3, period: float = 2 * math.pi,
                      sharpness: float = 5.0) -> 'ModulationProfile':
        omega = 2.0 * math.pi / period
        return cls(lambda t: mean + amplitude * np.tanh(sharpness * np.sin(omega * np.asarray(t, dtype=float))),
                   period, 'smooth_square',
                   {'mean': mean, 'amplitude': amplitude, 'period': period, 'sharpness': sharpness})

    @classmethod
    def exponential_ramp(cls, start: float = 1.0, end: float = 1.5, rate: float = 0.1) -> 'ModulationProfile':
        # Aperiodic
        return cls(lambda t: end + (start - end) * np.exp(-rate * np.asarray(t, dtype=float)), None,
                   'exponential_ramp', {'start': start, 'end': end, 'rate': rate})

    @classmethod
    def from_dict(cls, spec: Dict) -> 'ModulationProfile':
        # Builds a library profile from {'kind': ..., **parameters}
        spec = dict(spec)
        kind = spec.pop('kind', 'constant')
        factories = {
            'constant': cls.constant,
            'sinusoidal': cls.sinusoidal,
            'two_tone': cls.two_tone,
            'smooth_square': cls.smooth_square,
            'exponential_ramp': cls.exponential_ramp,
        }
        if kind not in factories:
            raise ValueError(f"Unknown modulation profile: {kind}")
        return factories[kind](**{key: float(value) for key, value in spec.items()})

    def __repr__(self) -> str:
        return f"ModulationProfile({self.to_dict()!r})"


class OscillatorState:
    # Point (p, q) of the oscillator phase plane at time t.

    def __init__(self, p: float, q: float, t: float = 0.0):
        if not all(math.isfinite(v) for v in (p, q, t)):
            raise ValueError("Oscillator state must be finite")
        self._p = float(p)
        self._q = float(q)
        self._t = float(t)

    @property
    def p(self) -> float:
        return self._p

    @property
    def q(self) -> float:
        return self._q

    @property
    def t(self) -> float:
        return self._t

    def as_array(self) -> np.ndarray:
        return np.array([self._p, self._q])

    def __repr__(self) -> str:
        return f"OscillatorState(p={self._p!r}, q={self._q!r}, t={self._t!r})"
