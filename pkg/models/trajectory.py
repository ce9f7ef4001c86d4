import csv
import io
from typing import Dict, List, Optional, Sequence

import numpy as np

METHODS = ('rk4_fixed', 'rk45_adaptive')


class IntegratorConfig:
    """
    Settings for numerics.integrator.integrate.
    rk4_fixed uses dt; rk45_adaptive uses abs_tol and rel_tol.
    """

    def __init__(self, method: str = 'rk45_adaptive', dt: float = 1e-2,
                 abs_tol: float = 1e-10, rel_tol: float = 1e-10,
                 max_steps: int = 1_000_000, projection: bool = True,
                 initial_step: Optional[float] = None):
        if method not in METHODS:
            raise ValueError(f"Unknown integration method: {method}. Must be one of {METHODS}")
        if dt <= 0 or abs_tol <= 0 or rel_tol <= 0:
            raise ValueError("Step size and tolerances must be positive")
        if max_steps <= 0:
            raise ValueError("max_steps must be positive")
        self._method = method
        self._dt = float(dt)
        self._abs_tol = float(abs_tol)
        self._rel_tol = float(rel_tol)
        self._max_steps = int(max_steps)
        self._projection = bool(projection)
        self._initial_step = initial_step

    @property
    def method(self) -> str:
        return self._method

    @property
    def dt(self) -> float:
        return self._dt

    @property
    def abs_tol(self) -> float:
        return self._abs_tol

    @property
    def rel_tol(self) -> float:
        return self._rel_tol

    @property
    def max_steps(self) -> int:
        return self._max_steps

    @property
    def projection(self) -> bool:
        return self._projection

    @property
    def initial_step(self) -> Optional[float]:
        return self._initial_step

    def replace(self, **changes) -> 'IntegratorConfig':
        # Copy with some settings changed
        settings = self.to_dict()
        settings.update(changes)
        return IntegratorConfig(**settings)

    def to_dict(self) -> Dict:
        settings = {
            'method': self._method,
            'dt': self._dt,
            'abs_tol': self._abs_tol,
            'rel_tol': self._rel_tol,
            'max_steps': self._max_steps,
            'projection': self._projection,
        }
        if self._initial_step is not None:
            settings['initial_step'] = self._initial_step
        return settings

    @classmethod
    def from_dict(cls, settings: Dict) -> 'IntegratorConfig':
        return cls(**settings)

    def __repr__(self) -> str:
        return f"IntegratorConfig({self.to_dict()!r})"


class Trajectory:
    # Sampled states of an integration run plus optional named invariant columns.

    def __init__(self, times: Sequence[float], states: np.ndarray,
                 labels: Optional[List[str]] = None, steps: int = 0,
                 rejected: int = 0):
        self._times = np.array(times, dtype=float)
        self._states = np.array(states, dtype=float)
        if self._states.ndim == 1:
            self._states = self._states[:, None]
        if self._states.shape[0] != self._times.shape[0]:
            raise ValueError("Every sample needs exactly one time")
        self._labels = labels or [f"y{i}" for i in range(self._states.shape[1])]
        self._invariants: Dict[str, np.ndarray] = {}
        self._steps = steps
        self._rejected = rejected
        self._times.setflags(write=False)
        self._states.setflags(write=False)

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def states(self) -> np.ndarray:
        return self._states

    @property
    def labels(self) -> List[str]:
        return list(self._labels)

    @property
    def steps(self) -> int:
        # Accepted steps taken by the integrator
        return self._steps

    @property
    def rejected(self) -> int:
        return self._rejected

    @property
    def invariants(self) -> Dict[str, np.ndarray]:
        return dict(self._invariants)

    @property
    def final_state(self) -> np.ndarray:
        return self._states[-1]

    def __len__(self) -> int:
        return self._times.shape[0]

    def with_invariant(self, name: str, values: Sequence[float]) -> 'Trajectory':
        # Returns a copy carrying one more invariant column
        values = np.array(values, dtype=float)
        if values.shape != self._times.shape:
            raise ValueError(f"Invariant {name} must have one value per sample")
        copy = Trajectory(self._times, self._states, self._labels, self._steps, self._rejected)
        copy._invariants = dict(self._invariants)
        values.setflags(write=False)
        copy._invariants[name] = values
        return copy

    def drift(self, name: str) -> float:
        # Max |I(t) - I(t0)| over the samples
        values = self._invariants[name]
        return float(np.max(np.abs(values - values[0])))

    def to_csv(self, time_label: str = 't') -> str:
        # Columns: time, state components, invariant values; 17 significant digits
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        names = sorted(self._invariants)
        writer.writerow([time_label] + self._labels + names)
        for i, t in enumerate(self._times):
            row = [t] + list(self._states[i]) + [self._invariants[name][i] for name in names]
            writer.writerow([format(float(value), '.17g') for value in row])
        return buffer.getvalue()
