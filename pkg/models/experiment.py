import hashlib
import json
import math
import re
import sys
from typing import Any, Dict, List, Optional

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from models.trajectory import IntegratorConfig
from numerics.errors import ConfigError

OUTPUT_FORMATS = ('csv', 'json', 'text')
_POSITION = re.compile(r"line (\d+), column (\d+)")


class ExperimentConfig:
    """
    One experiment run: id, seed, parameters, integrator settings and output.

    TOML layout:
        experiment = "bachet"
        seed = 0
        [parameters]   experiment specific; rationals as "p/q" strings
        [integrator]   IntegratorConfig fields
        [output]       directory, format
    """

    def __init__(self, experiment: str, parameters: Optional[Dict[str, Any]] = None,
                 integrator: Optional[Dict[str, Any]] = None, seed: int = 0,
                 output: Optional[Dict[str, Any]] = None):
        if not isinstance(experiment, str) or not experiment:
            raise ConfigError("'experiment' must be a non-empty string")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError(f"'seed' must be an integer, got {seed!r}")
        self._experiment = experiment
        self._parameters = dict(parameters or {})
        self._integrator = dict(integrator or {})
        self._seed = seed
        self._output = {'format': 'text'}
        self._output.update(output or {})
        if self._output['format'] not in OUTPUT_FORMATS:
            raise ConfigError(f"Unknown output format {self._output['format']!r}")
        directory = self._output.get('directory')
        if directory is not None and (not isinstance(directory, str) or not directory):
            raise ConfigError(f"Output directory must be a non-empty string, got {directory!r}")
        # Fails early on unknown or invalid integrator settings
        self.integrator_config()

    @property
    def experiment(self) -> str:
        return self._experiment

    @property
    def parameters(self) -> Dict[str, Any]:
        return dict(self._parameters)

    @property
    def integrator(self) -> Dict[str, Any]:
        return dict(self._integrator)

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def output(self) -> Dict[str, Any]:
        return dict(self._output)

    @property
    def output_directory(self) -> Optional[str]:
        # [output] directory; --output on the command line takes precedence
        return self._output.get('directory')

    def integrator_config(self) -> IntegratorConfig:
        try:
            return IntegratorConfig.from_dict(self._integrator)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid [integrator] table: {e}") from e

    def with_overrides(self, parameters: Optional[Dict[str, Any]] = None,
                       integrator: Optional[Dict[str, Any]] = None,
                       seed: Optional[int] = None,
                       output: Optional[Dict[str, Any]] = None) -> 'ExperimentConfig':
        # Command-line values win over the file
        merged_parameters = self.parameters
        merged_parameters.update(parameters or {})
        merged_integrator = self.integrator
        merged_integrator.update(integrator or {})
        merged_output = self.output
        merged_output.update(output or {})
        return ExperimentConfig(self._experiment, merged_parameters, merged_integrator,
                                self._seed if seed is None else seed, merged_output)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'experiment': self._experiment,
            'seed': self._seed,
            'parameters': dict(self._parameters),
            'integrator': dict(self._integrator),
            'output': dict(self._output),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        unknown = set(data) - {'experiment', 'seed', 'parameters', 'integrator', 'output'}
        if unknown:
            raise ConfigError(f"Unknown top-level keys: {sorted(unknown)}")
        if 'experiment' not in data:
            raise ConfigError("Missing 'experiment'")
        return cls(data['experiment'], data.get('parameters'), data.get('integrator'),
                   data.get('seed', 0), data.get('output'))

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_toml(cls, text: str) -> 'ExperimentConfig':
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            line = getattr(e, 'lineno', None)
            column = getattr(e, 'colno', None)
            if line is None:
                match = _POSITION.search(str(e))
                if match:
                    line, column = int(match.group(1)), int(match.group(2))
            raise ConfigError(str(e), line, column) from e
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str) -> 'ExperimentConfig':
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                text = handle.read()
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e
        return cls.from_toml(text)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def __eq__(self, other) -> bool:
        return isinstance(other, ExperimentConfig) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return f"ExperimentConfig({self._experiment!r}, seed={self._seed})"


class DriftRow:
    # One invariant: initial value, worst drift and the threshold it must meet

    def __init__(self, name: str, initial: float, max_drift: float, threshold: float):
        self._name = name
        self._initial = float(initial)
        self._max_drift = float(max_drift)
        self._threshold = float(threshold)

    @property
    def name(self) -> str:
        return self._name

    @property
    def initial(self) -> float:
        return self._initial

    @property
    def max_drift(self) -> float:
        return self._max_drift

    @property
    def threshold(self) -> float:
        return self._threshold

    @property
    def passed(self) -> bool:
        return not math.isnan(self._max_drift) and self._max_drift <= self._threshold

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self._name, 'initial': self._initial, 'max_drift': self._max_drift,
                'threshold': self._threshold, 'passed': self.passed}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DriftRow':
        return cls(data['name'], data['initial'], data['max_drift'], data['threshold'])

    def __eq__(self, other) -> bool:
        return isinstance(other, DriftRow) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return f"DriftRow({self._name!r}, drift={self._max_drift:.3e}, threshold={self._threshold:.1e})"


class DriftReport:
    """Rows plus run metadata; passes iff every row does."""

    def __init__(self, rows: Optional[List[DriftRow]] = None,
                 metadata: Optional[Dict[str, Any]] = None):
        self._rows = list(rows or [])
        self._metadata = dict(metadata or {})

    @property
    def rows(self) -> List[DriftRow]:
        return list(self._rows)

    @property
    def metadata(self) -> Dict[str, Any]:
        return dict(self._metadata)

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self._rows)

    def add(self, name: str, initial: float, max_drift: float, threshold: float) -> 'DriftReport':
        self._rows.append(DriftRow(name, initial, max_drift, threshold))
        return self

    def update_metadata(self, **values) -> None:
        self._metadata.update(values)

    def failures(self) -> List[DriftRow]:
        return [row for row in self._rows if not row.passed]

    def __eq__(self, other) -> bool:
        return (isinstance(other, DriftReport) and self._rows == other._rows
                and self._metadata == other._metadata)

    def __len__(self) -> int:
        return len(self._rows)

    def __repr__(self) -> str:
        status = 'PASS' if self.passed else 'FAIL'
        return f"DriftReport({len(self._rows)} rows, {status})"
