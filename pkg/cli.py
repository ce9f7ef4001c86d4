"""
Command-line runner: one subcommand per experiment plus `run` for config files.

    python cli.py --output out bachet --c=-2 --start=3,5 --steps=2
    python cli.py --jobs 4 --config a.toml --config b.toml run
"""
import logging
import sys
from typing import Any, Dict, Optional, Tuple

import click

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from models.experiment import OUTPUT_FORMATS, ExperimentConfig
from numerics.errors import ConfigError, IntegrableError
from services.experiment_service import REGISTRY, ExperimentOutcome, ExperimentService
from services.report_service import report_render

logger = logging.getLogger(__name__)

EXIT_REPORT_FAILED = 1
EXIT_ERROR = 2


def parse_assignment(text: str) -> Tuple[str, Any]:
    # KEY=VALUE with VALUE read as a TOML value, falling back to a plain string
    if '=' not in text:
        raise click.BadParameter(f"Expected KEY=VALUE, got {text!r}")
    key, raw = text.split('=', 1)
    try:
        value = tomllib.loads(f"value = {raw}")['value']
    except tomllib.TOMLDecodeError:
        value = raw
    return key.strip(), value


class RunSettings:
    # Group-level options shared by every subcommand

    def __init__(self, configs: Tuple[str, ...], output: Optional[str], fmt: str,
                 tol: Optional[float], steps: Optional[int], seed: Optional[int], jobs: int):
        self.configs = configs
        self.output = output
        self.format = fmt
        self.tol = tol
        self.steps = steps
        self.seed = seed
        self.jobs = jobs

    def integrator_overrides(self) -> Dict[str, Any]:
        overrides = {}
        if self.tol is not None:
            overrides['abs_tol'] = self.tol
            overrides['rel_tol'] = self.tol
        if self.steps is not None:
            overrides['max_steps'] = self.steps
        return overrides

    def build(self, name: str, parameters: Dict[str, Any]) -> ExperimentConfig:
        if self.configs:
            if len(self.configs) > 1:
                raise ConfigError(f"{name} takes at most one --config; use `run` for several")
            base = ExperimentConfig.load(self.configs[0])
            if base.experiment != name:
                raise ConfigError(f"Config is for {base.experiment!r}, not {name!r}")
        else:
            base = ExperimentConfig(name)
        return base.with_overrides(parameters, self.integrator_overrides(), self.seed,
                                   {'format': self.format})


def _emit(service: ExperimentService, outcome: ExperimentOutcome, fmt: str,
          directory: Optional[str]) -> None:
    click.echo(report_render(outcome.report, fmt).decode('utf-8'), nl=False)
    if directory:
        for path in service.write_outputs(outcome, directory):
            logger.debug("Wrote %s", path)


def _finish(passed: bool) -> None:
    sys.exit(0 if passed else EXIT_REPORT_FAILED)


@click.group()
@click.option('--config', 'configs', multiple=True, type=click.Path(dir_okay=False),
              help='TOML experiment config (repeatable with `run`).')
@click.option('--output', type=click.Path(file_okay=False), default=None,
              help='Directory for trajectory.csv, report.json and chain.json (overrides [output] directory).')
@click.option('--format', 'fmt', type=click.Choice(OUTPUT_FORMATS), default='text',
              help='Report format on stdout.')
@click.option('--tol', type=float, default=None, help='Integrator absolute and relative tolerance.')
@click.option('--steps', type=int, default=None, help='Integrator step budget.')
@click.option('--seed', type=int, default=None, help='Random seed (default 0).')
@click.option('--jobs', type=int, default=1, show_default=True, help='Parallel experiments for `run`.')
@click.option('--verbose', is_flag=True, help='Debug logging.')
@click.pass_context
def cli(ctx, configs, output, fmt, tol, steps, seed, jobs, verbose):
    """Integrable-systems experiments with invariant drift reports."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    ctx.obj = RunSettings(configs, output, fmt, tol, steps, seed, jobs)


def _run_single(settings: RunSettings, name: str, parameters: Dict[str, Any]) -> None:
    service = ExperimentService()
    try:
        config = settings.build(name, parameters)
        outcome = service.run(config)
    except IntegrableError as e:
        click.echo(f"✗ {name}: {e}", err=True)
        sys.exit(EXIT_ERROR)
    _emit(service, outcome, settings.format, settings.output or config.output_directory)
    _finish(outcome.passed)


def _register_subcommand(name: str) -> None:
    entry = REGISTRY[name]

    @cli.command(name, help=entry.description)
    @click.option('--set', 'assignments', multiple=True, metavar='KEY=VALUE',
                  help=f"Override a parameter; known: {', '.join(sorted(entry.defaults))}.")
    @click.pass_obj
    def command(settings: RunSettings, assignments):
        _run_single(settings, name, dict(parse_assignment(a) for a in assignments))


for _name in ('oscillator', 'euler-top', 'tshift', 'catmap', 'geodesic', 'knoerrer',
              'neumann', 'geodesic-equivalence', 'projective-chart'):
    _register_subcommand(_name)


@cli.command('bachet', help=REGISTRY['bachet'].description)
@click.option('--c', 'c', default=None, help='Curve constant, integer or p/q.')
@click.option('--start', default=None, help="Starting point 'x,y'.")
@click.option('--steps', 'chain_steps', type=int, default=None, help='Number of Bachet images.')
@click.option('--set', 'assignments', multiple=True, metavar='KEY=VALUE')
@click.pass_obj
def bachet(settings: RunSettings, c, start, chain_steps, assignments):
    parameters = dict(parse_assignment(a) for a in assignments)
    for key, value in (('c', c), ('start', start), ('steps', chain_steps)):
        if value is not None:
            parameters[key] = value
    _run_single(settings, 'bachet', parameters)


@cli.command('run')
@click.pass_obj
def run(settings: RunSettings):
    """Runs every --config file, in parallel with --jobs."""
    if not settings.configs:
        raise click.UsageError('`run` needs at least one --config')
    service = ExperimentService()
    try:
        configs = [ExperimentConfig.load(path).with_overrides(
            integrator=settings.integrator_overrides(), seed=settings.seed)
            for path in settings.configs]
        outcomes = service.run_many(configs, settings.jobs)
    except IntegrableError as e:
        click.echo(f"✗ {e}", err=True)
        sys.exit(EXIT_ERROR)
    for config, outcome in zip(configs, outcomes):
        if settings.output:
            directory = service.run_directory(settings.output, config)
        else:
            directory = config.output_directory
        _emit(service, outcome, settings.format, directory)
    _finish(all(outcome.passed for outcome in outcomes))


@cli.command('list')
def list_experiments():
    """Lists the registered experiments and their defaults."""
    for entry in ExperimentService().list_experiments():
        click.echo(f"{entry['name']:<22} {entry['description'].splitlines()[0]}")


if __name__ == '__main__':
    cli()
