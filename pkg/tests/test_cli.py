import json

import pytest
from click.testing import CliRunner

from cli import EXIT_ERROR, EXIT_REPORT_FAILED, cli, parse_assignment


@pytest.fixture
def runner():
    return CliRunner()


def test_bachet_chain(runner, tmp_path):
    result = runner.invoke(cli, ['--output', str(tmp_path), 'bachet', '--c=-2', '--start=3,5', '--steps=2'])
    assert result.exit_code == 0, result.output
    assert '# overall: PASS' in result.output
    chain = json.loads((tmp_path / 'chain.json').read_text())
    assert [point['x'] for point in chain['points']] == ['3', '129/100', '2340922881/58675600']
    report = json.loads((tmp_path / 'report.json').read_text())
    assert report['passed'] is True
    assert report['metadata']['experiment'] == 'bachet'


def test_json_report_on_stdout(runner):
    result = runner.invoke(cli, ['--format', 'json', 'bachet', '--c=-2', '--start=3,5', '--steps=1'])
    assert result.exit_code == 0
    assert json.loads(result.output)['schema'] == 1


def test_malformed_config_writes_nothing(runner, tmp_path):
    config = tmp_path / 'broken.toml'
    config.write_text('experiment = "bachet"\n[parameters\nc = 1\n')
    output = tmp_path / 'out'
    result = runner.invoke(cli, ['--config', str(config), '--output', str(output), 'bachet'])
    assert result.exit_code == EXIT_ERROR
    assert 'line 2' in result.output
    assert not output.exists()


def test_config_for_another_experiment(runner, tmp_path):
    config = tmp_path / 'catmap.toml'
    config.write_text('experiment = "catmap"\n')
    result = runner.invoke(cli, ['--config', str(config), 'bachet'])
    assert result.exit_code == EXIT_ERROR


def test_unknown_parameter(runner):
    result = runner.invoke(cli, ['bachet', '--set', 'colour=1'])
    assert result.exit_code == EXIT_ERROR


def test_point_off_the_curve(runner):
    result = runner.invoke(cli, ['bachet', '--c=-2', '--start=1,1'])
    assert result.exit_code == EXIT_ERROR
    assert 'not on' in result.output


def test_loose_tolerance_fails_the_report(runner):
    result = runner.invoke(cli, ['--tol', '1e-3', 'oscillator', '--set', 't_end=20.0'])
    assert result.exit_code == EXIT_REPORT_FAILED
    assert 'FAIL' in result.output


def test_run_writes_one_directory_per_config(runner, tmp_path):
    paths = []
    for steps in (1, 2):
        path = tmp_path / f'bachet{steps}.toml'
        path.write_text(f'experiment = "bachet"\n[parameters]\nsteps = {steps}\n')
        paths.append(str(path))
    output = tmp_path / 'out'
    result = runner.invoke(cli, ['--config', paths[0], '--config', paths[1], '--output', str(output), 'run'])
    assert result.exit_code == 0, result.output
    directories = sorted(p.name for p in output.iterdir())
    assert len(directories) == 2
    assert all(name.startswith('bachet-') for name in directories)


def test_run_needs_configs(runner):
    assert runner.invoke(cli, ['run']).exit_code != 0


def test_list(runner):
    result = runner.invoke(cli, ['list'])
    assert result.exit_code == 0
    names = [line.split()[0] for line in result.output.splitlines()]
    assert {'bachet', 'catmap', 'knoerrer', 'projective-chart'} <= set(names)


def test_assignments_are_toml_values():
    assert parse_assignment('steps=3') == ('steps', 3)
    assert parse_assignment('b=[1.0, -2.0]') == ('b', [1.0, -2.0])
    assert parse_assignment('start=3,5') == ('start', '3,5')


@pytest.mark.slow
def test_knoerrer_certifies_an_off_vertex_hyperbola_start(runner):
    result = runner.invoke(cli, ['--format', 'json', 'knoerrer', '--set', 'b=[1.0, -1.0]',
                                 '--set', 'x0=[1.118033988749895, 0.5]',
                                 '--set', 'direction=[0.5, 1.118033988749895]'])
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report['passed'] is True
    assert report['metadata']['period'] == pytest.approx(
        2 * (report['metadata']['forward_tau_limit'] + report['metadata']['backward_tau_limit']))


def test_config_output_directory_is_used_without_output_flag(runner, tmp_path):
    target = tmp_path / 'from-config'
    config = tmp_path / 'bachet.toml'
    config.write_text(f'experiment = "bachet"\n[output]\ndirectory = "{target.as_posix()}"\n')
    result = runner.invoke(cli, ['--config', str(config), 'bachet'])
    assert result.exit_code == 0, result.output
    assert (target / 'report.json').exists()
    assert (target / 'chain.json').exists()


def test_output_flag_wins_over_config_directory(runner, tmp_path):
    ignored = tmp_path / 'from-config'
    chosen = tmp_path / 'from-flag'
    config = tmp_path / 'bachet.toml'
    config.write_text(f'experiment = "bachet"\n[output]\ndirectory = "{ignored.as_posix()}"\n')
    result = runner.invoke(cli, ['--config', str(config), '--output', str(chosen), 'bachet'])
    assert result.exit_code == 0, result.output
    assert (chosen / 'report.json').exists()
    assert not ignored.exists()
