import json
import os

import pytest
from click.testing import CliRunner

from src.cli import cli


@pytest.fixture
def runner():
    return CliRunner()


def _json(result):
    return json.loads(result.stdout)


def test_bound_preset_prints_exact_value(runner):
    result = runner.invoke(cli, ['bound', '--preset', 'cheung'])
    assert result.exit_code == 0
    document = _json(result)
    assert document['header']['subcommand'] == 'bound'
    assert document['result'][0]['value'] == '4/3'
    assert 'fixed-xi/q' in result.stderr


def test_header_records_seed_and_precision(runner):
    result = runner.invoke(cli, ['--seed', '5', 'bound', '--preset', 'equal-1x1', '--prec', '96'])
    header = _json(result)['header']
    assert header['seed'] == 5
    assert header['precision'] == 96


def test_trajectory_of_the_square_lattice(runner):
    result = runner.invoke(cli, ['trajectory', '--theta', '0', '--t', '3', '--N', '4'])
    assert result.exit_code == 0
    assert _json(result)['result']['lambda0'] == ['1/3', '1/9', '1/27', '1/81']


def test_trajectory_from_lattice_file(runner, lattice_file):
    path = lattice_file('1 0\n0 1\nshift: 0 1/2\n')
    result = runner.invoke(cli, ['trajectory', '--lattice', path, '--t', '2', '--N', '2'])
    assert result.exit_code == 0
    assert _json(result)['result']['lambda0_affine'] == ['1/4', '1/8']


def test_exponent_of_rational_theta(runner):
    result = runner.invoke(cli, ['exponent', '--theta', '2/5', '--T', '2,8,32'])
    assert result.exit_code == 0
    assert _json(result)['result']['omega_hat'] == 'inf'


def test_dani_forward_on_command_line(runner):
    result = runner.invoke(cli, ['dani', '--theta', '2/7', '--t', '3', '--delta', '1'])
    assert result.exit_code == 0
    document = _json(result)['result']
    assert document['approximation']['q'] == [3]
    assert document['dani']['certified'] is True


def test_dani_with_an_exact_solution(runner):
    result = runner.invoke(cli, ['dani', '--theta', '1/3', '--t', '3', '--delta', '1'])
    assert result.exit_code == 0
    document = _json(result)['result']
    assert document['approximation']['value'] == '0'
    assert document['dani']['certified'] is True
    assert document['dani']['image_norm'] == '1'


def test_lattice_lambda0_action(runner, lattice_file):
    path = lattice_file('4 0\n0 1/4\n')
    result = runner.invoke(cli, ['lattice', path])
    assert result.exit_code == 0
    assert _json(result)['result']['lambda0']['value'] == '1/4'


def test_emm_check_on_command_line(runner, lattice_file):
    path = lattice_file('1 0 0\n0 1 0\n0 0 1\n')
    result = runner.invoke(cli, ['lattice', path, '--action', 'emm', '--first', '1,0,0;0,1,0',
                                 '--second', '0,1,0;0,0,1'])
    assert result.exit_code == 0
    assert _json(result)['result']['emm']['within_bound'] is True


def test_invalid_precision_exits_with_config_error(runner):
    result = runner.invoke(cli, ['bound', '--preset', 'cheung', '--prec', '10'])
    assert result.exit_code == 2
    assert _json(result)['code'] == 'config_error'


def test_domain_error_exits_with_one(runner):
    result = runner.invoke(cli, ['trajectory', '--theta', '0', '--t', '1', '--N', '3'])
    assert result.exit_code == 1
    assert _json(result)['code'] == 'premise_violation'


def test_invalid_weights_exit_with_one(runner):
    result = runner.invoke(cli, ['--weights', 'm=2 n=1 a=1/3,2/3 b=1', 'trajectory', '--theta', '0,0'])
    assert result.exit_code == 1
    assert _json(result)['code'] == 'invalid_weights'


def test_out_writes_json_and_csv(runner, tmp_path):
    out = tmp_path / 'artifacts'
    result = runner.invoke(cli, ['trajectory', '--theta', '0', '--t', '2', '--N', '3', '--out', str(out),
                                 '--seed', '4'])
    assert result.exit_code == 0
    assert sorted(os.listdir(out)) == ['trajectory_seed4.json', 'trajectory_seed4_trajectory.csv']
    lines = (out / 'trajectory_seed4_trajectory.csv').read_text().splitlines()
    assert lines[0].split(',')[:5] == ['k', 't', 'log_t', 'lambda0', 'lambda0_affine']
    assert len(lines) == 4


def test_ifs_cylinders(runner):
    result = runner.invoke(cli, ['ifs', '--fractal', 'cantor', '--depth', '2'])
    assert result.exit_code == 0
    assert len(_json(result)['result']['cylinders']) == 4


def test_store_records_the_run(runner, app):
    from src.models.run import RunRecord

    result = runner.invoke(cli, ['bound', '--preset', 'cheung', '--store'])
    assert result.exit_code == 0
    assert 'stored run' in result.stderr
    assert RunRecord.query.filter_by(subcommand='bound').count() == 1


def test_emass_of_a_golden_decimal(runner):
    result = runner.invoke(cli, ['emass', '--theta', '1.6180339887', '--prec', '256', '--t', '3', '--N', '200',
                                 '--eps', '0.05'])
    assert result.exit_code == 0
    document = _json(result)['result']
    assert document['count'] == 0
    assert document['fraction_float'] <= 0.1
    assert document['sandwich_holds'] is True


def test_emass_of_zero_theta_on_command_line(runner):
    result = runner.invoke(cli, ['emass', '--theta', '0', '--t', '3', '--N', '200', '--eps', '0.05',
                                 '--refinement', '1'])
    assert result.exit_code == 0
    assert _json(result)['result']['fraction_float'] >= 0.9


def test_divfrac_on_the_geometric_grid(runner):
    result = runner.invoke(cli, ['divfrac', '--theta', '0', '--xi', '1/2', '--eps', '1', '--T', '4', '--step', '1',
                                 '--t', '2'])
    assert result.exit_code == 0
    row = _json(result)['result']['surface'][0]
    assert row['samples'] == 7
    assert row['fraction'] == pytest.approx(0.2599, abs=1e-3)
