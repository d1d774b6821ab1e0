"""
Test the command-line surface and its exit-code contract
"""
import json
import math
import sys

import pytest
from click.testing import CliRunner

from main import main
from src.cli import cli
from src.core.operators import HermitianOperator
from src.services import scan_service
from src.utils.serialization import operator_to_dict

SQRT2 = math.sqrt(2.0)


@pytest.fixture
def runner():
    return CliRunner()


def _write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def _run(runner, tmp_path, command, config=None, *extra):
    out = tmp_path / f"{command}.out"
    args = [command, '--out', str(out)]
    if config is not None:
        args += ['--config', _write(tmp_path / f"{command}.json", config)]
    result = runner.invoke(cli, args + list(extra))
    report = json.loads(out.read_text()) if out.exists() and '--format' not in extra else None
    return result, report


def test_landau_check_optimal(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'landau-check')
    assert result.exit_code == 0, result.output
    assert report['passed']
    assert report['results']['landau_residual'] < 1e-12
    assert report['config']['scenario'] == 'optimal-qubit'


def test_landau_check_commuting(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'landau-check', {'scenario': 'commuting-A'})
    assert result.exit_code == 0
    assert report['results']['square_is_identity']


def test_landau_check_random_scenarios(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'landau-check', {'n_random': 40, 'seed': 4})
    assert result.exit_code == 0
    assert report['results']['random']['failures'] == []


def test_malformed_scenario_file(runner, tmp_path):
    bad = tmp_path / "scenario.json"
    bad.write_text('{"structure": ')
    result, _ = _run(runner, tmp_path, 'landau-check', {'scenario': str(bad)})
    assert result.exit_code == 2
    assert 'invalid JSON' in result.output


def test_unknown_config_key(runner, tmp_path):
    result, _ = _run(runner, tmp_path, 'landau-check', {'scenaro': 'optimal-qubit'})
    assert result.exit_code == 2


def test_theorem1_scan(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'theorem1-scan', {'n_scenarios': 30, 'seed': 1})
    assert result.exit_code == 0, result.output
    assert report['results']['agree'] == 30


def test_theorem1_scan_empty(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'theorem1-scan', {'n_scenarios': 0})
    assert result.exit_code == 0
    assert report['results']['agree'] == 0


def test_theorem1_scan_dimension_cap(runner, tmp_path):
    result, _ = _run(runner, tmp_path, 'theorem1-scan', {'n_scenarios': 1, 'dims': [9]})
    assert result.exit_code == 2


def test_chsh_run_meter(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'chsh-run', {'rounds': 1000000, 'seed': 2024})
    assert result.exit_code == 0, result.output
    meter = report['results']['meter']
    assert abs(meter['extracted_norm'] - 2.0) <= 0.05
    assert abs(meter['true_norm'] - 2.0) < 1e-12
    assert report['results']['violation_z'] >= 5


def test_chsh_run_commuting(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'chsh-run', {'scenario': 'commuting-A', 'rounds': 20000})
    assert result.exit_code == 0
    assert report['results']['meter']['clamped']
    assert report['results']['meter']['extracted_norm'] == 0.0
    assert not report['results']['violation_observed']


def test_chsh_run_under_sampled(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'chsh-run', {'rounds': 10})
    assert result.exit_code in (0, 1)
    assert report['results']['under_sampled']


def test_chsh_run_csv(runner, tmp_path):
    out = tmp_path / "run.csv"
    result = runner.invoke(cli, ['chsh-run', '--seed', '1', '--format', 'csv', '--out', str(out)])
    assert result.exit_code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith('setting,')
    assert len(lines) == 5


def test_chsh_run_same_bytes_for_any_worker_count(runner, tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    runner.invoke(cli, ['chsh-run', '--seed', '5', '--workers', '1', '--out', str(first)])
    runner.invoke(cli, ['chsh-run', '--seed', '5', '--workers', '3', '--out', str(second)])
    assert first.read_bytes() == second.read_bytes()


def test_pcsft_check(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'pcsft-check', {'n': 100000, 'seed': 9})
    assert result.exit_code == 0, result.output
    assert [r['observable'] for r in report['results']['checks']] == ['I', 'X', 'Y', 'Z']
    assert report['results']['ensemble']['truncation'] == 'mode-truncated'


def test_pcsft_check_non_psd(runner, tmp_path):
    cov = _write(tmp_path / "cov.json", operator_to_dict(HermitianOperator([[1.0, 0.0], [0.0, -0.1]])))
    result, _ = _run(runner, tmp_path, 'pcsft-check', {'covariance': cov, 'n': 100})
    assert result.exit_code == 2
    assert 'positive semidefinite' in result.output


def test_pcsft_check_is_reproducible(runner, tmp_path):
    config = _write(tmp_path / "pcsft.json", {'covariance': 'thermal-2', 'n': 20000, 'seed': 77})
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    runner.invoke(cli, ['pcsft-check', '--config', config, '--out', str(first)])
    runner.invoke(cli, ['pcsft-check', '--config', config, '--out', str(second)])
    assert first.read_bytes() == second.read_bytes()


def test_pcsft_raw_samples(runner, tmp_path):
    raw = tmp_path / "raw.csv"
    result, _ = _run(runner, tmp_path, 'pcsft-check', {'n': 30, 'raw_samples_out': str(raw)})
    assert result.exit_code in (0, 1)
    assert len(raw.read_text().strip().splitlines()) == 31


def test_jpd_check(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'jpd-check', {'n_families': 12, 'n_scenarios': 12, 'dim': 4})
    assert result.exit_code == 0, result.output
    assert report['results']['families']['failures'] == []
    assert report['results']['functional']['name'] == 'mermin-3'
    assert abs(report['results']['functional']['value'] - 4.0) < 1e-9


def test_jpd_check_dimension_cap(runner, tmp_path):
    result, _ = _run(runner, tmp_path, 'jpd-check', {'dim': 9})
    assert result.exit_code == 2


def test_spectral_max(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'spectral-max', {'n_random': 10})
    assert result.exit_code == 0, result.output
    results = report['results']
    assert abs(results['expectation'] - SQRT2) < 1e-9
    assert abs(results['separable_witness']['square_value'] - 2.0) < 1e-9
    assert abs(results['separable_witness']['psi_plus_value'] - SQRT2) < 1e-9
    assert results['separable_witness']['schmidt_rank'] == 1
    assert not results['separable_witness']['same_as_linear_max_state']


def test_presets_listing(runner):
    result = runner.invoke(cli, ['presets'])
    assert result.exit_code == 0
    assert 'optimal-qubit' in result.output


def test_presets_listing_separates_functionals(runner):
    result = runner.invoke(cli, ['presets'])
    lines = dict(line.split(': ', 1) for line in result.output.strip().splitlines())
    assert 'mermin-3' not in lines['scenarios']
    assert lines['functionals'] == 'mermin-3'
    assert 'N' in lines['observables']


def test_functional_preset_is_not_a_scenario(runner, tmp_path):
    result, _ = _run(runner, tmp_path, 'landau-check', {'scenario': 'mermin-3'})
    assert result.exit_code == 2
    assert 'Bell functional preset' in result.output


def test_jpd_check_unknown_functional(runner, tmp_path):
    result, _ = _run(runner, tmp_path, 'jpd-check', {'n_families': 1, 'n_scenarios': 1, 'functional': 'chsh-9'})
    assert result.exit_code == 2


@pytest.mark.parametrize("covariance", ["identity-2", "thermal-2", "random-psd-3"])
def test_pcsft_check_every_covariance_preset(runner, tmp_path, covariance):
    result, report = _run(runner, tmp_path, 'pcsft-check', {'covariance': covariance, 'n': 100000, 'seed': 3})
    assert result.exit_code == 0, result.output
    assert all(r['passed'] for r in report['results']['checks'])


@pytest.mark.parametrize("command, config", [
    ('chsh-run', {'rounds': 10 ** 13}),
    ('pcsft-check', {'n': 10 ** 12}),
    ('theorem1-scan', {'n_scenarios': 10 ** 12}),
    ('landau-check', {'n_random': 10 ** 12}),
    ('jpd-check', {'n_families': 10 ** 12}),
    ('spectral-max', {'n_random': 10 ** 12}),
])
def test_over_cap_config(runner, tmp_path, command, config):
    result, _ = _run(runner, tmp_path, command, config)
    assert result.exit_code == 2
    assert 'less than or equal' in result.output


def test_landau_check_passed_reflects_random_failures(runner, tmp_path, monkeypatch):
    def failing_item(seed, index, dims):
        return {'index': index, 'landau_residual': 1.0, 'passed': False}

    monkeypatch.setattr(scan_service, 'landau_item', failing_item)
    result, report = _run(runner, tmp_path, 'landau-check', {'n_random': 3})
    assert result.exit_code == 1
    assert report['results']['identity_holds']
    assert report['results']['passed'] is False
    assert report['passed'] is False
    assert report['results']['random']['failures'] == [0, 1, 2]


def test_chsh_run_general_scenario_has_no_meter(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'chsh-run',
                          {'scenario': 'zero-product-MAB', 'state': 'maximally-mixed-4', 'rounds': 20000})
    assert result.exit_code != 2, result.output
    assert report['results']['meter'] == {'error': 'needs tensor structure'}


def test_chsh_run_compatible_b_pair_has_no_meter(runner, tmp_path):
    result, report = _run(runner, tmp_path, 'chsh-run', {'scenario': 'commuting-B', 'rounds': 20000})
    assert result.exit_code != 2, result.output
    assert 'compatible' in report['results']['meter']['error']


def test_main_entry_point(monkeypatch, capsys):
    monkeypatch.setattr(sys, 'argv', ['main.py', 'presets'])
    with pytest.raises(SystemExit) as exit_info:
        main()
    assert exit_info.value.code == 0
    assert 'optimal-qubit' in capsys.readouterr().out
