import json
import math
from pathlib import Path

import pytest

from run import DEFAULTS_FILE, main, yaml_config_hook
from scenarios import SCENARIOS, Criterion, RunReport, run_scenario, validate_config


CONFIG_DIR = Path(DEFAULTS_FILE).parent
SCENARIO_NAMES = ['dho_moments', 'dho_cat', 'two_level', 'rotation_covariant', 'qbm_moments', 'qbm_exact',
                  'qlbe_gibbs', 'povm_joint', 'instrument_repeat', 'levy_surface', 'covariance_audit',
                  'jump_convergence']
CHEAP = ['two_level', 'rotation_covariant', 'instrument_repeat', 'levy_surface']


def _write_config(tmp_path, body):
    path = tmp_path / 'experiment.yaml'
    path.write_text("defaults:\n    base: '{}'\n\n{}".format(DEFAULTS_FILE, body))
    return str(path)


def _run_dir(root):
    dirs = [d for d in Path(root).iterdir() if d.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


def test_registry():
    assert sorted(SCENARIOS) == sorted(SCENARIO_NAMES)
    for s in SCENARIOS.values():
        assert s.criteria and s.outputs


@pytest.mark.parametrize('config', sorted(p.name for p in CONFIG_DIR.glob('*.yaml')))
def test_shipped_configs_are_valid(config):
    cfg = yaml_config_hook(str(CONFIG_DIR / config))
    assert validate_config(cfg) == []


def test_includes_merge_recursively(tmp_path):
    cfg = yaml_config_hook(str(CONFIG_DIR / 'qbm_exact_long.yaml'))
    assert cfg['scenario'] == 'qbm_exact'
    assert cfg['params']['t'] == 2.0
    assert cfg['scenarios']['qbm_exact']['mass'] == 1.0
    assert 'defaults' not in cfg


def test_validation_messages():
    cfg = yaml_config_hook(DEFAULTS_FILE)
    cfg['scenario'] = 'two_level'
    cfg['params'] = {'eta': -0.1}
    assert 'params.eta: must be positive, got -0.1' in validate_config(cfg)

    cfg['scenario'] = 'qlbe_gibbs'
    cfg['params'] = {'transfer_cells': [1, 0.5, 0]}
    diagnostics = validate_config(cfg)
    assert any('off-lattice momentum transfer' in d for d in diagnostics)
    assert any('zero momentum transfer' in d for d in diagnostics)

    cfg['params'] = {'grid': {'n_points': 48}}
    assert any('power of two' in d for d in validate_config(cfg))

    cfg['scenario'] = 'nonexistent'
    assert validate_config(cfg)[0].startswith('scenario: unknown')

    cfg = yaml_config_hook(DEFAULTS_FILE)
    cfg['rel_tol'] = 0.1
    cfg['workers'] = 0
    diagnostics = validate_config(cfg)
    assert any(d.startswith('rel_tol') for d in diagnostics)
    assert any(d.startswith('workers') for d in diagnostics)


def test_list_command(capsys):
    assert main(['list']) == 0
    out = capsys.readouterr().out
    for name in SCENARIO_NAMES:
        assert name in out


def test_validate_command(tmp_path, capsys):
    good = str(CONFIG_DIR / 'two_level.yaml')
    assert main(['validate', '--config', good]) == 0
    assert 'two_level: config is valid' in capsys.readouterr().out
    bad = _write_config(tmp_path, "scenario: 'qlbe_gibbs'\nparams:\n    transfer_cells: [1, 0.5]\n")
    assert main(['validate', '--config', bad]) == 1
    assert 'off-lattice momentum transfer' in capsys.readouterr().out


def test_invalid_config_exits_before_running(tmp_path):
    bad = _write_config(tmp_path, "scenario: 'two_level'\nparams:\n    eta: -1.0\n")
    with pytest.raises(SystemExit) as exc:
        main(['run', '--config', bad, '--out', str(tmp_path / 'results')])
    assert exc.value.code == 2
    assert not (tmp_path / 'results').exists()


def test_run_writes_report_and_outputs(tmp_path):
    assert main(['run', '--config', str(CONFIG_DIR / 'two_level.yaml'), '--out', str(tmp_path)]) == 0
    run_dir = _run_dir(tmp_path)
    assert run_dir.name.startswith('two_level_')
    report = json.loads((run_dir / 'report.json').read_text())
    assert report['pass'] is True
    assert [c['name'] for c in report['criteria']] == list(SCENARIOS['two_level'].criteria)
    assert (run_dir / 'two_level.csv').exists()
    lines = (run_dir / 'log.txt').read_text().splitlines()
    assert len(lines) == len(SCENARIOS['two_level'].criteria)
    assert run_dir.name in (run_dir / 'run.log').read_text()


def test_runs_are_deterministic(tmp_path):
    config = str(CONFIG_DIR / 'rotation_covariant.yaml')
    for out in ['a', 'b']:
        assert main(['run', '--config', config, '--out', str(tmp_path / out), '--seed', '3']) == 0
    first, second = _run_dir(tmp_path / 'a'), _run_dir(tmp_path / 'b')
    assert first.name == second.name
    csv = 'rotation_covariant.csv'
    assert (first / csv).read_bytes() == (second / csv).read_bytes()


def test_cli_overrides_change_the_hash(tmp_path):
    config = str(CONFIG_DIR / 'two_level.yaml')
    main(['run', '--config', config, '--out', str(tmp_path / 'a')])
    main(['run', '--config', config, '--out', str(tmp_path / 'b'), '--seed', '5'])
    assert _run_dir(tmp_path / 'a').name != _run_dir(tmp_path / 'b').name


def test_criterion_semantics():
    assert not Criterion('x', math.nan, 1.0).passed
    assert Criterion('x', 1e-12, 1e-10).passed
    assert Criterion('x', -0.5, -1e-10, comparison='ge').passed is False
    assert Criterion('x', 0.0, -1e-10, comparison='ge').passed
    with pytest.raises(ValueError):
        Criterion('x', 0.0, 1.0, comparison='lt')
    assert not RunReport('s', 'h').passed
    failed = RunReport('s', 'h', criteria=[Criterion('x', 0.0, 1.0)], error='ValueError: boom')
    assert not failed.passed
    assert failed.to_dict()['max_errors'] == {'x': 0.0}


def test_scenario_errors_become_report_errors(run_args):
    cfg = yaml_config_hook(str(CONFIG_DIR / 'qbm_exact.yaml'))
    # beta small enough that the thermal length drops below two grid cells
    cfg['params'] = {'beta': 0.01}
    report = run_scenario(cfg, run_args, 'hash')
    assert not report.passed
    assert report.error.startswith('ThermalLengthUnresolvedError')


@pytest.mark.parametrize('name', CHEAP)
def test_cheap_scenarios_pass(name, run_args):
    cfg = yaml_config_hook(str(CONFIG_DIR / '{}.yaml'.format(name)))
    report = run_scenario(cfg, run_args, 'hash')
    failing = {c.name: c.value for c in report.criteria if not c.passed}
    assert report.passed, (report.error, failing)
    for output in SCENARIOS[name].outputs:
        assert (Path(run_args.output_dir) / output).exists()


@pytest.mark.slow
@pytest.mark.parametrize('name', [n for n in SCENARIO_NAMES if n not in CHEAP])
def test_scenarios_pass(name, run_args):
    cfg = yaml_config_hook(str(CONFIG_DIR / '{}.yaml'.format(name)))
    report = run_scenario(cfg, run_args, 'hash')
    failing = {c.name: c.value for c in report.criteria if not c.passed}
    assert report.passed, (report.error, failing)
