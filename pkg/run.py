import argparse
import logging
import os
import sys
import time
from pathlib import Path

import yaml
import wandb
from timm.utils import setup_default_logging

from scenarios import SCENARIOS, list_scenarios, resolve_params, run_scenario, validate_config
from utils import append_log, config_hash, deep_update, write_json


_logger = logging.getLogger('run')

DEFAULTS_FILE = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'configs', 'defaults.yaml')

# top-level config keys that land on the argparse namespace
RUN_KEYS = ('scenario', 'hbar', 'seed', 'workers', 'rel_tol', 'output_dir', 'serial', 'print_freq',
            'wandb_project', 'wandb_entity')


def get_args_parser():
    parser = argparse.ArgumentParser('Covariant quantum dynamical maps experiments', add_help=False)
    parser.add_argument('--config', '--cfg', dest='cfg', default=None, type=str,
                        help='YAML experiment file (default: configs/defaults.yaml)')
    parser.add_argument('--scenario', default=None, type=str, help='overrides the scenario named in the config')
    parser.add_argument('--out', '--output_dir', dest='output_dir', default=None, type=str,
                        help='root directory for run folders')
    parser.add_argument('--workers', default=None, type=int, help='processes for trajectory sampling')
    parser.add_argument('--seed', default=None, type=int)
    parser.add_argument('--serial', default=None, type=int, help='suffix of the run folder name')
    parser.add_argument('--print-freq', '--print_freq', dest='print_freq', default=None, type=int)
    parser.add_argument('--wandb', action='store_true', help='log criteria to Weights & Biases')
    parser.add_argument('--wandb_project', default=None, type=str)
    parser.add_argument('--wandb_entity', default=None, type=str)
    parser.add_argument('--log-level', '--log_level', dest='log_level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    return parser


def build_parser():
    parser = argparse.ArgumentParser('Covariant quantum dynamical maps experiments')
    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True
    subparsers.add_parser('run', parents=[get_args_parser()], help='run one scenario and write its report')
    subparsers.add_parser('list', help='list the available scenarios')
    subparsers.add_parser('validate', parents=[get_args_parser()],
                          help='check a config without running any numerics')
    return parser


def yaml_config_hook(config_file):
    """
    YAML loader whose nested 'defaults' section names other yaml files (relative to
    this one) to include; includes are merged recursively and the file's own keys win.
    """
    with open(config_file) as f:
        cfg = yaml.safe_load(f) or {}
    merged = {}
    for d in cfg.get('defaults') or {}:
        fp = cfg['defaults'][d]
        cf = os.path.join(os.path.dirname(config_file), fp)
        deep_update(merged, yaml_config_hook(cf))

    if 'defaults' in cfg.keys():
        del cfg['defaults']

    return deep_update(merged, cfg)


def load_config(args):
    """Merged config with command-line flags taking precedence over the file."""
    cfg = yaml_config_hook(os.path.abspath(args.cfg or DEFAULTS_FILE))
    for k in RUN_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def adjust_config(args, cfg):
    for k in RUN_KEYS:
        if getattr(args, k, None) is None and k in cfg:
            setattr(args, k, cfg[k])
    args.hbar = float(cfg.get('hbar', 1.0))
    args.rel_tol = float(cfg.get('rel_tol', 1e-8))
    args.seed = int(cfg.get('seed', 0))
    args.workers = int(cfg.get('workers', 1))
    args.serial = cfg.get('serial', 0)
    args.output_dir = cfg.get('output_dir', 'results')


def effective_config(cfg):
    """The part of the config that determines the numbers a run produces."""
    return {'scenario': cfg.get('scenario'), 'hbar': cfg.get('hbar', 1.0), 'seed': cfg.get('seed', 0),
            'rel_tol': cfg.get('rel_tol', 1e-8), 'params': resolve_params(cfg)}


def set_run_name(args):
    args.run_name = '{}_{}_{}'.format(args.scenario, args.config_hash[:8], args.serial)
    if args.output_dir:
        args.output_dir = os.path.join(args.output_dir, args.run_name)
        Path(args.output_dir).mkdir(parents=True, exist_ok=True)
    return 0


def run(args, cfg):
    args.config_hash = config_hash(effective_config(cfg))
    set_run_name(args)
    setup_default_logging(getattr(logging, args.log_level), log_path=os.path.join(args.output_dir, 'run.log'))
    _logger.info('Run {} (config hash {})'.format(args.run_name, args.config_hash))

    if args.wandb:
        wandb.init(project=args.wandb_project, entity=args.wandb_entity, config=effective_config(cfg))
        wandb.run.name = args.run_name

    start_time = time.time()
    report = run_scenario(cfg, args, args.config_hash)
    write_json(report.to_dict(), os.path.join(args.output_dir, 'report.json'))
    for c in report.criteria:
        log_stats = {'scenario': report.scenario, 'config_hash': report.config_hash, **c.to_dict()}
        append_log(log_stats, args.output_dir)

    if args.wandb:
        wandb.log({c.name: c.value for c in report.criteria})
        wandb.run.summary['pass'] = report.passed
        wandb.run.summary['wall_time'] = report.wall_time
        for k, v in report.defects.items():
            wandb.run.summary[k] = v
        wandb.finish()

    total_time = time.time() - start_time
    status = 'passed' if report.passed else 'FAILED'
    _logger.info('{} {} in {:.2f} s; report at {}'.format(
        report.scenario, status, total_time, os.path.join(args.output_dir, 'report.json')))
    if report.error:
        _logger.error(report.error)
    return 0 if report.passed else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == 'list':
        for name, description in list_scenarios():
            print('{:<20s} {}'.format(name, description))
            print('{:<20s} criteria: {}'.format('', ', '.join(SCENARIOS[name].criteria)))
        return 0

    if args.command == 'validate':
        setup_default_logging(getattr(logging, args.log_level))
    try:
        cfg = load_config(args)
    except (OSError, yaml.YAMLError) as e:
        parser.error('could not read config: {}'.format(e))
    diagnostics = validate_config(cfg)

    if args.command == 'validate':
        for d in diagnostics:
            print(d)
        if not diagnostics:
            print('{}: config is valid'.format(cfg.get('scenario')))
        return 1 if diagnostics else 0

    if diagnostics:
        parser.error('invalid config:\n  ' + '\n  '.join(diagnostics))
    adjust_config(args, cfg)
    return run(args, cfg)


if __name__ == '__main__':
    sys.exit(main())
