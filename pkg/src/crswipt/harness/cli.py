"""Command-line entry point: ``crswipt <mode> --config cfg.json``."""

from __future__ import annotations

import argparse
import sys

from .config import MODES, ConfigError, ExperimentConfig, load_config
from .experiments import run_experiment
from .output import emit

EXIT_OK, EXIT_CONFIG, EXIT_TRIAL_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # usage errors count as configuration errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog='crswipt',
                description='Precoder design experiments for SWIPT cognitive-radio downlinks.')
    sub = p.add_subparsers(dest='mode', required=True, parser_class=_Parser)
    for mode in MODES:
        s = sub.add_parser(mode, help=f'{mode} experiment')
        s.add_argument('--config', help='JSON config file (defaults are used when omitted)')
        s.add_argument('--out', help='output file (stdout when omitted)')
        s.add_argument('--format', choices=('csv', 'json'), default='csv')
        s.add_argument('--seed', type=int, help='master seed (overrides the config)')
        s.add_argument('--threads', type=int, help='worker threads for trials')
        s.add_argument('--ng', type=int, help='number of random starts N_G')
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {'mode': args.mode, 'N_G': args.ng, 'threads': args.threads,
                 'seed': None if args.seed is None else args.seed % 2 ** 64}
    try:
        if args.config:
            cfg = load_config(args.config, **overrides)
        else:
            cfg = ExperimentConfig.from_dict({k: v for k, v in overrides.items()
                                              if v is not None})
        result = run_experiment(cfg)
    except ConfigError as exc:
        print(f"crswipt: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        emit(result, args.out, args.format)
    except OSError as exc:
        print(f"crswipt: {exc}", file=sys.stderr)
        return EXIT_TRIAL_FAILED
    if result.any_failed:
        n = sum(t.failed for t in result.trials)
        print(f"crswipt: {n} solver run(s) failed; see the status column",
              file=sys.stderr)
        return EXIT_TRIAL_FAILED
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
