"""
SIM Simulator - Entry Point

Runs the two case studies of a stacked intelligent metasurface (SIM) transceiver:
  sumrate  Multiuser downlink sum-rate versus the number of layers for the
           joint, average-PA, codebook and no-SIM zero-forcing schemes
  doa      Quadrant DOA estimation accuracy versus the number of layers

Exit codes: 0 success, 1 unexpected error, 2 configuration error,
3 numerical failure, 130 interrupted.
"""

import argparse
import logging
import os
import sys

import numpy as np
from colorama import Fore, Style, init as colorama_init

from src.beamforming.optimizer import NumericalError
from src.data_officer import DataOfficer
from src.orchestration.orchestrator import run_doa_sweep, run_sumrate_sweep
from src.physics.channel import CorrelationError
from src.utils.config_manager import ConfigError, resolve_spec
from src.utils.result_writer import emit_results, render_csv, render_json


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INTERRUPTED = 130


def parse_arguments(argv=None):
    """Parse the `sumrate` / `doa` subcommands and their flags."""
    parser = argparse.ArgumentParser(
        description='Stacked intelligent metasurface simulator: sum-rate and DOA layer sweeps'
    )
    subparsers = parser.add_subparsers(dest='experiment', required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, help='JSON config file layered over the defaults')
    common.add_argument('--seed', type=int, help='Master seed (default: SIM_SEED or 0)')
    common.add_argument('--out', type=str, help='Output file (default: print to stdout)')
    common.add_argument('--format', choices=['csv', 'json'], help='Output format')
    common.add_argument('--layers', type=str, help="Layer counts: 'a..b' or '1,3,5'")
    common.add_argument('--trials', type=int, help='Monte-Carlo trials per point')
    common.add_argument('--workers', type=int, help='Parallel workers (default: SIM_MAX_WORKERS or 1)')
    common.add_argument('--executor', choices=['thread', 'process'], help='Worker pool type')
    common.add_argument('--record-timing', action='store_true', default=None,
                        help='Fill the seconds column with wall-clock time')
    common.add_argument('--log-level', type=str, default=os.environ.get('SIM_LOG_LEVEL', 'WARNING'),
                        help='Python logging level (default: SIM_LOG_LEVEL or WARNING)')

    sumrate = subparsers.add_parser('sumrate', parents=[common], help='Multiuser sum-rate sweep')
    sumrate.add_argument('--schemes', type=str,
                         help='Comma list from joint,average-pa,codebook,zf-4ta,zf-8ta,refine')

    doa = subparsers.add_parser('doa', parents=[common], help='DOA accuracy sweep')
    doa.add_argument('--model-out', type=str, help='Save trained phases as <path>.L<l>.txt')

    return parser.parse_args(argv)


def build_overrides(args) -> dict:
    """CLI flags that were given, keyed by config name."""
    overrides = {
        'master_seed': args.seed,
        'output': args.out,
        'format': args.format,
        'layers': args.layers,
        'trials': args.trials,
        'max_workers': args.workers,
        'executor': args.executor,
        'record_timing': args.record_timing,
    }
    if args.experiment == 'sumrate' and args.schemes:
        overrides['schemes'] = [s.strip() for s in args.schemes.split(',') if s.strip()]
    if args.experiment == 'doa':
        overrides['model_out'] = args.model_out
    return overrides


def banner(title: str, color: str = Fore.CYAN, stream=None) -> None:
    stream = stream or sys.stdout
    print("\n" + color + "=" * 70, file=stream)
    print(color + title, file=stream)
    print(color + "=" * 70 + Style.RESET_ALL, file=stream)


def main(argv=None) -> int:
    """
    Resolve the experiment, run the sweep, emit the rows and validate them.

    Returns:
        Process exit code
    """
    colorama_init()
    args = parse_arguments(argv)
    level = getattr(logging, str(args.log_level).upper(), logging.WARNING)
    logging.basicConfig(level=level,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        spec = resolve_spec(args.experiment, args.config, build_overrides(args))

        banner(f"{spec.experiment.upper()} SWEEP: L = {list(spec.layers)}, trials = {spec.trials}, "
               f"seed = {spec.master_seed}", stream=sys.stdout if spec.output else sys.stderr)
        rows = run_sumrate_sweep(spec) if spec.experiment == 'sumrate' else run_doa_sweep(spec)

        if spec.output:
            path = emit_results(rows, spec.output, spec.format, spec.to_dict())
            print(Fore.GREEN + f"[OK] {len(rows)} rows written to {path}" + Style.RESET_ALL)
        else:
            text = render_csv(rows) if spec.format == 'csv' else render_json(rows, spec.to_dict())
            sys.stdout.write(text)

        officer = DataOfficer()
        if level <= logging.INFO:
            print(officer.generate_report(rows), file=sys.stderr)
        problems = officer.validate_rows(rows)
        if problems:
            banner("DATA OFFICER: RESULT VALIDATION FAILED", Fore.RED, sys.stderr)
            for problem in problems:
                print(Fore.RED + f"  {problem}" + Style.RESET_ALL, file=sys.stderr)
            return EXIT_NUMERICAL
        return EXIT_OK

    except ConfigError as e:
        print(Fore.RED + f"CONFIG ERROR: {e}" + Style.RESET_ALL, file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, CorrelationError, np.linalg.LinAlgError) as e:
        print(Fore.RED + f"NUMERICAL FAILURE: {e}" + Style.RESET_ALL, file=sys.stderr)
        return EXIT_NUMERICAL
    except KeyboardInterrupt:
        print("\nSweep interrupted by user", file=sys.stderr)
        return EXIT_INTERRUPTED
    except Exception as e:
        print(Fore.RED + f"FATAL ERROR: {e}" + Style.RESET_ALL, file=sys.stderr)
        import traceback
        traceback.print_exc()
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
