import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

from channel_io import channel_to_document, dump_channel_document, load_channel_document
from config import Config, LOG_LEVELS, OUTPUT_FORMATS
from errors import ConsistencyError, DomainError, QcapError
from matrix_core import set_eigensolver
from pcds_channels import BlockPartition, make_combined, make_dephasing, make_single_decay
from sweeps import (
    SweepFamily, SweepSpec, analyze_channel, load_sweep_spec, render_rows,
    run_sweep, write_output,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONSISTENCY = 3

COLUMNS_HELP = """output columns:
  dephasing-sweep   kappa_sq, Q, Q_optimizer, QE, QE_optimizer
  mad-sweep         gamma, Q, QE, degradable, lower, upper, method
  combined-surface  gamma, kappa, Q, QE, lower, upper, gap, method
  sweep (custom_json) Q, QE, degradable, lower, upper, gap, method
CSV floats carry 9 significant digits; capacities are in qubits per channel use.

exit codes: 0 ok, 2 input error, 3 internal consistency failure"""

SWEEP_COMMANDS = {
    'dephasing-sweep': SweepFamily.DEPHASING,
    'mad-sweep': SweepFamily.MAD_SINGLE,
    'combined-surface': SweepFamily.COMBINED,
}


def _add_output_flags(parser: argparse.ArgumentParser, sweep: bool = True):
    parser.add_argument('--out', help="output path (stdout when omitted)")
    parser.add_argument('--seed', type=int, help="optimizer seed (default from QCAP_SEED)")
    parser.add_argument('--log-level', choices=LOG_LEVELS, help="logging level (default from LOG_LEVEL)")
    if sweep:
        parser.add_argument('--format', choices=OUTPUT_FORMATS, help="output format (default from QCAP_OUTPUT_FORMAT)")
        parser.add_argument('--jobs', type=int, help="worker threads (default from QCAP_JOBS)")
        parser.add_argument('--spec', help="YAML file with sweep settings; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='qcap',
        description="Quantum and entanglement-assisted capacities of partially coherent direct-sum channels",
        epilog=COLUMNS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('dephasing-sweep', help="block dephasing channel against |kappa|^2")
    p.add_argument('--da', type=int, help="dimension of block A")
    p.add_argument('--db', type=int, help="dimension of block B")
    p.add_argument('--kappa-grid', help="grid of |kappa|^2 as start:stop:count")
    _add_output_flags(p)

    p = sub.add_parser('mad-sweep', help="single-decay multi-level damping channel against gamma")
    p.add_argument('--dc', type=int, help="total dimension d_C")
    p.add_argument('--gamma-grid', help="grid of gamma as start:stop:count")
    _add_output_flags(p)

    p = sub.add_parser('combined-surface', help="combined decay/dephasing channel on a gamma x |kappa| grid")
    p.add_argument('--dc', type=int, help="total dimension d_C (default 3)")
    p.add_argument('--gamma-grid', help="grid of gamma as start:stop:count")
    p.add_argument('--kappa-grid', help="grid of |kappa| as start:stop:count")
    _add_output_flags(p)

    p = sub.add_parser('sweep', help="run the sweep described by --spec (any family, custom_json included)")
    _add_output_flags(p)

    p = sub.add_parser('analyze', help="report on a channel read from a JSON document")
    p.add_argument('channel', help="path of the JSON channel document")
    p.add_argument('--partition', help="block dimensions such as 2,1 (overrides the document)")
    _add_output_flags(p, sweep=False)

    p = sub.add_parser('export-channel', help="write a factory channel as a JSON document")
    p.add_argument('--family', required=True, choices=['dephasing', 'mad_single', 'combined'])
    p.add_argument('--da', type=int, default=1)
    p.add_argument('--db', type=int, default=1)
    p.add_argument('--dc', type=int, default=3)
    p.add_argument('--gamma', type=float, default=0.0)
    p.add_argument('--kappa', type=float, default=1.0)
    _add_output_flags(p, sweep=False)

    return parser


def _spec_from_args(args: argparse.Namespace, config: Config) -> SweepSpec:
    data: Dict[str, Any] = load_sweep_spec(args.spec) if args.spec else {}
    family = SWEEP_COMMANDS.get(args.command)
    if family is not None:
        if data.get('family') not in (None, family.value):
            raise DomainError(f"Spec file family '{data['family']}' does not match command '{args.command}'")
        data['family'] = family.value

    data.setdefault('format', config.output_format)
    data.setdefault('seed', config.seed)
    data.setdefault('jobs', config.jobs)
    for key in ('da', 'db', 'dc', 'kappa_grid', 'gamma_grid', 'out', 'format', 'seed', 'jobs'):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    return SweepSpec.from_mapping(data)


def cmd_sweep(args: argparse.Namespace, config: Config) -> int:
    spec = _spec_from_args(args, config)
    errors = spec.validate()
    if errors:
        logger.error("Sweep specification errors:")
        for error in errors:
            logger.error(f"  - {error}")
        return EXIT_INPUT
    logger.info(f"Running {spec.family.value} sweep: {spec.to_dict()}")
    rows = run_sweep(spec, config.solver_settings(spec.seed))
    write_output(render_rows(rows, spec), spec.out)
    return EXIT_OK


def _parse_partition(text: str) -> BlockPartition:
    try:
        dims = tuple(int(part) for part in text.split(','))
    except ValueError as e:
        raise DomainError(f"Partition must be comma-separated integers, got '{text}'") from e
    return BlockPartition(dims)


def cmd_analyze(args: argparse.Namespace, config: Config) -> int:
    channel, partition = load_channel_document(args.channel)
    if args.partition:
        partition = _parse_partition(args.partition)
    seed = config.seed if args.seed is None else args.seed
    report = analyze_channel(channel, partition, config.solver_settings(seed))
    write_output(json.dumps(report, indent=2) + '\n', args.out)
    return EXIT_OK


def cmd_export_channel(args: argparse.Namespace, config: Config) -> int:
    if args.family == 'dephasing':
        pc = make_dephasing(args.da, args.db, args.kappa)
    elif args.family == 'mad_single':
        pc = make_single_decay(args.dc, args.gamma)
    else:
        pc = make_combined(args.dc, args.gamma, args.kappa)
    if args.out:
        dump_channel_document(args.out, pc.channel, pc.partition)
    else:
        write_output(json.dumps(channel_to_document(pc.channel, pc.partition), indent=2) + '\n')
    return EXIT_OK


HANDLERS = {
    'dephasing-sweep': cmd_sweep,
    'mad-sweep': cmd_sweep,
    'combined-surface': cmd_sweep,
    'sweep': cmd_sweep,
    'analyze': cmd_analyze,
    'export-channel': cmd_export_channel,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point"""
    config = Config()
    args = build_parser().parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level or config.log_level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    # Validate configuration
    errors = config.validate()
    if errors:
        logger.error("Configuration errors:")
        for error in errors:
            logger.error(f"  - {error}")
        return EXIT_INPUT

    logger.debug(str(config))
    set_eigensolver(config.eigensolver)

    try:
        return HANDLERS[args.command](args, config)
    except ConsistencyError as e:
        logger.error(f"Consistency check failed: {e}")
        return EXIT_CONSISTENCY
    except QcapError as e:
        logger.error(f"Input error: {e}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
