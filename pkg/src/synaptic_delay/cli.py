"""CLI entrypoint for synaptic delay experiments."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from synaptic_delay.config_schema import ExperimentConfig, read_config_file
from synaptic_delay.errors import SynapticDelayError
from synaptic_delay.experiments import (
    run_boundary_sweep,
    run_characterization,
    run_delay_config_sweep,
    run_detect,
    run_ipi_sweep,
    run_polychronous_demo,
    run_stim_count_sweep,
)
from synaptic_delay.models import ExperimentReport
from synaptic_delay.presets import CRICKET_VARIANTS
from synaptic_delay.reporting import REPORT_FORMATS, write_report

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

Runner = Callable[[argparse.Namespace, ExperimentConfig], ExperimentReport]


def _positive_float(raw_value: str) -> float:
    value = float(raw_value)
    if not value > 0:
        raise argparse.ArgumentTypeError("Value must be > 0.")
    return value


def _fraction(raw_value: str) -> float:
    value = float(raw_value)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("Noise must be in range 0..1.")
    return value


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Path to an experiment config v1 JSON file.")
    common.add_argument("--seed", type=int, help="Master seed (default: config or 1).")
    common.add_argument("--dt", type=_positive_float, help="Integration step in ms.")
    common.add_argument(
        "--out",
        default="reports",
        help="Directory for report artifacts (default: reports).",
    )
    common.add_argument(
        "--format",
        choices=REPORT_FORMATS,
        default="json",
        help="json writes the report; csv also writes one CSV per table.",
    )
    common.add_argument("--trials", type=int, help="Trials per IPI and noise level.")
    common.add_argument(
        "--noise",
        type=_fraction,
        help="Single stimulus noise fraction replacing the configured levels.",
    )
    common.add_argument(
        "--drift",
        type=_positive_float,
        help="Drift factor applied to capacitances and time constants.",
    )
    common.add_argument(
        "--log-level",
        choices=LOG_LEVELS,
        default="WARNING",
        help="Log level for stderr diagnostics (default: WARNING).",
    )
    return common


def _add_variant(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--variant",
        choices=tuple(CRICKET_VARIANTS),
        help="Cricket circuit preset variant (default: central).",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="syndelay",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Examples:\n"
            "  syndelay characterize --instances 256 --seed 1\n"
            "  syndelay detect --ipi 20 --format csv\n"
            "  syndelay detect --ipi 20 --no-delay\n"
            "  syndelay ipi-sweep --trials 50 --noise 0.1\n"
            "  syndelay boundary --drift 1.1\n"
            "  syndelay delay-sweep --out reports"
        ),
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_options()

    characterize = subparsers.add_parser(
        "characterize",
        parents=[common],
        help="Mismatch population histograms of the delay element metrics.",
    )
    characterize.add_argument("--instances", type=int, help="Population size (default: 256).")
    characterize.set_defaults(handler=_run_characterize)

    detect = subparsers.add_parser(
        "detect",
        parents=[common],
        help="Single double-pulse trial with LN2/LN3/LN4 spikes and traces.",
    )
    detect.add_argument("--ipi", type=float, help="Inter-pulse interval in ms (default: target).")
    _add_variant(detect)
    detect.add_argument(
        "--no-delay",
        action="store_true",
        help="Remove the LN2 to LN3 delay element.",
    )
    detect.set_defaults(handler=_run_detect)

    ipi_sweep = subparsers.add_parser(
        "ipi-sweep",
        parents=[common],
        help="Per-IPI spike statistics and false positive/negative rates.",
    )
    _add_variant(ipi_sweep)
    ipi_sweep.set_defaults(handler=_run_ipi_sweep)

    boundary = subparsers.add_parser(
        "boundary",
        parents=[common],
        help="Classification pass/fail over the LN3 input x LN4 excitation weight grid.",
    )
    _add_variant(boundary)
    boundary.set_defaults(handler=_run_boundary)

    delay_sweep = subparsers.add_parser(
        "delay-sweep",
        parents=[common],
        help="Delay element metrics over the w_inh x w_exc grid.",
    )
    delay_sweep.set_defaults(handler=_run_delay_sweep)

    polychronous = subparsers.add_parser(
        "polychronous",
        parents=[common],
        help="Two detectors selective for a spatio-temporal pattern and its reversal.",
    )
    polychronous.set_defaults(handler=_run_polychronous)

    stim_sweep = subparsers.add_parser(
        "stim-sweep",
        parents=[common],
        help="Delay element response versus number of stimulus spikes.",
    )
    stim_sweep.set_defaults(handler=_run_stim_sweep)

    return parser


def _run_characterize(args: argparse.Namespace, cfg: ExperimentConfig) -> ExperimentReport:
    return run_characterization(cfg.with_overrides(population_size=args.instances))


def _run_detect(args: argparse.Namespace, cfg: ExperimentConfig) -> ExperimentReport:
    ipi = cfg.target_ipi if args.ipi is None else args.ipi
    if ipi < 0:
        raise ValueError("--ipi must be >= 0.")
    noise = 0.0 if args.noise is None else args.noise
    return run_detect(
        cfg.with_overrides(cricket_variant=args.variant),
        ipi,
        include_delay=not args.no_delay,
        noise=noise,
    )


def _run_ipi_sweep(args: argparse.Namespace, cfg: ExperimentConfig) -> ExperimentReport:
    return run_ipi_sweep(cfg.with_overrides(cricket_variant=args.variant))


def _run_boundary(args: argparse.Namespace, cfg: ExperimentConfig) -> ExperimentReport:
    return run_boundary_sweep(cfg.with_overrides(cricket_variant=args.variant))


def _run_delay_sweep(args: argparse.Namespace, cfg: ExperimentConfig) -> ExperimentReport:
    del args
    return run_delay_config_sweep(cfg)


def _run_polychronous(args: argparse.Namespace, cfg: ExperimentConfig) -> ExperimentReport:
    del args
    return run_polychronous_demo(cfg)


def _run_stim_sweep(args: argparse.Namespace, cfg: ExperimentConfig) -> ExperimentReport:
    del args
    return run_stim_count_sweep(cfg)


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = read_config_file(Path(args.config)) if args.config else ExperimentConfig()
    return cfg.with_overrides(
        seed=args.seed,
        dt=args.dt,
        trials=args.trials,
        drift_factor=args.drift,
        noise_levels=None if args.noise is None else (args.noise,),
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.log_level)

    try:
        cfg = _resolve_config(args)
        handler: Runner = args.handler
        logger.info("Running %s (config %s)", args.command, cfg.config_hash[:12])
        report = handler(args, cfg)
        paths = write_report(report, Path(args.out), args.format)
        print(json.dumps({"reports": [str(path) for path in paths]}, sort_keys=True))
        return 0
    except SynapticDelayError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        payload = {"code": "invalid_input", "details": {}, "message": str(exc)}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
