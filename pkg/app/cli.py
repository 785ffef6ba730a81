"""Command-line surface: `python -m app <command> [options]`."""
import argparse
import logging
import sys
from typing import List, Optional

from app.core.config import VERSION, configure_logging, settings
from app.core.errors import ConfigError, D2DError
from app.core.experiment import load_experiment
from app.core.workflow import (
    FIGURES,
    VARIANTS,
    cmd_coverage,
    cmd_mean_covered,
    cmd_optimize,
    cmd_reproduce,
    cmd_throughput,
)
from app.models.results import ExperimentConfig

logger = logging.getLogger(__name__)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML experiment file ([system], [sim], [sweep], [output], [optimize])")
    parser.add_argument("--seed", type=int, help=f"RNG seed (default {settings.SEED})")
    parser.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    parser.add_argument("--out", help="output directory, or a .csv file path")
    parser.add_argument("--threads", type=int, help="worker threads for simulation batches")
    parser.add_argument("--mode", choices=["analytic", "sim", "both"], help="which columns to compute")
    parser.add_argument("--log-level", default=None, help="logging level (default from D2D_LOG_LEVEL)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multicast-d2d",
        description="Coverage, throughput and network-assistance analysis of multicast D2D clusters.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    coverage = commands.add_parser("coverage", help="p(y) against threshold or distance")
    _common(coverage)
    coverage.add_argument("--bounds", action="store_true", help="add first-order Bonferroni bounds")

    mean = commands.add_parser("mean-covered", help="normalized E[N] against tau_m")
    _common(mean)
    mean.add_argument("--variant", action="append", choices=VARIANTS, help="repeatable; default static")

    throughput = commands.add_parser("throughput", help="multicast throughput and optimal rate")
    _common(throughput)
    throughput.add_argument("--tau", type=int, action="append", help="repeatable; default 1, 2, 4")
    throughput.add_argument("--bits", action="store_true", help="report bits instead of nats")

    optimize = commands.add_parser("optimize", help="network-assistance optimization")
    _common(optimize)
    optimize.add_argument("--fixture", help="JSON list of cell instances to solve instead of sampling networks")

    reproduce = commands.add_parser("reproduce", help="regenerate one figure's CSV and gnuplot script")
    _common(reproduce)
    reproduce.add_argument("figure", choices=FIGURES)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Flags override the config file, which overrides the Settings defaults."""
    config = load_experiment(args.config)
    sim = {k: v for k, v in (("rng_seed", args.seed), ("trials", args.trials), ("threads", args.threads)) if v is not None}
    output = {k: v for k, v in (("path", args.out), ("mode", args.mode)) if v is not None}
    if getattr(args, "bounds", False):
        output["bounds"] = True
    if getattr(args, "bits", False):
        output["unit"] = "bits"
    try:
        return config.model_copy(update={
            "sim": config.sim.model_validate({**config.sim.model_dump(), **sim}),
            "output": config.output.model_validate({**config.output.model_dump(), **output}),
        })
    except ValueError as e:
        raise ConfigError(f"invalid command-line override: {e}") from e


def run(args: argparse.Namespace) -> dict:
    config = resolve_config(args)
    if args.command == "coverage":
        return cmd_coverage(config)
    if args.command == "mean-covered":
        return cmd_mean_covered(config, variants=args.variant or ("static",))
    if args.command == "throughput":
        return cmd_throughput(config, taus=args.tau or (1, 2, 4))
    if args.command == "optimize":
        return cmd_optimize(config, fixture=args.fixture)
    return cmd_reproduce(args.figure, config)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        summary = run(args)
    except D2DError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        return 1
    print(summary["path"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
