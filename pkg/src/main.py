import argparse
import sys
from typing import List, Optional

import structlog

from app import ThroughputStudy
from cfg import COMMANDS, ConfigError, load_config
from util import DomainError, InfeasibleError

logger = structlog.get_logger(__name__)


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """
    Parses command-line arguments selecting the command, the configuration file and
    the values that override it.

    Parameters
    ----------
    argv : Optional[List[str]], optional
        Arguments to parse; `sys.argv[1:]` when None.

    Returns
    -------
    argparse.Namespace
        An object containing the parsed command-line arguments as attributes.

    Raises
    ------
    SystemExit
        If the arguments are invalid or `--help` was requested.
    """
    parser = argparse.ArgumentParser(
        description=(
            "Stable-throughput regions, optimal access policies and queue simulation "
            "for a primary/secondary cognitive-radio link pair."
        )
    )

    parser.add_argument(
        "command",
        choices=COMMANDS,
        help=(
            "'region' samples every scheme's boundary, 'optimize' traces the optimal "
            "policy of the configured scheme, 'simulate' runs the slotted queue "
            "simulation and 'compare' evaluates scheme switching and sensing "
            "crossovers."
        )
    )
    parser.add_argument(
        "--config",
        type=str,
        required=True,
        help="Path to the YAML run configuration."
    )
    parser.add_argument(
        "--output",
        type=str,
        default="results",
        help="Directory receiving the CSV files and the plot script."
    )
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="Overrides `sim.seed`."
    )
    parser.add_argument(
        "--slots",
        type=int,
        default=None,
        help="Overrides `sim.slots`."
    )
    parser.add_argument(
        "--tau-points",
        type=int,
        default=None,
        help="Overrides `sweep.tau_points`."
    )
    parser.add_argument(
        "--b-points",
        type=int,
        default=None,
        help="Overrides `sweep.b_points`."
    )

    return parser.parse_args(argv)


def run(argv: Optional[List[str]] = None) -> int:
    """
    Loads the configuration, runs the requested command and reports the outcome as
    an exit status.

    Returns
    -------
    int
        0 when every output was written, 1 when the configuration is invalid, the
    environment is infeasible or an output could not be written.
    """
    args = parse_args(argv)
    overrides = {
        "sim.seed": args.seed,
        "sim.slots": args.slots,
        "sweep.tau_points": args.tau_points,
        "sweep.b_points": args.b_points,
    }
    try:
        config = load_config(args.config, args.command, args.output, overrides)
        app = ThroughputStudy(config)
        app.run_app()
    except (ConfigError, InfeasibleError, DomainError, OSError) as e:
        logger.error("Run failed", command=args.command, error=str(e))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(run())
