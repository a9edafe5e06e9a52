# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""dpxattn command line handling"""

import argparse
from pathlib import Path
import sys
from typing import Optional, Sequence

from .config import MODES, NORMALIZERS, RunConfig
from .core import cmd_attack, cmd_attn, cmd_eval, cmd_gen
from .dataset import Dataset
from .errors import DegenerateOutput, DPXAttnError, InfeasibleParameters
from .log import core_logger, setup_logging
from . import get_version_sync

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3


def build_parser() -> argparse.ArgumentParser:
    """The argument parser; unset options keep the RunConfig defaults"""
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("-c", "--configfile", type=Path,
                        help="TOML file with default settings, overridden by the command line")
    common.add_argument("--data-dir", dest="data_dir", type=Path,
                        help="Directory holding K.csv, V.csv and Q.csv (default: data)")
    common.add_argument("-o", "--output", type=Path,
                        help="Report file to write (default: report.json)")
    common.add_argument("-d", "--debug", action="store_true", help="Print debug messages")
    common.add_argument("--n", type=int, help="Number of keys (default: 128)")
    common.add_argument("--m", type=int, help="Number of query rows (default: 8)")
    common.add_argument("--dim", dest="d", type=int, help="Feature dimension d (default: 2)")
    common.add_argument("--radius", type=float, help="Key and query bound R (default: 1)")
    common.add_argument("--weight-bound", dest="weight_bound", type=float,
                        help="Value bound R_w (default: 1)")
    common.add_argument("--grid-size", dest="grid_size", type=int,
                        help="Rounding grid steps (default: number of points)")
    common.add_argument("--epsilon", type=float, help="Privacy parameter epsilon (default: 2)")
    common.add_argument("--delta", type=float, help="Privacy parameter delta (default: 0.01)")
    common.add_argument("--delta-prime", dest="delta_prime", type=float,
                        help="Advanced composition slack delta' (default: 0.01)")
    common.add_argument("--c-split", dest="c_split", type=float,
                        help="Advanced composition constant c in (0, 0.1) (default: 0.05)")
    common.add_argument("--epsilon-s", dest="epsilon_s", type=float,
                        help="Kernel approximation accuracy (default: 0.05)")
    common.add_argument("--alpha", type=float, help="Shell ratio alpha in (0, 1) (default: 0.3)")
    common.add_argument("--p-f", dest="p_f", type=float,
                        help="Adaptive failure probability (default: 0.01)")
    common.add_argument("--l-override", dest="l_override", type=int,
                        help="Use this many adaptive copies instead of the formula")
    common.add_argument("--epsilon-floor", dest="epsilon_floor", type=float,
                        help="Smallest per-copy epsilon allowed (default: 1e-6)")
    common.add_argument("--kernel-cap", dest="kernel_cap", type=int,
                        help="Largest kernel feature count allowed (default: 1000000)")
    common.add_argument("--mode", choices=MODES, help="Structure to evaluate (default: softmax)")
    common.add_argument("--normalizer", choices=NORMALIZERS,
                        help="Attention normalizer (default: exact)")
    common.add_argument("--compose-columns", dest="compose_columns", action="store_true",
                        help="Split the budget over the attention columns")
    common.add_argument("--noisy-scalars", dest="noisy_scalars", action="store_true",
                        help="Add noise to the softmax polarisation scalars")
    common.add_argument("--noise", choices=("on", "off"),
                        help="Disable noise; only together with --unsafe-test")
    common.add_argument("--unsafe-test", dest="unsafe_test", action="store_true",
                        help="Allow settings that void the privacy guarantee")
    common.add_argument("--seed", type=int, help="Master seed (default: 0)")
    common.add_argument("--trials", type=int, help="Number of evaluation trials (default: 20)")
    common.add_argument("--record-timings", dest="record_timings", action="store_true",
                        help="Add wall times to the report")
    common.add_argument("--attack-grid", dest="attack_grid", type=int,
                        help="Attack lattice points per axis (default: 20)")
    common.add_argument("--attack-rounds", dest="attack_rounds", type=int,
                        help="Adaptive attack rounds (default: 100)")

    parser = argparse.ArgumentParser(prog="dpxattn",
                                     description="Differentially private cross-attention toolkit")
    parser.add_argument("-V", "--version", action="version", version=get_version_sync())
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("gen", parents=[common], help="Generate a synthetic dataset")
    subparsers.add_parser("eval", parents=[common], help="Compare a structure's answers to exact values")
    subparsers.add_parser("attack", parents=[common], help="Run the greedy adaptive attack")
    subparsers.add_parser("attn", parents=[common], help="Compute private cross-attention")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then the command line"""
    config = RunConfig.from_argparse(args)
    if config.configfile is not None:
        config.read_config()
        config.update_from_dict(vars(args))
    return config


def run(config: RunConfig) -> int:
    """Run one command, mapping errors to exit codes"""
    try:
        if config.command == "gen":
            cmd_gen(config)
            return EXIT_OK
        config.validate()
        dataset = Dataset.load(config.data_dir)
        if config.command == "eval":
            report = cmd_eval(config, dataset)
        elif config.command == "attack":
            report = cmd_attack(config, dataset)
        else:
            report = cmd_attn(config, dataset)
    except (InfeasibleParameters, DegenerateOutput) as err:
        core_logger.error("%s", err)
        return EXIT_INFEASIBLE
    except DPXAttnError as err:
        core_logger.error("%s", err)
        return EXIT_INVALID
    except OSError as err:
        core_logger.error("Failed to write output: %s", err)
        return EXIT_INVALID
    print(report.format_table())
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the dpxattn command line tool"""
    args = build_parser().parse_args(argv)
    setup_logging(getattr(args, "debug", False))
    return run(load_config(args))


if __name__ == "__main__":
    sys.exit(main())
