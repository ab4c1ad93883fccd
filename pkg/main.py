import argparse
import logging
import sys
from typing import List, Optional

from cli import (
    build_config,
    cmd_converge,
    cmd_fbm,
    cmd_history,
    cmd_simulate,
    cmd_transform,
    cmd_verify,
    config_dict,
    parse_n_list,
)
from errors import ConfigError, DomainError, SkewFSDEError, VerificationError
from fbm_gen import GENERATORS
from run_monitor import RunMonitor

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _common_parser() -> argparse.ArgumentParser:
    # every option defaults to None so a config file value is only overridden when given
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="key = value configuration file")
    common.add_argument("--hurst", type=float, help="Hurst parameter H in [0.5, 1) (default: 0.75)")
    common.add_argument("--alpha", type=float, help="Skew weight alpha in (0, 1) (default: 0.4)")
    common.add_argument("--x0", type=float, help="Initial value (default: 0)")
    common.add_argument("--horizon", type=float, help="Time horizon T (default: 1)")
    common.add_argument("--steps", type=int, help="Number of grid steps N (default: 4096)")
    common.add_argument("--seed", type=int, help="Driver seed (default: 2024)")
    common.add_argument("--n-list", type=parse_n_list,
                        help="Comma-separated mollification indices (default: 8,16,32,64,128)")
    common.add_argument("--generator", choices=sorted(GENERATORS), help="fBm generator (default: circulant)")
    common.add_argument("--out", type=str, help="Output directory (default: output)")
    common.add_argument("--gamma", type=float, help="Hölder exponent for the fractional bound (default: 0.65)")
    common.add_argument("--order-tilde", type=float, help="Splitting order for the fractional bound (default: 0.45)")
    common.add_argument("--mc-paths", type=int, help="Monte Carlo paths for generator checks (default: 10000)")
    common.add_argument("--probe-count", type=int, help="Probe points for transform checks (default: 10000)")
    common.add_argument("--bound-pairs", type=int, help="Random (s, t) pairs per path (default: 1000)")
    common.add_argument("--identity-seeds", type=int, help="Seeds for the identity check (default: 100)")
    common.add_argument("--log-dir", type=str, help="Directory for the run ledger (default: ~/.skew_fsde_logs)")
    common.add_argument("--disable-monitoring", action="store_true", help="Do not record this run in the ledger")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level (default: WARNING)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        description="Pathwise solutions of SDEs with a skew coefficient driven by fractional Brownian motion"
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True

    subparsers.add_parser("fbm", parents=[common], help="Write one fBm driver path")
    simulate = subparsers.add_parser("simulate", parents=[common], help="Exact and mollified solutions")
    simulate.add_argument("--figure-grid", action="store_true",
                          help="Simulate the whole (H, alpha) figure grid")
    subparsers.add_parser("converge", parents=[common], help="Convergence rate of the mollified scheme")
    subparsers.add_parser("verify", parents=[common], help="Run the property checks")
    subparsers.add_parser("transform", parents=[common], help="Tabulate the coefficient and its transforms")
    history = subparsers.add_parser("history", parents=[common], help="Summarize the run ledger")
    history.add_argument("--days", type=float, default=7, help="Days to include (default: 7)")
    return parser


def _dispatch(args: argparse.Namespace, config) -> int:
    if args.command == "fbm":
        cmd_fbm(config)
    elif args.command == "simulate":
        cmd_simulate(config, figure_grid=args.figure_grid)
    elif args.command == "converge":
        cmd_converge(config)
    elif args.command == "verify":
        return cmd_verify(config)
    elif args.command == "transform":
        cmd_transform(config)
    elif args.command == "history":
        cmd_history(config, days=args.days)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = build_config(args)
    except (ConfigError, DomainError) as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE

    monitor = None
    if config.monitoring and args.command != "history":
        try:
            monitor = RunMonitor(log_dir=config.log_dir)
            monitor.start_monitoring()
        except OSError as e:
            logger.warning("Run monitoring disabled: %s", e)
            monitor = None

    try:
        code = _dispatch(args, config)
    except VerificationError as e:
        print(f"Verification failed: {e}", file=sys.stderr)
        code = EXIT_VERIFICATION
    except (ConfigError, DomainError) as e:
        print(f"Error: {e}", file=sys.stderr)
        code = EXIT_USAGE
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        code = EXIT_IO
    except SkewFSDEError as e:
        print(f"Error: {e}", file=sys.stderr)
        code = EXIT_VERIFICATION

    if monitor is not None:
        run_data = monitor.end_monitoring()
        run_data["exit_code"] = code
        monitor.log_run(run_data, command=args.command, config=config_dict(config))
    return code


if __name__ == "__main__":
    sys.exit(main())
