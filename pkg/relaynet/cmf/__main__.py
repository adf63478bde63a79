"""main() command line function."""
import logging
import sys
from argparse import ArgumentParser, ArgumentTypeError

from pydantic import ValidationError

from . import __application__, __version__
from .config import Config
from .const import DEFAULT_CONFIG_PATH, PRESETS, SNR_GRID
from .errors import EXIT_OK, EXIT_USAGE, CmfError, InvalidConfig
from .experiments import run_command
from .structures.experiment_classes import Command, ExperimentSpec

log = logging.getLogger(__name__)


class LogLevel(str):
    """Log level type with __call__ checker method."""

    def __new__(cls, level):
        if len(level.split("=")) != 2:
            raise ArgumentTypeError("log level needs to be specified in format"
                                    "<module_path>=<log_level>")
        return super().__new__(cls, level)


class CliParser(ArgumentParser):
    """Argument parser exiting with the usage error code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def get_parser():
    """Command line parser of cmf-relay."""
    parser = CliParser(prog=__application__,
                       description="Compute-and-forward ECV selection and "
                       "outage experiments.")
    parser.add_argument(
        "command",
        nargs='?',
        choices=[command.value for command in Command],
        help="experiment to run, may come from --preset")
    parser.add_argument("--preset",
                        choices=sorted(PRESETS),
                        help="named experiment configuration")
    parser.add_argument("-c",
                        "--config",
                        default=DEFAULT_CONFIG_PATH,
                        type=str,
                        help="path to config file "
                        f"(default: {DEFAULT_CONFIG_PATH})",
                        metavar="<file>")
    parser.add_argument("-o",
                        "--out",
                        type=str,
                        help="output CSV file (default: <command>.csv)",
                        metavar="<file>")
    parser.add_argument("--snr-start", type=float, metavar="<dB>")
    parser.add_argument("--snr-stop", type=float, metavar="<dB>")
    parser.add_argument("--snr-step", type=float, metavar="<dB>")
    parser.add_argument("--p2-offset-db",
                        type=float,
                        default=0.0,
                        help="P2 = P1 + offset in dB (default: 0)",
                        metavar="<dB>")
    parser.add_argument("--relays",
                        type=int,
                        action="append",
                        help="number of relays M, repeatable",
                        metavar="<M>")
    parser.add_argument("--k",
                        type=int,
                        action="append",
                        help="CMF(K) candidate count, repeatable",
                        metavar="<K>")
    parser.add_argument("--optimal",
                        action="store_true",
                        help="evaluate the optimum CMF as well")
    parser.add_argument("--target-rate", type=float, metavar="<R>")
    parser.add_argument("--trials", type=int, metavar="<N>")
    parser.add_argument("--seed", type=int, metavar="<SEED>")
    parser.add_argument("--block-size", type=int, metavar="<N>")
    parser.add_argument("--workers",
                        type=int,
                        help="simulation threads, results do not depend "
                        "on it",
                        metavar="<N>")
    parser.add_argument("--cee-var",
                        type=float,
                        action="append",
                        help="channel estimation error variance, "
                        "repeatable",
                        metavar="<VAR>")
    parser.add_argument("--table-cap",
                        type=float,
                        help="largest g_min^2 of the table",
                        metavar="<SNR>")
    parser.add_argument("--grid-max", type=float, metavar="<G>")
    parser.add_argument("--grid-step", type=float, metavar="<G>")
    parser.add_argument("--sum-snr",
                        type=float,
                        action="append",
                        help="|g|^2 for search-space, repeatable",
                        metavar="<SNR>")
    parser.add_argument("-i",
                        "--info",
                        action="store_true",
                        help="more verbose logging level INFO is set")
    parser.add_argument("-d",
                        "--debug",
                        action="store_true",
                        help="DEBUG logging level is set")
    parser.add_argument("-l",
                        "--module-log-level",
                        action="append",
                        help="sets the log level of any submodule(s). "
                        "use <module_path>=<log_level>",
                        type=LogLevel)
    parser.add_argument("--version",
                        action="store_true",
                        help="Print out version info and exit")
    return parser


def _first(*values):
    for value in values:
        if value is not None:
            return value
    return None


def resolve_spec(args, config: Config) -> ExperimentSpec:
    """Merge preset, config file and command line into one request.

    Command line values win over the preset, which wins over the config
    file and the defaults.
    """
    preset = PRESETS[args.preset] if args.preset else {}
    command = args.command or preset.get("command")
    if command is None:
        raise InvalidConfig("no command given, use a command or --preset")

    simulation = config.simulation
    values = {
        "command": command,
        "snr_start": _first(args.snr_start, SNR_GRID[0]),
        "snr_stop": _first(args.snr_stop, SNR_GRID[1]),
        "snr_step": _first(args.snr_step, SNR_GRID[2]),
        "p2_offset_db": args.p2_offset_db,
        "relays": args.relays or preset.get("relays") or [2],
        "ks": args.k or preset.get("ks") or [],
        "optimal": args.optimal or preset.get("optimal", False),
        "target_rate": simulation.target_rate,
        "trials": simulation.trials,
        "seed": simulation.seed,
        "block_size": simulation.block_size,
        "workers": simulation.workers,
        "cee_vars": args.cee_var or preset.get("cee_vars") or [0.0],
        "table_cap": config.table.cap,
        "table_path": config.table.path,
        "directions": config.table.directions,
        "epsabs": config.analysis.epsabs,
        "tail_mass": config.analysis.tail_mass,
        "composition_cap": config.analysis.composition_cap,
        "out": args.out or f"{args.preset or command}.csv",
    }
    if args.grid_max is not None:
        values["grid_max"] = args.grid_max
    if args.grid_step is not None:
        values["grid_step"] = args.grid_step
    if args.sum_snr:
        values["sum_snrs"] = args.sum_snr
    return ExperimentSpec(**values)


def main(argv=None):
    """Standard main function."""
    parser = get_parser()
    args = parser.parse_args(argv)

    if args.version:
        print(f"{__application__} version:", __version__)
        return EXIT_OK

    try:
        config = Config(args)
        config.get_log_handler()
        config.apply_log_settings()
        spec = resolve_spec(args, config)
        run_command(spec)
    except CmfError as error:
        log.debug("%s failed", args.command, exc_info=True)
        print(error.text_response(), file=sys.stderr)
        return error.exit_code
    except ValidationError as error:
        print(f"Invalid arguments:\n{error}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as error:
        print(f"Invalid arguments: {error}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
