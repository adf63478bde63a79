"""Config class definition."""
import logging
from logging import Formatter, StreamHandler
from typing import Iterable

from extendparser.get import Get

from .const import (
    BLOCK_SIZE,
    COMPOSITION_CAP,
    DEFAULT_CONFIG_PATH,
    GMIN_DIRECTIONS,
    QUAD_EPSABS,
    SEED,
    TABLE_CAP,
    TAIL_MASS,
    TARGET_RATE,
    TRIALS,
    WORKERS,
)
from .errors import InvalidConfig

LOG_FORMAT_FOREGROUND = \
    "%(asctime)s %(levelname)s {%(module)s.%(funcName)s():%(lineno)d} "\
    "[%(threadName)s]: %(message)s "

LOG_LEVELS = ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG")

# pylint: disable=too-many-ancestors


def get_log_level_dict(log_levels: Iterable[str]):
    """Parse log level from command line arguments."""
    log_level_dict = {}
    for log_config in log_levels:
        parts = log_config.split("=")
        if len(parts) != 2:
            raise ValueError("Log level settings needs to contain exactly one "
                             "\"=\"")
        name, loglevel = parts
        log_level_dict[name] = loglevel
    return log_level_dict


def check_log_level(value):
    """Check valid log level."""
    if value not in LOG_LEVELS:
        raise ValueError(f"Invalid value {value}")


class Model(dict):
    """Config model based on dictionary.

    It simply implements set and get attr methods.
    """
    def __getattr__(self, key):
        try:
            return self[key]
        except KeyError as err:
            raise AttributeError(err) from err

    def __setattr__(self, key, val):
        self[key] = val


class FakeArgs:
    """Fake arguments for library callers and tests"""

    def __init__(self, path=DEFAULT_CONFIG_PATH):
        self.config = path
        self.debug = False
        self.info = False
        self.module_log_level = None
        self.trials = None
        self.seed = None
        self.block_size = None
        self.workers = None
        self.target_rate = None
        self.table_cap = None


class Config(Get):
    """This class handles cmf.ini configuration file.

    Values from the command line, when given, override the ini file, which
    overrides the built in defaults.
    """

    def __init__(self, args):
        super().__init__()

        self.read(args.config)
        self.debug = args.debug

        # [simulation]
        self.simulation = Model(
            self.get_section(
                "simulation",
                (
                    ("trials", int, TRIALS),
                    ("seed", int, SEED),
                    ("block_size", int, BLOCK_SIZE),
                    ("workers", int, WORKERS),
                    ("target_rate", float, TARGET_RATE),
                )))
        for key in ("trials", "seed", "block_size", "workers",
                    "target_rate"):
            value = getattr(args, key, None)
            if value is not None:
                self.simulation[key] = value

        # [analysis]
        self.analysis = Model(
            self.get_section(
                "analysis",
                (
                    ("epsabs", float, QUAD_EPSABS),
                    ("tail_mass", float, TAIL_MASS),
                    ("composition_cap", int, COMPOSITION_CAP),
                )))

        # [table]
        self.table = Model(
            self.get_section(
                "table",
                (
                    ("cap", float, TABLE_CAP),
                    ("directions", int, GMIN_DIRECTIONS),
                    ("path", str, ''),
                )))
        if getattr(args, "table_cap", None) is not None:
            self.table.cap = args.table_cap

        self.check()

        # [logging]
        self.set_global_log_level(args)

        # Let's combine the config log setting and cmd args
        # with cmd args overriding config values
        self.log_settings = {}
        if "log" in self:
            for module_name, log_level in self["log"].items():
                check_log_level(log_level)
                self.log_settings[module_name] = log_level

        if args.module_log_level is not None:
            override_log_settings = get_log_level_dict(args.module_log_level)
            for log_level in override_log_settings.values():
                check_log_level(log_level)
            self.log_settings.update(override_log_settings)

    def check(self):
        """Reject values no experiment can run with."""
        sim = self.simulation
        if sim.trials < 1:
            raise InvalidConfig(f"trials must be >= 1, got {sim.trials}")
        if sim.seed < 0:
            raise InvalidConfig(f"seed must be >= 0, got {sim.seed}")
        if sim.block_size < 1:
            raise InvalidConfig(
                f"block_size must be >= 1, got {sim.block_size}")
        if sim.workers < 1:
            raise InvalidConfig(f"workers must be >= 1, got {sim.workers}")
        if sim.target_rate < 0:
            raise InvalidConfig(
                f"target_rate must be >= 0, got {sim.target_rate}")
        if not 0 < self.analysis.epsabs < 1:
            raise InvalidConfig("epsabs must lie in (0, 1)")
        if not 0 < self.analysis.tail_mass < 1e-3:
            raise InvalidConfig("tail_mass must lie in (0, 1e-3)")
        if self.analysis.composition_cap < 1:
            raise InvalidConfig("composition_cap must be >= 1")
        if self.table.cap < 0:
            raise InvalidConfig(
                f"table cap must be >= 0, got {self.table.cap}")
        if self.table.directions < 16:
            raise InvalidConfig("table directions must be >= 16")

    def set_global_log_level(self, args):
        """Set default global log level from command line."""
        if args.debug:
            log_level = "DEBUG"
        elif args.info:
            log_level = "INFO"
        else:
            log_level = logging.root.level

        logging.root.setLevel(log_level)

    def get_log_handler(self):
        """Install the foreground handler on the root logger."""
        configured_handler = StreamHandler()
        log_format = self.get("logging", "format",
                              fallback=LOG_FORMAT_FOREGROUND)

        for handler in logging.root.handlers:  # reset root logger handlers
            logging.root.removeHandler(handler)
        logging.root.addHandler(configured_handler)
        formatter = Formatter(log_format)
        configured_handler.setFormatter(formatter)
        return configured_handler

    def apply_log_settings(self):
        """Set per module log levels collected from ini and argv."""
        for module_name, log_level in self.log_settings.items():
            logging.getLogger(module_name).setLevel(log_level)
