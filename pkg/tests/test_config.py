"""Tests of the ini file configuration"""
import logging

import pytest

from relaynet.cmf.config import Config, FakeArgs  # type:ignore
from relaynet.cmf.const import TABLE_CAP, TRIALS  # type:ignore
from relaynet.cmf.errors import InvalidConfig  # type:ignore

# pylint: disable=redefined-outer-name

CONFIG = """
[simulation]
trials = 5000
seed = 42
workers = 2

[analysis]
epsabs = 1e-6

[table]
cap = 900

[log]
relaynet.cmf.search = DEBUG
"""


@pytest.fixture()
def config_path(tmp_path):
    """Ini file with a few values set"""
    path = tmp_path / "cmf.ini"
    path.write_text(CONFIG, encoding="utf-8")
    return str(path)


def test_defaults(tmp_path):
    """A missing file means built in defaults"""
    config = Config(FakeArgs(str(tmp_path / "missing.ini")))
    assert config.simulation.trials == TRIALS
    assert config.table.cap == TABLE_CAP
    assert config.table.path == ""
    assert config.log_settings == {}


def test_file_values(config_path):
    """Values come from the ini file, the rest from defaults"""
    config = Config(FakeArgs(config_path))
    assert config.simulation.trials == 5000
    assert config.simulation.seed == 42
    assert config.simulation.workers == 2
    assert config.simulation.target_rate == 0.5
    assert config.analysis.epsabs == 1e-6
    assert config.table.cap == 900
    assert config.log_settings == {"relaynet.cmf.search": "DEBUG"}


def test_command_line_wins(config_path):
    """Command line values override the ini file"""
    args = FakeArgs(config_path)
    args.trials = 10
    args.table_cap = 100.0
    args.module_log_level = ["relaynet.cmf.search=INFO"]
    config = Config(args)
    assert config.simulation.trials == 10
    assert config.simulation.seed == 42
    assert config.table.cap == 100.0
    assert config.log_settings == {"relaynet.cmf.search": "INFO"}

    config.apply_log_settings()
    assert logging.getLogger("relaynet.cmf.search").level == logging.INFO


def test_invalid_values(config_path):
    """Values no experiment can run with are rejected"""
    args = FakeArgs(config_path)
    args.trials = 0
    with pytest.raises(InvalidConfig):
        Config(args)

    args = FakeArgs(config_path)
    args.module_log_level = ["relaynet.cmf.search=LOUD"]
    with pytest.raises(ValueError):
        Config(args)
