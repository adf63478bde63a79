"""Contains functions that might be useful outside of their modules"""
import csv
import logging
import math
import os
from pathlib import Path
from tempfile import NamedTemporaryFile
from typing import Dict, Iterable, Optional, Sequence, Union

from .const import CSV_DIGITS
from .errors import OutputError

log = logging.getLogger(__name__)


def db_to_linear(db: float) -> float:
    """Convert a power ratio in dB to linear scale."""
    return 10 ** (db / 10)


def linear_to_db(value: float) -> float:
    """Convert a linear power ratio to dB."""
    if value <= 0:
        raise ValueError(f"Can't express {value} in dB")
    return 10 * math.log10(value)


def fmt_float(value: float, digits: int = CSV_DIGITS) -> str:
    """Format a number with `digits` significant digits, '' for None."""
    if value is None:
        return ""
    return f"{value:.{digits}g}"


def atomic_write_csv(path: Union[str, Path], columns: Sequence[str],
                     rows: Iterable[Sequence],
                     settings: Optional[Dict] = None):
    """Write a CSV file so readers never see a partial one.

    `settings` become leading "# key=value" lines. The content goes to a
    temporary file in the target directory, which then replaces the target.
    """
    path = Path(path)
    tmp_name = None
    try:
        with NamedTemporaryFile("w", encoding="utf-8", newline="",
                                dir=path.parent or ".",
                                prefix=f".{path.name}.",
                                delete=False) as tmp_file:
            tmp_name = tmp_file.name
            for key, value in (settings or {}).items():
                tmp_file.write(f"# {key}={value}\n")
            writer = csv.writer(tmp_file, lineterminator="\n")
            writer.writerow(columns)
            writer.writerows(rows)
        os.replace(tmp_name, path)
    except OSError as exception:
        if tmp_name is not None and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise OutputError(f"{path}: {exception}") from exception
    log.debug("Wrote %s", path)
