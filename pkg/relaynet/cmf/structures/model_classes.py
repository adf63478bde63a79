"""
Contains the value objects shared by the rate kernel, the ECV search and the
analysis. Pydantic enforces their types and invariants on construction and
keeps them immutable, so they can be used as cache keys.
"""
import csv
import math
from math import gcd
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, confloat, root_validator, validator

from ..util import atomic_write_csv, db_to_linear

NonNegativeFloat = confloat(ge=0)
Probability = confloat(ge=0, le=1)
Rate = NonNegativeFloat

# pylint: disable=no-self-argument


class Frozen(BaseModel):
    """Base of every value object"""

    class Config:
        """Hashable and immutable"""
        frozen = True


class SourcePowers(Frozen):
    """Linear transmit SNRs of the two sources"""
    p1: float
    p2: float

    @validator("p1", "p2")
    def positive(cls, value):
        """Powers are finite and strictly positive"""
        if not (math.isfinite(value) and value > 0):
            raise ValueError(f"power must be finite and > 0, got {value}")
        return value

    @classmethod
    def from_db(cls, p1_db: float, offset_db: float = 0.0):
        """P1 from dB, P2 = P1 shifted by `offset_db`."""
        return cls(p1=db_to_linear(p1_db),
                   p2=db_to_linear(p1_db + offset_db))

    @property
    def equal(self) -> bool:
        return math.isclose(self.p1, self.p2, rel_tol=1e-9)

    def as_array(self) -> np.ndarray:
        return np.array([self.p1, self.p2], dtype=float)


class ChannelVector(Frozen):
    """Real channel gains from both sources to one relay"""
    h1: float
    h2: float

    @validator("h1", "h2")
    def finite(cls, value):
        """NaN and inf are not gains"""
        if not math.isfinite(value):
            raise ValueError(f"channel gain must be finite, got {value}")
        return value


class ScaledChannel(Frozen):
    """Channel gains scaled by the square roots of the source powers"""
    g1: float
    g2: float

    @validator("g1", "g2")
    def finite(cls, value):
        """NaN and inf are not gains"""
        if not math.isfinite(value):
            raise ValueError(f"scaled gain must be finite, got {value}")
        return value

    @property
    def norm_sq(self) -> float:
        return self.g1 * self.g1 + self.g2 * self.g2

    def as_array(self) -> np.ndarray:
        return np.array([self.g1, self.g2], dtype=float)


class Ecv(Frozen):
    """Integer equation coefficient vector (a1, a2)"""
    a1: int
    a2: int

    @validator("a1", "a2", pre=True)
    def integral(cls, value):
        """Reject fractional values instead of truncating them"""
        if isinstance(value, (float, np.floating)):
            if not float(value).is_integer():
                raise ValueError(f"ECV component must be integral, "
                                 f"got {value}")
        return int(value)

    @classmethod
    def of(cls, a1, a2):
        """Shorthand constructor"""
        return cls(a1=a1, a2=a2)

    @property
    def norm_sq(self) -> int:
        return self.a1 * self.a1 + self.a2 * self.a2

    @property
    def is_zero(self) -> bool:
        return self.a1 == 0 and self.a2 == 0

    @property
    def is_canonical(self) -> bool:
        """gcd 1 and the first nonzero component positive"""
        if self.is_zero or gcd(self.a1, self.a2) != 1:
            return False
        return self.a1 > 0 or (self.a1 == 0 and self.a2 > 0)

    @property
    def order_key(self) -> Tuple[int, int, int]:
        """Ascending norm, then the larger leading component first"""
        return self.norm_sq, -self.a1, -self.a2

    def as_tuple(self) -> Tuple[int, int]:
        return self.a1, self.a2

    def permuted(self) -> "Ecv":
        return Ecv(a1=self.a2, a2=self.a1)

    def __str__(self):
        return f"({self.a1},{self.a2})"


class GramMatrix(Frozen):
    """2x2 symmetric matrix I - g g^T / (1 + |g|^2)"""
    g11: float
    g12: float
    g21: float
    g22: float

    @root_validator(skip_on_failure=True)
    def symmetric(cls, values):
        """Off diagonal entries agree"""
        if not math.isclose(values["g12"], values["g21"], rel_tol=1e-12,
                            abs_tol=1e-15):
            raise ValueError("Gram matrix must be symmetric")
        return values

    def as_array(self) -> np.ndarray:
        return np.array([[self.g11, self.g12], [self.g21, self.g22]])

    @property
    def determinant(self) -> float:
        return self.g11 * self.g22 - self.g12 * self.g21

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.as_array())


class RelayDecision(Frozen):
    """Coefficient vector a relay decodes and the rate it achieves"""
    ecv: Ecv
    rate: Rate


class GminRecord(Frozen):
    """Smallest |g|^2 for which an ECV is the optimum somewhere"""
    ecv: Ecv
    gmin_sq: NonNegativeFloat


class GminTable(Frozen):
    """ECVs that can be optimal for some |g|^2 <= coverage.

    Rows are sorted by ascending gmin_sq, ties by the ECV order key, so the
    first K rows form the CMF(K) candidate set.
    """
    records: Tuple[GminRecord, ...]
    coverage: NonNegativeFloat

    @validator("records")
    def sorted_and_distinct(cls, records):
        """Table order is the candidate set order"""
        keys = [(record.gmin_sq, record.ecv.order_key) for record in records]
        if keys != sorted(keys):
            raise ValueError("g_min table rows are not sorted")
        ecvs = {record.ecv for record in records}
        if len(ecvs) != len(records):
            raise ValueError("g_min table contains a duplicate ECV")
        return records

    @root_validator(skip_on_failure=True)
    def covered(cls, values):
        """No row beyond the coverage"""
        coverage = values["coverage"]
        for record in values["records"]:
            if record.gmin_sq > coverage * (1 + 1e-9):
                raise ValueError(f"{record.ecv} has g_min^2 "
                                 f"{record.gmin_sq} > coverage {coverage}")
        return values

    def __len__(self):
        return len(self.records)

    def ecvs(self) -> Tuple[Ecv, ...]:
        return tuple(record.ecv for record in self.records)

    def lookup(self) -> Dict[Tuple[int, int], float]:
        """Map of (a1, a2) to gmin_sq"""
        return {record.ecv.as_tuple(): record.gmin_sq
                for record in self.records}

    def gmin_sq_of(self, ecv: Ecv) -> float:
        """gmin_sq of an ECV, sign pattern ignored; inf if not tabulated.

        Reflecting g maps the optimum regions of (a1, -a2) onto those of
        (a1, a2), so both share one g_min.
        """
        key = (abs(ecv.a1), abs(ecv.a2))
        return self.lookup().get(key, math.inf)

    def to_csv(self, path: Union[str, Path], header: Optional[Dict] = None):
        """Write k,a1,a2,gmin_sq rows preceded by commented settings."""
        settings = {"coverage": self.coverage}
        settings.update(header or {})
        rows = [(index, record.ecv.a1, record.ecv.a2, f"{record.gmin_sq:.6f}")
                for index, record in enumerate(self.records, start=1)]
        atomic_write_csv(path, ("k", "a1", "a2", "gmin_sq"), rows, settings)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "GminTable":
        """Read a table written by to_csv."""
        coverage = None
        rows = []
        with open(path, encoding="utf-8") as csv_file:
            data_lines = []
            for line in csv_file:
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    if key == "coverage":
                        coverage = float(value)
                else:
                    data_lines.append(line)
        for row in csv.DictReader(data_lines):
            rows.append(GminRecord(ecv=Ecv.of(row["a1"], row["a2"]),
                                   gmin_sq=float(row["gmin_sq"])))
        if coverage is None:
            coverage = max((row.gmin_sq for row in rows), default=0.0)
        return cls(records=tuple(rows), coverage=coverage)


class CandidateSet(Frozen):
    """Ordered ECV list of CMF(K), starting with (1,0), (0,1)"""
    ecvs: Tuple[Ecv, ...]

    @validator("ecvs")
    def well_formed(cls, ecvs):
        """K >= 2, canonical, distinct, unit vectors first"""
        if len(ecvs) < 2:
            raise ValueError(f"CMF(K) needs K >= 2, got {len(ecvs)}")
        for ecv in ecvs:
            if not ecv.is_canonical:
                raise ValueError(f"{ecv} is not canonical")
        if len(set(ecvs)) != len(ecvs):
            raise ValueError("candidate set contains a duplicate ECV")
        if ecvs[0].as_tuple() != (1, 0) or ecvs[1].as_tuple() != (0, 1):
            raise ValueError("candidate set must start with (1,0), (0,1)")
        return ecvs

    @classmethod
    def of(cls, *pairs):
        """CandidateSet.of((1, 0), (0, 1), (1, 1))"""
        return cls(ecvs=tuple(Ecv.of(a1, a2) for a1, a2 in pairs))

    @property
    def k(self) -> int:
        return len(self.ecvs)

    def as_array(self) -> np.ndarray:
        return np.array([ecv.as_tuple() for ecv in self.ecvs], dtype=np.int64)

    def index(self, ecv: Ecv) -> int:
        """0-based position of an ECV"""
        return self.ecvs.index(ecv)


class SelectionProfile(Frozen):
    """Per candidate selection and conditional outage probabilities.

    Sequences are indexed like the candidate set.
    """
    candidates: CandidateSet
    target_rate: NonNegativeFloat
    probabilities: Tuple[float, ...]
    joint_outage: Tuple[float, ...]
    conditional_outage: Tuple[Probability, ...]
    degenerate: Tuple[bool, ...]
    abserr: NonNegativeFloat

    @root_validator(skip_on_failure=True)
    def aligned(cls, values):
        """One entry per candidate"""
        k = values["candidates"].k
        for name in ("probabilities", "joint_outage", "conditional_outage",
                     "degenerate"):
            if len(values[name]) != k:
                raise ValueError(f"{name} has {len(values[name])} entries, "
                                 f"expected {k}")
        return values

    def selection_probability(self, k: int) -> float:
        """P_k^Sel, k is 0-based"""
        return self.probabilities[k]

    def outage_given_selected(self, k: int) -> float:
        """P_Out|e_k, k is 0-based"""
        return self.conditional_outage[k]


class OutageReport(Frozen):
    """Analytic outage of CMF(K) with M relays"""
    m_relays: int
    k: int
    powers: SourcePowers
    target_rate: NonNegativeFloat
    relay_outage: Probability
    rank_failure: Probability
    system_outage: Probability
    outage_given_no_failure: Probability

    @root_validator(skip_on_failure=True)
    def failure_below_outage(cls, values):
        """Rank failure is one way of being in outage"""
        if values["rank_failure"] > values["system_outage"] + 1e-9:
            raise ValueError("rank failure exceeds system outage")
        return values


class SearchSpaceCounts(Frozen):
    """Candidates left after each pruning stage"""
    sum_snr: NonNegativeFloat
    lemma1: int
    lemma12: int
    lemma123: int
    lemma1234: Optional[int] = None
