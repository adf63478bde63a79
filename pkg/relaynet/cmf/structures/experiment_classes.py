"""
Contains the models describing simulation runs, their results and the
experiments the command line front end executes.
"""
import math
from enum import Enum
from typing import Dict, Optional, Tuple

from pydantic import conint, root_validator, validator

from ..const import (
    BLOCK_SIZE,
    COMPOSITION_CAP,
    QUAD_EPSABS,
    TABLE_CAP,
    TAIL_MASS,
    TARGET_RATE,
)
from .model_classes import (
    Ecv,
    Frozen,
    NonNegativeFloat,
    Probability,
    RelayDecision,
    SourcePowers,
)

# pylint: disable=no-self-argument


class StrategyKind(Enum):
    """ECV selection strategy enum"""
    OPTIMAL = "optimal"
    SIMPLIFIED = "simplified"


class Command(Enum):
    """Experiment enum, values are the command line names"""
    GMIN_TABLE = "gmin-table"
    SELECTION_PROB = "selection-prob"
    OUTAGE = "outage"
    CEE = "cee"
    REGIONS = "regions"
    SEARCH_SPACE = "search-space"


class SimConfig(Frozen):
    """One Monte Carlo point"""
    powers: SourcePowers
    m_relays: conint(ge=2)
    strategy: StrategyKind
    k: Optional[conint(ge=2)] = None
    target_rate: NonNegativeFloat = TARGET_RATE
    trials: conint(ge=1)
    seed: conint(ge=0)
    cee_sigma_sq: NonNegativeFloat = 0.0
    block_size: conint(ge=1) = BLOCK_SIZE
    workers: conint(ge=1) = 1

    @root_validator(skip_on_failure=True)
    def strategy_needs_k(cls, values):
        """CMF(K) needs K, the optimum must not get one"""
        if values["strategy"] is StrategyKind.SIMPLIFIED:
            if values.get("k") is None:
                raise ValueError("simplified strategy needs k")
        elif values.get("k") is not None:
            raise ValueError("optimal strategy takes no k")
        return values

    @property
    def label(self) -> str:
        if self.strategy is StrategyKind.OPTIMAL:
            return "optimal"
        return f"cmf{self.k}"

    @property
    def n_blocks(self) -> int:
        return math.ceil(self.trials / self.block_size)

    def block_trials(self, block: int) -> int:
        """Number of trials in block `block`"""
        return min(self.block_size, self.trials - block * self.block_size)


class TrialOutcome(Frozen):
    """Result of one network realisation"""
    outage: bool
    rank_failure: bool
    decisions: Tuple[RelayDecision, ...]

    @root_validator(skip_on_failure=True)
    def failure_is_outage(cls, values):
        """A rank failure is always an outage"""
        if values["rank_failure"] and not values["outage"]:
            raise ValueError("rank failure without outage")
        return values


class OutageEstimate(Frozen):
    """Empirical probability with its binomial standard error"""
    value: Probability
    std_error: NonNegativeFloat
    count: conint(ge=0)
    trials: conint(ge=1)

    @classmethod
    def from_counts(cls, count: int, trials: int) -> "OutageEstimate":
        value = count / trials
        return cls(value=value,
                   std_error=math.sqrt(value * (1 - value) / trials),
                   count=count,
                   trials=trials)


class MonteCarloResult(Frozen):
    """Aggregated Monte Carlo counters of one SimConfig"""
    config: SimConfig
    outage: OutageEstimate
    rank_failure: OutageEstimate
    relay_outage: OutageEstimate
    histogram: Dict[Tuple[int, int], int]

    def selection_probability(self, ecv: Ecv) -> OutageEstimate:
        """Share of relay decisions that picked `ecv`"""
        total = self.config.trials * self.config.m_relays
        return OutageEstimate.from_counts(
            self.histogram.get(ecv.as_tuple(), 0), total)


class ExperimentSpec(Frozen):
    """Fully resolved command line request"""
    command: Command
    snr_start: float = 0.0
    snr_stop: float = 20.0
    snr_step: float = 2.0
    p2_offset_db: float = 0.0
    relays: Tuple[conint(ge=2), ...] = (2,)
    ks: Tuple[conint(ge=2), ...] = ()
    optimal: bool = False
    target_rate: NonNegativeFloat = TARGET_RATE
    trials: conint(ge=1) = 1
    seed: conint(ge=0) = 0
    block_size: conint(ge=1) = BLOCK_SIZE
    workers: conint(ge=1) = 1
    cee_vars: Tuple[NonNegativeFloat, ...] = (0.0,)
    table_cap: NonNegativeFloat = TABLE_CAP
    table_path: str = ""
    directions: conint(ge=16) = 2048
    epsabs: float = QUAD_EPSABS
    tail_mass: float = TAIL_MASS
    composition_cap: conint(ge=1) = COMPOSITION_CAP
    grid_max: float = 10.0
    grid_step: float = 0.1
    sum_snrs: Tuple[NonNegativeFloat, ...] = (100.0, 1000.0)
    out: str

    @validator("snr_step", "grid_step", "grid_max")
    def positive(cls, value):
        """Grid steps and extents are > 0"""
        if not value > 0:
            raise ValueError(f"must be > 0, got {value}")
        return value

    @root_validator(skip_on_failure=True)
    def consistent(cls, values):
        """The SNR grid is not empty and strategies are named"""
        if values["snr_stop"] < values["snr_start"]:
            raise ValueError("snr stop lies below snr start")
        needs_strategy = (Command.SELECTION_PROB, Command.OUTAGE,
                          Command.CEE)
        if values["command"] in needs_strategy:
            if not values["ks"] and not values["optimal"]:
                raise ValueError(f"{values['command'].value} needs --k "
                                 f"or --optimal")
        if values["command"] is Command.REGIONS and not values["ks"]:
            raise ValueError("regions needs --k")
        return values

    @property
    def snr_grid(self) -> Tuple[float, ...]:
        """snr_start, snr_start + step, ... up to snr_stop inclusive"""
        count = int(math.floor(
            (self.snr_stop - self.snr_start) / self.snr_step + 1e-9)) + 1
        return tuple(round(self.snr_start + i * self.snr_step, 10)
                     for i in range(count))

    def strategies(self):
        """(StrategyKind, k) pairs to evaluate, CMF(K) first"""
        pairs = [(StrategyKind.SIMPLIFIED, k) for k in self.ks]
        if self.optimal:
            pairs.append((StrategyKind.OPTIMAL, None))
        return pairs

    def sim_config(self, powers: SourcePowers, m_relays: int,
                   strategy: StrategyKind, k: Optional[int],
                   cee_sigma_sq: float = 0.0) -> SimConfig:
        return SimConfig(powers=powers,
                         m_relays=m_relays,
                         strategy=strategy,
                         k=k,
                         target_rate=self.target_rate,
                         trials=self.trials,
                         seed=self.seed,
                         cee_sigma_sq=cee_sigma_sq,
                         block_size=self.block_size,
                         workers=self.workers)


class BlockCounts(Frozen):
    """Integer counters of one block of trials"""
    trials: conint(ge=0)
    relays: conint(ge=0)
    outage: conint(ge=0)
    rank_failure: conint(ge=0)
    relay_outage: conint(ge=0)
    histogram: Dict[Tuple[int, int], int]
