"""Seeded Monte Carlo simulation of the two source, M relay network.

Every relay sees gains h = |gamma| with gamma circularly symmetric complex
normal of unit variance. With channel estimation error the relay selects its
ECV from |gamma + sigma_e e| while its rate is realised on the true channel.
The destination keeps the two independent equations with the highest rates
and is in outage when the weaker of them is below the target rate, or when
no two independent equations exist (rank failure).

Trials run in blocks of `block_size`. Block b draws from
SeedSequence(seed, spawn_key=(b,)), so estimates depend only on the
configuration, never on the number of worker threads.
"""
import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from itertools import combinations
from typing import Iterable, List, Optional, Tuple

import numpy as np
from blinker import Signal

from .analysis import FadingModel
from .const import TABLE_CAP, TABLE_TAIL_MASS
from .rate import (
    canonicalize,
    computation_rate,
    paired_quad_forms,
    rates_from_quad_forms,
)
from .search import (
    cached_gmin_table,
    candidate_set,
    solve_optimal,
    solve_optimal_batch,
    solve_simplified,
    solve_simplified_batch,
)
from .structures.experiment_classes import (
    BlockCounts,
    MonteCarloResult,
    OutageEstimate,
    SimConfig,
    StrategyKind,
    TrialOutcome,
)
from .structures.model_classes import (
    CandidateSet,
    ChannelVector,
    GminTable,
    RelayDecision,
    ScaledChannel,
    SourcePowers,
)

log = logging.getLogger(__name__)


def table_cap_for(powers: SourcePowers, cee_sigma_sq: float = 0.0) -> float:
    """g_min table size covering all but 1e-9 of the estimated |g|^2"""
    inflated = SourcePowers(p1=powers.p1 * (1 + cee_sigma_sq),
                            p2=powers.p2 * (1 + cee_sigma_sq))
    quantile = FadingModel(powers=inflated).sum_snr_quantile(
        1 - TABLE_TAIL_MASS)
    # round up so neighbouring SNR points share one cached table
    return max(TABLE_CAP, 100.0 * math.ceil(quantile / 100.0))


class SolverContext:
    """Strategy state shared by every trial of one configuration"""

    def __init__(self, strategy: StrategyKind,
                 candidates: Optional[CandidateSet] = None,
                 table: Optional[GminTable] = None):
        if strategy is StrategyKind.SIMPLIFIED and candidates is None:
            raise ValueError("CMF(K) needs a candidate set")
        if strategy is StrategyKind.OPTIMAL and table is None:
            raise ValueError("the optimum needs a g_min table")
        self.strategy = strategy
        self.candidates = candidates
        self.table = table

    @classmethod
    def for_config(cls, cfg: SimConfig,
                   table: Optional[GminTable] = None) -> "SolverContext":
        """Candidate set or a large enough g_min table for `cfg`"""
        if cfg.strategy is StrategyKind.SIMPLIFIED:
            if table is None:
                table = cached_gmin_table(TABLE_CAP)
            return cls(cfg.strategy, candidates=candidate_set(table, cfg.k))
        needed = table_cap_for(cfg.powers, cfg.cee_sigma_sq)
        if table is None or table.coverage < needed:
            log.debug("Building g_min table up to %.6g", needed)
            table = cached_gmin_table(needed)
        return cls(cfg.strategy, table=table)

    def select(self, g: np.ndarray) -> np.ndarray:
        """Canonical ECVs (..., 2) chosen for channels (..., 2)"""
        if self.strategy is StrategyKind.SIMPLIFIED:
            index, _ = solve_simplified_batch(g, self.candidates)
            return self.candidates.as_array()[index]
        ecvs, _ = solve_optimal_batch(g, self.table)
        return ecvs

    def decide(self, g: ScaledChannel) -> RelayDecision:
        """Scalar counterpart of select"""
        if self.strategy is StrategyKind.SIMPLIFIED:
            return solve_simplified(g, self.candidates)
        return solve_optimal(g, self.table)


def draw_channels(rng: np.random.Generator, m_relays: int,
                  trials: int = 1) -> np.ndarray:
    """gamma of shape (trials, m_relays, 2), unit variance complex normal"""
    shape = (trials, m_relays, 2)
    return (rng.standard_normal(shape) +
            1j * rng.standard_normal(shape)) * math.sqrt(0.5)


def channel_vectors(gains: np.ndarray) -> List[ChannelVector]:
    """ChannelVector per relay from gains (m_relays, 2)"""
    return [ChannelVector(h1=h1, h2=h2) for h1, h2 in gains.tolist()]


def apply_cee(rng: np.random.Generator, gamma: np.ndarray,
              sigma_sq: float) -> np.ndarray:
    """Estimated gains |gamma + sigma_e e|, plain |gamma| for sigma_sq = 0"""
    if sigma_sq < 0:
        raise ValueError(f"CEE variance must be >= 0, got {sigma_sq}")
    if sigma_sq == 0:
        return np.abs(gamma)
    noise = (rng.standard_normal(gamma.shape) +
             1j * rng.standard_normal(gamma.shape)) * math.sqrt(0.5)
    return np.abs(gamma + math.sqrt(sigma_sq) * noise)


def destination_outage(decisions: Iterable[RelayDecision],
                       target_rate: float) -> Tuple[bool, bool]:
    """(outage, rank_failure) of the received equations.

    Equations are grouped by canonical ECV, two groups are always
    independent. The destination uses the best equation of the two best
    groups.
    """
    best = defaultdict(float)
    for decision in decisions:
        key = canonicalize(decision.ecv)
        best[key] = max(best[key], decision.rate)
    if len(best) < 2:
        return True, True
    second = sorted(best.values(), reverse=True)[1]
    return second < target_rate, False


def destination_outage_batch(ecvs: np.ndarray, rates: np.ndarray,
                             target_rate: float
                             ) -> Tuple[np.ndarray, np.ndarray]:
    """destination_outage for canonical ECVs (n, M, 2) and rates (n, M)"""
    best = np.full(rates.shape[0], -np.inf)
    for first, second in combinations(range(rates.shape[1]), 2):
        distinct = np.any(ecvs[:, first] != ecvs[:, second], axis=-1)
        pair = np.minimum(rates[:, first], rates[:, second])
        best = np.where(distinct, np.maximum(best, pair), best)
    rank_failure = np.isneginf(best)
    return rank_failure | (best < target_rate), rank_failure


def _scaled(gains: np.ndarray, powers: SourcePowers) -> np.ndarray:
    return gains * np.sqrt(powers.as_array())


def simulate_trial(rng: np.random.Generator, cfg: SimConfig,
                   ctx: SolverContext) -> TrialOutcome:
    """One network realisation, relay by relay.

    Consumes the generator exactly like a block of one trial.
    """
    gamma = draw_channels(rng, cfg.m_relays)
    true_g = _scaled(np.abs(gamma[0]), cfg.powers)
    estimated_g = _scaled(apply_cee(rng, gamma, cfg.cee_sigma_sq)[0],
                          cfg.powers)
    decisions = []
    for (g1, g2), (e1, e2) in zip(true_g.tolist(), estimated_g.tolist()):
        ecv = ctx.decide(ScaledChannel(g1=e1, g2=e2)).ecv
        rate = computation_rate(ScaledChannel(g1=g1, g2=g2), ecv)
        decisions.append(RelayDecision(ecv=ecv, rate=rate))
    outage, rank_failure = destination_outage(decisions, cfg.target_rate)
    return TrialOutcome(outage=outage, rank_failure=rank_failure,
                        decisions=tuple(decisions))


def simulate_block(rng: np.random.Generator, cfg: SimConfig,
                   ctx: SolverContext, trials: int) -> BlockCounts:
    """`trials` realisations at once, reduced to counters"""
    gamma = draw_channels(rng, cfg.m_relays, trials)
    true_g = _scaled(np.abs(gamma), cfg.powers)
    estimated_g = _scaled(apply_cee(rng, gamma, cfg.cee_sigma_sq),
                          cfg.powers)
    ecvs = ctx.select(estimated_g)
    rates = rates_from_quad_forms(paired_quad_forms(ecvs, true_g))
    outage, rank_failure = destination_outage_batch(ecvs, rates,
                                                    cfg.target_rate)
    selected, counts = np.unique(ecvs.reshape(-1, 2), axis=0,
                                 return_counts=True)
    histogram = {(int(a1), int(a2)): int(count)
                 for (a1, a2), count in zip(selected.tolist(),
                                            counts.tolist())}
    return BlockCounts(trials=trials,
                       relays=trials * cfg.m_relays,
                       outage=int(np.count_nonzero(outage)),
                       rank_failure=int(np.count_nonzero(rank_failure)),
                       relay_outage=int(np.count_nonzero(
                           rates < cfg.target_rate)),
                       histogram=histogram)


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent stream of block `block`"""
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(block, )))


class MonteCarloRunner:
    """Runs the blocks of one configuration and aggregates them"""

    def __init__(self, cfg: SimConfig, ctx: Optional[SolverContext] = None):
        self.cfg = cfg
        self.ctx = ctx if ctx is not None else SolverContext.for_config(cfg)
        # kwargs: block: int, blocks: int, trials_done: int
        self.block_done_signal = Signal()

    def run_block(self, block: int) -> BlockCounts:
        return simulate_block(block_rng(self.cfg.seed, block), self.cfg,
                              self.ctx, self.cfg.block_trials(block))

    def run(self) -> MonteCarloResult:
        cfg = self.cfg
        blocks = range(cfg.n_blocks)
        log.info("Simulating %s M=%d P=(%.4g, %.4g) sigma_e^2=%g: %d "
                 "trials in %d block(s)", cfg.label, cfg.m_relays,
                 cfg.powers.p1, cfg.powers.p2, cfg.cee_sigma_sq, cfg.trials,
                 cfg.n_blocks)
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers,
                                    thread_name_prefix="mc") as executor:
                return self._aggregate(executor.map(self.run_block, blocks))
        return self._aggregate(map(self.run_block, blocks))

    def _aggregate(self, results: Iterable[BlockCounts]) -> MonteCarloResult:
        outage = rank_failure = relay_outage = done = relays = 0
        histogram = defaultdict(int)
        for block, counts in enumerate(results):
            outage += counts.outage
            rank_failure += counts.rank_failure
            relay_outage += counts.relay_outage
            relays += counts.relays
            done += counts.trials
            for ecv, count in counts.histogram.items():
                histogram[ecv] += count
            self.block_done_signal.send(self, block=block,
                                        blocks=self.cfg.n_blocks,
                                        trials_done=done)
        return MonteCarloResult(
            config=self.cfg,
            outage=OutageEstimate.from_counts(outage, done),
            rank_failure=OutageEstimate.from_counts(rank_failure, done),
            relay_outage=OutageEstimate.from_counts(relay_outage, relays),
            histogram=dict(sorted(histogram.items())))


def run_monte_carlo(cfg: SimConfig,
                    ctx: Optional[SolverContext] = None) -> MonteCarloResult:
    """Outage, rank failure and selection histogram of `cfg`"""
    return MonteCarloRunner(cfg, ctx).run()
