"""Experiments behind the command line commands.

Each command writes one CSV file. The file starts with commented lines
echoing the resolved experiment, followed by a column header and the rows.
"""
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List

import numpy as np

from . import __application__, __version__
from .analysis import FadingModel, selection_profile, system_outage
from .search import (
    build_gmin_table,
    cached_gmin_table,
    candidate_set,
    search_space_counts,
    solve_simplified_batch,
)
from .simulator import MonteCarloRunner, SolverContext
from .structures.experiment_classes import (
    Command,
    ExperimentSpec,
    MonteCarloResult,
    StrategyKind,
)
from .structures.model_classes import (
    Ecv,
    GminTable,
    ScaledChannel,
    SourcePowers,
)
from .util import atomic_write_csv, fmt_float

log = logging.getLogger(__name__)

# settings that must not change the output bytes
NOT_ECHOED = ("workers", "out")

# direction of g used for the search space counts, (6, 8) at |g|^2 = 100
SEARCH_DIRECTION = (0.6, 0.8)


def header_settings(spec: ExperimentSpec) -> Dict[str, str]:
    """Resolved experiment as key=value strings"""
    settings = {"version": f"{__application__} {__version__}"}
    for key, value in spec.dict().items():
        if key in NOT_ECHOED:
            continue
        if isinstance(value, Enum):
            value = value.value
        elif isinstance(value, (tuple, list)):
            value = " ".join(str(item) for item in value)
        settings[key] = str(value)
    return settings


def _write(spec: ExperimentSpec, columns: List[str],
           rows: List[List[str]]) -> int:
    atomic_write_csv(spec.out, columns, rows, header_settings(spec))
    log.info("%d rows written to %s", len(rows), spec.out)
    return len(rows)


def load_table(spec: ExperimentSpec) -> GminTable:
    """Table from `table_path` when it exists, computed otherwise"""
    if spec.table_path and Path(spec.table_path).exists():
        log.info("Loading g_min table %s", spec.table_path)
        return GminTable.from_csv(spec.table_path)
    return cached_gmin_table(spec.table_cap, spec.directions)


def _powers(spec: ExperimentSpec, snr_db: float) -> SourcePowers:
    return SourcePowers.from_db(snr_db, spec.p2_offset_db)


def _log_progress(sender, block, blocks, trials_done):
    step = max(1, blocks // 10)
    if (block + 1) % step == 0 or block + 1 == blocks:
        log.info("%s: block %d/%d, %d trials", sender.cfg.label, block + 1,
                 blocks, trials_done)


def simulate(spec: ExperimentSpec, powers: SourcePowers, m_relays: int,
             strategy: StrategyKind, k, table: GminTable,
             cee_sigma_sq: float = 0.0) -> MonteCarloResult:
    """Monte Carlo of one grid point with progress logging"""
    cfg = spec.sim_config(powers, m_relays, strategy, k, cee_sigma_sq)
    runner = MonteCarloRunner(cfg, SolverContext.for_config(cfg, table))
    runner.block_done_signal.connect(_log_progress)
    return runner.run()


def cmd_gmin_table(spec: ExperimentSpec) -> int:
    """g_min table up to spec.table_cap"""
    table = build_gmin_table(spec.table_cap, spec.directions, spec.workers)
    settings = header_settings(spec)
    table.to_csv(spec.out, header=settings)
    print(f"{len(table)} rows written to {spec.out}")
    return len(table)


def cmd_selection_prob(spec: ExperimentSpec) -> int:
    """Selection probabilities versus SNR.

    CMF(K) probabilities come from the analysis, the optimum's from the
    Monte Carlo histogram of the first relay count.
    """
    table = load_table(spec)
    rows = []
    for snr_db in spec.snr_grid:
        powers = _powers(spec, snr_db)
        fading = FadingModel(powers=powers)
        for strategy, k in spec.strategies():
            if strategy is StrategyKind.SIMPLIFIED:
                s = candidate_set(table, k)
                profile = selection_profile(s, fading, spec.target_rate,
                                            spec.epsabs, spec.tail_mass)
                for ecv, prob in zip(s.ecvs, profile.probabilities):
                    rows.append([fmt_float(snr_db), f"cmf{k}", "analytic",
                                 str(ecv.a1), str(ecv.a2), fmt_float(prob),
                                 ""])
                continue
            result = simulate(spec, powers, spec.relays[0], strategy, k,
                              table)
            ecvs = sorted((Ecv.of(*pair) for pair in result.histogram),
                          key=lambda ecv: ecv.order_key)
            for ecv in ecvs:
                estimate = result.selection_probability(ecv)
                rows.append([fmt_float(snr_db), "optimal", "simulated",
                             str(ecv.a1), str(ecv.a2),
                             fmt_float(estimate.value),
                             fmt_float(estimate.std_error)])
    return _write(spec, ["snr_db", "strategy", "method", "a1", "a2",
                         "probability", "se"], rows)


OUTAGE_COLUMNS = [
    "snr_db", "strategy", "m_relays", "sigma_e_sq", "analytic_outage",
    "analytic_rank_failure", "analytic_relay_outage", "outage", "outage_se",
    "rank_failure", "rank_failure_se", "relay_outage", "relay_outage_se",
    "trials"
]


def _outage_rows(spec: ExperimentSpec, cee_vars) -> List[List[str]]:
    table = load_table(spec)
    rows = []
    for snr_db in spec.snr_grid:
        powers = _powers(spec, snr_db)
        fading = FadingModel(powers=powers)
        for strategy, k in spec.strategies():
            for m_relays in spec.relays:
                for sigma_sq in cee_vars:
                    analytic = ["", "", ""]
                    if strategy is StrategyKind.SIMPLIFIED and sigma_sq == 0:
                        report = system_outage(
                            candidate_set(table, k), fading, m_relays,
                            spec.target_rate, spec.composition_cap,
                            epsabs=spec.epsabs, tail_mass=spec.tail_mass)
                        analytic = [fmt_float(report.system_outage),
                                    fmt_float(report.rank_failure),
                                    fmt_float(report.relay_outage)]
                    result = simulate(spec, powers, m_relays, strategy, k,
                                      table, sigma_sq)
                    label = "optimal" if k is None else f"cmf{k}"
                    rows.append([
                        fmt_float(snr_db), label, str(m_relays),
                        fmt_float(sigma_sq), *analytic,
                        fmt_float(result.outage.value),
                        fmt_float(result.outage.std_error),
                        fmt_float(result.rank_failure.value),
                        fmt_float(result.rank_failure.std_error),
                        fmt_float(result.relay_outage.value),
                        fmt_float(result.relay_outage.std_error),
                        str(result.outage.trials)])
    return rows


def cmd_outage(spec: ExperimentSpec) -> int:
    """System outage, rank failure and relay outage versus SNR"""
    return _write(spec, OUTAGE_COLUMNS, _outage_rows(spec, (0.0, )))


def cmd_cee(spec: ExperimentSpec) -> int:
    """cmd_outage swept over channel estimation error variances"""
    return _write(spec, OUTAGE_COLUMNS, _outage_rows(spec, spec.cee_vars))


def cmd_regions(spec: ExperimentSpec) -> int:
    """Index of the CMF(K) winner on a (g1, g2) grid"""
    table = load_table(spec)
    count = int(math.floor(spec.grid_max / spec.grid_step + 1e-9)) + 1
    axis = np.round(np.arange(count) * spec.grid_step, 10)
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    channels = np.stack((g1.ravel(), g2.ravel()), axis=-1)
    rows = []
    for k in spec.ks:
        s = candidate_set(table, k)
        index, _ = solve_simplified_batch(channels, s)
        for (x, y), winner in zip(channels.tolist(), index.tolist()):
            ecv = s.ecvs[winner]
            rows.append([str(k), fmt_float(x), fmt_float(y), str(winner),
                         str(ecv.a1), str(ecv.a2)])
    return _write(spec, ["k", "g1", "g2", "index", "a1", "a2"], rows)


def cmd_search_space(spec: ExperimentSpec) -> int:
    """Search space left after each pruning stage"""
    table = load_table(spec)
    rows = []
    for sum_snr in spec.sum_snrs:
        radius = math.sqrt(sum_snr)
        g = ScaledChannel(g1=SEARCH_DIRECTION[0] * radius,
                          g2=SEARCH_DIRECTION[1] * radius)
        counts = search_space_counts(g, table)
        rows.append([fmt_float(sum_snr), str(counts.lemma1),
                     str(counts.lemma12), str(counts.lemma123),
                     "" if counts.lemma1234 is None
                     else str(counts.lemma1234)])
    return _write(spec, ["sum_snr", "lemma1", "lemma12", "lemma123",
                         "lemma1234"], rows)


COMMANDS: Dict[Command, Callable[[ExperimentSpec], int]] = {
    Command.GMIN_TABLE: cmd_gmin_table,
    Command.SELECTION_PROB: cmd_selection_prob,
    Command.OUTAGE: cmd_outage,
    Command.CEE: cmd_cee,
    Command.REGIONS: cmd_regions,
    Command.SEARCH_SPACE: cmd_search_space,
}


def run_command(spec: ExperimentSpec) -> int:
    """Run the experiment of `spec`, returns the number of rows written"""
    log.info("Running %s", spec.command.value)
    return COMMANDS[spec.command](spec)
