"""Tests of the Monte Carlo simulator"""
import math
from itertools import product

import numpy as np
import pytest
from pydantic import ValidationError

from relaynet.cmf.analysis import (  # type:ignore
    FadingModel,
    selection_profile,
    system_outage,
)
from relaynet.cmf.rate import computation_rate  # type:ignore
from relaynet.cmf.search import build_gmin_table, solve_optimal  # type:ignore
from relaynet.cmf.simulator import (  # type:ignore
    MonteCarloRunner,
    SolverContext,
    apply_cee,
    block_rng,
    destination_outage,
    destination_outage_batch,
    draw_channels,
    run_monte_carlo,
    simulate_block,
    simulate_trial,
    table_cap_for,
)
from relaynet.cmf.structures.experiment_classes import (  # type:ignore
    SimConfig,
    StrategyKind,
)
from relaynet.cmf.structures.model_classes import (  # type:ignore
    CandidateSet,
    Ecv,
    RelayDecision,
    ScaledChannel,
    SourcePowers,
)
from tests.util import within_se

# pylint: disable=redefined-outer-name

S3 = CandidateSet.of((1, 0), (0, 1), (1, 1))
S5 = CandidateSet.of((1, 0), (0, 1), (1, 1), (2, 1), (1, 2))


@pytest.fixture(scope="module")
def table():
    """g_min table with the default coverage"""
    return build_gmin_table(2200)


def cmf_config(**kwargs):
    """CMF(3) with two relays at 10 dB unless overridden"""
    values = {
        "powers": SourcePowers.from_db(10),
        "m_relays": 2,
        "strategy": StrategyKind.SIMPLIFIED,
        "k": 3,
        "trials": 4000,
        "seed": 17,
        "block_size": 1000,
    }
    values.update(kwargs)
    return SimConfig(**values)


def decision(a1, a2, rate):
    """RelayDecision shorthand"""
    return RelayDecision(ecv=Ecv.of(a1, a2), rate=rate)


def test_destination_rule():
    """Two best independent equations, the weaker one counts"""
    assert destination_outage([decision(1, 0, 0.8), decision(1, 0, 0.9)],
                              0.5) == (True, True)
    assert destination_outage([decision(1, 0, 0.8), decision(0, 1, 0.6)],
                              0.5) == (False, False)
    assert destination_outage([decision(1, 0, 0.8), decision(0, 1, 0.3),
                               decision(0, 1, 0.4)], 0.5) == (True, False)
    assert destination_outage([decision(1, 0, 0.1), decision(0, 1, 0.9),
                               decision(1, 1, 0.7)], 0.5) == (False, False)
    # multiples describe the same equation
    assert destination_outage([decision(1, 1, 0.8), decision(2, 2, 0.9)],
                              0.5) == (True, True)


def test_destination_rule_batch():
    """Vectorized rule agrees with the per trial one"""
    rng = np.random.default_rng(3)
    pool = np.array([(1, 0), (0, 1), (1, 1), (2, 1)])
    ecvs = pool[rng.integers(0, len(pool), (500, 3))]
    rates = rng.uniform(0, 1.5, (500, 3))
    outage, rank_failure = destination_outage_batch(ecvs, rates, 0.5)
    for row in range(500):
        decisions = [decision(a1, a2, rate) for (a1, a2), rate in
                     zip(ecvs[row].tolist(), rates[row].tolist())]
        assert destination_outage(decisions, 0.5) == \
            (bool(outage[row]), bool(rank_failure[row]))


def test_channel_statistics():
    """|gamma|^2 has unit mean, the components are independent"""
    gamma = draw_channels(np.random.default_rng(1), 4, 50_000)
    assert gamma.shape == (50_000, 4, 2)
    power = np.abs(gamma) ** 2
    assert power.mean() == pytest.approx(1, abs=0.01)
    assert np.corrcoef(power[:, 0, 0], power[:, 0, 1])[0, 1] == \
        pytest.approx(0, abs=0.02)


def test_cee():
    """No estimation error means no extra draws and exact gains"""
    gamma = draw_channels(np.random.default_rng(2), 2, 10)
    rng = np.random.default_rng(9)
    state = rng.bit_generator.state
    assert np.array_equal(apply_cee(rng, gamma, 0.0), np.abs(gamma))
    assert rng.bit_generator.state == state

    noisy = apply_cee(rng, gamma, 0.1)
    assert noisy.shape == gamma.shape
    assert not np.array_equal(noisy, np.abs(gamma))
    with pytest.raises(ValueError):
        apply_cee(rng, gamma, -0.1)


def test_cee_power():
    """Estimated gains have mean power 1 + sigma_e^2"""
    rng = np.random.default_rng(4)
    gamma = draw_channels(rng, 2, 50_000)
    estimated = apply_cee(rng, gamma, 0.5)
    assert (estimated ** 2).mean() == pytest.approx(1.5, abs=0.02)


@pytest.mark.parametrize("seed, cee", product((0, 1, 2, 3), (0.0, 0.1)))
def test_trial_matches_block_of_one(seed, cee):
    """simulate_trial is a block of a single trial"""
    cfg = cmf_config(m_relays=4, cee_sigma_sq=cee)
    ctx = SolverContext(StrategyKind.SIMPLIFIED, candidates=S3)
    outcome = simulate_trial(block_rng(seed, 0), cfg, ctx)
    counts = simulate_block(block_rng(seed, 0), cfg, ctx, 1)
    assert counts.trials == 1
    assert counts.outage == int(outcome.outage)
    assert counts.rank_failure == int(outcome.rank_failure)
    assert counts.relay_outage == sum(
        1 for item in outcome.decisions if item.rate < cfg.target_rate)
    histogram = {}
    for item in outcome.decisions:
        key = item.ecv.as_tuple()
        histogram[key] = histogram.get(key, 0) + 1
    assert counts.histogram == histogram


def test_workers_do_not_change_results():
    """Blocks draw from their own streams"""
    ctx = SolverContext(StrategyKind.SIMPLIFIED, candidates=S3)
    single = run_monte_carlo(cmf_config(workers=1), ctx)
    threaded = run_monte_carlo(cmf_config(workers=3), ctx)
    assert single.outage == threaded.outage
    assert single.rank_failure == threaded.rank_failure
    assert single.relay_outage == threaded.relay_outage
    assert single.histogram == threaded.histogram


def test_seed_changes_results():
    """Different seeds draw different channels"""
    ctx = SolverContext(StrategyKind.SIMPLIFIED, candidates=S3)
    first = run_monte_carlo(cmf_config(seed=1), ctx)
    second = run_monte_carlo(cmf_config(seed=2), ctx)
    assert first.histogram != second.histogram


def test_progress_signal():
    """block_done_signal fires once per block"""
    calls = []

    def handler(sender, block, blocks, trials_done):
        calls.append((block, blocks, trials_done))

    cfg = cmf_config(trials=2500)
    runner = MonteCarloRunner(
        cfg, SolverContext(StrategyKind.SIMPLIFIED, candidates=S3))
    runner.block_done_signal.connect(handler)
    result = runner.run()
    assert calls == [(0, 3, 1000), (1, 3, 2000), (2, 3, 2500)]
    assert result.outage.trials == 2500
    assert result.relay_outage.trials == 5000
    assert sum(result.histogram.values()) == 5000


@pytest.mark.parametrize("m_relays", [2, 4])
def test_agrees_with_analysis(m_relays):
    """Simulated CMF(3) outage matches the exact analysis"""
    powers = SourcePowers.from_db(10)
    cfg = cmf_config(powers=powers, m_relays=m_relays, trials=40_000,
                     block_size=8192)
    result = run_monte_carlo(
        cfg, SolverContext(StrategyKind.SIMPLIFIED, candidates=S3))
    report = system_outage(S3, FadingModel(powers=powers), m_relays, 0.5)
    assert within_se(result.outage, report.system_outage)
    assert within_se(result.rank_failure, report.rank_failure)
    assert within_se(result.relay_outage, report.relay_outage)


@pytest.mark.parametrize("snr_db", [4, 12, 20])
def test_selection_histogram(snr_db):
    """Every CMF(5) candidate is picked as often as the analysis predicts"""
    powers = SourcePowers.from_db(snr_db)
    cfg = cmf_config(powers=powers, k=5, trials=20_000, block_size=5000)
    result = run_monte_carlo(
        cfg, SolverContext(StrategyKind.SIMPLIFIED, candidates=S5))
    profile = selection_profile(S5, FadingModel(powers=powers))
    assert sum(result.histogram.values()) == cfg.trials * cfg.m_relays
    for index, ecv in enumerate(S5.ecvs):
        assert within_se(result.selection_probability(ecv),
                         profile.probabilities[index])


def test_optimum_beats_cmf(table):
    """Same channels, the optimum never has a lower relay rate"""
    cmf = run_monte_carlo(
        cmf_config(), SolverContext(StrategyKind.SIMPLIFIED, candidates=S3))
    optimal_cfg = cmf_config(strategy=StrategyKind.OPTIMAL, k=None)
    optimal = run_monte_carlo(
        optimal_cfg, SolverContext(StrategyKind.OPTIMAL, table=table))
    assert optimal.relay_outage.count <= cmf.relay_outage.count
    assert all(Ecv.of(*ecv).is_canonical for ecv in optimal.histogram)


def test_cee_hurts():
    """Decisions taken on noisy estimates lose rate"""
    ctx = SolverContext(StrategyKind.SIMPLIFIED, candidates=S3)
    exact = run_monte_carlo(cmf_config(trials=20_000), ctx)
    noisy = run_monte_carlo(cmf_config(trials=20_000, cee_sigma_sq=0.1),
                            ctx)
    assert noisy.relay_outage.value > exact.relay_outage.value


def test_cee_rate_below_informed_optimum(table):
    """Per relay, a choice made on estimates never beats the optimum on
    the true channel"""
    powers = SourcePowers.from_db(16)
    cfg = cmf_config(powers=powers, m_relays=6, strategy=StrategyKind.OPTIMAL,
                     k=None, cee_sigma_sq=0.1)
    ctx = SolverContext(StrategyKind.OPTIMAL, table=table)
    scale = np.sqrt(powers.as_array())
    losses = 0
    for trial in range(150):
        outcome = simulate_trial(block_rng(3, trial), cfg, ctx)
        # same stream, the true channels are its first draw
        gamma = draw_channels(block_rng(3, trial), cfg.m_relays)[0]
        for decision, (g1, g2) in zip(outcome.decisions,
                                      (np.abs(gamma) * scale).tolist()):
            g = ScaledChannel(g1=g1, g2=g2)
            best = solve_optimal(g, table).rate
            assert decision.rate == pytest.approx(
                computation_rate(g, decision.ecv), abs=1e-12)
            assert decision.rate <= best + 1e-12
            losses += decision.rate < best - 1e-9
    assert losses > 0


def test_solver_context(table):
    """Scalar and vectorized selection agree"""
    ctx = SolverContext.for_config(cmf_config(), table)
    assert ctx.candidates == S3
    channels = np.abs(np.random.default_rng(6).normal(0, 3, (50, 2)))
    selected = ctx.select(channels)
    assert selected.shape == (50, 2)
    for (g1, g2), ecv in zip(channels.tolist(), selected.tolist()):
        assert ctx.decide(ScaledChannel(g1=g1, g2=g2)).ecv.as_tuple() == \
            tuple(ecv)

    with pytest.raises(ValueError):
        SolverContext(StrategyKind.SIMPLIFIED)
    with pytest.raises(ValueError):
        SolverContext(StrategyKind.OPTIMAL)


def test_config_validation():
    """CMF(K) needs K, the optimum must not get one"""
    with pytest.raises(ValidationError):
        cmf_config(k=None)
    with pytest.raises(ValidationError):
        cmf_config(strategy=StrategyKind.OPTIMAL)
    with pytest.raises(ValidationError):
        cmf_config(m_relays=1)
    cfg = cmf_config(trials=2500)
    assert cfg.n_blocks == 3
    assert [cfg.block_trials(block) for block in range(3)] == \
        [1000, 1000, 500]
    assert cfg.label == "cmf3"


def test_table_cap():
    """Simulator tables cover all but a sliver of the estimated |g|^2"""
    assert table_cap_for(SourcePowers.from_db(0)) == 2200
    strong = SourcePowers.from_db(30)
    cap = table_cap_for(strong, 0.1)
    assert cap % 100 == 0
    inflated = FadingModel(powers=SourcePowers(p1=strong.p1 * 1.1,
                                               p2=strong.p2 * 1.1))
    assert inflated.sum_snr_sf(cap) <= 1e-9
    assert math.isfinite(cap)
