"""Tests of the ECV search, the pruning rules and the g_min table"""
import math
from math import gcd

import numpy as np
import pytest

from relaynet.cmf.analysis import FadingModel  # type:ignore
from relaynet.cmf.errors import (  # type:ignore
    InvalidCandidateSet,
    InvalidConfig,
    InvalidEcv,
    TableCoverageError,
)
from relaynet.cmf.rate import quad_form_at  # type:ignore
from relaynet.cmf.search import (  # type:ignore
    build_gmin_table,
    candidate_set,
    enumerate_candidates,
    gmin_sq,
    hermite_norm_bound,
    lemma1_radius,
    recommend_candidate_count,
    search_space_counts,
    solve_optimal,
    solve_optimal_batch,
    solve_simplified,
    solve_simplified_batch,
)
from relaynet.cmf.structures.model_classes import (  # type:ignore
    CandidateSet,
    Ecv,
    GminTable,
    ScaledChannel,
    SourcePowers,
)
from tests.util import brute_force_quads

# pylint: disable=redefined-outer-name

# (a1, a2, g_min^2) in table order
REFERENCE_TABLE = [
    (1, 0, 0.0), (0, 1, 0.0), (1, 1, 2.0), (2, 1, 18.282),
    (1, 2, 18.282), (3, 1, 82.321), (1, 3, 82.321), (3, 2, 130.325),
    (2, 3, 130.325), (4, 1, 256.996), (1, 4, 256.996), (4, 3, 530.330),
    (3, 4, 530.330), (5, 1, 626.000), (1, 5, 626.000), (5, 2, 642.334),
    (2, 5, 642.334), (5, 3, 898.333), (3, 5, 898.333), (6, 1, 1297.001),
    (1, 6, 1297.001), (5, 4, 1521.999), (4, 5, 1521.999), (7, 2, 2130.330),
    (2, 7, 2130.330),
]


@pytest.fixture(scope="module")
def table():
    """g_min table with the default coverage"""
    return build_gmin_table(2200)


def test_reference_table(table):
    """Rows, their order and g_min^2 within half a percent"""
    assert len(table) == len(REFERENCE_TABLE)
    for record, (a1, a2, expected) in zip(table.records, REFERENCE_TABLE):
        assert record.ecv == Ecv.of(a1, a2)
        assert record.gmin_sq == pytest.approx(expected, rel=5e-3, abs=1e-9)


def test_table_cap():
    """Only ECVs reachable below the cap are listed"""
    smaller = build_gmin_table(2100)
    assert len(smaller) == len(REFERENCE_TABLE) - 2
    assert (7, 2) not in smaller.lookup()

    tiny = build_gmin_table(1)
    assert tiny.ecvs() == (Ecv.of(1, 0), Ecv.of(0, 1))


def test_source_swap_symmetry(table):
    """Swapping the components keeps g_min, signs do not matter"""
    for record in table.records:
        swapped = record.ecv.permuted()
        assert gmin_sq(swapped, 2200) == pytest.approx(record.gmin_sq,
                                                       rel=1e-6, abs=1e-9)
    assert table.gmin_sq_of(Ecv.of(2, -1)) == table.gmin_sq_of(Ecv.of(2, 1))
    assert math.isinf(table.gmin_sq_of(Ecv.of(9, 1)))


def test_hermite_bound_holds(table):
    """Tabulated ECVs are no longer than the Hermite bound allows"""
    for record in table.records:
        assert record.ecv.norm_sq <= \
            hermite_norm_bound(record.gmin_sq) * (1 + 1e-9)


def test_gmin_needs_canonical_ecv():
    """Non canonical vectors share the g_min of their canonical form"""
    with pytest.raises(InvalidEcv):
        gmin_sq(Ecv.of(2, 2))
    with pytest.raises(InvalidEcv):
        gmin_sq(Ecv.of(-1, 0))
    assert math.isinf(gmin_sq(Ecv.of(7, 1), 2200))
    assert math.isinf(gmin_sq(Ecv.of(7, 2), 2000))


def test_search_space_counts(table):
    """Candidates left by each pruning stage"""
    counts = search_space_counts(ScaledChannel(g1=6.0, g2=8.0), table)
    assert (counts.lemma1, counts.lemma12, counts.lemma123,
            counts.lemma1234) == (316, 89, 49, 7)

    radius = math.sqrt(1000)
    counts = search_space_counts(
        ScaledChannel(g1=0.6 * radius, g2=0.8 * radius), table)
    assert (counts.lemma1, counts.lemma12, counts.lemma123,
            counts.lemma1234) == (3148, 818, 479, 19)

    beyond = search_space_counts(ScaledChannel(g1=0.0, g2=50.0), table)
    assert beyond.lemma1234 is None


def test_lemma1_radius():
    """1 + |g|^2, and the ball below it"""
    assert lemma1_radius(ScaledChannel(g1=0.0, g2=0.0)) == 1.0
    assert lemma1_radius(ScaledChannel(g1=6.0, g2=8.0)) == 101.0
    g = ScaledChannel(g1=1.0, g2=1.0)
    assert lemma1_radius(g) == 3.0
    ball = enumerate_candidates(g, lemma2=False, lemma3=False)
    assert {ecv.as_tuple() for ecv in ball} == {
        (1, 0), (-1, 0), (0, 1), (0, -1),
        (1, 1), (1, -1), (-1, 1), (-1, -1)}
    assert enumerate_candidates(ScaledChannel(g1=0.0, g2=0.0)) == []


def test_lemma4_switch(table):
    """Lemma 4 needs a table and can be switched off"""
    g = ScaledChannel(g1=6.0, g2=8.0)
    with pytest.raises(InvalidConfig):
        enumerate_candidates(g, lemma4=True)
    assert enumerate_candidates(g, lemma4=False, table=table) == \
        enumerate_candidates(g)
    assert len(enumerate_candidates(g, lemma4=True, table=table)) == 7


def test_pruning_rules(table):
    """Sign pattern of g, gcd 1, and the table bound"""
    g = ScaledChannel(g1=-4.0, g2=7.0)
    candidates = enumerate_candidates(g, table=table)
    assert candidates
    for ecv in candidates:
        assert ecv.a1 <= 0 <= ecv.a2
        assert gcd(ecv.a1, ecv.a2) == 1
        assert ecv.norm_sq < 1 + g.norm_sq
        assert table.gmin_sq_of(ecv) <= g.norm_sq

    on_axis = enumerate_candidates(ScaledChannel(g1=5.0, g2=0.0),
                                   lemma3=False)
    assert all(ecv.a2 == 0 for ecv in on_axis)

    with pytest.raises(TableCoverageError):
        enumerate_candidates(ScaledChannel(g1=60.0, g2=0.0), table=table)


def test_optimum_is_global(table):
    """Pruned search finds the unpruned minimum of a^T G a"""
    rng = np.random.default_rng(2023)
    channels = rng.normal(0.0, math.sqrt(50), (10_000, 2))
    expected = brute_force_quads(channels, 1 + 2200)

    ecvs, rates = solve_optimal_batch(channels, table)
    assert np.allclose(rates, 0.5 * np.maximum(0, -np.log2(expected)),
                       rtol=0, atol=1e-12)

    for (g1, g2), best in zip(channels[:2000].tolist(), expected[:2000]):
        g = ScaledChannel(g1=g1, g2=g2)
        decision = solve_optimal(g, table)
        assert decision.ecv.is_canonical
        assert quad_form_at(decision.ecv, g) == pytest.approx(best,
                                                              rel=1e-12)


def test_solve_optimal_examples(table):
    """A dominant source, and equal gains"""
    assert solve_optimal(ScaledChannel(g1=10.0, g2=0.01), table).ecv == \
        Ecv.of(1, 0)
    decision = solve_optimal(ScaledChannel(g1=5.0, g2=5.0), table)
    assert decision.ecv == Ecv.of(1, 1)
    assert decision.rate == pytest.approx(0.5 * math.log2(51 / 2))


def test_optimum_respects_table(table):
    """The chosen ECV is reachable at the channel's sum SNR"""
    rng = np.random.default_rng(11)
    channels = rng.normal(0.0, 20.0, (3000, 2))
    channels = channels[np.sum(channels ** 2, axis=1) <= 2000]
    for g1, g2 in channels.tolist():
        g = ScaledChannel(g1=g1, g2=g2)
        decision = solve_optimal(g, table)
        assert table.gmin_sq_of(decision.ecv) <= g.norm_sq + 1e-6


def test_batch_matches_scalar(table):
    """solve_optimal_batch picks the ECVs of solve_optimal"""
    rng = np.random.default_rng(7)
    channels = rng.normal(0.0, 5.0, (300, 2))
    ecvs, rates = solve_optimal_batch(channels, table)
    for row, (g1, g2) in enumerate(channels.tolist()):
        decision = solve_optimal(ScaledChannel(g1=g1, g2=g2), table)
        assert tuple(ecvs[row]) == decision.ecv.as_tuple()
        assert rates[row] == pytest.approx(decision.rate, abs=1e-12)


def test_solve_optimal_edge_cases():
    """g = 0 and a channel beyond the table coverage"""
    decision = solve_optimal(ScaledChannel(g1=0.0, g2=0.0))
    assert decision.ecv == Ecv.of(1, 0)
    assert decision.rate == 0.0

    tiny = build_gmin_table(1)
    g = ScaledChannel(g1=3.0, g2=3.0)
    assert solve_optimal(g, tiny).ecv == Ecv.of(1, 1)


def test_simplified():
    """CMF(K) picks the best candidate, ties go to the earlier one"""
    s = CandidateSet.of((1, 0), (0, 1), (1, 1))
    assert solve_simplified(ScaledChannel(g1=3.0, g2=3.0), s).ecv == \
        Ecv.of(1, 1)
    assert solve_simplified(ScaledChannel(g1=3.0, g2=0.0), s).ecv == \
        Ecv.of(1, 0)
    assert solve_simplified(ScaledChannel(g1=0.0, g2=3.0), s).ecv == \
        Ecv.of(0, 1)
    tie = solve_simplified(ScaledChannel(g1=0.0, g2=0.0), s)
    assert tie.ecv == Ecv.of(1, 0)
    assert tie.rate == 0.0

    channels = np.array([[3.0, 3.0], [3.0, 0.0], [0.0, 3.0], [0.0, 0.0]])
    index, rates = solve_simplified_batch(channels, s)
    assert index.tolist() == [2, 0, 1, 0]
    assert rates[0] == pytest.approx(0.5 * math.log2(19 / 2))
    assert rates[3] == 0.0


def test_simplified_dominance(table):
    """Larger candidate sets never lose rate, S_3 is optimal below the
    g_min^2 of (2,1)"""
    rng = np.random.default_rng(5)
    channels = np.abs(rng.normal(0.0, 6.0, (5000, 2)))
    _, rates3 = solve_simplified_batch(channels, candidate_set(table, 3))
    _, rates5 = solve_simplified_batch(channels, candidate_set(table, 5))
    _, optimal = solve_optimal_batch(channels, table)
    assert np.all(rates5 >= rates3)
    assert np.all(optimal >= rates5 - 1e-12)

    below = np.sum(channels ** 2, axis=1) < 18.28
    assert below.any()
    assert np.allclose(rates3[below], optimal[below], rtol=0, atol=1e-12)

    s3 = candidate_set(table, 3)
    assert solve_simplified(ScaledChannel(g1=5.0, g2=5.0), s3).ecv == \
        Ecv.of(1, 1)
    assert solve_simplified(ScaledChannel(g1=10.0, g2=0.01),
                            candidate_set(table, 2)).ecv == Ecv.of(1, 0)


def test_candidate_set(table):
    """S_K are the first K table rows"""
    assert candidate_set(table, 5) == CandidateSet.of(
        (1, 0), (0, 1), (1, 1), (2, 1), (1, 2))
    assert candidate_set(table, 3).index(Ecv.of(1, 1)) == 2
    with pytest.raises(InvalidCandidateSet):
        candidate_set(table, 1)
    with pytest.raises(InvalidCandidateSet):
        candidate_set(table, len(table) + 1)


def test_candidate_set_validation():
    """Unit vectors first, canonical and distinct members"""
    for pairs in (((0, 1), (1, 0)), ((1, 0),), ((1, 0), (0, 1), (2, 2)),
                  ((1, 0), (0, 1), (1, 1), (1, 1))):
        with pytest.raises(ValueError):
            CandidateSet.of(*pairs)


def test_recommend_candidate_count(table):
    """Rows reachable below the 95 % quantile of |g|^2"""
    fading = FadingModel(powers=SourcePowers(p1=1.0, p2=1.0))
    assert recommend_candidate_count(table, fading) == 3
    strong = FadingModel(powers=SourcePowers.from_db(20))
    assert recommend_candidate_count(table, strong) == 11


def test_table_csv(table, tmp_path):
    """to_csv writes the table that from_csv reads"""
    path = tmp_path / "gmin.csv"
    table.to_csv(path, header={"directions": 2048})
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# coverage=2200.0"
    assert lines[2] == "k,a1,a2,gmin_sq"
    assert lines[3] == "1,1,0,0.000000"
    loaded = GminTable.from_csv(path)
    assert loaded.ecvs() == table.ecvs()
    assert loaded.coverage == table.coverage
