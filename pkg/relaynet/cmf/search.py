"""ECV search.

The optimum ECV of a relay minimises a^T G a over nonzero integer vectors.
Four pruning rules keep the search finite and small:

    1. |a|^2 < 1 + |g|^2
    2. a follows the sign pattern of g and is zero where g is
    3. gcd(a1, a2) = 1
    4. g_min(a)^2 <= |g|^2, from a precomputed g_min table

g_min(a) is the smallest channel norm at which `a` is the optimum for some
direction of g. The table is symmetric under swapping the sources, so only
a1 >= a2 is computed.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from math import gcd
from typing import TYPE_CHECKING, List, Optional, Tuple

import numpy as np

from .const import (
    GMIN_DIRECTIONS,
    GMIN_REFINE_POINTS,
    GMIN_REFINE_ROUNDS,
    GMIN_RTOL,
    HERMITE_CONSTANT,
    TABLE_CAP,
)
from .errors import (
    InvalidCandidateSet,
    InvalidConfig,
    InvalidEcv,
    TableCoverageError,
)
from .rate import (
    canonicalize,
    computation_rate,
    quad_form_at,
    quad_forms,
    rates_from_quad_forms,
)
from .structures.model_classes import (
    CandidateSet,
    Ecv,
    GminRecord,
    GminTable,
    RelayDecision,
    ScaledChannel,
    SearchSpaceCounts,
)

if TYPE_CHECKING:
    from .analysis import FadingModel

log = logging.getLogger(__name__)

UNIT_ECV = Ecv(a1=1, a2=0)


def ecv_order_key(ecv: Ecv) -> Tuple[int, int, int]:
    """Tie-break order: ascending |a|^2, larger leading component first."""
    return ecv.order_key


def hermite_norm_bound(sum_snr: float) -> float:
    """Upper bound on |a|^2 of any optimal ECV at |g|^2 = sum_snr.

    The shortest vector of the lattice with Gram matrix G is at most
    sqrt(gamma_2 det G) long and the smallest eigenvalue of G is
    1 / (1 + |g|^2).
    """
    return HERMITE_CONSTANT * math.sqrt(1.0 + sum_snr)


def _sign(value: float) -> int:
    return -1 if value < 0 else 1


def _ball(radius_sq: float, lemma2_signs: Optional[Tuple[int, int]] = None,
          lemma2_mask: Tuple[bool, bool] = (True, True)):
    """Nonzero integer vectors with |a|^2 < radius_sq.

    With lemma2_signs only vectors with that sign pattern are produced,
    components whose mask entry is False stay zero.
    """
    bound = math.isqrt(max(0, math.ceil(radius_sq)))
    if lemma2_signs is None:
        first = range(-bound, bound + 1)
        second = range(-bound, bound + 1)
    else:
        first = range(0, bound + 1) if lemma2_mask[0] else range(1)
        second = range(0, bound + 1) if lemma2_mask[1] else range(1)
    for a1 in first:
        for a2 in second:
            if (a1, a2) == (0, 0) or a1 * a1 + a2 * a2 >= radius_sq:
                continue
            if lemma2_signs is None:
                yield a1, a2
            else:
                yield a1 * lemma2_signs[0], a2 * lemma2_signs[1]


def lemma1_radius(g: ScaledChannel) -> float:
    """Squared norm from which on every ECV has rate zero."""
    return 1.0 + g.norm_sq


def enumerate_candidates(g: ScaledChannel, lemma2: bool = True,
                         lemma3: bool = True,
                         lemma4: Optional[bool] = None,
                         table: Optional[GminTable] = None) -> List[Ecv]:
    """ECVs surviving Lemma 1 and the requested further pruning.

    Lemma 4 defaults to on when a table is given, the table has to cover
    |g|^2. The result is ordered by the tie-break order of the canonical
    forms.
    """
    sum_snr = g.norm_sq
    if lemma4 is None:
        lemma4 = table is not None
    if lemma4 and table is None:
        raise InvalidConfig("Lemma 4 pruning needs a g_min table")
    if lemma4 and sum_snr > table.coverage:
        raise TableCoverageError(
            f"|g|^2 = {sum_snr:.6g} > table coverage {table.coverage:.6g}")
    if lemma2:
        vectors = _ball(lemma1_radius(g),
                        lemma2_signs=(_sign(g.g1), _sign(g.g2)),
                        lemma2_mask=(g.g1 != 0, g.g2 != 0))
    else:
        vectors = _ball(lemma1_radius(g))
    if lemma3:
        vectors = (pair for pair in vectors
                   if gcd(pair[0], pair[1]) == 1)
    candidates = [Ecv(a1=a1, a2=a2) for a1, a2 in vectors]
    if lemma4:
        lookup = table.lookup()
        candidates = [
            ecv for ecv in candidates
            if lookup.get((abs(ecv.a1), abs(ecv.a2)), math.inf) <= sum_snr]
    candidates.sort(
        key=lambda ecv: (canonicalize(ecv).order_key, ecv.order_key))
    return candidates


def search_space_counts(g: ScaledChannel,
                        table: Optional[GminTable] = None
                        ) -> SearchSpaceCounts:
    """Size of the search space after Lemma 1, +2, +3 and +4.

    The Lemma 4 stage is left out when no table covers |g|^2.
    """
    lemma1 = sum(1 for _ in _ball(lemma1_radius(g)))
    lemma12 = len(enumerate_candidates(g, lemma2=True, lemma3=False))
    lemma123 = len(enumerate_candidates(g))
    lemma1234 = None
    if table is not None and g.norm_sq <= table.coverage:
        lemma1234 = len(enumerate_candidates(g, table=table))
    return SearchSpaceCounts(sum_snr=g.norm_sq, lemma1=lemma1,
                             lemma12=lemma12, lemma123=lemma123,
                             lemma1234=lemma1234)


def _argmin(g: ScaledChannel, candidates) -> Tuple[Ecv, float]:
    """First candidate with the smallest quadratic form."""
    best, best_quad = None, math.inf
    for ecv in candidates:
        quad = quad_form_at(ecv, g)
        if quad < best_quad:
            best, best_quad = ecv, quad
    return best, best_quad


def solve_optimal(g: ScaledChannel,
                  table: Optional[GminTable] = None) -> RelayDecision:
    """Rate maximising ECV of one relay.

    Lemmas 1 to 3 always prune, Lemma 4 when a table covering |g|^2 is
    given. At g = 0 every rate is zero and (1,0) is reported.
    """
    if table is not None and g.norm_sq > table.coverage:
        log.debug("|g|^2 = %.6g beyond table coverage, Lemma 4 skipped",
                  g.norm_sq)
        table = None
    candidates = enumerate_candidates(g, table=table)
    if not candidates:
        return RelayDecision(ecv=UNIT_ECV, rate=0.0)
    best, _ = _argmin(g, candidates)
    return RelayDecision(ecv=canonicalize(best),
                         rate=computation_rate(g, best))


def solve_simplified(g: ScaledChannel, s: CandidateSet) -> RelayDecision:
    """CMF(K): best of the K candidates, ties to the earlier one."""
    best, _ = _argmin(g, s.ecvs)
    return RelayDecision(ecv=best, rate=computation_rate(g, best))


def candidate_set(table: GminTable, k: int) -> CandidateSet:
    """S_K, the first K rows of the g_min table."""
    if k < 2:
        raise InvalidCandidateSet(f"CMF(K) needs K >= 2, got {k}")
    if k > len(table):
        raise InvalidCandidateSet(
            f"table has {len(table)} rows, K = {k} requested")
    return CandidateSet(ecvs=table.ecvs()[:k])


def recommend_candidate_count(table: GminTable, fading: "FadingModel",
                              coverage: float = 0.95) -> int:
    """Smallest K whose set holds every ECV reachable below the
    `coverage` quantile of |g|^2."""
    if not 0 < coverage < 1:
        raise InvalidConfig(f"coverage must lie in (0, 1), got {coverage}")
    sum_snr = fading.sum_snr_quantile(coverage)
    if sum_snr > table.coverage:
        raise TableCoverageError(
            f"{coverage} quantile {sum_snr:.6g} > table coverage "
            f"{table.coverage:.6g}")
    count = sum(1 for record in table.records if record.gmin_sq <= sum_snr)
    return max(2, count)


# -- g_min

def _nonnegative_primitives(radius_sq: float) -> np.ndarray:
    """Nonnegative vectors with gcd 1 and |b|^2 <= radius_sq"""
    bound = math.isqrt(max(0, math.floor(radius_sq)))
    rows = [(b1, b2)
            for b1 in range(bound + 1) for b2 in range(bound + 1)
            if gcd(b1, b2) == 1 and b1 * b1 + b2 * b2 <= radius_sq]
    return np.array(rows, dtype=float).reshape(-1, 2)


def _cross_sq(vectors: np.ndarray, u1: np.ndarray, u2: np.ndarray):
    """(b x u)^2 for every vector (rows) and direction (columns)"""
    return (vectors[:, 0, np.newaxis] * u2 -
            vectors[:, 1, np.newaxis] * u1) ** 2


class _GminProfile:
    """Smallest |g|^2 at which `e` is optimal, per direction of g.

    With g = r u the ECV e beats b exactly when
    r^2 ((e x u)^2 - (b x u)^2) <= |b|^2 - |e|^2. Shorter competitors give
    lower bounds on r^2, longer ones upper bounds, so the optimum set along
    one direction is an interval and its lower end is available in closed
    form. The lower end is then checked against every competitor inside the
    Hermite ball of the search cap.
    """

    def __init__(self, e: Tuple[int, int], search_cap: float):
        self.e = np.array(e, dtype=float)
        self.e_norm = float(e[0] * e[0] + e[1] * e[1])
        self.search_cap = search_cap
        pool = _nonnegative_primitives(
            max(hermite_norm_bound(search_cap), self.e_norm))
        norms = pool[:, 0] ** 2 + pool[:, 1] ** 2
        is_e = (pool[:, 0] == e[0]) & (pool[:, 1] == e[1])
        self.shorter = pool[norms < self.e_norm]
        self.shorter_gap = (self.e_norm - norms[norms < self.e_norm])
        self.competitors = pool[~is_e]
        self.competitor_norms = norms[~is_e]

    def __call__(self, thetas: np.ndarray) -> np.ndarray:
        u1, u2 = np.cos(thetas), np.sin(thetas)
        e_cross = _cross_sq(self.e[np.newaxis, :], u1, u2)[0]
        if len(self.shorter):
            gap = _cross_sq(self.shorter, u1, u2) - e_cross
            with np.errstate(divide="ignore", invalid="ignore"):
                bounds = np.where(gap > 0,
                                  self.shorter_gap[:, np.newaxis] / gap,
                                  np.inf)
            lower = np.maximum(0.0, bounds.max(axis=0))
        else:
            lower = np.zeros_like(thetas)

        finite = np.isfinite(lower) & (lower <= self.search_cap *
                                       (1 + GMIN_RTOL))
        radius_sq = np.where(finite, lower, 0.0)
        own = self.e_norm + radius_sq * e_cross
        other = (self.competitor_norms[:, np.newaxis] +
                 radius_sq * _cross_sq(self.competitors, u1, u2))
        wins = np.all(own <= other * (1 + GMIN_RTOL), axis=0)
        return np.where(finite & wins, lower, np.inf)


def gmin_sq(e: Ecv, search_cap: float = TABLE_CAP,
            directions: int = GMIN_DIRECTIONS) -> float:
    """Squared g_min of a canonical ECV, inf if above `search_cap`.

    The directions of the first quadrant are swept on a uniform grid and the
    best direction is refined by repeated zooming.
    """
    if not e.is_canonical:
        raise InvalidEcv(f"{e} is not a canonical ECV")
    pair = (abs(e.a1), abs(e.a2))
    norm = pair[0] * pair[0] + pair[1] * pair[1]
    if norm >= 1.0 + search_cap or \
            norm > hermite_norm_bound(search_cap) * (1 + GMIN_RTOL):
        return math.inf

    profile = _GminProfile(pair, search_cap)
    thetas = np.linspace(0.0, math.pi / 2, directions + 1)
    values = profile(thetas)
    index = int(np.argmin(values))
    best = float(values[index])
    if not math.isfinite(best):
        return math.inf
    for _ in range(GMIN_REFINE_ROUNDS):
        low = thetas[max(index - 1, 0)]
        high = thetas[min(index + 1, len(thetas) - 1)]
        thetas = np.linspace(low, high, GMIN_REFINE_POINTS)
        values = profile(thetas)
        index = int(np.argmin(values))
        best = min(best, float(values[index]))
    return best


def gmin(e: Ecv, search_cap: float = TABLE_CAP,
         directions: int = GMIN_DIRECTIONS) -> float:
    """g_min of a canonical ECV, inf if its square is above `search_cap`."""
    return math.sqrt(gmin_sq(e, search_cap, directions))


def build_gmin_table(max_gmin_sq: float = TABLE_CAP,
                     directions: int = GMIN_DIRECTIONS,
                     workers: int = 1) -> GminTable:
    """Every ECV with g_min^2 <= max_gmin_sq, both permutations listed."""
    if max_gmin_sq < 0:
        raise InvalidConfig(f"table cap must be >= 0, got {max_gmin_sq}")
    limit = min(1.0 + max_gmin_sq,
                hermite_norm_bound(max_gmin_sq) * (1 + GMIN_RTOL) + 1e-9)
    pairs = [
        Ecv(a1=a1, a2=a2) for a1, a2 in _nonnegative_primitives(limit)
        .astype(int).tolist()
        if a1 >= a2 and a1 * a1 + a2 * a2 < 1.0 + max_gmin_sq]
    log.info("Computing g_min of %d ECVs up to %.6g", len(pairs),
             max_gmin_sq)

    def compute(ecv):
        return gmin_sq(ecv, max_gmin_sq, directions)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            values = list(executor.map(compute, pairs))
    else:
        values = [compute(ecv) for ecv in pairs]

    records = []
    for ecv, value in zip(pairs, values):
        if value > max_gmin_sq:
            continue
        log.debug("g_min^2 %s = %.6f", ecv, value)
        records.append(GminRecord(ecv=ecv, gmin_sq=value))
        if ecv.a1 != ecv.a2:
            records.append(GminRecord(ecv=ecv.permuted(), gmin_sq=value))
    records.sort(key=lambda record: (record.gmin_sq, record.ecv.order_key))
    return GminTable(records=tuple(records), coverage=max_gmin_sq)


@lru_cache(maxsize=8)
def cached_gmin_table(max_gmin_sq: float = TABLE_CAP,
                      directions: int = GMIN_DIRECTIONS) -> GminTable:
    """build_gmin_table shared by everything in the process"""
    return build_gmin_table(max_gmin_sq, directions)


# -- vectorized solvers

def solve_simplified_batch(g: np.ndarray, s: CandidateSet
                           ) -> Tuple[np.ndarray, np.ndarray]:
    """CMF(K) for channels (..., 2): 0-based candidate indices and rates."""
    quads = quad_forms(s.as_array(), g)
    index = np.argmin(quads, axis=-1)
    chosen = np.take_along_axis(quads, index[..., np.newaxis], axis=-1)
    return index, rates_from_quad_forms(chosen[..., 0])


def solve_optimal_batch(g: np.ndarray, table: GminTable
                        ) -> Tuple[np.ndarray, np.ndarray]:
    """Optimum ECVs (..., 2) in canonical form and their rates.

    Inside the table coverage the optimum is one of the tabulated ECVs, the
    rest falls back to solve_optimal without Lemma 4.
    """
    if len(table) < 2:
        raise TableCoverageError("g_min table has fewer than two rows")
    g = np.asarray(g, dtype=float)
    shape = g.shape[:-1]
    flat = g.reshape(-1, 2)
    ordered = sorted(table.ecvs(), key=ecv_order_key)
    ecvs = np.array([ecv.as_tuple() for ecv in ordered], dtype=np.int64)

    magnitude = np.abs(flat)
    quads = quad_forms(ecvs, magnitude)
    index = np.argmin(quads, axis=1)
    chosen = ecvs[index] * np.where(flat < 0, -1, 1)
    flip = (chosen[:, 0] < 0) | ((chosen[:, 0] == 0) & (chosen[:, 1] < 0))
    chosen[flip] *= -1
    rates = rates_from_quad_forms(quads[np.arange(len(flat)), index])

    beyond = np.flatnonzero(
        magnitude[:, 0] ** 2 + magnitude[:, 1] ** 2 > table.coverage)
    if len(beyond):
        log.warning("%d channel(s) beyond table coverage %.6g, using the "
                    "unpruned solver", len(beyond), table.coverage)
    for row in beyond:
        decision = solve_optimal(ScaledChannel(g1=flat[row, 0],
                                               g2=flat[row, 1]))
        chosen[row] = decision.ecv.as_tuple()
        rates[row] = decision.rate
    return chosen.reshape(shape + (2,)), rates.reshape(shape)
