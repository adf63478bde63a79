"""Outage analysis of CMF(K) under independent Rayleigh fading.

The scaled gains g1, g2 are independent with densities
f(g) = (2 g / P) exp(-g^2 / P). Every probability here is an integral of
that density over a region cut out by comparisons of quadratic forms.
For a fixed g1 each comparison is a quadratic inequality in g2, so the inner
integral over g2 is evaluated exactly between the roots. The outer integral
over g1 is adaptive (scipy quad_vec) and covers all K regions at once.
"""
import logging
import math
from functools import lru_cache
from itertools import combinations
from typing import Iterator, Tuple

import numpy as np
from scipy import integrate, optimize, stats

from .const import (
    COMPOSITION_CAP,
    DEGENERATE_PROB,
    QUAD_EPSABS,
    TAIL_MASS,
    TARGET_RATE,
)
from .errors import CompositionOverflow, InvalidConfig, QuadratureError
from .rate import quad_forms
from .structures.model_classes import (
    CandidateSet,
    Frozen,
    OutageReport,
    SelectionProfile,
    SourcePowers,
)

log = logging.getLogger(__name__)


class FadingModel(Frozen):
    """Independent Rayleigh fading seen through the source powers"""
    powers: SourcePowers

    def density(self, g1, g2):
        """Joint density of (g1, g2) on the nonnegative quadrant"""
        p1, p2 = self.powers.p1, self.powers.p2
        return (2 * g1 / p1 * np.exp(-g1 * g1 / p1) *
                2 * g2 / p2 * np.exp(-g2 * g2 / p2))

    def truncation(self, tail_mass: float = TAIL_MASS) -> Tuple[float, float]:
        """Per axis bound beyond which at most `tail_mass` lies"""
        scale = math.log(1 / tail_mass)
        return (math.sqrt(self.powers.p1 * scale),
                math.sqrt(self.powers.p2 * scale))

    def sum_snr_sf(self, x: float) -> float:
        """Pr{|g|^2 > x}"""
        if x <= 0:
            return 1.0
        p1, p2 = self.powers.p1, self.powers.p2
        if self.powers.equal:
            return float(stats.gamma.sf(x, 2, scale=p1))
        return (p1 * math.exp(-x / p1) - p2 * math.exp(-x / p2)) / (p1 - p2)

    def sum_snr_cdf(self, x: float) -> float:
        """Pr{|g|^2 <= x}, hypoexponential or Gamma(2, P)"""
        return 1.0 - self.sum_snr_sf(x)

    def sum_snr_quantile(self, q: float) -> float:
        """Smallest x with Pr{|g|^2 <= x} >= q"""
        if not 0 <= q < 1:
            raise InvalidConfig(f"quantile must lie in [0, 1), got {q}")
        tail = 1.0 - q
        if tail == 1.0:
            return 0.0
        if self.powers.equal:
            return float(stats.gamma.isf(tail, 2, scale=self.powers.p1))
        high = max(self.powers.p1, self.powers.p2) * (math.log(1 / tail) + 1)
        while self.sum_snr_sf(high) > tail:
            high *= 2
        return optimize.brentq(lambda x: self.sum_snr_sf(x) - tail, 0.0, high,
                               xtol=1e-12, rtol=1e-12)

    def swapped(self) -> "FadingModel":
        return FadingModel(powers=SourcePowers(p1=self.powers.p2,
                                               p2=self.powers.p1))


def _positive_roots(a: np.ndarray, b: np.ndarray, c: np.ndarray):
    """Positive real roots of a y^2 + b y + c for many coefficient rows"""
    with np.errstate(divide="ignore", invalid="ignore"):
        linear = a == 0
        roots = [-c[linear] / b[linear]]
        a, b, c = a[~linear], b[~linear], c[~linear]
        discriminant = b * b - 4 * a * c
        real = discriminant >= 0
        a, b, c = a[real], b[real], c[real]
        q = -0.5 * (b + np.copysign(np.sqrt(discriminant[real]), b))
        roots.append(q / a)
        roots.append(c / q)
    roots = np.concatenate(roots)
    return roots[np.isfinite(roots) & (roots > 0)]


class _RegionIntegrand:
    """g1 -> f(g1) times the g2 mass of every D_k and D_k & O_k.

    D_k is where candidate k wins (first index on ties), O_k where its
    quadratic form exceeds 2^(-2 rt). Both change along g2 only where one of
    the cleared comparisons |e|^2 + (e1 g2 - e2 g1)^2 changes sign.
    """

    def __init__(self, s: CandidateSet, fading: FadingModel,
                 target_rate: float):
        self.ecvs = s.as_array().astype(float)
        self.k = s.k
        self.p1 = fading.powers.p1
        self.p2 = fading.powers.p2
        self.with_outage = target_rate > 0
        self.threshold = 2.0 ** (-2.0 * target_rate)

        e1, e2 = self.ecvs[:, 0], self.ecvs[:, 1]
        norms = e1 * e1 + e2 * e2
        pairs = list(combinations(range(self.k), 2))
        first = np.array([pair[0] for pair in pairs], dtype=int)
        second = np.array([pair[1] for pair in pairs], dtype=int)
        # coefficients of y^2, x*y, x^2 and 1 of each comparison
        yy = [e1[first] ** 2 - e1[second] ** 2]
        xy = [-2 * (e1[first] * e2[first] - e1[second] * e2[second])]
        xx = [e2[first] ** 2 - e2[second] ** 2]
        one = [norms[first] - norms[second]]
        if self.with_outage:
            t = self.threshold
            yy.append(e1 * e1 - t)
            xy.append(-2 * e1 * e2)
            xx.append(e2 * e2 - t)
            one.append(norms - t)
        self.yy = np.concatenate(yy)
        self.xy = np.concatenate(xy)
        self.xx = np.concatenate(xx)
        self.one = np.concatenate(one)

    def inner(self, x: float) -> np.ndarray:
        """Masses over g2 of D_k (first K) and D_k & O_k (last K)"""
        roots = _positive_roots(self.yy, self.xy * x,
                                self.xx * x * x + self.one)
        edges = np.concatenate(([0.0], np.unique(roots), [np.inf]))
        survival = np.exp(-edges * edges / self.p2)
        mass = survival[:-1] - survival[1:]
        middles = np.empty(len(mass))
        middles[:-1] = 0.5 * (edges[:-2] + edges[1:-1])
        middles[-1] = edges[-2] + 1.0
        channels = np.column_stack((np.full(len(mass), x), middles))
        quads = quad_forms(self.ecvs, channels)
        winner = np.argmin(quads, axis=1)

        result = np.zeros(2 * self.k)
        np.add.at(result, winner, mass)
        if self.with_outage:
            outage = quads[np.arange(len(mass)), winner] > self.threshold
            np.add.at(result, self.k + winner[outage], mass[outage])
        return result

    def __call__(self, x: float) -> np.ndarray:
        return 2 * x / self.p1 * math.exp(-x * x / self.p1) * self.inner(x)


@lru_cache(maxsize=256)
def selection_profile(s: CandidateSet, fading: FadingModel,
                      target_rate: float = TARGET_RATE,
                      epsabs: float = QUAD_EPSABS,
                      tail_mass: float = TAIL_MASS) -> SelectionProfile:
    """P_k^Sel and P_Out|e_k of every candidate from one quadrature pass.

    Raises QuadratureError when the error estimate exceeds `epsabs`.
    A candidate selected with probability below 1e-12 gets conditional
    outage 1 and is flagged degenerate.
    """
    if target_rate < 0:
        raise InvalidConfig(f"target rate must be >= 0, got {target_rate}")
    integrand = _RegionIntegrand(s, fading, target_rate)
    upper, _ = fading.truncation(tail_mass)
    result, error, info = integrate.quad_vec(
        integrand, 0.0, upper, epsabs=epsabs / 10, epsrel=1e-10,
        norm="max", limit=20000, full_output=True)
    log.debug("quad_vec K=%d P=(%.4g, %.4g) rt=%.3g: error %.3g, %d "
              "evaluations, status %d", s.k, fading.powers.p1,
              fading.powers.p2, target_rate, error, info.neval, info.status)
    if error > epsabs or not np.all(np.isfinite(result)):
        raise QuadratureError(float(error), epsabs)

    probabilities = np.clip(result[:s.k], 0.0, 1.0)
    joint = np.clip(result[s.k:], 0.0, 1.0)
    conditional, degenerate = [], []
    for ecv, prob, both in zip(s.ecvs, probabilities, joint):
        if prob < DEGENERATE_PROB:
            log.warning("%s is practically never selected (P=%.3g)", ecv,
                        prob)
            conditional.append(1.0)
            degenerate.append(True)
        else:
            conditional.append(min(1.0, both / prob))
            degenerate.append(False)
    return SelectionProfile(candidates=s,
                            target_rate=target_rate,
                            probabilities=tuple(probabilities.tolist()),
                            joint_outage=tuple(joint.tolist()),
                            conditional_outage=tuple(conditional),
                            degenerate=tuple(degenerate),
                            abserr=float(error))


def selection_probability(s: CandidateSet, k: int, fading: FadingModel,
                          **kwargs) -> float:
    """Pr{candidate k (0-based) is selected}"""
    return selection_profile(s, fading, **kwargs).selection_probability(k)


def conditional_outage(s: CandidateSet, k: int, fading: FadingModel,
                       target_rate: float, **kwargs) -> float:
    """Pr{rate < target | candidate k (0-based) is selected}"""
    profile = selection_profile(s, fading, target_rate, **kwargs)
    return profile.outage_given_selected(k)


def relay_outage(s: CandidateSet, fading: FadingModel, target_rate: float,
                 **kwargs) -> float:
    """Pr{the rate of one relay < target}"""
    profile = selection_profile(s, fading, target_rate, **kwargs)
    return min(1.0, math.fsum(profile.joint_outage))


def _check_relays(m_relays: int):
    if m_relays < 2:
        raise InvalidConfig(f"at least two relays are needed, got "
                            f"{m_relays}")


def rank_failure_probability(s: CandidateSet, fading: FadingModel,
                             m_relays: int, **kwargs) -> float:
    """Pr{every relay picks the same ECV} = sum_k (P_k^Sel)^M"""
    _check_relays(m_relays)
    profile = selection_profile(s, fading, **kwargs)
    return rank_failure_from_profile(profile, m_relays)


def rank_failure_from_profile(profile: SelectionProfile,
                              m_relays: int) -> float:
    return min(1.0, math.fsum(p ** m_relays for p in profile.probabilities))


def composition_count(m: int, k: int) -> int:
    """C(m + k - 1, k - 1)"""
    return math.comb(m + k - 1, k - 1)


def enumerate_compositions(m: int, k: int,
                           cap: int = COMPOSITION_CAP
                           ) -> Iterator[Tuple[int, ...]]:
    """Every nonnegative k-vector summing to m, in colexicographic order."""
    if m < 0 or k < 1:
        raise InvalidConfig(f"compositions need m >= 0 and k >= 1, got "
                            f"m={m}, k={k}")
    count = composition_count(m, k)
    if count > cap:
        raise CompositionOverflow(f"{count} compositions of {m} into {k} "
                                  f"parts, cap is {cap}")
    return _compositions(m, k)


def _compositions(m: int, k: int) -> Iterator[Tuple[int, ...]]:
    if k == 1:
        yield (m, )
        return
    for last in range(m + 1):
        for prefix in _compositions(m - last, k - 1):
            yield prefix + (last, )


def multinomial(parts: Tuple[int, ...]) -> int:
    """(n1 + ... + nK)! / (n1! ... nK!)"""
    result, total = 1, 0
    for part in parts:
        total += part
        result *= math.comb(total, part)
    return result


def _composition_outage(parts, conditional) -> float:
    """Pr{second largest group rate < target | group sizes}.

    Either every group is below target or exactly one is not. Empty groups
    count as below target.
    """
    below = [q ** n for q, n in zip(conditional, parts)]
    all_below = math.prod(below)
    one_above = math.fsum(
        (1.0 - below[k]) * math.prod(below[:k] + below[k + 1:])
        for k in range(len(parts)))
    return all_below + one_above


def system_outage_from_profile(profile: SelectionProfile, m_relays: int,
                               powers: SourcePowers,
                               composition_cap: int = COMPOSITION_CAP
                               ) -> OutageReport:
    """Combine a selection profile into the end to end outage of M relays"""
    _check_relays(m_relays)
    probabilities = profile.probabilities
    conditional = profile.conditional_outage
    terms = []
    for parts in enumerate_compositions(m_relays, profile.candidates.k,
                                        composition_cap):
        weight = multinomial(parts) * math.prod(
            p ** n for p, n in zip(probabilities, parts))
        if weight == 0.0:
            continue
        terms.append(weight * _composition_outage(parts, conditional))
    rank_failure = rank_failure_from_profile(profile, m_relays)
    system = min(1.0, max(math.fsum(terms), rank_failure))
    if rank_failure < 1.0:
        given_no_failure = (system - rank_failure) / (1.0 - rank_failure)
    else:
        given_no_failure = 0.0
    relay = min(1.0, math.fsum(profile.joint_outage))
    return OutageReport(m_relays=m_relays,
                        k=profile.candidates.k,
                        powers=powers,
                        target_rate=profile.target_rate,
                        relay_outage=relay,
                        rank_failure=rank_failure,
                        system_outage=system,
                        outage_given_no_failure=min(1.0,
                                                    max(0.0,
                                                        given_no_failure)))


def system_outage(s: CandidateSet, fading: FadingModel, m_relays: int,
                  target_rate: float,
                  composition_cap: int = COMPOSITION_CAP,
                  **kwargs) -> OutageReport:
    """End to end outage of CMF(K) with M relays"""
    _check_relays(m_relays)
    profile = selection_profile(s, fading, target_rate, **kwargs)
    report = system_outage_from_profile(profile, m_relays, fading.powers,
                                        composition_cap)
    log.debug("M=%d K=%d rt=%.3g: P_fail=%.6g P_out=%.6g", m_relays, s.k,
              target_rate, report.rank_failure, report.system_outage)
    return report
