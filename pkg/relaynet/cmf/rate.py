"""Computation rate kernel.

For a relay with scaled channel g the Gram matrix is G = I - g g^T/(1+|g|^2)
and the computation rate of an ECV a is R = 1/2 log2+(1 / a^T G a). In two
dimensions a^T G a = (|a|^2 + (a1 g2 - a2 g1)^2) / (1 + |g|^2), which is what
every function here evaluates, it is free of cancellation and positive for
any nonzero a.
"""
import logging
import math
from math import gcd
from typing import Union

import numpy as np

from .errors import InvalidEcv
from .structures.model_classes import (
    ChannelVector,
    Ecv,
    GramMatrix,
    ScaledChannel,
    SourcePowers,
)
from .util import db_to_linear, linear_to_db

log = logging.getLogger(__name__)

__all__ = [
    "db_to_linear", "linear_to_db", "scaled_channel", "gram_matrix",
    "quad_form", "quad_form_at", "computation_rate",
    "computation_rate_equal_power", "canonicalize", "quad_forms",
    "paired_quad_forms", "rates_from_quad_forms",
]


def scaled_channel(h: ChannelVector, powers: SourcePowers) -> ScaledChannel:
    """g = (h1 sqrt(P1), h2 sqrt(P2))"""
    return ScaledChannel(g1=h.h1 * math.sqrt(powers.p1),
                         g2=h.h2 * math.sqrt(powers.p2))


def gram_matrix(g: ScaledChannel) -> GramMatrix:
    """G = I - g g^T / (1 + |g|^2)"""
    denominator = 1.0 + g.norm_sq
    off_diagonal = -g.g1 * g.g2 / denominator
    return GramMatrix(g11=1.0 - g.g1 * g.g1 / denominator,
                      g12=off_diagonal,
                      g21=off_diagonal,
                      g22=1.0 - g.g2 * g.g2 / denominator)


def _check_nonzero(a: Ecv):
    if a.is_zero:
        raise InvalidEcv("the zero vector has no computation rate")


def quad_form(a: Ecv, gram: GramMatrix) -> float:
    """a^T G a from the matrix entries."""
    _check_nonzero(a)
    return (a.a1 * a.a1 * gram.g11 + a.a1 * a.a2 * (gram.g12 + gram.g21) +
            a.a2 * a.a2 * gram.g22)


def quad_form_at(a: Ecv, g: ScaledChannel) -> float:
    """a^T G a evaluated directly from g."""
    _check_nonzero(a)
    cross = g.g2 * a.a1 - g.g1 * a.a2
    return (a.norm_sq + cross * cross) / (1.0 + g.norm_sq)


def _rate(quad: float) -> float:
    if quad >= 1.0:
        return 0.0
    return -0.5 * math.log2(quad)


def computation_rate(g: ScaledChannel, a: Ecv) -> float:
    """Computation rate of decoding a^T (x1, x2) at a relay seeing g.

    Raises InvalidEcv for the zero vector. The rate is 0 whenever
    a^T G a >= 1.
    """
    return _rate(quad_form_at(a, g))


def computation_rate_equal_power(h: ChannelVector, a: Ecv,
                                 power: float) -> float:
    """Equal power form 1/2 log+((|a|^2 - P (a^T h)^2/(1 + P|h|^2))^-1)"""
    _check_nonzero(a)
    projection = a.a1 * h.h1 + a.a2 * h.h2
    h_norm_sq = h.h1 * h.h1 + h.h2 * h.h2
    quad = a.norm_sq - power * projection * projection / (
        1.0 + power * h_norm_sq)
    if quad <= 0:
        # only reachable through rounding, the exact value is positive
        return computation_rate(
            scaled_channel(h, SourcePowers(p1=power, p2=power)), a)
    return _rate(quad)


def canonicalize(a: Ecv) -> Ecv:
    """Divide by the gcd and make the first nonzero component positive."""
    if a.is_zero:
        raise InvalidEcv("the zero vector has no canonical form")
    divisor = gcd(a.a1, a.a2)
    a1, a2 = a.a1 // divisor, a.a2 // divisor
    if a1 < 0 or (a1 == 0 and a2 < 0):
        a1, a2 = -a1, -a2
    return Ecv(a1=a1, a2=a2)


def quad_forms(ecvs: Union[np.ndarray, list], g: np.ndarray) -> np.ndarray:
    """a^T G a for K ECVs (K, 2) and channels (..., 2), shape (..., K)"""
    ecvs = np.asarray(ecvs, dtype=float)
    g = np.asarray(g, dtype=float)
    cross = (g[..., 1, np.newaxis] * ecvs[:, 0] -
             g[..., 0, np.newaxis] * ecvs[:, 1])
    norms = ecvs[:, 0] * ecvs[:, 0] + ecvs[:, 1] * ecvs[:, 1]
    denominator = 1.0 + (g[..., 0] * g[..., 0] + g[..., 1] * g[..., 1])
    return (norms + cross * cross) / denominator[..., np.newaxis]


def paired_quad_forms(ecvs: np.ndarray, g: np.ndarray) -> np.ndarray:
    """a^T G a for matching rows of ECVs (..., 2) and channels (..., 2)"""
    ecvs = np.asarray(ecvs, dtype=float)
    g = np.asarray(g, dtype=float)
    cross = g[..., 1] * ecvs[..., 0] - g[..., 0] * ecvs[..., 1]
    norms = ecvs[..., 0] * ecvs[..., 0] + ecvs[..., 1] * ecvs[..., 1]
    denominator = 1.0 + (g[..., 0] * g[..., 0] + g[..., 1] * g[..., 1])
    return (norms + cross * cross) / denominator


def rates_from_quad_forms(quad: np.ndarray) -> np.ndarray:
    """Elementwise 1/2 max(0, -log2 q)"""
    quad = np.asarray(quad, dtype=float)
    return 0.5 * np.maximum(0.0, -np.log2(quad))
