"""Utility functions and classes for tests"""
import math

import numpy as np

from relaynet.cmf.rate import quad_forms  # type:ignore


def integer_ball(radius_sq: float) -> np.ndarray:
    """Every nonzero integer vector with |a|^2 < radius_sq, no pruning"""
    bound = math.isqrt(math.ceil(radius_sq))
    axis = np.arange(-bound, bound + 1)
    a1, a2 = np.meshgrid(axis, axis, indexing="ij")
    vectors = np.stack((a1.ravel(), a2.ravel()), axis=-1)
    norms = vectors[:, 0] ** 2 + vectors[:, 1] ** 2
    return vectors[(norms > 0) & (norms < radius_sq)]


def brute_force_quads(g: np.ndarray, radius_sq: float,
                      batch: int = 256) -> np.ndarray:
    """Smallest a^T G a over the whole ball for every channel row of g"""
    vectors = integer_ball(radius_sq)
    best = []
    for start in range(0, len(g), batch):
        best.append(quad_forms(vectors, g[start:start + batch]).min(axis=1))
    return np.concatenate(best)


def within_se(estimate, expected: float, sigmas: float = 5.0,
              slack: float = 1e-4) -> bool:
    """Monte Carlo estimate agrees with an exact value"""
    return abs(estimate.value - expected) <= \
        sigmas * estimate.std_error + slack
