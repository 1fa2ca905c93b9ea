"""Weak coherent source: Poisson photon statistics and photon-number-splitting arithmetic."""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.special import gammaln

logger = logging.getLogger(__name__)

PMF_FLOOR = 1e-16
DEFAULT_MU = 0.1


@dataclass(frozen=True)
class SourceConfig:
    mu: float = DEFAULT_MU  # mean photon number per pulse, |alpha|^2

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise ValueError(f"mean photon number must be positive and finite, got {self.mu}")


def poisson_pmf(n: int, mu: float) -> float:
    """e^-mu mu^n / n!, evaluated in log space"""
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if n < 0:
        return 0.0
    return math.exp(n * math.log(mu) - mu - float(gammaln(n + 1)))


def prob_vacuum(mu: float) -> float:
    return math.exp(-mu)


def prob_nonvacuum(mu: float) -> float:
    return -math.expm1(-mu)


def prob_multi(mu: float) -> float:
    """P(n > 1)"""
    return max(0.0, prob_nonvacuum(mu) - poisson_pmf(1, mu))


def multi_photon_fraction(mu: float) -> float:
    """P(n > 1 | n > 0)"""
    return prob_multi(mu) / prob_nonvacuum(mu)


def truncation_point(mu: float) -> int:
    """Smallest n past the mode with pmf below PMF_FLOOR"""
    n = int(math.floor(mu)) + 1
    while poisson_pmf(n, mu) >= PMF_FLOOR:
        n += 1
    return n


def sample_photon_number(mu: float, rng: np.random.Generator, size: int = None):
    """Poisson(mu) photon number per emitted pulse, vacuum included"""
    n = rng.poisson(mu, size)
    return int(n) if size is None else n


@lru_cache(maxsize=256)
def _detected_cdf(mu: float) -> np.ndarray:
    n_max = truncation_point(mu)
    pmf = np.array([poisson_pmf(n, mu) for n in range(1, n_max + 1)])
    cdf = np.cumsum(pmf) / prob_nonvacuum(mu)
    cdf[-1] = 1.0
    cdf.setflags(write=False)
    return cdf


def sample_detected_photon_number(mu: float, rng: np.random.Generator, size: int = None):
    """
    Draw from Poisson(mu) conditioned on n >= 1 by inverse CDF.

    Equivalent in law to drawing Poisson(mu) and discarding vacuum, but costs one
    uniform per detected pulse, which matters as mu -> 0.
    """
    cdf = _detected_cdf(float(mu))
    u = rng.random(size)
    n = np.searchsorted(cdf, u, side="right") + 1
    return int(n) if size is None else n


def pns_split(n: int) -> Tuple[int, int]:
    """(photons Eve keeps, photons forwarded to Bob)"""
    if n < 0:
        raise ValueError(f"photon number must be non-negative, got {n}")
    if n >= 2:
        return 1, n - 1
    return 0, n
