"""Bundled test system: the 20-feeder table and a synthetic correlated covariance."""

from __future__ import annotations

import numpy as np

from .files import data_path, read_covariance, read_feeders
from .model import CovarianceMatrix, FeederSet

TABLE1 = "table1.csv"
SYNTHETIC_COVARIANCE = "synthetic_correlated_covariance.csv"

# Feeders left at their true sigma in the fairness case study; every other
# feeder receives synthetic uncertainty.
FAIRNESS_UNTARGETED = (1, 3, 8, 10, 14, 15)
THRESHOLD_MW = 250.0


def load_table1() -> FeederSet:
    return read_feeders(data_path(TABLE1))


def exponential_correlation(m: int, peak: float = 0.6, decay: float = 0.9) -> np.ndarray:
    """Correlation ``peak * decay**|i - j|`` off the diagonal, 1 on it."""
    i = np.arange(m)
    r = peak * decay ** np.abs(i[:, None] - i[None, :])
    np.fill_diagonal(r, 1.0)
    return r


def synthetic_covariance(feeders: FeederSet, peak: float = 0.6, decay: float = 0.9) -> CovarianceMatrix:
    """SYNTHETIC positively correlated covariance built from the feeder sigmas.

    Stands in for a measured forecast-error covariance, which is not
    available for the bundled test system.
    """
    s = feeders.sigma
    return CovarianceMatrix.full(exponential_correlation(len(feeders), peak, decay) * np.outer(s, s))


def load_synthetic_covariance() -> CovarianceMatrix:
    """The shipped CSV version of :func:`synthetic_covariance` for the bundled feeder table."""
    return read_covariance(data_path(SYNTHETIC_COVARIANCE), m=20)
