"""Shared instance generators for the test suite."""

import numpy as np

from uflsalloc.model import CovarianceMatrix, FeederSet, RiskSpec, build_problem


def random_instance(rng, m, method=None, correlated=True, negative=False):
    """Small random problem with a threshold that is usually attainable."""
    mu = rng.uniform(5.0, 40.0, m)
    if negative:
        mu[rng.random(m) < 0.2] *= -0.3
    sigma = rng.uniform(0.0, 5.0, m)
    if correlated:
        g = rng.normal(size=(m, m))
        r = g @ g.T
        d = np.sqrt(np.diag(r))
        r = r / np.outer(d, d)
        if not negative:
            r = np.abs(r)
            # abs can break PSD; blend with identity until it is PSD again
            lam = np.linalg.eigvalsh(r)[0]
            if lam < 0:
                r = (r - lam * np.eye(m)) / (1.0 - lam)
        cov = CovarianceMatrix.full(r * np.outer(sigma, sigma))
    else:
        cov = CovarianceMatrix(np.diag(sigma ** 2), mode="diagonal")
    feeders = FeederSet.from_arrays(range(1, m + 1), mu, sigma)
    L = float(rng.uniform(0.2, 0.6) * np.sum(np.abs(mu)))
    if method is None:
        method = rng.choice(["deterministic", "gaussian-cc", "dr-cc"])
    if method == "deterministic":
        risk = RiskSpec.deterministic(float(rng.uniform(0.01, 0.99)))
    else:
        risk = RiskSpec(str(method), epsilon=float(rng.uniform(0.01, 0.3)))
    return build_problem(feeders, cov, L, risk)
