import math

import numpy as np
import pytest

from uflsalloc import dist
from uflsalloc.model import CovarianceMatrix, FeederSet, ModelError, RiskSpec, build_problem
from uflsalloc.montecarlo import (BLOCK_SIZE, SamplingSpec, binomial_se, correlation_study,
                                  draw_samples, validate)
from uflsalloc.solver import solve


def _all_ones(problem, L):
    from uflsalloc.model import AllocationResult, ReliabilityMargin, SolverStats
    m = problem.m
    return AllocationResult(np.ones(m, dtype=np.int8), float(problem.feeders.mu.sum()),
                            ReliabilityMargin(0, 0, 0, 0), problem.risk, SolverStats(0, True),
                            problem.feeders.ids, L)


def test_moment_recovery_feeder9(table1_gaussian):
    spec = SamplingSpec.from_problem(table1_gaussian, n_samples=1_000_000, seed=3)
    x = draw_samples(spec, rows=[8])[0]
    se = 1.04 / math.sqrt(2 * len(x))
    assert abs(x.std() - 1.04) < 3 * se
    assert abs(x.mean() - 29.0) < 3 * 1.04 / math.sqrt(len(x))


def test_comonotone_rank_one():
    s = np.array([2.0, 5.0])
    cov = CovarianceMatrix.full(np.outer(s, s))
    fs = FeederSet.from_arrays([1, 2], [10.0, -3.0], s)
    p = build_problem(fs, cov, 1.0, RiskSpec.gaussian(0.1))
    x = draw_samples(SamplingSpec.from_problem(p, n_samples=5000, seed=9))
    z = (x - np.array([[10.0], [-3.0]])) / s[:, None]
    assert np.max(np.abs(z[0] - z[1])) < 1e-9


def test_gumbel_skewness(table1_gaussian):
    spec = SamplingSpec.from_problem(table1_gaussian, dist.GUMBEL, n_samples=1_000_000, seed=4)
    x = draw_samples(spec, rows=[0])[0]
    batches = x.reshape(20, -1)
    sk = [np.mean((b - b.mean()) ** 3) / b.std() ** 3 for b in batches]
    se = np.std(sk, ddof=1) / math.sqrt(len(sk))
    # minimum-type Gumbel skewness, -12 sqrt(6) zeta(3) / pi^3
    assert np.mean(sk) < 0
    assert abs(np.mean(sk) - (-1.139547099)) < 3 * se + 1e-3


@pytest.mark.parametrize("kind", dist.KINDS)
def test_copula_marginal_fidelity(table1, kind):
    from uflsalloc import datasets
    cov = datasets.load_synthetic_covariance()
    p = build_problem(table1, cov, 250, RiskSpec.gaussian(0.01))
    n = 200_000
    x = draw_samples(SamplingSpec.from_problem(p, kind, n_samples=n, seed=12), rows=[0, 5, 19])
    for r, i in enumerate([0, 5, 19]):
        mu, sd = table1.mu[i], table1.sigma[i]
        assert abs(x[r].mean() - mu) < 3 * sd / math.sqrt(n)
        kurt = {dist.GAUSSIAN: 0, dist.GUMBEL: 2.4, dist.LAPLACE: 3, dist.STUDENT_T: 6}[kind]
        assert abs(x[r].std() - sd) < 3 * sd * math.sqrt((2 + kurt) / (4 * n))


def test_copula_keeps_positive_dependence(table1):
    from uflsalloc import datasets
    p = build_problem(table1, datasets.load_synthetic_covariance(), 250, RiskSpec.gaussian(0.01))
    x = draw_samples(SamplingSpec.from_problem(p, dist.LAPLACE, n_samples=50_000, seed=1), rows=[0, 1])
    # adjacent feeders: 0.6 * 0.9; the copula shifts linear correlation slightly
    assert np.corrcoef(x)[0, 1] == pytest.approx(0.54, abs=0.03)


def test_worker_and_row_independence(table1_gaussian):
    spec = SamplingSpec.from_problem(table1_gaussian, dist.STUDENT_T, n_samples=3 * BLOCK_SIZE + 17,
                                     seed=77)
    a = draw_samples(spec)
    b = draw_samples(spec, workers=4)
    c = draw_samples(spec, rows=[7, 2])
    assert np.array_equal(a, b)
    assert np.array_equal(a[[7, 2]], c)


def test_validate_all_feeders_zero_threshold(table1_gaussian):
    spec = SamplingSpec.from_problem(table1_gaussian, n_samples=100_000, seed=0)
    rep = validate(_all_ones(table1_gaussian, 0.0), spec, threshold=0.0)
    assert rep.violation_fraction == 0.0
    assert abs(rep.expected_disconnection_mw - 505.0) < 4 * math.sqrt(242.0691 / 1e5)
    assert rep.histogram_counts.sum() == 100_000
    assert len(rep.histogram_counts) == 60 and len(rep.histogram_edges) == 61


def test_median_percentile_validation(table1):
    p = build_problem(table1, "diagonal", 250, RiskSpec.deterministic(0.5))
    r = solve(p)
    rep = validate(r, SamplingSpec.from_problem(p, n_samples=100_000, seed=42))
    assert abs(rep.violation_fraction - 0.5) < 0.01
    assert abs(rep.expected_disconnection_mw - 250) < 0.5


def test_validate_determinism(table1_gaussian):
    r = solve(table1_gaussian)
    spec = SamplingSpec.from_problem(table1_gaussian, dist.GUMBEL, n_samples=100_000, seed=42)
    a = validate(r, spec)
    b = validate(r, spec, workers=3)
    assert a == b
    c = validate(r, SamplingSpec.from_problem(table1_gaussian, dist.GUMBEL, n_samples=100_000, seed=43))
    assert a != c


def test_expected_disconnection_consistency():
    rng = np.random.default_rng(8)
    for _ in range(10):
        m = 8
        g = rng.normal(size=(m, m))
        cov = CovarianceMatrix.full(g @ g.T)
        fs = FeederSet.from_arrays(range(1, m + 1), rng.uniform(5, 30, m), cov.std)
        p = build_problem(fs, cov, 40.0, RiskSpec.gaussian(0.05))
        r = solve(p)
        n = 50_000
        rep = validate(r, SamplingSpec.from_problem(p, n_samples=n, seed=int(rng.integers(1 << 32))))
        sd = r.margin.sigma_delta
        assert abs(rep.expected_disconnection_mw - r.objective_mw) <= 4 * sd / math.sqrt(n) + 1e-9


def test_spec_validation(table1_gaussian):
    marg = tuple(dist.MarginalSpec(dist.GAUSSIAN, 1.0, 1.0) for _ in range(20))
    with pytest.raises(ModelError):
        SamplingSpec(marg, table1_gaussian.covariance)
    with pytest.raises(ModelError):
        SamplingSpec.from_problem(table1_gaussian, n_samples=0)
    with pytest.raises(ModelError):
        SamplingSpec.from_problem(table1_gaussian, seed=-1)


def test_validate_dimension_mismatch(table1_gaussian):
    small = build_problem(FeederSet.from_arrays([1, 2], [1.0, 2.0], [1.0, 1.0]), "diagonal", 1,
                          RiskSpec.gaussian(0.1))
    r = solve(small)
    with pytest.raises(ValueError):
        validate(r, SamplingSpec.from_problem(table1_gaussian, n_samples=10))


def test_correlation_study_diagonal_cases_coincide(table1_gaussian):
    spec = SamplingSpec.from_problem(table1_gaussian, n_samples=20_000, seed=5)
    study = correlation_study(table1_gaussian, table1_gaussian.covariance, spec)
    assert study.ignoring.result.selected_ids == study.considering.result.selected_ids
    assert study.ignoring.report == study.considering.report


def test_binomial_se():
    assert binomial_se(0.01, 100_000) == pytest.approx(math.sqrt(0.0099 / 1e5))
