"""Correlated net-load sampling and empirical validation of an allocation.

Samples are generated in fixed-size blocks. Block ``b`` of feeder ``i`` is
drawn from its own Philox stream keyed by ``(seed, i, b)``, so the output does
not depend on how many worker threads process the blocks or in which order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import dist
from .model import (AllocationProblem, AllocationResult, CovarianceMatrix, DimensionError,
                    ModelError, psd_factor)
from .solver import SolverConfig, solve

BLOCK_SIZE = 8192
HISTOGRAM_BINS = 60
DEFAULT_SAMPLES = 100_000


@dataclass(frozen=True)
class SamplingSpec:
    marginals: tuple[dist.MarginalSpec, ...]
    covariance: CovarianceMatrix
    n_samples: int = DEFAULT_SAMPLES
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if self.n_samples < 1:
            raise ModelError("n_samples must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ModelError("seed must be a 64-bit unsigned integer")
        if len(self.marginals) != self.covariance.dim:
            raise DimensionError(
                f"{len(self.marginals)} marginals for a {self.covariance.dim}-dim covariance")
        std = self.covariance.std
        for i, (mg, s) in enumerate(zip(self.marginals, std)):
            if abs(mg.sigma - s) > 1e-6 * max(abs(s), abs(mg.sigma)) and abs(mg.sigma - s) > 1e-12:
                raise ModelError(
                    f"marginal {i} sigma {mg.sigma} does not match covariance diagonal {s}")

    @classmethod
    def from_problem(cls, problem: AllocationProblem, kind: str = dist.GAUSSIAN,
                     nu: float = dist.DEFAULT_NU, n_samples: int = DEFAULT_SAMPLES,
                     seed: int = 0, covariance: CovarianceMatrix | None = None) -> SamplingSpec:
        """Marginals take the feeder means; sigmas come from ``covariance``
        (default: the problem's own)."""
        cov = covariance if covariance is not None else problem.covariance
        if cov.dim != problem.m:
            raise DimensionError("sampling covariance does not match the feeder count")
        marginals = tuple(dist.MarginalSpec(kind, f.mu, float(s), nu)
                          for f, s in zip(problem.feeders.feeders, cov.std))
        return cls(marginals, cov, int(n_samples), int(seed))

    @property
    def m(self) -> int:
        return len(self.marginals)


@dataclass(frozen=True, eq=False)
class ValidationReport:
    violation_fraction: float
    expected_disconnection_mw: float
    n_samples: int
    seed: int
    histogram_counts: np.ndarray
    histogram_edges: np.ndarray
    threshold: float
    distribution: str = ""

    @property
    def violations(self) -> int:
        return int(round(self.violation_fraction * self.n_samples))

    def standard_error(self, p: float | None = None) -> float:
        """Binomial standard error of a violation fraction at probability ``p``."""
        p = self.violation_fraction if p is None else p
        return math.sqrt(p * (1.0 - p) / self.n_samples)

    def __eq__(self, other):
        if not isinstance(other, ValidationReport):
            return NotImplemented
        return (self.violation_fraction == other.violation_fraction
                and self.expected_disconnection_mw == other.expected_disconnection_mw
                and self.n_samples == other.n_samples and self.seed == other.seed
                and self.threshold == other.threshold
                and self.distribution == other.distribution
                and np.array_equal(self.histogram_counts, other.histogram_counts)
                and np.array_equal(self.histogram_edges, other.histogram_edges))

    __hash__ = None


def _stream(seed: int, feeder: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(feeder, block))))


def _blocks(n: int) -> list[tuple[int, int]]:
    return [(s, min(s + BLOCK_SIZE, n)) for s in range(0, n, BLOCK_SIZE)]


class _Sampler:
    """Turns a block index into correlated marginal samples for chosen rows."""

    def __init__(self, spec: SamplingSpec, rows: Sequence[int]):
        self.spec = spec
        self.rows = list(rows)
        r = spec.covariance.correlation()
        self.factor = psd_factor(r)[self.rows]
        self.live = np.flatnonzero(np.any(self.factor != 0, axis=0))

    def block(self, b: int, start: int, stop: int) -> np.ndarray:
        spec = self.spec
        nb = stop - start
        # Fixed-order accumulation instead of BLAS so every row is bit-identical
        # regardless of which other rows are requested.
        w = np.zeros((len(self.rows), nb))
        for c in self.live:
            z = _stream(spec.seed, int(c), b).standard_normal(nb)
            coef = self.factor[:, c]
            for r in np.flatnonzero(coef):
                w[r] += coef[r] * z
        out = np.empty_like(w)
        for r, i in enumerate(self.rows):
            out[r] = dist.transform_normal(spec.marginals[i], w[r])
        return out


def _run_blocks(fn, n: int, workers: int):
    blocks = _blocks(n)
    jobs = [(b, s, e) for b, (s, e) in enumerate(blocks)]
    if workers <= 1 or len(jobs) == 1:
        return [fn(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda j: fn(*j), jobs))


def draw_samples(spec: SamplingSpec, workers: int = 1, rows: Sequence[int] | None = None) -> np.ndarray:
    """Sampled net-loads, shape ``(len(rows), n_samples)``; all feeders by default.

    Gaussian marginals are ``mu + sigma * w`` where ``w`` are standard normals
    correlated through a factor of the correlation matrix implied by the
    covariance. Other marginals are obtained through a Gaussian copula: each
    ``w`` is pushed through Phi and then the marginal's inverse CDF.
    A given row's samples do not depend on which other rows are requested.
    """
    rows = list(range(spec.m)) if rows is None else [int(r) for r in rows]
    sampler = _Sampler(spec, rows)
    parts = _run_blocks(sampler.block, spec.n_samples, workers)
    if not rows:
        return np.zeros((0, spec.n_samples))
    return np.concatenate(parts, axis=1)


def validate(result: AllocationResult, spec: SamplingSpec, threshold: float | None = None,
             workers: int = 1) -> ValidationReport:
    """Empirical violation rate and expected disconnection of a selection.

    A sample violates when the sampled delivered load is strictly below the
    threshold. The expected disconnection is the sample mean over all samples.
    """
    x = np.asarray(result.selection)
    if len(x) != spec.m:
        raise DimensionError(f"selection has {len(x)} entries, sampling spec has {spec.m} feeders")
    L = result.threshold if threshold is None else float(threshold)
    rows = np.flatnonzero(x).tolist()
    sampler = _Sampler(spec, rows)

    def totals(b, start, stop):
        if not rows:
            return np.zeros(stop - start)
        return np.sum(sampler.block(b, start, stop), axis=0)

    delivered = np.concatenate(_run_blocks(totals, spec.n_samples, workers))
    n = spec.n_samples
    violations = int(np.count_nonzero(delivered < L))
    mean = math.fsum(delivered.tolist()) / n
    counts, edges = np.histogram(delivered, bins=HISTOGRAM_BINS,
                                 range=(float(delivered.min()), float(delivered.max())))
    kinds = {mg.kind for mg in spec.marginals}
    return ValidationReport(
        violation_fraction=violations / n, expected_disconnection_mw=mean, n_samples=n,
        seed=spec.seed, histogram_counts=counts, histogram_edges=edges, threshold=L,
        distribution=kinds.pop() if len(kinds) == 1 else "mixed")


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


@dataclass(frozen=True)
class StudyCase:
    result: AllocationResult
    report: ValidationReport


@dataclass(frozen=True)
class CorrelationStudy:
    ignoring: StudyCase
    considering: StudyCase


def correlation_study(problem: AllocationProblem, true_covariance: CovarianceMatrix,
                      spec: SamplingSpec, config: SolverConfig | None = None,
                      workers: int = 1) -> CorrelationStudy:
    """Optimise with and without the off-diagonal covariance; validate both
    against ``spec``, which should sample from ``true_covariance``."""
    if true_covariance.dim != problem.m:
        raise DimensionError("true covariance does not match the feeder count")
    diag = CovarianceMatrix(np.diag(np.diag(true_covariance.entries)), mode="diagonal")
    ignoring_problem = AllocationProblem(problem.feeders, diag, problem.threshold, problem.risk,
                                         problem.total_demand)
    considering_problem = AllocationProblem(problem.feeders, true_covariance, problem.threshold,
                                            problem.risk, problem.total_demand)
    cases = []
    for p in (ignoring_problem, considering_problem):
        res = solve(p, config)
        cases.append(StudyCase(res, validate(res, spec, workers=workers)))
    return CorrelationStudy(*cases)
