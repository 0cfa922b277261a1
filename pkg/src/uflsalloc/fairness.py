"""Synthetic uncertainty: inflate the sigma of chosen feeders to rotate the selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .model import AllocationProblem, Feeder, FeederSet, ModelError
from .montecarlo import SamplingSpec, StudyCase, validate
from .solver import SolverConfig, solve


@dataclass(frozen=True)
class FairnessSpec:
    target_ids: frozenset[int]
    inflation_factor: float

    def __post_init__(self):
        object.__setattr__(self, "target_ids", frozenset(int(i) for i in self.target_ids))
        if not self.inflation_factor >= 1.0:
            raise ModelError(f"inflation factor must be >= 1, got {self.inflation_factor}")


def complement_ids(feeders: FeederSet, excluded: Iterable[int]) -> frozenset[int]:
    """Every feeder id not in ``excluded``."""
    excluded = set(excluded)
    unknown = excluded - set(feeders.ids)
    if unknown:
        raise ModelError(f"unknown feeder ids {sorted(unknown)}")
    return frozenset(i for i in feeders.ids if i not in excluded)


def apply_synthetic_uncertainty(problem: AllocationProblem, spec: FairnessSpec) -> AllocationProblem:
    """Scale targeted sigmas by the factor.

    Covariance row and column ``i`` are both multiplied by the factor, so
    variances grow by factor^2, cross-covariances by the factor, and every
    correlation coefficient is preserved.
    """
    ids = problem.feeders.ids
    unknown = spec.target_ids - set(ids)
    if unknown:
        raise ModelError(f"unknown feeder ids {sorted(unknown)}")
    if spec.inflation_factor == 1.0:
        return problem
    scale = np.array([spec.inflation_factor if i in spec.target_ids else 1.0 for i in ids])
    feeders = FeederSet(tuple(Feeder(f.id, f.mu, f.sigma * s)
                              for f, s in zip(problem.feeders.feeders, scale)))
    cov = problem.covariance.scaled(scale)
    return AllocationProblem(feeders, cov, problem.threshold, problem.risk, problem.total_demand)


@dataclass(frozen=True)
class FairnessOutcome:
    baseline: StudyCase
    adjusted: StudyCase
    added_ids: tuple[int, ...]
    removed_ids: tuple[int, ...]

    @property
    def unchanged(self) -> bool:
        return not self.added_ids and not self.removed_ids


def fairness_study(problem: AllocationProblem, spec: FairnessSpec, sampling: SamplingSpec,
                   config: SolverConfig | None = None, workers: int = 1) -> FairnessOutcome:
    """Solve with and without synthetic uncertainty and validate both
    selections against ``sampling``, which carries the true moments."""
    base = solve(problem, config)
    adjusted_problem = apply_synthetic_uncertainty(problem, spec)
    adj = base if adjusted_problem is problem else solve(adjusted_problem, config)
    base_case = StudyCase(base, validate(base, sampling, workers=workers))
    adj_case = (base_case if adj is base
                else StudyCase(adj, validate(adj, sampling, workers=workers)))
    before, after = set(base.selected_ids), set(adj.selected_ids)
    return FairnessOutcome(base_case, adj_case, tuple(sorted(after - before)),
                           tuple(sorted(before - after)))
