"""Objective and feasibility predicate for each allocation method.

All three methods share one shape: minimise ``c @ x`` subject to

    c @ x - L >= k * sqrt(x^T Sigma x)

with ``k = 0`` for the deterministic method (where ``c`` holds a fixed
percentile of each feeder), ``k = Phi^-1(1 - eps)`` under the Gaussian
assumption and ``k = sqrt((1 - eps) / eps)`` for the distributionally robust
bound. For both chance-constrained methods ``c`` is the vector of means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dist
from .model import (DETERMINISTIC, GAUSSIAN_CC, ROBUST_CC, AllocationProblem,
                    CovarianceMatrix, DimensionError, ReliabilityMargin, RiskSpec)

FEASIBILITY_TOL = 1e-9


def safety_factor(risk: RiskSpec) -> float:
    return risk.safety_factor


@dataclass(frozen=True, eq=False)
class SocForm:
    """``||A x + b||_2 <= c @ x + d`` with ``A^T A = Sigma``."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float

    def lhs(self, x) -> float:
        return float(np.linalg.norm(self.A @ np.asarray(x, dtype=float) + self.b))

    def rhs(self, x) -> float:
        return float(self.c @ np.asarray(x, dtype=float) + self.d)

    def holds(self, x, tol: float = 0.0) -> bool:
        return self.lhs(x) <= self.rhs(x) + tol


@dataclass(frozen=True, eq=False)
class ConstraintForm:
    kind: str
    objective_coeffs: np.ndarray
    safety_factor_k: float
    threshold: float
    soc: SocForm | None = None

    @property
    def m(self) -> int:
        return len(self.objective_coeffs)


def build_constraint(problem: AllocationProblem) -> ConstraintForm:
    risk = problem.risk
    mu = problem.feeders.mu
    L = problem.threshold
    if risk.method == DETERMINISTIC:
        shift = dist.inverse_normal_cdf(risk.percentile)
        coeffs = mu + problem.feeders.sigma * shift
        coeffs.setflags(write=False)
        return ConstraintForm(DETERMINISTIC, coeffs, 0.0, L)

    k = risk.safety_factor
    assert k > 0
    A = problem.covariance.factor.T
    soc = SocForm(A=A, b=np.zeros(problem.m), c=mu / k, d=-L / k)
    return ConstraintForm(risk.method, mu, k, L, soc)


def evaluate_margin(form: ConstraintForm, covariance: CovarianceMatrix,
                    selection) -> ReliabilityMargin:
    """Shortfall moments and constraint slack for one selection.

    The selection is feasible iff ``slack >= -FEASIBILITY_TOL``.
    """
    x = np.asarray(selection, dtype=float)
    if x.shape != (form.m,) or covariance.dim != form.m:
        raise DimensionError(
            f"selection of shape {x.shape} does not match {form.m} feeders")
    idx = np.flatnonzero(x)
    planned = math.fsum(form.objective_coeffs[idx])
    var = float(np.sum(covariance.entries[np.ix_(idx, idx)])) if len(idx) else 0.0
    sigma_delta = math.sqrt(max(var, 0.0))
    k = form.safety_factor_k
    slack = (planned - form.threshold) - k * sigma_delta
    return ReliabilityMargin(mu_delta=form.threshold - planned, sigma_delta=sigma_delta,
                             safety_factor_k=k, slack=slack)


def is_feasible(margin: ReliabilityMargin) -> bool:
    return margin.slack >= -FEASIBILITY_TOL


__all__ = ["FEASIBILITY_TOL", "ConstraintForm", "SocForm", "build_constraint",
           "evaluate_margin", "is_feasible", "safety_factor", "GAUSSIAN_CC", "ROBUST_CC"]
