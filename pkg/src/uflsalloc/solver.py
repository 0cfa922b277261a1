"""Exact minimisation over binary feeder selections.

``solve`` runs a best-first branch-and-bound; ``solve_bruteforce`` enumerates
every subset and exists mainly as a test oracle. Both end with the same exact
feasibility predicate (:func:`constraint.evaluate_margin`) and the same
canonical tie-break, so they return identical selections.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .constraint import (FEASIBILITY_TOL, ConstraintForm, build_constraint,
                         evaluate_margin, is_feasible)
from .model import AllocationProblem, AllocationResult, RiskSpec, SolverStats

# Objectives within this relative distance are ties; the tie goes to the
# lexicographically smallest sorted index tuple.
TIE_RTOL = 1e-12
BRUTEFORCE_MAX_M = 25


class SolverError(RuntimeError):
    pass


class Infeasible(SolverError):
    """No selection satisfies the constraint."""


class NodeLimitExceeded(SolverError):
    """Node limit hit before any feasible selection was found."""


@dataclass(frozen=True)
class SolverConfig:
    node_limit: int = 10 ** 8
    allow_bnb_pruning: bool = True

    def __post_init__(self):
        if self.node_limit <= 0:
            raise ValueError("node_limit must be positive")


def _tie_tol(a: float, b: float) -> float:
    return TIE_RTOL * max(abs(a), abs(b), 1.0)


def _better(obj, key, best_obj, best_key) -> bool:
    if best_obj is None:
        return True
    tol = _tie_tol(obj, best_obj)
    if obj < best_obj - tol:
        return True
    return abs(obj - best_obj) <= tol and key < best_key


def _result(problem, form, chosen, nodes, proven) -> AllocationResult:
    x = np.zeros(problem.m, dtype=np.int8)
    x[list(chosen)] = 1
    margin = evaluate_margin(form, problem.covariance, x)
    objective = math.fsum(form.objective_coeffs[list(chosen)])
    return AllocationResult(
        selection=x, objective_mw=objective, margin=margin, method_echo=problem.risk,
        solver_stats=SolverStats(nodes_explored=nodes, proven_optimal=proven),
        feeder_ids=problem.feeders.ids, threshold=problem.threshold)


def solve(problem: AllocationProblem, config: SolverConfig | None = None) -> AllocationResult:
    """Minimum-objective feasible selection.

    Raises :class:`Infeasible` when no selection is feasible. If the node
    limit is reached, the best selection found so far is returned with
    ``solver_stats.proven_optimal = False``; with no incumbent at all,
    :class:`NodeLimitExceeded` is raised.
    """
    config = config or SolverConfig()
    form = build_constraint(problem)
    cov = problem.covariance
    sigma = cov.entries
    c = np.asarray(form.objective_coeffs, dtype=float)
    m = problem.m
    L = form.threshold
    k = form.safety_factor_k
    prune = config.allow_bnb_pruning
    # Adding a feeder can only grow x^T Sigma x when every entry is >= 0.
    monotone = cov.nonnegative

    order = sorted(range(m), key=lambda i: (-c[i], i))
    pos_rest = np.zeros(m + 1)
    neg_rest = np.zeros(m + 1)
    min_rest = np.full(m + 1, math.inf)
    for d in range(m - 1, -1, -1):
        ci = c[order[d]]
        pos_rest[d] = pos_rest[d + 1] + max(ci, 0.0)
        neg_rest[d] = neg_rest[d + 1] + min(ci, 0.0)
        min_rest[d] = min(min_rest[d + 1], ci)
    pos_rest = pos_rest.tolist()
    neg_rest = neg_rest.tolist()
    min_rest = min_rest.tolist()
    diag = np.diag(sigma).tolist()

    scale = max(abs(L), 1.0)
    reach_tol = 2 * FEASIBILITY_TOL + 1e-12 * scale
    screen = 1e-6 * scale
    best_obj = None
    best_key = None
    x = np.zeros(m)

    def consider(chosen: tuple[int, ...]):
        nonlocal best_obj, best_key
        key = tuple(sorted(chosen))
        obj = math.fsum(c[list(key)])
        if not _better(obj, key, best_obj, best_key):
            return
        x[:] = 0.0
        x[list(key)] = 1.0
        if is_feasible(evaluate_margin(form, cov, x)):
            best_obj, best_key = obj, key

    def bound(depth, partial, var):
        """Lower bound on the objective of any completion, or None when no
        completion can be feasible."""
        sd = math.sqrt(var) if monotone and var > 0 else 0.0
        if partial + pos_rest[depth] - L - k * sd < -reach_tol:
            return None
        lb = partial + neg_rest[depth]
        floor = L + k * sd - FEASIBILITY_TOL
        return lb if lb > floor else floor

    consider(())
    counter = itertools.count()
    heap = []
    root_lb = bound(0, 0.0, 0.0)
    if root_lb is not None or not prune:
        heap.append((root_lb if root_lb is not None else -math.inf, 0, next(counter),
                     (), 0.0, 0.0, np.zeros(m)))
    cutoff = math.inf
    nodes = 0
    proven = True
    lb = -math.inf
    while heap:
        lb, neg_depth, _, chosen, partial, var, cross = heapq.heappop(heap)
        if prune and lb > cutoff:
            continue
        nodes += 1
        if nodes > config.node_limit:
            proven = False
            break
        depth = -neg_depth
        if depth == m:
            continue
        j = order[depth]
        inc = chosen + (j,)
        inc_partial = partial + c[j]
        inc_var = var + 2.0 * cross[j] + diag[j]
        inc_slack = inc_partial - L - k * math.sqrt(max(inc_var, 0.0))
        # Cheap incremental screen before the exact check.
        if (inc_partial <= cutoff + screen) and inc_slack >= -screen:
            consider(inc)
            if best_obj is not None:
                cutoff = best_obj + 1e-9 * max(abs(best_obj), 1.0)
        # A feasible set beats all of its supersets when every remaining
        # coefficient is strictly positive.
        expand_inc = not (prune and inc_slack > screen
                          and min_rest[depth + 1] > _tie_tol(inc_partial, inc_partial))
        children = []
        if expand_inc:
            children.append((inc, inc_partial, inc_var, cross + sigma[:, j]))
        children.append((chosen, partial, var, cross))
        for ch, p, v, cr in children:
            child_lb = bound(depth + 1, p, v)
            if prune and (child_lb is None or child_lb > cutoff):
                continue
            if child_lb is None:
                child_lb = -math.inf
            heapq.heappush(heap, (child_lb, -(depth + 1), next(counter), ch, p, v, cr))

    if best_obj is None:
        if not proven:
            raise NodeLimitExceeded(f"node limit {config.node_limit} reached without a feasible selection")
        raise Infeasible("no selection of feeders satisfies the constraint")
    res = _result(problem, form, best_key, nodes, proven)
    if not proven:
        gap = max(best_obj - lb, 0.0) / max(abs(best_obj), 1e-12)
        res = AllocationResult(res.selection, res.objective_mw, res.margin, res.method_echo,
                               SolverStats(nodes, False, gap), res.feeder_ids, res.threshold)
    return res


def _bits(start: int, stop: int, m: int) -> np.ndarray:
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(m)) & 1).astype(np.float64)


def solve_bruteforce(problem: AllocationProblem, chunk: int = 1 << 16) -> AllocationResult:
    """Enumerate all 2^m selections (m <= 25)."""
    m = problem.m
    if m > BRUTEFORCE_MAX_M:
        raise ValueError(f"brute force is limited to {BRUTEFORCE_MAX_M} feeders, got {m}")
    form = build_constraint(problem)
    c = np.asarray(form.objective_coeffs, dtype=float)
    sigma = problem.covariance.entries
    L, k = form.threshold, form.safety_factor_k
    loose = FEASIBILITY_TOL + 1e-9 * max(abs(L), 1.0)

    objs, codes = [], []
    total = 1 << m
    for start in range(0, total, chunk):
        X = _bits(start, min(start + chunk, total), m)
        obj = X @ c
        var = np.einsum("ij,jk,ik->i", X, sigma, X)
        slack = obj - L - k * np.sqrt(np.clip(var, 0.0, None))
        ok = slack >= -loose
        objs.append(obj[ok])
        codes.append(np.arange(start, start + len(X), dtype=np.int64)[ok])
    objs = np.concatenate(objs)
    codes = np.concatenate(codes)
    if len(objs) == 0:
        raise Infeasible("no selection of feeders satisfies the constraint")

    best_obj = best_key = None
    x = np.zeros(m)
    for i in np.argsort(objs, kind="stable"):
        if best_obj is not None and objs[i] > best_obj + 1e-9 * max(abs(best_obj), 1.0):
            break
        key = tuple(b for b in range(m) if (int(codes[i]) >> b) & 1)
        obj = math.fsum(c[list(key)])
        x[:] = 0.0
        x[list(key)] = 1.0
        if not is_feasible(evaluate_margin(form, problem.covariance, x)):
            continue
        if best_obj is None:
            best_obj, best_key = obj, key
        elif _better(obj, key, best_obj, best_key):
            best_obj, best_key = obj, key
    if best_obj is None:
        raise Infeasible("no selection of feeders satisfies the constraint")
    return _result(problem, form, best_key, 1 << m, True)


def sweep_epsilon(problem: AllocationProblem, epsilons: Iterable[float],
                  config: SolverConfig | None = None) -> list[AllocationResult]:
    """Re-solve a chance-constrained problem at each risk level."""
    if not problem.risk.is_chance_constrained:
        raise ValueError("epsilon sweep needs a chance-constrained problem")
    return [solve(problem.with_risk(problem.risk.with_epsilon(e)), config) for e in epsilons]


def sweep_percentile(problem: AllocationProblem, percentiles: Iterable[float],
                     config: SolverConfig | None = None) -> list[AllocationResult]:
    """Re-solve a deterministic problem at each planning percentile."""
    return [solve(problem.with_risk(RiskSpec.deterministic(p)), config) for p in percentiles]
