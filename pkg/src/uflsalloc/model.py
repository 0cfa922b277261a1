"""Domain types shared across the allocation engine.

Everything here is immutable after construction. Arrays exposed by these
types are flagged read-only so a problem can be shared freely between
threads.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import dist

SYMMETRY_ATOL = 1e-9
PSD_TOL = 1e-8

DETERMINISTIC = "deterministic"
GAUSSIAN_CC = "gaussian-cc"
ROBUST_CC = "dr-cc"
METHODS = (DETERMINISTIC, GAUSSIAN_CC, ROBUST_CC)


class ModelError(ValueError):
    """Invalid input to one of the model constructors."""


class DimensionError(ModelError):
    pass


class NotPSDError(ModelError):
    pass


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def psd_factor(matrix, tol: float = PSD_TOL) -> np.ndarray:
    """Factor a symmetric PSD matrix as ``F @ F.T`` by pivoted Cholesky.

    ``F`` is a row permutation of a lower-triangular factor, so it is square
    even for rank-deficient input; columns beyond the numerical rank are zero.
    Pivots in ``[-tol, tol]`` are clamped to zero. Anything more negative
    raises :class:`NotPSDError`.
    """
    a = np.array(matrix, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    f = np.zeros((n, n))
    remaining = list(range(n))
    for k in range(n):
        diag = a[remaining, remaining]
        j = int(np.argmax(diag))
        pivot = diag[j]
        if pivot <= tol:
            # Remaining Schur complement must be numerically zero.
            rest = a[np.ix_(remaining, remaining)]
            lowest = np.linalg.eigvalsh(0.5 * (rest + rest.T))[0]
            if lowest < -tol:
                raise NotPSDError(
                    f"matrix is not positive semi-definite (eigenvalue {lowest:.3e})")
            break
        p = remaining.pop(j)
        col = a[remaining, p] / np.sqrt(pivot)
        f[p, k] = np.sqrt(pivot)
        f[remaining, k] = col
        a[np.ix_(remaining, remaining)] -= np.outer(col, col)
    return f


@dataclass(frozen=True)
class Feeder:
    id: int
    mu: float
    sigma: float


@dataclass(frozen=True)
class FeederSet:
    """Candidate feeders in canonical index order.

    Index ``i`` of every covariance row and selection vector refers to
    ``feeders[i]``.
    """

    feeders: tuple[Feeder, ...]

    def __post_init__(self):
        feeders = tuple(self.feeders)
        object.__setattr__(self, "feeders", feeders)
        if not feeders:
            raise ModelError("feeder set is empty")
        seen = set()
        for f in feeders:
            if isinstance(f.id, bool) or int(f.id) != f.id or f.id <= 0:
                raise ModelError(f"feeder id must be a positive integer, got {f.id!r}")
            if f.id in seen:
                raise ModelError(f"duplicate feeder id {f.id}")
            seen.add(f.id)
            if not np.isfinite(f.mu) or not np.isfinite(f.sigma):
                raise ModelError(f"feeder {f.id}: non-finite moments")
            if f.sigma < 0:
                raise ModelError(f"feeder {f.id}: negative sigma {f.sigma}")

    @classmethod
    def from_arrays(cls, ids: Sequence[int], mu: Sequence[float],
                    sigma: Sequence[float]) -> FeederSet:
        if not len(ids) == len(mu) == len(sigma):
            raise DimensionError("ids, mu and sigma must have equal length")
        return cls(tuple(Feeder(int(i), float(a), float(s))
                         for i, a, s in zip(ids, mu, sigma)))

    def __len__(self) -> int:
        return len(self.feeders)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(f.id for f in self.feeders)

    @property
    def mu(self) -> np.ndarray:
        return _frozen([f.mu for f in self.feeders])

    @property
    def sigma(self) -> np.ndarray:
        return _frozen([f.sigma for f in self.feeders])

    def index_of(self, feeder_id: int) -> int:
        for i, f in enumerate(self.feeders):
            if f.id == feeder_id:
                return i
        raise KeyError(feeder_id)


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Symmetric PSD covariance of net-load forecast errors, in MW^2."""

    entries: np.ndarray
    mode: str = "full"
    factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=float, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise DimensionError(f"covariance must be a non-empty square matrix, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ModelError("covariance has non-finite entries")
        if np.max(np.abs(a - a.T)) > SYMMETRY_ATOL:
            raise ModelError("covariance is not symmetric")
        if self.mode not in ("diagonal", "full"):
            raise ModelError(f"unknown covariance mode {self.mode!r}")
        if self.mode == "diagonal" and np.count_nonzero(a - np.diag(np.diag(a))):
            raise ModelError("diagonal covariance has non-zero off-diagonal entries")
        a = 0.5 * (a + a.T)
        object.__setattr__(self, "factor", _frozen(psd_factor(a)))
        object.__setattr__(self, "entries", _frozen(a))

    @classmethod
    def diagonal(cls, feeders: FeederSet) -> CovarianceMatrix:
        return cls(np.diag(feeders.sigma ** 2), mode="diagonal")

    @classmethod
    def full(cls, matrix) -> CovarianceMatrix:
        return cls(np.asarray(matrix, dtype=float), mode="full")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.entries), 0.0, None))

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.entries >= 0))

    def correlation(self) -> np.ndarray:
        """Correlation matrix; zero-variance coordinates get an identity row."""
        s = self.std
        live = s > 0
        r = np.eye(self.dim)
        idx = np.flatnonzero(live)
        r[np.ix_(idx, idx)] = self.entries[np.ix_(idx, idx)] / np.outer(s[idx], s[idx])
        np.fill_diagonal(r, 1.0)
        return r

    def variance_of(self, selection) -> float:
        """x^T Sigma x for a selection vector."""
        x = np.asarray(selection, dtype=float)
        return float(x @ self.entries @ x)

    def scaled(self, factors) -> CovarianceMatrix:
        """Scale row and column i by ``factors[i]``."""
        d = np.asarray(factors, dtype=float)
        return CovarianceMatrix(self.entries * np.outer(d, d), mode=self.mode)

    def __eq__(self, other):
        if not isinstance(other, CovarianceMatrix):
            return NotImplemented
        return self.mode == other.mode and np.array_equal(self.entries, other.entries)

    __hash__ = None


@dataclass(frozen=True)
class RiskSpec:
    """Risk method plus its parameter.

    Use the constructors :meth:`deterministic`, :meth:`gaussian` and
    :meth:`robust` rather than filling the fields by hand.
    """

    method: str
    epsilon: float | None = None
    percentile: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ModelError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == DETERMINISTIC:
            p = self.percentile
            if p is None or not 0.0 < p < 1.0:
                raise ModelError(f"percentile must lie in (0, 1), got {p!r}")
        else:
            e = self.epsilon
            if e is None or not 0.0 < e < 0.5:
                raise ModelError(f"epsilon must lie in (0, 0.5), got {e!r}")

    @classmethod
    def deterministic(cls, percentile: float) -> RiskSpec:
        return cls(DETERMINISTIC, percentile=float(percentile))

    @classmethod
    def gaussian(cls, epsilon: float) -> RiskSpec:
        return cls(GAUSSIAN_CC, epsilon=float(epsilon))

    @classmethod
    def robust(cls, epsilon: float) -> RiskSpec:
        return cls(ROBUST_CC, epsilon=float(epsilon))

    @property
    def is_chance_constrained(self) -> bool:
        return self.method != DETERMINISTIC

    @property
    def safety_factor(self) -> float:
        if self.method == GAUSSIAN_CC:
            return float(dist.inverse_normal_cdf(1.0 - self.epsilon))
        if self.method == ROBUST_CC:
            return dist.cantelli_inverse(1.0 - self.epsilon)
        return 0.0

    def with_epsilon(self, epsilon: float) -> RiskSpec:
        return dataclasses.replace(self, epsilon=float(epsilon))

    def with_percentile(self, percentile: float) -> RiskSpec:
        return dataclasses.replace(self, percentile=float(percentile))


@dataclass(frozen=True)
class AllocationProblem:
    feeders: FeederSet
    covariance: CovarianceMatrix
    threshold: float
    risk: RiskSpec
    total_demand: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.threshold) or self.threshold <= 0:
            raise ModelError(f"threshold must be positive, got {self.threshold!r}")
        if self.covariance.dim != len(self.feeders):
            raise DimensionError(
                f"covariance is {self.covariance.dim}x{self.covariance.dim} "
                f"but there are {len(self.feeders)} feeders")
        if self.total_demand is not None and not self.total_demand > 0:
            raise ModelError("total_demand must be positive")

    @property
    def m(self) -> int:
        return len(self.feeders)

    def with_risk(self, risk: RiskSpec) -> AllocationProblem:
        return dataclasses.replace(self, risk=risk)


@dataclass(frozen=True)
class ReliabilityMargin:
    """Moments of the shortfall for one selection.

    ``mu_delta`` is the threshold minus the method's planned delivery
    (objective coefficients dotted with the selection). For both chance
    constrained methods the coefficients are the feeder means.
    """

    mu_delta: float
    sigma_delta: float
    safety_factor_k: float
    slack: float


@dataclass(frozen=True)
class SolverStats:
    nodes_explored: int
    proven_optimal: bool
    optimality_gap: float = 0.0


@dataclass(frozen=True, eq=False)
class AllocationResult:
    selection: np.ndarray
    objective_mw: float
    margin: ReliabilityMargin
    method_echo: RiskSpec
    solver_stats: SolverStats
    feeder_ids: tuple[int, ...]
    threshold: float

    def __post_init__(self):
        x = np.asarray(self.selection)
        if x.ndim != 1 or not np.all((x == 0) | (x == 1)):
            raise ModelError("selection must be a binary vector")
        if len(x) != len(self.feeder_ids):
            raise DimensionError("selection length does not match feeder ids")
        object.__setattr__(self, "selection", _frozen(x, dtype=np.int8))

    @property
    def selected_ids(self) -> tuple[int, ...]:
        return tuple(i for i, s in zip(self.feeder_ids, self.selection) if s)

    @property
    def selected_indices(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.selection))

    def same_allocation(self, other: AllocationResult) -> bool:
        """Equality ignoring solver statistics."""
        return (np.array_equal(self.selection, other.selection)
                and self.objective_mw == other.objective_mw
                and self.margin == other.margin
                and self.method_echo == other.method_echo
                and self.feeder_ids == other.feeder_ids
                and self.threshold == other.threshold)

    def __eq__(self, other):
        if not isinstance(other, AllocationResult):
            return NotImplemented
        return self.same_allocation(other) and self.solver_stats == other.solver_stats

    __hash__ = None


def build_problem(feeders: FeederSet, covariance: CovarianceMatrix | str,
                  threshold: float, risk: RiskSpec) -> AllocationProblem:
    """Assemble a validated problem. ``covariance="diagonal"`` uses the feeder sigmas."""
    if isinstance(covariance, str):
        if covariance != "diagonal":
            raise ModelError(f"covariance must be a matrix or 'diagonal', got {covariance!r}")
        covariance = CovarianceMatrix.diagonal(feeders)
    return AllocationProblem(feeders, covariance, float(threshold), risk)


def to_percentage_problem(problem: AllocationProblem, total_demand: float) -> AllocationProblem:
    """Rescale a MW problem to fractions of ``total_demand``.

    Means, sigmas and the threshold are divided by the demand, the
    covariance by its square. The optimal selection is unchanged.
    """
    if not np.isfinite(total_demand) or total_demand <= 0:
        raise ModelError(f"total_demand must be positive, got {total_demand!r}")
    d = float(total_demand)
    feeders = FeederSet(tuple(Feeder(f.id, f.mu / d, f.sigma / d)
                              for f in problem.feeders.feeders))
    cov = CovarianceMatrix(problem.covariance.entries / d ** 2, mode=problem.covariance.mode)
    return AllocationProblem(feeders, cov, problem.threshold / d, problem.risk,
                             total_demand=d)
