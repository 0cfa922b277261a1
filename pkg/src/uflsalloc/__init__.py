"""Risk-constrained selection of feeders for under-frequency load shedding.

Each feeder's net-load is uncertain (mean and standard deviation, optionally a
full covariance). The allocator picks the cheapest set of feeders whose
disconnection still sheds at least ``L`` MW, either at a fixed percentile, with
probability ``1 - eps`` under a Gaussian assumption, or with probability at
least ``1 - eps`` for every distribution with the given moments.
"""

from .constraint import build_constraint, evaluate_margin, is_feasible
from .dist import MarginalSpec, cantelli_inverse, inverse_normal_cdf
from .fairness import FairnessSpec, apply_synthetic_uncertainty, fairness_study
from .model import (AllocationProblem, AllocationResult, CovarianceMatrix, Feeder, FeederSet,
                    ModelError, RiskSpec, build_problem, to_percentage_problem)
from .montecarlo import SamplingSpec, ValidationReport, correlation_study, draw_samples, validate
from .solver import (Infeasible, NodeLimitExceeded, SolverConfig, solve, solve_bruteforce,
                     sweep_epsilon, sweep_percentile)

__version__ = "0.1.0"
