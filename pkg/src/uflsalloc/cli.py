"""Command-line front end.

Subcommands: allocate, validate, sweep, figure1, fairness, correlation-study.
Every flag can also be supplied through an environment variable named
``UFLS_`` plus the flag in upper case with dashes turned into underscores
(``--epsilon`` -> ``UFLS_EPSILON``). A flag given on the command line wins
over the environment.

Exit codes: 0 optimal, 2 infeasible, 3 node limit reached, 64 usage error,
65 data format error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dist, files
from .fairness import FairnessSpec, fairness_study
from .model import (DETERMINISTIC, AllocationProblem, CovarianceMatrix, ModelError,
                    RiskSpec, build_problem)
from .montecarlo import SamplingSpec, correlation_study, validate
from .solver import Infeasible, NodeLimitExceeded, SolverConfig, solve

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NODE_LIMIT = 3
EXIT_USAGE = 64
EXIT_DATA = 65

ENV_PREFIX = "UFLS_"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


@dataclass
class RunConfig:
    feeders_path: Path | None
    covariance: str
    threshold_mw: float | None
    method: str
    percentile: float | None
    epsilon: float | None
    distribution: str
    nu: float
    n_samples: int
    seed: int
    workers: int
    output: Path | None
    node_limit: int
    fairness_targets: list[int] | None = None

    @classmethod
    def from_args(cls, args) -> RunConfig:
        return cls(
            feeders_path=getattr(args, "feeders", None),
            covariance=getattr(args, "covariance", "diagonal"),
            threshold_mw=getattr(args, "L", None),
            method=getattr(args, "method", DETERMINISTIC),
            percentile=getattr(args, "percentile", None),
            epsilon=getattr(args, "epsilon", None),
            distribution=getattr(args, "distribution", dist.GAUSSIAN),
            nu=getattr(args, "nu", dist.DEFAULT_NU),
            n_samples=getattr(args, "samples", 100_000),
            seed=getattr(args, "seed", 0),
            workers=getattr(args, "workers", 1),
            output=getattr(args, "output", None),
            node_limit=getattr(args, "node_limit", 10 ** 8),
            fairness_targets=getattr(args, "fairness_targets", None))

    def risk(self) -> RiskSpec:
        if self.method == DETERMINISTIC:
            if self.percentile is None:
                raise UsageError("--percentile is required with --method deterministic")
            if self.epsilon is not None:
                raise UsageError("--epsilon does not apply to --method deterministic")
            try:
                return RiskSpec.deterministic(self.percentile)
            except ModelError as exc:
                raise UsageError(str(exc))
        if self.epsilon is None:
            raise UsageError(f"--epsilon is required with --method {self.method}")
        if self.percentile is not None:
            raise UsageError(f"--percentile does not apply to --method {self.method}")
        try:
            return RiskSpec(self.method, epsilon=self.epsilon)
        except ModelError as exc:
            raise UsageError(str(exc))

    def problem(self, risk: RiskSpec | None = None) -> AllocationProblem:
        feeders = files.read_feeders(self.feeders_path)
        if self.covariance == "diagonal":
            cov: CovarianceMatrix | str = "diagonal"
        else:
            cov = files.read_covariance(self.covariance, m=len(feeders))
        if self.threshold_mw is None:
            raise UsageError("--L is required")
        return build_problem(feeders, cov, self.threshold_mw, risk or self.risk())

    def sampling(self, problem: AllocationProblem) -> SamplingSpec:
        return SamplingSpec.from_problem(problem, self.distribution, self.nu,
                                         self.n_samples, self.seed)

    def solver(self) -> SolverConfig:
        return SolverConfig(node_limit=self.node_limit)


def _emit(doc: dict, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(files.dumps_document(doc))
    else:
        files.write_document(doc, output)


def cmd_allocate(cfg: RunConfig) -> int:
    problem = cfg.problem()
    result = solve(problem, cfg.solver())
    _emit(files.result_to_document(result), cfg.output)
    return EXIT_OK if result.solver_stats.proven_optimal else EXIT_NODE_LIMIT


def cmd_validate(cfg: RunConfig, result_path: Path, histogram_path: Path | None) -> int:
    result = files.result_from_document(files.read_document(result_path), str(result_path))
    feeders = files.read_feeders(cfg.feeders_path)
    if result.feeder_ids != feeders.ids:
        raise ModelError(f"result feeder ids {list(result.feeder_ids)} do not match the feeder file")
    if cfg.threshold_mw is None:
        cfg.threshold_mw = result.threshold
    problem = cfg.problem(result.method_echo)
    report = validate(result, cfg.sampling(problem), cfg.threshold_mw, workers=cfg.workers)
    _emit(files.report_to_document(report, result), cfg.output)
    if histogram_path is not None:
        files.write_text(histogram_path, files.format_histogram_csv(report))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, percentiles: list[float] | None, epsilons: list[float] | None) -> int:
    if (percentiles is None) == (epsilons is None):
        raise UsageError("sweep needs exactly one of --percentiles or --epsilons")
    if percentiles is not None:
        if cfg.method != DETERMINISTIC:
            raise UsageError("--percentiles sweeps need --method deterministic")
        name, values = "percentile_fraction", percentiles
        risks = [RiskSpec.deterministic(p) for p in values]
    else:
        if cfg.method == DETERMINISTIC:
            raise UsageError("--epsilons sweeps need a chance-constrained --method")
        name, values = "epsilon_fraction", epsilons
        risks = [RiskSpec(cfg.method, epsilon=e) for e in values]
    header = [name, "objective_mw", "expected_disconnection_mw", "violation_fraction",
              "selected_feeder_ids"]
    rows = []
    status = EXIT_OK
    if risks:
        base = cfg.problem(risks[0])
        spec = cfg.sampling(base)
        for v, risk in zip(values, risks):
            result = solve(base.with_risk(risk), cfg.solver())
            if not result.solver_stats.proven_optimal:
                status = EXIT_NODE_LIMIT
            report = validate(result, spec, workers=cfg.workers)
            rows.append([repr(v), repr(result.objective_mw),
                         repr(report.expected_disconnection_mw),
                         repr(report.violation_fraction),
                         " ".join(str(i) for i in result.selected_ids)])
    files.write_csv(cfg.output, header, rows)
    return status


def figure1_rows(epsilons: Sequence[float]) -> list[tuple[float, float, float]]:
    rows = []
    for e in epsilons:
        if not 0.0 < e < 0.5:
            raise UsageError(f"epsilon must lie in (0, 0.5), got {e}")
        rows.append((e, dist.inverse_normal_cdf(1.0 - e), dist.cantelli_inverse(1.0 - e)))
    return rows


def cmd_figure1(grid: list[float] | None, points: int, output: Path | None) -> int:
    if grid is None:
        grid = np.linspace(0.001, 0.499, points).tolist()
    rows = [[repr(e), repr(g), repr(r)] for e, g, r in figure1_rows(grid)]
    files.write_csv(output, ["epsilon_fraction", "gaussian_k", "robust_k"], rows)
    return EXIT_OK


def cmd_fairness(cfg: RunConfig, factors: list[float]) -> int:
    if not cfg.fairness_targets:
        raise UsageError("--fairness-targets is required")
    problem = cfg.problem()
    sampling = cfg.sampling(problem)
    rows = []
    baseline = None
    status = EXIT_OK
    for factor in factors:
        outcome = fairness_study(problem, FairnessSpec(frozenset(cfg.fairness_targets), factor),
                                 sampling, cfg.solver(), workers=cfg.workers)
        baseline = outcome.baseline
        adj = outcome.adjusted
        if not adj.result.solver_stats.proven_optimal:
            status = EXIT_NODE_LIMIT
        rows.append([factor, adj.result.objective_mw, adj.report.expected_disconnection_mw,
                     adj.report.violation_fraction, list(adj.result.selected_ids),
                     list(outcome.added_ids), list(outcome.removed_ids)])
    doc = {
        "document": "fairness_study",
        "schema_version": files.SCHEMA_VERSION,
        "method": files.risk_to_dict(problem.risk),
        "threshold_mw": problem.threshold,
        "target_feeder_ids": sorted(cfg.fairness_targets),
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "distribution": cfg.distribution,
    }
    if baseline is not None:
        doc["baseline"] = {
            "objective_mw": baseline.result.objective_mw,
            "expected_disconnection_mw": baseline.report.expected_disconnection_mw,
            "violation_fraction": baseline.report.violation_fraction,
            "selected_feeder_ids": list(baseline.result.selected_ids),
        }
    doc["factors"] = {
        "columns": ["inflation_factor", "objective_mw", "expected_disconnection_mw",
                    "violation_fraction", "selected_feeder_ids", "added_feeder_ids",
                    "removed_feeder_ids"],
        "rows": rows,
    }
    _emit(doc, cfg.output)
    return status


def cmd_correlation_study(cfg: RunConfig) -> int:
    if cfg.covariance == "diagonal":
        raise UsageError("correlation-study needs --covariance pointing at the true covariance file")
    problem = cfg.problem()
    study = correlation_study(problem, problem.covariance, cfg.sampling(problem),
                              cfg.solver(), workers=cfg.workers)

    def case(c):
        return {
            "objective_mw": c.result.objective_mw,
            "selected_feeder_ids": list(c.result.selected_ids),
            "violation_fraction": c.report.violation_fraction,
            "expected_disconnection_mw": c.report.expected_disconnection_mw,
        }

    doc = {
        "document": "correlation_study",
        "schema_version": files.SCHEMA_VERSION,
        "method": files.risk_to_dict(problem.risk),
        "threshold_mw": problem.threshold,
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "distribution": cfg.distribution,
        "case1_correlation_ignored": case(study.ignoring),
        "case2_correlation_considered": case(study.considering),
    }
    _emit(doc, cfg.output)
    return EXIT_OK


def _add_problem_args(p, method_default=None):
    p.add_argument("--feeders", type=Path, required=True, help="feeder CSV (feeder_id,mu_mw,sigma_mw)")
    p.add_argument("--covariance", default="diagonal",
                   help="covariance CSV in MW^2, or 'diagonal' (default)")
    p.add_argument("--L", type=float, help="minimum load to shed, MW")
    p.add_argument("--method", choices=("deterministic", "gaussian-cc", "dr-cc"),
                   default=method_default, required=method_default is None)
    p.add_argument("--percentile", type=float, help="planning percentile in (0, 1), deterministic only")
    p.add_argument("--epsilon", type=float, help="accepted violation probability in (0, 0.5)")
    p.add_argument("--node-limit", type=int, default=10 ** 8)


def _add_sampling_args(p):
    p.add_argument("--distribution", choices=dist.KINDS, default=dist.GAUSSIAN)
    p.add_argument("--nu", type=float, default=dist.DEFAULT_NU, help="student-t degrees of freedom")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ufls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("allocate", help="solve one allocation problem")
    _add_problem_args(p)
    p.add_argument("--output", type=Path)

    p = sub.add_parser("validate", help="Monte Carlo validation of a result file")
    p.add_argument("--result", type=Path, required=True)
    _add_problem_args(p, method_default=DETERMINISTIC)
    _add_sampling_args(p)
    p.add_argument("--histogram", type=Path, help="also write the histogram as CSV")
    p.add_argument("--output", type=Path)

    p = sub.add_parser("sweep", help="solve and validate over several percentiles or epsilons")
    _add_problem_args(p)
    _add_sampling_args(p)
    p.add_argument("--percentiles", type=_floats)
    p.add_argument("--epsilons", type=_floats)
    p.add_argument("--output", type=Path)

    p = sub.add_parser("figure1", help="safety factors of both chance constraints over epsilon")
    p.add_argument("--grid", type=_floats, help="comma-separated epsilons")
    p.add_argument("--points", type=int, default=500)
    p.add_argument("--output", type=Path)

    p = sub.add_parser("fairness", help="synthetic-uncertainty study")
    _add_problem_args(p)
    _add_sampling_args(p)
    p.add_argument("--fairness-targets", type=_ints, help="comma-separated feeder ids to inflate")
    p.add_argument("--factors", type=_floats, default=[1.0, 1.2, 1.5, 2.0])
    p.add_argument("--output", type=Path)

    p = sub.add_parser("correlation-study", help="optimise ignoring vs using the covariance")
    _add_problem_args(p)
    _add_sampling_args(p)
    p.add_argument("--output", type=Path)

    for sp in sub.choices.values():
        _apply_env(sp)
    return parser


def _apply_env(parser: argparse.ArgumentParser, environ=None) -> None:
    environ = os.environ if environ is None else environ
    for action in parser._actions:
        if not action.option_strings or action.dest == "help":
            continue
        flag = max(action.option_strings, key=len).lstrip("-")
        key = ENV_PREFIX + flag.upper().replace("-", "_")
        if key not in environ:
            continue
        raw = environ[key]
        try:
            value = action.type(raw) if action.type else raw
        except (argparse.ArgumentTypeError, ValueError):
            parser.error(f"environment variable {key}={raw!r} is invalid")
        if action.choices is not None and value not in action.choices:
            parser.error(f"environment variable {key}={raw!r} is not one of {list(action.choices)}")
        action.default = value
        action.required = False


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = RunConfig.from_args(args)
    try:
        if args.command == "allocate":
            return cmd_allocate(cfg)
        if args.command == "validate":
            return cmd_validate(cfg, args.result, args.histogram)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.percentiles, args.epsilons)
        if args.command == "figure1":
            return cmd_figure1(args.grid, args.points, args.output)
        if args.command == "fairness":
            return cmd_fairness(cfg, args.factors)
        if args.command == "correlation-study":
            return cmd_correlation_study(cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ufls: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Infeasible as exc:
        print(f"ufls: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NodeLimitExceeded as exc:
        print(f"ufls: {exc}", file=sys.stderr)
        return EXIT_NODE_LIMIT
    except (ValueError, OSError) as exc:
        print(f"ufls: {exc}", file=sys.stderr)
        return EXIT_DATA
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
