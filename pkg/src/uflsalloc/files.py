"""Reading and writing feeder tables, covariance matrices and result documents.

File formats
------------
Feeders: CSV with header ``feeder_id,mu_mw,sigma_mw``, one feeder per row, in
canonical index order.

Covariance: dense CSV of MW^2, ``m`` rows of ``m`` values, no header. Row and
column ``i`` refer to the ``i``-th feeder of the feeder table.

Result and report documents: UTF-8 JSON objects. Every document carries
``"document"`` (its type) and ``"schema_version"``. Tables are embedded as
``{"columns": [...], "rows": [[...], ...]}``. Numeric keys end in their
unit (``_mw``, ``_mw2``, ``_fraction``).
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .model import (AllocationResult, CovarianceMatrix, DimensionError, FeederSet,
                    ReliabilityMargin, RiskSpec, SolverStats)

FEEDER_HEADER = ("feeder_id", "mu_mw", "sigma_mw")
SCHEMA_VERSION = 1


class DataFormatError(ValueError):
    """Malformed input file; carries the offending line and column (1-based)."""

    def __init__(self, message: str, source: str | None = None,
                 line: int | None = None, column: int | None = None):
        self.source, self.line, self.column = source, line, column
        where = source or "<input>"
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}")


def _read_text(path) -> str:
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _float_cell(cell: str, source, line, column, what) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataFormatError(f"{what} {cell.strip()!r} is not a number", source, line, column) from None
    if not math.isfinite(value):
        raise DataFormatError(f"{what} must be finite", source, line, column)
    return value


def parse_feeders(text: str, source: str | None = None) -> FeederSet:
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows or tuple(c.strip() for c in rows[0]) != FEEDER_HEADER:
        raise DataFormatError(f"expected header {','.join(FEEDER_HEADER)}", source, 1)
    ids, mu, sigma = [], [], []
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise DataFormatError(f"row {line} has {len(row)} fields, expected 3", source, line)
        try:
            fid = int(row[0])
        except ValueError:
            raise DataFormatError(f"row {line}: feeder_id {row[0].strip()!r} is not an integer",
                                  source, line, 1) from None
        ids.append(fid)
        mu.append(_float_cell(row[1], source, line, 2, f"row {line}: mu_mw"))
        sigma.append(_float_cell(row[2], source, line, 3, f"row {line}: sigma_mw"))
    try:
        return FeederSet.from_arrays(ids, mu, sigma)
    except ValueError as exc:
        raise DataFormatError(str(exc), source) from None


def read_feeders(path) -> FeederSet:
    return parse_feeders(_read_text(path), str(path))


def format_feeders(feeders: FeederSet) -> str:
    out = _io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(FEEDER_HEADER)
    for f in feeders.feeders:
        w.writerow([f.id, repr(f.mu), repr(f.sigma)])
    return out.getvalue()


def write_feeders(feeders: FeederSet, path) -> None:
    write_text(path, format_feeders(feeders))


def parse_covariance(text: str, m: int | None = None, source: str | None = None) -> CovarianceMatrix:
    rows = [r for r in csv.reader(_io.StringIO(text))]
    values = []
    for line, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        values.append([_float_cell(c, source, line, col, f"row {line} column {col}")
                       for col, c in enumerate(row, start=1)])
    n = len(values)
    if n == 0:
        raise DataFormatError("covariance file is empty", source)
    for line, row in enumerate(values, start=1):
        if len(row) != n:
            raise DataFormatError(f"row {line} has {len(row)} values; expected {n} for a square matrix",
                                  source, line)
    if m is not None and n != m:
        raise DimensionError(f"covariance is {n}x{n} but there are {m} feeders")
    try:
        return CovarianceMatrix.full(np.array(values))
    except DimensionError:
        raise
    except ValueError as exc:
        raise DataFormatError(str(exc), source) from None


def read_covariance(path, m: int | None = None) -> CovarianceMatrix:
    return parse_covariance(_read_text(path), m, str(path))


def format_covariance(cov: CovarianceMatrix) -> str:
    out = _io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    for row in cov.entries:
        w.writerow([repr(float(v)) for v in row])
    return out.getvalue()


def write_covariance(cov: CovarianceMatrix, path) -> None:
    write_text(path, format_covariance(cov))


# -- documents ---------------------------------------------------------------

def risk_to_dict(risk: RiskSpec) -> dict[str, Any]:
    d: dict[str, Any] = {"name": risk.method}
    if risk.is_chance_constrained:
        d["epsilon_fraction"] = risk.epsilon
    else:
        d["percentile_fraction"] = risk.percentile
    d["safety_factor_k"] = risk.safety_factor
    return d


def risk_from_dict(d: dict[str, Any]) -> RiskSpec:
    return RiskSpec(d["name"], epsilon=d.get("epsilon_fraction"),
                    percentile=d.get("percentile_fraction"))


def result_to_document(result: AllocationResult) -> dict[str, Any]:
    m = result.margin
    s = result.solver_stats
    return {
        "document": "allocation_result",
        "schema_version": SCHEMA_VERSION,
        "method": risk_to_dict(result.method_echo),
        "threshold_mw": result.threshold,
        "feeder_ids": list(result.feeder_ids),
        "selection": [int(v) for v in result.selection],
        "selected_feeder_ids": list(result.selected_ids),
        "objective_mw": result.objective_mw,
        "margin": {
            "mu_delta_mw": m.mu_delta,
            "sigma_delta_mw": m.sigma_delta,
            "safety_factor_k": m.safety_factor_k,
            "slack_mw": m.slack,
        },
        "solver": {
            "nodes_explored": s.nodes_explored,
            "proven_optimal": s.proven_optimal,
            "optimality_gap_fraction": s.optimality_gap,
        },
    }


def result_from_document(doc: dict[str, Any], source: str | None = None) -> AllocationResult:
    if doc.get("document") != "allocation_result":
        raise DataFormatError("not an allocation_result document", source)
    try:
        m = doc["margin"]
        s = doc["solver"]
        return AllocationResult(
            selection=np.array(doc["selection"], dtype=np.int8),
            objective_mw=float(doc["objective_mw"]),
            margin=ReliabilityMargin(m["mu_delta_mw"], m["sigma_delta_mw"],
                                     m["safety_factor_k"], m["slack_mw"]),
            method_echo=risk_from_dict(doc["method"]),
            solver_stats=SolverStats(int(s["nodes_explored"]), bool(s["proven_optimal"]),
                                     float(s.get("optimality_gap_fraction", 0.0))),
            feeder_ids=tuple(int(i) for i in doc["feeder_ids"]),
            threshold=float(doc["threshold_mw"]))
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"missing or malformed field {exc}", source) from None


def histogram_table(report) -> dict[str, Any]:
    edges = report.histogram_edges
    return {
        "columns": ["bin_lower_mw", "bin_upper_mw", "count"],
        "rows": [[float(edges[i]), float(edges[i + 1]), int(c)]
                 for i, c in enumerate(report.histogram_counts)],
    }


def report_to_document(report, result: AllocationResult | None = None) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "document": "validation_report",
        "schema_version": SCHEMA_VERSION,
        "distribution": report.distribution,
        "threshold_mw": report.threshold,
        "n_samples": report.n_samples,
        "seed": report.seed,
        "violation_fraction": report.violation_fraction,
        "violation_percent": 100.0 * report.violation_fraction,
        "expected_disconnection_mw": report.expected_disconnection_mw,
    }
    if result is not None:
        doc["selected_feeder_ids"] = list(result.selected_ids)
        doc["method"] = risk_to_dict(result.method_echo)
    doc["histogram"] = histogram_table(report)
    return doc


def format_histogram_csv(report) -> str:
    out = _io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    table = histogram_table(report)
    w.writerow(table["columns"])
    for row in table["rows"]:
        w.writerow([repr(row[0]), repr(row[1]), row[2]])
    return out.getvalue()


def dumps_document(doc: dict[str, Any]) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_document(doc: dict[str, Any], path) -> None:
    write_text(path, dumps_document(doc))


def read_document(path) -> dict[str, Any]:
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise DataFormatError(exc.msg, str(path), exc.lineno, exc.colno) from None


def write_csv(path, header, rows) -> None:
    out = _io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = out.getvalue()
    if path is None:
        print(text, end="")
    else:
        write_text(path, text)


def data_path(name: str) -> Path:
    """Path of a file shipped in the package's data directory."""
    return Path(__file__).with_name("data") / name
