"""CSV file formats.

One dialect everywhere: comma separators, a header row, missing cells written
as empty fields (and also accepted as "NA" on input), and numbers emitted with
17 significant digits so values round-trip losslessly.
"""

import csv
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import IncompleteDataset
from .errors import ValidationError
from .simulate import PARAM_NAMES, CellMetrics, strategy_pairs
from .strategies import StrategyResult

MISSING_TOKENS = ("", "NA")


def fmt(x: float) -> str:
    return f"{x:.17g}"


def _parse_cell(token: str, path, row: int, col: str) -> float:
    token = token.strip()
    if token in MISSING_TOKENS:
        return math.nan
    try:
        return float(token)
    except ValueError:
        raise ValidationError(
            f"{path}: row {row}, column {col!r}: cannot parse {token!r} as a number"
        ) from None


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Read a CSV with header into (column names, float matrix with NaN for missing)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        rows = []
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}: row {i} has {len(row)} fields, expected {len(header)}"
                )
            rows.append([_parse_cell(tok, path, i, header[j]) for j, tok in enumerate(row)])
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return header, np.array(rows, dtype=float)


def write_table(path, header: Sequence[str], matrix: np.ndarray) -> None:
    """Write a float matrix as CSV; NaN cells become empty fields."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in np.asarray(matrix, dtype=float):
            writer.writerow(["" if math.isnan(v) else fmt(v) for v in row])


def read_incomplete_csv(
    path, outcome: str, predictors: Sequence[str], auxiliary: Sequence[str] = ()
) -> IncompleteDataset:
    """Read a data CSV and assign roles to the declared columns.

    Columns keep their file order; undeclared columns are dropped. Empty fields
    and "NA" mark missing values.
    """
    header, matrix = read_table(path)
    declared = {outcome: "outcome"}
    for name in predictors:
        declared[name] = "predictor"
    for name in auxiliary:
        declared[name] = "auxiliary"
    if len(declared) != 1 + len(tuple(predictors)) + len(tuple(auxiliary)):
        raise ValidationError("column declarations overlap")
    missing_cols = [name for name in declared if name not in header]
    if missing_cols:
        raise ValidationError(f"{path}: declared column(s) not in file: {missing_cols}")
    keep = [j for j, name in enumerate(header) if name in declared]
    names = tuple(header[j] for j in keep)
    roles = tuple(declared[name] for name in names)
    return IncompleteDataset.from_values(matrix[:, keep], names, roles)


def write_incomplete_csv(data: IncompleteDataset, path) -> None:
    """Write a dataset's values; masked cells become empty fields."""
    write_table(path, data.column_names, data.values)


def write_mask_csv(mask: np.ndarray, column_names: Sequence[str], path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(column_names))
        for row in np.asarray(mask, dtype=bool):
            writer.writerow(["1" if v else "0" for v in row])


def read_mask_csv(path) -> tuple[list[str], np.ndarray]:
    header, matrix = read_table(path)
    if not np.all(np.isin(matrix, (0.0, 1.0))):
        raise ValidationError(f"{path}: mask entries must be 0 or 1")
    return header, matrix.astype(bool)


POOLED_COLUMNS = (
    "parameter",
    "theta_bar",
    "se",
    "w_bar",
    "b",
    "gamma",
    "nu_com",
    "nu_obs",
    "nu_imp",
    "nu",
    "ci_lo",
    "ci_hi",
    "level",
    "M",
    "n_analyzed",
)


def write_pooled_csv(result: StrategyResult, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(POOLED_COLUMNS)
        for name, est in result.estimates.items():
            writer.writerow(
                [
                    name,
                    fmt(est.theta_bar),
                    fmt(est.se),
                    fmt(est.w_bar),
                    fmt(est.b),
                    fmt(est.gamma),
                    fmt(est.nu_com),
                    fmt(est.nu_obs),
                    fmt(est.nu_imp),
                    fmt(est.nu),
                    fmt(est.ci_lo),
                    fmt(est.ci_hi),
                    fmt(est.level),
                    str(est.m),
                    str(result.n_analyzed),
                ]
            )


METRICS_COLUMNS = (
    "n",
    "rho12",
    "r2",
    "p",
    "pattern",
    "m",
    "rho_yz",
    "d",
    "parameter",
    "baseline",
    "target",
    "coverage_baseline",
    "coverage_baseline_se",
    "n_baseline",
    "coverage_target",
    "coverage_target_se",
    "n_target",
    "median_length_diff_pct",
    "median_abs_err_diff_pct",
    "n_pairs",
    "n_excluded_length",
    "n_excluded_err",
    "failures_baseline",
    "failures_target",
)


def _opt(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else fmt(x)


def write_metrics_csv(metrics: Sequence[CellMetrics], strategies: Sequence[str], path) -> None:
    """One row per (cell, parameter, strategy pair)."""
    path = Path(path)
    pairs = strategy_pairs(strategies)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for cm in metrics:
            cell = cm.cell
            base = [
                str(cell.n),
                fmt(cell.rho12),
                fmt(cell.r2),
                fmt(cell.p),
                cell.pattern,
                str(cell.m),
                _opt(cell.rho_yz),
                str(cm.n_replications),
            ]
            for param in PARAM_NAMES:
                for a, b in pairs:
                    cov_a = cm.coverage[(a, param)]
                    cov_b = cm.coverage[(b, param)]
                    pair = cm.pairs[(a, b, param)]
                    writer.writerow(
                        base
                        + [
                            param,
                            a,
                            b,
                            _opt(cov_a.rate),
                            _opt(cov_a.se),
                            str(cov_a.n),
                            _opt(cov_b.rate),
                            _opt(cov_b.se),
                            str(cov_b.n),
                            _opt(pair.median_length_diff_pct),
                            _opt(pair.median_abs_err_diff_pct),
                            str(pair.n_pairs),
                            str(pair.n_excluded_length),
                            str(pair.n_excluded_err),
                            str(cm.failures.get(a, 0)),
                            str(cm.failures.get(b, 0)),
                        ]
                    )


PLOT_COLUMNS = (
    "p",
    "m",
    "rho_yz",
    "parameter",
    "baseline",
    "target",
    "coverage_baseline",
    "coverage_target",
    "median_length_diff_pct",
    "median_abs_err_diff_pct",
    "n_pairs",
)


def write_plot_csv(rows: Sequence[dict], path) -> None:
    """Tidy plot data, one row per (p, M, rho_yz) key per comparison."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PLOT_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    fmt(row["p"]),
                    str(row["m"]),
                    _opt(row["rho_yz"]),
                    row["parameter"],
                    row["baseline"],
                    row["target"],
                    _opt(row["coverage_baseline"]),
                    _opt(row["coverage_target"]),
                    _opt(row["median_length_diff_pct"]),
                    _opt(row["median_abs_err_diff_pct"]),
                    str(row["n_pairs"]),
                ]
            )
