"""Command-line surface: impute, analyze, simulate.

Configuration comes from a flat key = value text file; command-line flags
override config values. Exit codes: 0 success, 1 runtime failure, 2 invalid
input or configuration.

impute   read an incomplete CSV, write <out>_imp1.csv .. <out>_impM.csv plus
         <out>_mask.csv. With strategy = dmi, rows with a missing outcome are
         deleted before imputation.
analyze  read completed CSVs and the mask, fit the regression in each copy,
         pool, and write one row per parameter. With strategy = mid, rows
         flagged outcome-missing in the mask are deleted before analysis.
simulate run an experiment grid and write the cell metrics table plus tidy
         plot data for the first slope.
"""

import argparse
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import io as mio
from .dataset import IncompleteDataset, rng_stream
from .errors import MidlabError, ValidationError
from .imputer import EmConfig, McmcConfig, multiple_impute
from .ols import CompletedFit, fit_ols
from .pooling import pool
from .simulate import PARAM_NAMES, expand_grid, run_grid_records, strategy_pairs, summarize_cell
from .simulate import paired_metrics
from .strategies import DMI, MI, MID, STRATEGIES, StrategyResult

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2


def _parse_list(raw: str) -> list[str]:
    parts = [p for chunk in raw.split(",") for p in chunk.split()]
    return [p for p in parts if p]


def _parse_int(raw: str) -> int:
    return int(raw)

def _parse_float(raw: str) -> float:
    return float(raw)

def _parse_str(raw: str) -> str:
    return raw.strip()

def _parse_int_list(raw: str) -> list[int]:
    return [int(v) for v in _parse_list(raw)]

def _parse_float_list(raw: str) -> list[float]:
    return [float(v) for v in _parse_list(raw)]


_SCHEMAS = {
    "impute": {
        "input": _parse_str,
        "out": _parse_str,
        "outcome": _parse_str,
        "predictors": _parse_list,
        "auxiliary": _parse_list,
        "m": _parse_int,
        "seed": _parse_int,
        "burn_in": _parse_int,
        "strategy": _parse_str,
    },
    "analyze": {
        "input": _parse_str,
        "out": _parse_str,
        "outcome": _parse_str,
        "predictors": _parse_list,
        "auxiliary": _parse_list,
        "m": _parse_int,
        "strategy": _parse_str,
        "level": _parse_float,
        "debug_estimates": _parse_str,
        "debug_nu_com": _parse_int,
    },
    "simulate": {
        "out": _parse_str,
        "seed": _parse_int,
        "d": _parse_int,
        "parallelism": _parse_int,
        "strategies": _parse_list,
        "level": _parse_float,
        "burn_in": _parse_int,
        "grid_n": _parse_int_list,
        "grid_rho12": _parse_float_list,
        "grid_r2": _parse_float_list,
        "grid_p": _parse_float_list,
        "grid_pattern": _parse_list,
        "grid_m": _parse_int_list,
        "grid_rho_yz": _parse_float_list,
    },
}


def read_config(path, command: str) -> dict:
    """Parse a flat key = value config file; unknown keys are rejected."""
    schema = _SCHEMAS[command]
    cfg: dict = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValidationError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in schema:
            raise ValidationError(f"{path}:{lineno}: unknown key {key!r} for {command}")
        try:
            cfg[key] = schema[key](raw.strip())
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: cannot parse value for {key!r}") from None
    return cfg


def _build_config(args, command: str) -> dict:
    cfg: dict = {}
    if args.config:
        cfg.update(read_config(args.config, command))
    overrides = {
        "input": getattr(args, "input", None),
        "out": args.out,
        "seed": getattr(args, "seed", None),
        "m": getattr(args, "m", None),
        "burn_in": getattr(args, "burn_in", None),
        "strategy": getattr(args, "strategy", None),
        "parallelism": getattr(args, "parallelism", None),
        "d": getattr(args, "d", None),
        "debug_estimates": getattr(args, "debug_estimates", None),
        "debug_nu_com": getattr(args, "debug_nu_com", None),
    }
    for key, value in overrides.items():
        if value is not None and key in _SCHEMAS[command]:
            cfg[key] = value
    return cfg


def _require(cfg: dict, key: str, command: str):
    if key not in cfg:
        raise ValidationError(f"{command}: required setting {key!r} is missing")
    return cfg[key]


def _load_dataset(cfg: dict, command: str) -> IncompleteDataset:
    path = Path(_require(cfg, "input", command))
    if not path.exists():
        raise ValidationError(f"{command}: input file {path} does not exist")
    outcome = _require(cfg, "outcome", command)
    predictors = _require(cfg, "predictors", command)
    return mio.read_incomplete_csv(path, outcome, predictors, cfg.get("auxiliary", ()))


def cmd_impute(cfg: dict) -> int:
    data = _load_dataset(cfg, "impute")
    strategy = cfg.get("strategy", MI)
    if strategy not in STRATEGIES:
        raise ValidationError(f"impute: unknown strategy {strategy!r}")
    counts = data.observed_counts()
    for j in np.where(counts < 2)[0]:
        raise ValidationError(
            f"impute: column {data.column_names[j]!r} has "
            f"{int(counts[j])} observed value(s); it cannot be imputed"
        )
    if strategy == DMI:
        keep = ~data.y_missing
        if not keep.any():
            raise ValidationError("impute: every outcome value is missing")
        data = data.subset_rows(keep)
    out = Path(_require(cfg, "out", "impute"))
    m = cfg.get("m", 5)
    seed = cfg.get("seed", 0)
    mcmc = McmcConfig(burn_in=cfg.get("burn_in", 200))
    try:
        imputations = multiple_impute(
            data, m, EmConfig(), mcmc, rng_stream(seed), master_seed=seed
        )
    except ValidationError:
        raise
    except MidlabError as exc:
        raise RuntimeError(f"impute: imputation failed: {exc}") from exc
    for i in range(imputations.m):
        mio.write_table(f"{out}_imp{i + 1}.csv", data.column_names, imputations.completed[i])
    mio.write_mask_csv(data.mask, data.column_names, f"{out}_mask.csv")
    return EXIT_OK


def _read_debug_fits(path, nu_com: int) -> list[CompletedFit]:
    header, matrix = mio.read_table(path)
    expected = ["m", "parameter_index", "theta_hat", "w_hat"]
    if [h.strip() for h in header] != expected:
        raise ValidationError(f"{path}: debug estimates need columns {expected}")
    by_m: dict[int, list[tuple[int, float, float]]] = defaultdict(list)
    for row in matrix:
        by_m[int(row[0])].append((int(row[1]), row[2], row[3]))
    fits = []
    for m in sorted(by_m):
        rows = sorted(by_m[m])
        names = tuple(f"param{idx}" for idx, _, _ in rows)
        fits.append(
            CompletedFit(
                names,
                np.array([t for _, t, _ in rows]),
                np.array([w for _, _, w in rows]),
                nu_com,
            )
        )
    return fits


def cmd_analyze(cfg: dict) -> int:
    strategy = cfg.get("strategy", MI)
    if strategy not in STRATEGIES:
        raise ValidationError(f"analyze: unknown strategy {strategy!r}")
    level = cfg.get("level", 0.95)
    out = Path(_require(cfg, "out", "analyze"))

    if "debug_estimates" in cfg:
        nu_com = _require(cfg, "debug_nu_com", "analyze")
        fits = _read_debug_fits(cfg["debug_estimates"], nu_com)
        result = StrategyResult(strategy, pool(fits, level=level), 0, len(fits))
        mio.write_pooled_csv(result, out)
        return EXIT_OK

    prefix = _require(cfg, "input", "analyze")
    outcome = _require(cfg, "outcome", "analyze")
    predictors = _require(cfg, "predictors", "analyze")
    mask_path = Path(f"{prefix}_mask.csv")
    if not mask_path.exists():
        raise ValidationError(f"analyze: mask file {mask_path} does not exist")
    mask_names, mask = mio.read_mask_csv(mask_path)

    m = cfg.get("m")
    if m is None:
        m = 0
        while Path(f"{prefix}_imp{m + 1}.csv").exists():
            m += 1
        if m < 2:
            raise ValidationError(f"analyze: found {m} completed file(s) at {prefix}_imp*.csv")
    completed = []
    names = None
    for i in range(1, m + 1):
        path = Path(f"{prefix}_imp{i}.csv")
        if not path.exists():
            raise ValidationError(f"analyze: completed file {path} does not exist")
        header, matrix = mio.read_table(path)
        if np.isnan(matrix).any():
            raise ValidationError(f"analyze: {path} contains missing cells")
        if names is None:
            names = header
        elif header != names:
            raise ValidationError(f"analyze: {path} columns differ from the first copy")
        completed.append(matrix)
    if names != mask_names:
        raise ValidationError("analyze: mask columns do not match the completed files")
    if any(c.shape != mask.shape for c in completed):
        raise ValidationError("analyze: mask shape does not match the completed files")
    for col in (outcome, *predictors):
        if col not in names:
            raise ValidationError(f"analyze: column {col!r} not present in the completed files")

    ycol = names.index(outcome)
    pred_cols = [names.index(c) for c in predictors]
    keep = slice(None)
    n_analyzed = mask.shape[0]
    if strategy == MID:
        keep = ~mask[:, ycol]
        n_analyzed = int(keep.sum())
        if n_analyzed <= len(pred_cols) + 1:
            raise ValidationError(
                f"analyze: only {n_analyzed} rows have an observed outcome"
            )
    try:
        fits = [fit_ols(c[keep], ycol, pred_cols, predictors) for c in completed]
        result = StrategyResult(strategy, pool(fits, level=level), n_analyzed, m)
    except ValidationError:
        raise
    except MidlabError as exc:
        raise RuntimeError(f"analyze: pooled analysis failed: {exc}") from exc
    mio.write_pooled_csv(result, out)
    return EXIT_OK


def cmd_simulate(cfg: dict) -> int:
    out = Path(_require(cfg, "out", "simulate"))
    strategies = tuple(cfg.get("strategies", [MI, MID]))
    unknown = set(strategies) - set(STRATEGIES)
    if unknown:
        raise ValidationError(f"simulate: unknown strategies {sorted(unknown)}")
    if len(strategies) < 2:
        raise ValidationError("simulate: at least two strategies are needed for comparisons")
    cells = expand_grid(
        n=_require(cfg, "grid_n", "simulate"),
        rho12=_require(cfg, "grid_rho12", "simulate"),
        r2=_require(cfg, "grid_r2", "simulate"),
        p=_require(cfg, "grid_p", "simulate"),
        pattern=_require(cfg, "grid_pattern", "simulate"),
        m=_require(cfg, "grid_m", "simulate"),
        rho_yz=cfg.get("grid_rho_yz"),
        d=cfg.get("d", 1),
    )
    seed = cfg.get("seed", 0)
    parallelism = cfg.get("parallelism", 1)
    mcmc = McmcConfig(burn_in=cfg.get("burn_in", 200))
    level = cfg.get("level", 0.95)
    try:
        per_cell = run_grid_records(
            cells, seed, parallelism, strategies, mcmc_cfg=mcmc, level=level
        )
    except ValidationError:
        raise
    except MidlabError as exc:
        raise RuntimeError(f"simulate: grid run failed: {exc}") from exc
    metrics = [summarize_cell(c, recs, strategies) for c, recs in zip(cells, per_cell)]
    mio.write_metrics_csv(metrics, strategies, f"{out}_metrics.csv")
    mio.write_plot_csv(_plot_rows(cells, per_cell, strategies), f"{out}_plot_x1.csv")
    return EXIT_OK


def _plot_rows(cells, per_cell, strategies) -> list[dict]:
    """Aggregate the first-slope comparison over all factors except (p, M, rho_yz)."""
    param = "x1"
    grouped: dict[tuple, list] = defaultdict(list)
    for cell, records in zip(cells, per_cell):
        grouped[(cell.p, cell.m, cell.rho_yz)].extend(records)
    rows = []
    for key in sorted(grouped, key=lambda k: (k[0], k[1], -1.0 if k[2] is None else k[2])):
        records = grouped[key]
        for a, b in strategy_pairs(strategies):
            cov = {}
            for s in (a, b):
                oks = [r.strategies[s] for r in records if s in r.strategies and r.strategies[s].ok]
                cov[s] = (
                    sum(rep.params[param].covered for rep in oks) / len(oks)
                    if oks
                    else float("nan")
                )
            lens, errs = [], []
            for r in records:
                ra, rb = r.strategies.get(a), r.strategies.get(b)
                if ra is None or rb is None or not (ra.ok and rb.ok):
                    continue
                pl, pe = paired_metrics(
                    ra.params[param].length,
                    rb.params[param].length,
                    ra.params[param].abs_err,
                    rb.params[param].abs_err,
                )
                if not np.isnan(pl):
                    lens.append(pl)
                if not np.isnan(pe):
                    errs.append(pe)
            rows.append(
                {
                    "p": key[0],
                    "m": key[1],
                    "rho_yz": key[2],
                    "parameter": param,
                    "baseline": a,
                    "target": b,
                    "coverage_baseline": cov[a],
                    "coverage_target": cov[b],
                    "median_length_diff_pct": float(np.median(lens)) if lens else float("nan"),
                    "median_abs_err_diff_pct": float(np.median(errs)) if errs else float("nan"),
                    "n_pairs": min(len(lens), len(errs)) if lens or errs else 0,
                }
            )
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="midlab", description="Multiple imputation, pooling, and impute-then-delete tools"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    imp = sub.add_parser("impute", help="impute an incomplete CSV")
    imp.add_argument("input", nargs="?", help="incomplete data CSV")
    imp.add_argument("--config")
    imp.add_argument("--seed", type=int)
    imp.add_argument("--m", type=int)
    imp.add_argument("--burn-in", dest="burn_in", type=int)
    imp.add_argument("--strategy", choices=STRATEGIES)
    imp.add_argument("--out")

    ana = sub.add_parser("analyze", help="pool completed CSVs")
    ana.add_argument("input", nargs="?", help="prefix of the completed files")
    ana.add_argument("--config")
    ana.add_argument("--m", type=int)
    ana.add_argument("--strategy", choices=STRATEGIES)
    ana.add_argument("--out")
    ana.add_argument("--debug-estimates", dest="debug_estimates")
    ana.add_argument("--debug-nu-com", dest="debug_nu_com", type=int)

    sim = sub.add_parser("simulate", help="run an experiment grid")
    sim.add_argument("--config")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--d", type=int)
    sim.add_argument("--parallelism", type=int)
    sim.add_argument("--burn-in", dest="burn_in", type=int)
    sim.add_argument("--out")
    return parser


_COMMANDS = {"impute": cmd_impute, "analyze": cmd_analyze, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        cfg = _build_config(args, args.command)
        return _COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (MidlabError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
