"""Monte Carlo harness: data generation, missingness mechanisms, cell and grid runs.

Each replication generates Y = alpha + beta1*X1 + beta2*X2 + e from a bivariate
standard-normal (X1, X2) with correlation rho12 and e ~ Normal(0, sigma_e^2),
where sigma_e^2 = 2 * (1 - R^2) * (1 + rho12) / R^2 pins the population R^2.
X2 and Y are then masked under one of three ignorable mechanisms (X1 is never
masked), the requested strategies are run, and nominal-95% interval coverage,
CI length, and absolute estimation error are recorded. Paired comparisons are
summarized by medians, which are robust to the unbounded upside of percent
differences.

Determinism: every replication derives all randomness from hierarchically
keyed streams (master seed, cell index, replication, consumer), so grid results
are bit-identical under any parallel schedule.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import binom

from .dataset import (
    PATTERN_COMPLEMENTARY,
    PATTERN_COORDINATED,
    PATTERN_MCAR,
    ROLE_AUXILIARY,
    ROLE_OUTCOME,
    ROLE_PREDICTOR,
    ExperimentCell,
    IncompleteDataset,
    rng_stream,
)
from .errors import MidlabError, ValidationError
from .imputer import EmConfig, McmcConfig, multiple_impute
from .strategies import DMI, MI, MID, StrategyResult, run_dmi, run_mi, run_mid

PARAM_NAMES = ("intercept", "x1", "x2", "sigma2")

# Consumer slots for the per-replication stream keying.
_CHAIN_DATA = 0
_CHAIN_IMPUTE = 1
_CHAIN_DMI = 2


@dataclass(frozen=True)
class TruthSpec:
    """True generator parameters for one cell; the regression coefficients are fixed at 1."""

    rho12: float
    sigma_e2: float
    alpha: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.0

    @classmethod
    def from_factors(cls, rho12: float, r2: float) -> "TruthSpec":
        sigma_e2 = 2.0 * (1.0 - r2) * (1.0 + rho12) / r2
        return cls(rho12=rho12, sigma_e2=sigma_e2)

    @property
    def y_var(self) -> float:
        """Population variance of Y: Var(X1 + X2) + sigma_e^2."""
        return 2.0 * (1.0 + self.rho12) + self.sigma_e2

    @property
    def y_sd(self) -> float:
        return math.sqrt(self.y_var)

    def by_param(self) -> dict[str, float]:
        return {
            "intercept": self.alpha,
            "x1": self.beta1,
            "x2": self.beta2,
            "sigma2": self.sigma_e2,
        }


def generate_complete(cell: ExperimentCell, rng: np.random.Generator):
    """Complete (X1, X2, Y) matrix for one replication, plus the generating truth."""
    truth = TruthSpec.from_factors(cell.rho12, cell.r2)
    z = rng.standard_normal((cell.n, 3))
    x1 = z[:, 0]
    x2 = cell.rho12 * z[:, 0] + math.sqrt(1.0 - cell.rho12**2) * z[:, 1]
    y = truth.alpha + truth.beta1 * x1 + truth.beta2 * x2 + math.sqrt(truth.sigma_e2) * z[:, 2]
    return np.column_stack([x1, x2, y]), truth


def attach_auxiliary(
    complete: np.ndarray, truth: TruthSpec, rho_yz: float, rng: np.random.Generator
) -> np.ndarray:
    """Append an auxiliary column Z = rho_yz * Y_std + u, u ~ N(0, 1 - rho_yz^2).

    Y is standardized with its population moments (mean alpha, SD from the
    truth), so corr(Y, Z) = rho_yz exactly and Z is independent of (X1, X2)
    given Y. Z is never masked.
    """
    if not 0.0 <= rho_yz < 1.0:
        raise ValidationError(f"rho_yz must be in [0, 1), got {rho_yz}")
    y_std = (complete[:, 2] - truth.alpha) / truth.y_sd
    u = math.sqrt(1.0 - rho_yz**2) * rng.standard_normal(complete.shape[0])
    return np.column_stack([complete, rho_yz * y_std + u])


def apply_missingness(
    complete: np.ndarray, pattern: str, p: float, rng: np.random.Generator
) -> IncompleteDataset:
    """Mask X2 and Y values of a complete (X1, X2, Y[, Z]) matrix.

    mcar: each masked with constant probability p. coordinated: each masked,
    independently, with probability 2 * p * Phi(X1). complementary: X2 with
    probability 2 * p * Phi(X1) and Y with probability 2 * p * Phi(-X1).
    """
    if not 0.0 <= p <= 0.5:
        raise ValidationError(f"deletion proportion must be in [0, 0.5], got {p}")
    x = np.asarray(complete, dtype=float)
    if x.ndim != 2 or x.shape[1] not in (3, 4):
        raise ValidationError("expected columns (x1, x2, y) with optional z")
    n = x.shape[0]
    if pattern == PATTERN_MCAR:
        prob_x2 = np.full(n, p)
        prob_y = prob_x2
    elif pattern == PATTERN_COORDINATED:
        prob_x2 = 2.0 * p * ndtr(x[:, 0])
        prob_y = prob_x2
    elif pattern == PATTERN_COMPLEMENTARY:
        prob_x2 = 2.0 * p * ndtr(x[:, 0])
        prob_y = 2.0 * p * ndtr(-x[:, 0])
    else:
        raise ValidationError(f"unknown pattern {pattern!r}")
    mask = np.zeros_like(x, dtype=bool)
    mask[:, 1] = rng.random(n) < prob_x2
    mask[:, 2] = rng.random(n) < prob_y
    if x.shape[1] == 3:
        names = ("x1", "x2", "y")
        roles = (ROLE_PREDICTOR, ROLE_PREDICTOR, ROLE_OUTCOME)
    else:
        names = ("x1", "x2", "y", "z")
        roles = (ROLE_PREDICTOR, ROLE_PREDICTOR, ROLE_OUTCOME, ROLE_AUXILIARY)
    return IncompleteDataset(x, mask, names, roles)


# --- per-replication records ------------------------------------------------


@dataclass(frozen=True)
class ParamRep:
    theta: float
    t: float
    length: float
    abs_err: float
    covered: bool
    w_bar: float
    b: float
    gamma: float
    nu: float


@dataclass(frozen=True)
class StrategyRep:
    ok: bool
    error: str | None
    params: dict[str, ParamRep] | None


@dataclass(frozen=True)
class RepRecord:
    replication: int
    strategies: dict[str, StrategyRep]


def _param_reps(result: StrategyResult, truth: TruthSpec) -> dict[str, ParamRep]:
    true_values = truth.by_param()
    out = {}
    for name, est in result.estimates.items():
        true = true_values[name]
        out[name] = ParamRep(
            theta=est.theta_bar,
            t=est.t,
            length=est.ci_hi - est.ci_lo,
            abs_err=abs(est.theta_bar - true),
            covered=bool(est.ci_lo <= true <= est.ci_hi),
            w_bar=est.w_bar,
            b=est.b,
            gamma=est.gamma,
            nu=est.nu,
        )
    return out


def _failed(exc: MidlabError) -> StrategyRep:
    return StrategyRep(ok=False, error=f"{type(exc).__name__}: {exc}", params=None)


def run_replication(
    cell: ExperimentCell,
    replication: int,
    strategies: Sequence[str] = (MI, MID),
    cell_index: int = 0,
    master_seed: int | None = None,
    em_cfg: EmConfig | None = None,
    mcmc_cfg: McmcConfig | None = None,
    level: float = 0.95,
) -> RepRecord:
    """One replication of a cell: generate, mask, impute once, run the strategies.

    MI and MID share the replication's ImputationSet; DMI re-imputes from the
    raw incomplete data. A strategy failure (for example DMI's unusable-column
    error under heavy complementary missingness) is recorded, not raised.
    """
    seed = cell.seed if cell.seed is not None else (master_seed if master_seed is not None else 0)
    strategies = tuple(strategies)
    unknown = set(strategies) - {MI, MID, DMI}
    if unknown:
        raise ValidationError(f"unknown strategies: {sorted(unknown)}")

    data_rng = rng_stream(seed, cell_index, replication, _CHAIN_DATA)
    complete, truth = generate_complete(cell, data_rng)
    if cell.rho_yz is not None:
        complete = attach_auxiliary(complete, truth, cell.rho_yz, data_rng)
    data = apply_missingness(complete, cell.pattern, cell.p, data_rng)

    results: dict[str, StrategyRep] = {}
    if MI in strategies or MID in strategies:
        impute_rng = rng_stream(seed, cell_index, replication, _CHAIN_IMPUTE)
        try:
            imputations = multiple_impute(data, cell.m, em_cfg, mcmc_cfg, impute_rng)
        except MidlabError as exc:
            for s in (MI, MID):
                if s in strategies:
                    results[s] = _failed(exc)
        else:
            if MI in strategies:
                try:
                    results[MI] = StrategyRep(True, None, _param_reps(run_mi(imputations, level=level), truth))
                except MidlabError as exc:
                    results[MI] = _failed(exc)
            if MID in strategies:
                try:
                    results[MID] = StrategyRep(True, None, _param_reps(run_mid(imputations, level=level), truth))
                except MidlabError as exc:
                    results[MID] = _failed(exc)
    if DMI in strategies:
        dmi_rng = rng_stream(seed, cell_index, replication, _CHAIN_DMI)
        try:
            res = run_dmi(data, cell.m, em_cfg, mcmc_cfg, dmi_rng, level=level)
            results[DMI] = StrategyRep(True, None, _param_reps(res, truth))
        except MidlabError as exc:
            results[DMI] = _failed(exc)
    return RepRecord(replication, results)


def run_replications(
    cell: ExperimentCell,
    strategies: Sequence[str] = (MI, MID),
    cell_index: int = 0,
    master_seed: int | None = None,
    em_cfg: EmConfig | None = None,
    mcmc_cfg: McmcConfig | None = None,
    level: float = 0.95,
    replications: Iterable[int] | None = None,
) -> list[RepRecord]:
    reps = range(cell.d) if replications is None else replications
    return [
        run_replication(cell, r, strategies, cell_index, master_seed, em_cfg, mcmc_cfg, level)
        for r in reps
    ]


# --- paired comparison metrics ----------------------------------------------


def paired_metrics(
    lambda_mi: float, lambda_mid: float, abs_err_mi: float, abs_err_mid: float
) -> tuple[float, float]:
    """Percent differences of one paired replication, first strategy as baseline.

    Length: 100 * (lambda_mid - lambda_mi) / lambda_mi, so negative means the
    second strategy's interval is shorter. Error: 100 * (|err_mid| - |err_mi|)
    / |err_mi|. A nonpositive denominator yields NaN, the marker for an
    excluded observation.
    """
    pct_len = 100.0 * (lambda_mid - lambda_mi) / lambda_mi if lambda_mi > 0.0 else math.nan
    pct_err = 100.0 * (abs_err_mid - abs_err_mi) / abs_err_mi if abs_err_mi > 0.0 else math.nan
    return pct_len, pct_err


@dataclass(frozen=True)
class CoverageStat:
    rate: float
    se: float  # binomial Monte Carlo standard error
    n: int


@dataclass(frozen=True)
class PairStat:
    median_length_diff_pct: float
    median_abs_err_diff_pct: float
    n_pairs: int
    n_excluded_length: int
    n_excluded_err: int


@dataclass(frozen=True)
class CellMetrics:
    """Per-cell summary: coverage per (strategy, parameter) and paired medians per pair."""

    cell: ExperimentCell
    n_replications: int
    coverage: dict[tuple[str, str], CoverageStat]
    pairs: dict[tuple[str, str, str], PairStat]  # (baseline, target, parameter)
    failures: dict[str, int]


def _median(values: list[float]) -> float:
    return float(np.median(values)) if values else math.nan


def strategy_pairs(strategies: Sequence[str]) -> list[tuple[str, str]]:
    """Ordered (baseline, target) comparisons among the requested strategies."""
    order = [s for s in (MI, MID, DMI) if s in strategies]
    return [(a, b) for i, a in enumerate(order) for b in order[i + 1 :]]


def summarize_cell(
    cell: ExperimentCell, records: Sequence[RepRecord], strategies: Sequence[str]
) -> CellMetrics:
    strategies = tuple(strategies)
    coverage: dict[tuple[str, str], CoverageStat] = {}
    failures = {
        s: sum(1 for r in records if s in r.strategies and not r.strategies[s].ok)
        for s in strategies
    }
    for s in strategies:
        oks = [r.strategies[s] for r in records if s in r.strategies and r.strategies[s].ok]
        for param in PARAM_NAMES:
            n = len(oks)
            if n == 0:
                coverage[(s, param)] = CoverageStat(math.nan, math.nan, 0)
                continue
            rate = sum(rep.params[param].covered for rep in oks) / n
            coverage[(s, param)] = CoverageStat(rate, math.sqrt(rate * (1.0 - rate) / n), n)

    pairs: dict[tuple[str, str, str], PairStat] = {}
    for a, b in strategy_pairs(strategies):
        both = [
            r.strategies
            for r in records
            if r.strategies.get(a, _MISSING).ok and r.strategies.get(b, _MISSING).ok
        ]
        for param in PARAM_NAMES:
            lens, errs = [], []
            excl_len = excl_err = 0
            for strat in both:
                ra, rb = strat[a].params[param], strat[b].params[param]
                pct_len, pct_err = paired_metrics(ra.length, rb.length, ra.abs_err, rb.abs_err)
                if math.isnan(pct_len):
                    excl_len += 1
                else:
                    lens.append(pct_len)
                if math.isnan(pct_err):
                    excl_err += 1
                else:
                    errs.append(pct_err)
            pairs[(a, b, param)] = PairStat(
                _median(lens), _median(errs), len(both), excl_len, excl_err
            )
    return CellMetrics(cell, len(records), coverage, pairs, failures)


_MISSING = StrategyRep(ok=False, error="strategy not run", params=None)


def run_cell(
    cell: ExperimentCell,
    strategies: Sequence[str] = (MI, MID),
    cell_index: int = 0,
    master_seed: int | None = None,
    em_cfg: EmConfig | None = None,
    mcmc_cfg: McmcConfig | None = None,
    level: float = 0.95,
) -> CellMetrics:
    """Run all replications of one cell and summarize them."""
    records = run_replications(cell, strategies, cell_index, master_seed, em_cfg, mcmc_cfg, level)
    return summarize_cell(cell, records, strategies)


# --- grid execution ----------------------------------------------------------


def expand_grid(
    n: Sequence[int],
    rho12: Sequence[float],
    r2: Sequence[float],
    p: Sequence[float],
    pattern: Sequence[str],
    m: Sequence[int],
    rho_yz: Sequence[float] | None = None,
    d: int = 1,
    seed: int | None = None,
) -> list[ExperimentCell]:
    """Cartesian product of factor lists, in canonical factor order."""
    yz: Sequence[float | None] = [None] if rho_yz is None else list(rho_yz)
    return [
        ExperimentCell(n=nn, rho12=rr, r2=r2v, p=pp, pattern=pat, m=mm, rho_yz=zz, d=d, seed=seed)
        for nn, rr, r2v, pp, pat, mm, zz in product(n, rho12, r2, p, pattern, m, yz)
    ]


def _grid_chunk(args):
    cell, cell_index, master_seed, lo, hi, strategies, em_cfg, mcmc_cfg, level = args
    records = run_replications(
        cell, strategies, cell_index, master_seed, em_cfg, mcmc_cfg, level, range(lo, hi)
    )
    return cell_index, lo, records


def run_grid_records(
    cells: Sequence[ExperimentCell],
    master_seed: int = 0,
    parallelism: int = 1,
    strategies: Sequence[str] = (MI, MID),
    em_cfg: EmConfig | None = None,
    mcmc_cfg: McmcConfig | None = None,
    level: float = 0.95,
) -> list[list[RepRecord]]:
    """Per-cell replication records for a grid; deterministic for a fixed seed.

    Work is split into (cell, replication-range) chunks; hierarchical stream
    keying makes the result independent of how chunks are scheduled.
    """
    if not cells:
        raise ValidationError("the grid is empty")
    if parallelism < 1:
        raise ValidationError("parallelism must be >= 1")
    strategies = tuple(strategies)
    tasks = []
    for ci, cell in enumerate(cells):
        chunk = max(1, math.ceil(cell.d / parallelism))
        for lo in range(0, cell.d, chunk):
            tasks.append(
                (cell, ci, master_seed, lo, min(lo + chunk, cell.d), strategies, em_cfg, mcmc_cfg, level)
            )
    if parallelism == 1:
        done = [_grid_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool_:
            done = list(pool_.map(_grid_chunk, tasks))
    per_cell: list[list[tuple[int, list[RepRecord]]]] = [[] for _ in cells]
    for cell_index, lo, records in done:
        per_cell[cell_index].append((lo, records))
    out = []
    for chunks in per_cell:
        chunks.sort(key=lambda item: item[0])
        out.append([rec for _, records in chunks for rec in records])
    return out


def run_grid(
    cells: Sequence[ExperimentCell],
    master_seed: int = 0,
    parallelism: int = 1,
    strategies: Sequence[str] = (MI, MID),
    em_cfg: EmConfig | None = None,
    mcmc_cfg: McmcConfig | None = None,
    level: float = 0.95,
) -> list[CellMetrics]:
    """One CellMetrics per grid cell; bit-identical for a fixed seed at any parallelism."""
    records = run_grid_records(cells, master_seed, parallelism, strategies, em_cfg, mcmc_cfg, level)
    return [
        summarize_cell(cell, recs, strategies) for cell, recs in zip(cells, records)
    ]


def median_order_stat_ci(values: Sequence[float], level: float = 0.95) -> tuple[float, float]:
    """Distribution-free confidence interval for the median from binomial order statistics."""
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    if n < 2:
        raise ValidationError("need at least 2 values")
    lo_rank = int(binom.ppf((1.0 - level) / 2.0, n, 0.5))
    hi_rank = n - 1 - lo_rank
    return float(x[lo_rank]), float(x[hi_rank])
