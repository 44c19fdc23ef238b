"""The three estimation strategies over an incomplete dataset.

MI analyzes all rows of every completed copy. MID analyzes the same completed
copies after dropping every row whose outcome was imputed (deletion keys off
the pre-imputation mask, never off value inspection). DMI deletes rows with a
missing outcome first and imputes only the remaining missing predictor cells.
MI and MID deliberately share one ImputationSet so paired comparisons see
byte-identical imputed values.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dataset import ImputationSet, IncompleteDataset
from .errors import AllYImputedError, TooFewObservedYError, ValidationError
from .imputer import EmConfig, McmcConfig, multiple_impute
from .ols import CompletedFit, fit_ols
from .pooling import PooledEstimate, pool

MI = "mi"
MID = "mid"
DMI = "dmi"
STRATEGIES = (MI, MID, DMI)


@dataclass(frozen=True)
class StrategyResult:
    strategy: str
    estimates: dict[str, PooledEstimate]
    n_analyzed: int
    m: int

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(self.estimates)


def _analysis_columns(data: IncompleteDataset):
    ycol = data.outcome_index
    pred = data.predictor_indices
    if not pred:
        raise ValidationError("the dataset declares no predictor columns")
    names = [data.column_names[j] for j in pred]
    return ycol, pred, names


def _fit_all(imputations: ImputationSet, keep=None) -> list[CompletedFit]:
    data = imputations.source
    ycol, pred, names = _analysis_columns(data)
    fits = []
    for m in range(imputations.m):
        completed = imputations.completed[m]
        if keep is not None:
            completed = completed[keep]
        fits.append(fit_ols(completed, ycol, pred, names))
    return fits


def run_mi(
    source: IncompleteDataset | ImputationSet,
    m: int | None = None,
    em_cfg: EmConfig | None = None,
    mcmc_cfg: McmcConfig | None = None,
    rng: np.random.Generator | None = None,
    level: float = 0.95,
) -> StrategyResult:
    """Ordinary MI: impute, analyze all n rows of every copy, pool with nu_com = n - (p + 1).

    Pass an ImputationSet to analyze existing imputations (the paired design);
    pass an IncompleteDataset with m and rng to impute first.
    """
    imputations = _resolve_imputations(source, m, em_cfg, mcmc_cfg, rng)
    fits = _fit_all(imputations)
    return StrategyResult(MI, pool(fits, level=level), imputations.source.n_rows, imputations.m)


def run_mid(
    imputations: ImputationSet, m: int | None = None, level: float = 0.95
) -> StrategyResult:
    """MI then deletion: drop rows with imputed outcome, pool with nu_com = n1 - (p + 1).

    Consumes an ImputationSet rather than re-imputing, so MI and MID comparisons
    share the same imputed values.
    """
    if m is not None and m != imputations.m:
        raise ValidationError(f"imputation set has M = {imputations.m}, not {m}")
    data = imputations.source
    keep = ~imputations.y_imputed
    n1 = int(keep.sum())
    p = len(data.predictor_indices)
    if n1 == 0:
        raise AllYImputedError("every outcome value was imputed; nothing left to analyze")
    if n1 <= p + 1:
        raise TooFewObservedYError(
            f"only {n1} rows have an observed outcome; need more than p + 1 = {p + 1}"
        )
    fits = _fit_all(imputations, keep=keep)
    return StrategyResult(MID, pool(fits, level=level), n1, imputations.m)


def run_dmi(
    data: IncompleteDataset,
    m: int,
    em_cfg: EmConfig | None = None,
    mcmc_cfg: McmcConfig | None = None,
    rng: np.random.Generator | None = None,
    level: float = 0.95,
) -> StrategyResult:
    """Deletion then MI: drop rows with missing outcome, impute remaining predictor cells.

    Rows that are only missing predictor values are retained for imputation; a
    row is dropped exactly when its outcome is missing. After deletion a
    predictor column can be left with too few observed values, in which case
    the imputer's unusable-column error propagates.
    """
    keep = ~data.y_missing
    n1 = int(keep.sum())
    p = len(data.predictor_indices)
    if n1 == 0:
        raise AllYImputedError("every outcome value is missing; nothing left to analyze")
    if n1 <= p + 1:
        raise TooFewObservedYError(
            f"only {n1} rows have an observed outcome; need more than p + 1 = {p + 1}"
        )
    sub = data.subset_rows(keep)
    imputations = multiple_impute(sub, m, em_cfg, mcmc_cfg, rng)
    fits = _fit_all(imputations)
    return StrategyResult(DMI, pool(fits, level=level), n1, imputations.m)


def _resolve_imputations(source, m, em_cfg, mcmc_cfg, rng) -> ImputationSet:
    if isinstance(source, ImputationSet):
        if m is not None and m != source.m:
            raise ValidationError(f"imputation set has M = {source.m}, not {m}")
        return source
    if isinstance(source, IncompleteDataset):
        if m is None:
            raise ValidationError("m is required when imputing from raw data")
        return multiple_impute(source, m, em_cfg, mcmc_cfg, rng)
    raise ValidationError(f"expected IncompleteDataset or ImputationSet, got {type(source)!r}")


class CombinedR2(NamedTuple):
    value: float
    clamped: bool


def r_squared_combined(sigma_e2_mid: float, sigma_y2_mi: float) -> CombinedR2:
    """Explained variance from a MID residual variance and an MI marginal variance of Y.

    R^2 = 1 - sigma_e^2 / sigma_Y^2, clamped to [0, 1]; the flag reports whether
    clamping occurred. The residual variance may be zero (an exact fit); the
    marginal variance must be positive.
    """
    if sigma_e2_mid < 0:
        raise ValidationError(f"residual variance must be >= 0, got {sigma_e2_mid}")
    if not sigma_y2_mi > 0:
        raise ValidationError(f"marginal variance must be > 0, got {sigma_y2_mi}")
    raw = 1.0 - sigma_e2_mid / sigma_y2_mi
    value = min(1.0, max(0.0, raw))
    return CombinedR2(value, value != raw)
