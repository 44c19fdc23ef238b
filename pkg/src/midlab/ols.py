"""Complete-data analysis: least-squares fit with squared standard errors.

One completed matrix in, point estimates out: intercept, one slope per
predictor, and the residual variance, each paired with its squared standard
error. The residual variance uses the unbiased divisor n - p - 1 and its
squared SE is the normal-theory value 2 * sigma^4 / nu_com.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import CollinearityError, InsufficientDataError, ValidationError

SIGMA2 = "sigma2"
INTERCEPT = "intercept"


@dataclass(frozen=True, eq=False)
class CompletedFit:
    """Estimates from one completed dataset: theta, squared SEs, residual df."""

    param_names: tuple[str, ...]
    theta_hat: np.ndarray
    w_hat: np.ndarray
    nu_com: int

    def __post_init__(self):
        theta = np.asarray(self.theta_hat, dtype=float)
        w = np.asarray(self.w_hat, dtype=float)
        if theta.shape != w.shape or theta.ndim != 1:
            raise ValidationError("theta_hat and w_hat must be equal-length vectors")
        if len(self.param_names) != theta.size:
            raise ValidationError("param_names must match theta_hat in length")
        if np.any(w < 0):
            raise ValidationError("squared standard errors must be nonnegative")
        if self.nu_com < 1:
            raise ValidationError("nu_com must be >= 1")
        object.__setattr__(self, "param_names", tuple(self.param_names))
        object.__setattr__(self, "theta_hat", theta)
        object.__setattr__(self, "w_hat", w)


def fit_ols(
    completed: np.ndarray,
    outcome_col: int,
    predictor_cols,
    predictor_names=None,
) -> CompletedFit:
    """Regress the outcome column on the predictors within one completed matrix.

    Returns estimates of (intercept, slopes..., residual variance) with their
    squared standard errors and nu_com = n - (p + 1) residual degrees of freedom.
    """
    x = np.asarray(completed, dtype=float)
    if x.ndim != 2:
        raise ValidationError("completed must be a 2-D matrix")
    predictor_cols = [int(c) for c in predictor_cols]
    if not predictor_cols:
        raise ValidationError("at least one predictor column is required")
    n = x.shape[0]
    p = len(predictor_cols)
    nu_com = n - (p + 1)
    if nu_com < 1:
        raise InsufficientDataError(
            f"need more than p + 1 = {p + 1} rows for a residual df, got n = {n}"
        )
    y = x[:, outcome_col]
    design = np.column_stack([np.ones(n), x[:, predictor_cols]])

    xtx = design.T @ design
    xty = design.T @ y
    try:
        factor = cho_factor(xtx, lower=True)
    except np.linalg.LinAlgError:
        raise CollinearityError("design matrix is rank deficient") from None
    diag = np.diag(factor[0])
    if np.min(diag) <= np.finfo(float).eps * max(np.max(diag), 1.0) * n:
        raise CollinearityError("design matrix is rank deficient")
    beta = cho_solve(factor, xty)

    # SSR from permutation-invariant building blocks (y'y, X'y are exact sums).
    ssr = float(y @ y - beta @ xty)
    ssr = max(ssr, 0.0)
    sigma2 = ssr / nu_com
    xtx_inv_diag = np.diag(cho_solve(factor, np.eye(p + 1)))
    w_coef = sigma2 * xtx_inv_diag
    w_sigma2 = 2.0 * sigma2 * sigma2 / nu_com

    if predictor_names is None:
        predictor_names = [f"x{j}" for j in predictor_cols]
    names = (INTERCEPT, *map(str, predictor_names), SIGMA2)
    theta = np.concatenate([beta, [sigma2]])
    w = np.concatenate([w_coef, [w_sigma2]])
    return CompletedFit(names, theta, np.maximum(w, 0.0), nu_com)
