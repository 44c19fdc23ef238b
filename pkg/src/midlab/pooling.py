"""Combining rules for multiply-imputed analyses.

Conventions used throughout: the between-imputation variance B carries the
(1 + 1/M) finite-M correction, so the total variance is simply T = W + B.
The fraction of missing information is gamma = B / T. Degrees of freedom are
the harmonic combination of the imputation component (M - 1) / gamma^2 and the
observed-data component ((nu_com + 1) / (nu_com + 3)) * nu_com * (1 - gamma);
when gamma = 0 the imputation component is infinite and nu = nu_obs.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import InsufficientImputationsError, ValidationError
from .ols import CompletedFit


@dataclass(frozen=True)
class PooledEstimate:
    """Pooled inference for one scalar parameter."""

    name: str
    theta_bar: float
    w_bar: float
    b: float
    t: float
    gamma: float
    nu_imp: float
    nu_obs: float
    nu: float
    ci_lo: float
    ci_hi: float
    level: float
    m: int
    nu_com: int

    @property
    def se(self) -> float:
        return math.sqrt(self.t)


def degrees_of_freedom(gamma: float, m: int, nu_com: int) -> tuple[float, float, float]:
    """(nu_imp, nu_obs, nu) for a given fraction of missing information.

    nu_imp = (M - 1) / gamma^2, nu_obs = ((nu_com + 1) / (nu_com + 3)) * nu_com
    * (1 - gamma), and nu is their harmonic total. gamma = 0 gives nu = nu_obs.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValidationError(f"gamma must be in [0, 1), got {gamma}")
    if nu_com < 1:
        raise ValidationError(f"nu_com must be >= 1, got {nu_com}")
    if m < 2:
        raise InsufficientImputationsError(f"need M >= 2, got {m}")
    nu_obs = (nu_com + 1.0) / (nu_com + 3.0) * nu_com * (1.0 - gamma)
    if gamma == 0.0:
        return math.inf, nu_obs, nu_obs
    nu_imp = (m - 1.0) / (gamma * gamma)
    nu = 1.0 / (1.0 / nu_imp + 1.0 / nu_obs)
    return nu_imp, nu_obs, nu


def confidence_interval(
    theta_bar: float, t: float, nu: float, level: float = 0.95
) -> tuple[float, float]:
    """theta_bar +/- t-quantile(nu, (1 + level) / 2) * sqrt(t); nu may be fractional."""
    if t < 0:
        raise ValidationError("t must be >= 0")
    if not nu > 0:
        raise ValidationError("nu must be > 0")
    if not 0.0 < level < 1.0:
        raise ValidationError("level must be in (0, 1)")
    if t == 0.0:
        return theta_bar, theta_bar
    half = float(stats.t.ppf(0.5 * (1.0 + level), df=nu)) * math.sqrt(t)
    return theta_bar - half, theta_bar + half


def pool(
    fits: Sequence[CompletedFit],
    nu_com: int | None = None,
    level: float = 0.95,
) -> dict[str, PooledEstimate]:
    """Combine M completed-data fits into pooled estimates, one per parameter.

    ``nu_com`` defaults to the (common) complete-data degrees of freedom of the
    fits; pass it explicitly to override.
    """
    fits = list(fits)
    m = len(fits)
    if m < 2:
        raise InsufficientImputationsError(f"pooling needs M >= 2 fits, got {m}")
    names = fits[0].param_names
    for f in fits[1:]:
        if f.param_names != names:
            raise ValidationError("all fits must estimate the same parameters")
    if nu_com is None:
        nu_coms = {f.nu_com for f in fits}
        if len(nu_coms) != 1:
            raise ValidationError(
                f"fits disagree on nu_com ({sorted(nu_coms)}); pass nu_com explicitly"
            )
        nu_com = nu_coms.pop()
    if nu_com < 1:
        raise ValidationError(f"nu_com must be >= 1, got {nu_com}")

    theta = np.vstack([f.theta_hat for f in fits])  # (M, P)
    w = np.vstack([f.w_hat for f in fits])
    theta_bar = theta.mean(axis=0)
    w_bar = w.mean(axis=0)
    dev = theta - theta_bar
    b = (1.0 + 1.0 / m) / (m - 1.0) * np.sum(dev * dev, axis=0)
    t = w_bar + b

    out: dict[str, PooledEstimate] = {}
    gamma_max = float(np.nextafter(1.0, 0.0))
    for j, name in enumerate(names):
        # gamma = 1 can only arise from a degenerate W = 0; keep it inside [0, 1).
        gamma = min(float(b[j] / t[j]), gamma_max) if t[j] > 0.0 else 0.0
        nu_imp, nu_obs, nu = degrees_of_freedom(gamma, m, nu_com)
        ci_lo, ci_hi = confidence_interval(float(theta_bar[j]), float(t[j]), nu, level)
        out[name] = PooledEstimate(
            name=name,
            theta_bar=float(theta_bar[j]),
            w_bar=float(w_bar[j]),
            b=float(b[j]),
            t=float(t[j]),
            gamma=gamma,
            nu_imp=nu_imp,
            nu_obs=nu_obs,
            nu=nu,
            ci_lo=ci_lo,
            ci_hi=ci_hi,
            level=level,
            m=m,
            nu_com=int(nu_com),
        )
    return out


def se_inflation_pct(gamma_inf: float, m: int) -> float:
    """Percent by which the M-imputation SE exceeds the infinite-M SE: 100 * gamma / (2M)."""
    if not 0.0 <= gamma_inf < 1.0:
        raise ValidationError(f"gamma_inf must be in [0, 1), got {gamma_inf}")
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}")
    return 100.0 * (gamma_inf / (2.0 * m))


def t_hat_moments(gamma_inf: float, m: int, t_inf: float) -> tuple[float, float, float]:
    """Moments of the squared-SE estimate over repeated imputation.

    Returns (expectation, exact coefficient of variation, approximate CV):
    E = (1 + gamma / M) * T_inf, exact CV = gamma * ((M + 1) / (M + gamma)) *
    sqrt(2 / (M - 1)), approximate CV = gamma * sqrt(2 / (M - 1)).
    """
    if not 0.0 <= gamma_inf < 1.0:
        raise ValidationError(f"gamma_inf must be in [0, 1), got {gamma_inf}")
    if m < 2:
        raise InsufficientImputationsError(f"need M >= 2, got {m}")
    if not t_inf > 0:
        raise ValidationError(f"t_inf must be > 0, got {t_inf}")
    expected = (1.0 + gamma_inf / m) * t_inf
    root = math.sqrt(2.0 / (m - 1.0))
    cv_approx = gamma_inf * root
    cv_exact = gamma_inf * ((m + 1.0) / (m + gamma_inf)) * root
    return expected, cv_exact, cv_approx
