"""Multivariate-normal imputation: EM fit plus data-augmentation MCMC.

The model is a joint normal over all columns. ``em_fit`` maximizes the
observed-data likelihood; ``multiple_impute`` then runs one independent
I-step/P-step chain per imputation, all started from the EM solution, and
retains each chain's final completion. The P-step draws from the Jeffreys-prior
posterior: sigma ~ inverse-Wishart(n-1, centered cross-product), then
mu ~ Normal(column means, sigma/n). Inverse-Wishart draws use the Bartlett
decomposition, which is positive definite by construction.

The chain loop works on raw arrays and LAPACK primitives; validated MvnParams
objects appear only at the public API boundary.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .dataset import ImputationMeta, ImputationSet, IncompleteDataset, MvnParams
from .errors import (
    InsufficientDataError,
    InsufficientImputationsError,
    SingularityError,
    SingularPivotError,
    UnusableColumnError,
    ValidationError,
)

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class EmConfig:
    """EM controls: iteration cap, relative log-likelihood tolerance, optional ridge.

    ``ridge`` adds that constant to every diagonal element of sigma after each
    M-step. It is an opt-in stabilizer for near-singular problems; the default
    of 0 fails loudly instead of silently regularizing.
    """

    max_iter: int = 1000
    tol: float = 1e-8
    ridge: float = 0.0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValidationError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValidationError("tol must be > 0")
        if self.ridge < 0:
            raise ValidationError("ridge must be >= 0")


@dataclass(frozen=True)
class McmcConfig:
    """MCMC controls: burn-in iterations before the retained draw of each chain."""

    burn_in: int = 200

    def __post_init__(self):
        if self.burn_in < 1:
            raise ValidationError("burn_in must be >= 1")


@dataclass(frozen=True)
class EmResult:
    params: MvnParams
    n_iter: int
    loglik: float
    converged: bool
    loglik_path: tuple[float, ...]


# --- low-level primitives ----------------------------------------------------


def _chol_lower(a: np.ndarray, context: str) -> np.ndarray:
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info != 0:
        raise SingularityError(f"{context}: matrix is not positive definite")
    return c


def _sweep_raw(a: np.ndarray, pivots) -> np.ndarray:
    g = a.copy()
    for p in pivots:
        d = g[p, p]
        if not d > 0.0:
            raise SingularPivotError(
                f"pivot {p} is {d}; pivot block is not positive definite"
            )
        row = g[p].copy()
        g -= np.outer(row, row) / d
        g[p, :] = row / d
        g[:, p] = row / d
        g[p, p] = -1.0 / d
    return g


def conditional_params(
    params: MvnParams, observed_idx, observed_vals
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the missing coordinates given the observed ones.

    With no observed coordinates this is the marginal (mu, sigma); with all
    coordinates observed the result is empty. The conditional covariance does
    not depend on the observed values; the conditional mean is affine in them.
    """
    obs = np.asarray(sorted(int(i) for i in observed_idx), dtype=int)
    k = params.k
    if obs.size and (obs[0] < 0 or obs[-1] >= k or len(set(obs.tolist())) != obs.size):
        raise ValidationError("observed_idx must be distinct indices in [0, k)")
    vals = np.asarray(observed_vals, dtype=float)
    if vals.shape != (obs.size,):
        raise ValidationError("observed_vals must match observed_idx in length")
    if obs.size == 0:
        return params.mu.copy(), params.sigma.copy()
    mis = np.setdiff1d(np.arange(k), obs)
    if mis.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    g = _sweep_raw(params.sigma, obs)
    coef = g[mis[:, None], obs]
    cond_cov = g[mis[:, None], mis]
    cond_cov = 0.5 * (cond_cov + cond_cov.T)
    cond_mean = params.mu[mis] + coef @ (vals - params.mu[obs])
    return cond_mean, cond_cov


# --- missingness-pattern machinery -------------------------------------------
#
# Rows sharing a missingness pattern share one conditional system, so the
# E-step and the I-step group rows by pattern and handle each group in a batch.
# Row indices and the observed sub-matrix of each group never change, so they
# are extracted once per fit or chain run.


@dataclass(frozen=True)
class _PatternGroup:
    rows: np.ndarray  # row indices sharing this pattern
    obs: np.ndarray  # observed column indices
    mis: np.ndarray  # missing column indices
    x_obs: np.ndarray  # (len(rows), len(obs)) observed values


def _pattern_groups(values: np.ndarray, mask: np.ndarray) -> list[_PatternGroup]:
    patterns, inverse = np.unique(mask, axis=0, return_inverse=True)
    groups = []
    for g in range(patterns.shape[0]):
        pat = patterns[g]
        rows = np.nonzero(inverse == g)[0]
        obs = np.nonzero(~pat)[0]
        mis = np.nonzero(pat)[0]
        groups.append(
            _PatternGroup(rows=rows, obs=obs, mis=mis, x_obs=values[rows[:, None], obs])
        )
    return groups


def _conditional_system(sigma: np.ndarray, obs: np.ndarray, mis: np.ndarray):
    """(coef, cond_cov) of the missing block given the observed block."""
    if obs.size == 0:
        return np.zeros((mis.size, 0)), sigma.copy()
    g = _sweep_raw(sigma, obs)
    coef = g[mis[:, None], obs]
    cond_cov = g[mis[:, None], mis]
    return coef, 0.5 * (cond_cov + cond_cov.T)


def _precision(sigma: np.ndarray) -> np.ndarray:
    c, info = lapack.dpotrf(sigma, lower=1)
    if info != 0:
        raise SingularityError("covariance is not positive definite")
    p, info = lapack.dpotri(c, lower=1)
    if info != 0:
        raise SingularityError("covariance is numerically singular")
    lower = np.tril(p)
    return lower + np.tril(p, -1).T


def _chol2x2(c: np.ndarray) -> np.ndarray:
    """Closed-form lower Cholesky factor of a 2x2 SPD matrix."""
    a = c[0, 0]
    if not a > 0.0:
        raise SingularityError("conditional covariance is not positive definite")
    l00 = math.sqrt(a)
    l10 = c[1, 0] / l00
    rest = c[1, 1] - l10 * l10
    if not rest > 0.0:
        raise SingularityError("conditional covariance is not positive definite")
    return np.array([[l00, 0.0], [l10, math.sqrt(rest)]])


def _iteration_systems(sigma: np.ndarray, groups: list["_PatternGroup"]):
    """Per-pattern (coef, chol of conditional covariance or scalar sd) for one sigma.

    Derived from the precision matrix: the conditional covariance of the
    missing block is the inverse of the missing-by-missing precision block and
    the regression coefficients are -cond_cov @ prec[mis, obs]. One matrix
    inversion is shared by every pattern of the iteration.
    """
    prec = _precision(sigma)
    systems = []
    for grp in groups:
        mis, obs = grp.mis, grp.obs
        if mis.size == 0:
            systems.append(None)
            continue
        if mis.size == 1:
            pm = prec[mis[0], mis[0]]
            if not pm > 0.0:
                raise SingularityError("conditional variance is not positive")
            cond_var = 1.0 / pm
            coef = prec[mis, obs] * (-cond_var) if obs.size else np.zeros((1, 0))
            systems.append((coef.reshape(1, -1), math.sqrt(cond_var)))
            continue
        pmm = prec[mis[:, None], mis]
        if mis.size == 2:
            det = pmm[0, 0] * pmm[1, 1] - pmm[0, 1] * pmm[1, 0]
            if not det > 0.0:
                raise SingularityError("conditional covariance is not positive definite")
            cond = (
                np.array([[pmm[1, 1], -pmm[0, 1]], [-pmm[1, 0], pmm[0, 0]]]) / det
            )
        else:
            cc, info = lapack.dpotrf(pmm, lower=1)
            if info == 0:
                cond, info = lapack.dpotri(cc, lower=1)
            if info != 0:
                raise SingularityError("conditional covariance is not positive definite")
            cond = np.tril(cond) + np.tril(cond, -1).T
        coef = -(cond @ prec[mis[:, None], obs]) if obs.size else np.zeros((mis.size, 0))
        chol = _chol2x2(cond) if mis.size == 2 else _chol_lower(cond, "conditional covariance")
        systems.append((coef, chol))
    return systems


def _observed_loglik(groups: list[_PatternGroup], mu: np.ndarray, sigma: np.ndarray) -> float:
    """Log-likelihood of the observed cells under the joint normal."""
    total = 0.0
    for grp in groups:
        if grp.obs.size == 0:
            continue
        sub = sigma[grp.obs[:, None], grp.obs]
        chol = _chol_lower(sub, "observed-block covariance")
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        dev = grp.x_obs - mu[grp.obs]
        z, info = lapack.dtrtrs(chol, dev.T, lower=1)
        if info != 0:
            raise SingularityError("observed-block covariance is singular")
        quad = float(np.sum(z * z))
        total += -0.5 * (grp.rows.size * (grp.obs.size * _LOG_2PI + logdet) + quad)
    return total


def em_fit(data: IncompleteDataset, cfg: EmConfig | None = None) -> EmResult:
    """Maximum-likelihood fit of the joint normal to incomplete data via EM.

    The observed-data log-likelihood is non-decreasing across iterations (for
    ridge = 0); convergence is declared when its relative change drops below
    ``cfg.tol`` or ``cfg.max_iter`` is reached. Complete data short-circuits to
    the closed-form MLE (mean and covariance with divisor n) in one iteration.
    """
    cfg = cfg or EmConfig()
    values, mask = data.values, data.mask
    n, k = values.shape
    counts = data.observed_counts()
    for j in np.where(counts < 2)[0]:
        raise UnusableColumnError(data.column_names[j], int(counts[j]))
    if n <= k and cfg.ridge == 0.0:
        raise SingularityError(
            f"n = {n} rows cannot identify a {k}x{k} covariance without a ridge"
        )

    if not mask.any():
        mu = values.mean(axis=0)
        centered = values - mu
        sigma = (centered.T @ centered) / n
        if cfg.ridge > 0.0:
            sigma = sigma + cfg.ridge * np.eye(k)
        params = _make_params(mu, sigma)
        groups = _pattern_groups(values, mask)
        ll = _observed_loglik(groups, params.mu, params.sigma)
        return EmResult(params, n_iter=1, loglik=ll, converged=True, loglik_path=(ll,))

    groups = _pattern_groups(values, mask)

    # Starting values: available-case means and a diagonal of available-case
    # variances. Always positive definite, so the first E-step is well posed.
    mu = np.array([values[~mask[:, j], j].mean() for j in range(k)])
    var = np.array([values[~mask[:, j], j].var() for j in range(k)])
    var = np.maximum(var, 1e-8 * max(var.max(), 1.0))
    sigma = np.diag(var)

    path: list[float] = []
    prev_ll = math.nan
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.max_iter + 1):
        t1 = np.zeros(k)
        t2 = np.zeros((k, k))
        for grp in groups:
            rows, obs, mis, x_obs = grp.rows, grp.obs, grp.mis, grp.x_obs
            if mis.size == 0:
                t1 += x_obs.sum(axis=0)
                t2 += x_obs.T @ x_obs
                continue
            coef, cond_cov = _conditional_system(sigma, obs, mis)
            e_mis = mu[mis] + (x_obs - mu[obs]) @ coef.T
            if obs.size:
                t1[obs] += x_obs.sum(axis=0)
                t2[obs[:, None], obs] += x_obs.T @ x_obs
                cross = x_obs.T @ e_mis
                t2[obs[:, None], mis] += cross
                t2[mis[:, None], obs] += cross.T
            t1[mis] += e_mis.sum(axis=0)
            t2[mis[:, None], mis] += e_mis.T @ e_mis + rows.size * cond_cov
        mu = t1 / n
        sigma = t2 / n - np.outer(mu, mu)
        sigma = 0.5 * (sigma + sigma.T)
        if cfg.ridge > 0.0:
            sigma = sigma + cfg.ridge * np.eye(k)
        ll = _observed_loglik(groups, mu, sigma)
        path.append(ll)
        if not math.isnan(prev_ll) and abs(ll - prev_ll) <= cfg.tol * abs(prev_ll):
            converged = True
            break
        prev_ll = ll

    return EmResult(
        _make_params(mu, sigma),
        n_iter=n_iter,
        loglik=path[-1],
        converged=converged,
        loglik_path=tuple(path),
    )


def _make_params(mu: np.ndarray, sigma: np.ndarray) -> MvnParams:
    try:
        return MvnParams(mu, sigma)
    except ValidationError as exc:
        raise SingularityError(f"covariance update failed: {exc}") from None


def i_step(data: IncompleteDataset, params: MvnParams, rng: np.random.Generator) -> np.ndarray:
    """Draw every missing cell from its row's conditional normal given the observed cells.

    Observed cells are carried over exactly; the returned matrix is a fresh copy.
    """
    if params.k != data.n_cols:
        raise ValidationError("params dimension does not match dataset")
    completed = data.values.copy()
    groups = _pattern_groups(data.values, data.mask)
    _i_step_into(completed, groups, params.mu, params.sigma, rng)
    return completed


def _i_step_into(
    completed: np.ndarray,
    groups: list[_PatternGroup],
    mu: np.ndarray,
    sigma: np.ndarray,
    rng: np.random.Generator,
) -> None:
    """Overwrite the missing cells of ``completed`` with fresh conditional draws."""
    systems = _iteration_systems(sigma, groups)
    for grp, system in zip(groups, systems):
        if system is None:
            continue
        mis = grp.mis
        coef, scale = system
        mean = mu[mis] + (grp.x_obs - mu[grp.obs]) @ coef.T
        z = rng.standard_normal((grp.rows.size, mis.size))
        if mis.size == 1:
            draws = mean + z * scale
        else:
            draws = mean + z @ scale.T
        completed[grp.rows[:, None], mis] = draws


@dataclass(frozen=True)
class _PStepCache:
    n: int
    k: int
    chi_dfs: np.ndarray
    diag_idx: tuple
    tril_idx: tuple
    n_tril: int
    sqrt_n: float


def _p_step_cache(n: int, k: int) -> _PStepCache:
    return _PStepCache(
        n=n,
        k=k,
        chi_dfs=(n - 1) - np.arange(k),
        diag_idx=np.diag_indices(k),
        tril_idx=np.tril_indices(k, -1),
        n_tril=k * (k - 1) // 2,
        sqrt_n=math.sqrt(n),
    )


def _p_step_raw(x: np.ndarray, rng: np.random.Generator, cache: _PStepCache):
    xbar = x.mean(axis=0)
    centered = x - xbar
    s = centered.T @ centered
    c = _chol_lower(s, "cross-product matrix")
    # Bartlett factor of a Wishart(n-1, I) draw: chi-square diagonal, normal
    # lower triangle. sigma = C A^-T A^-1 C^T is then inverse-Wishart(n-1, S).
    a = np.zeros((cache.k, cache.k))
    a[cache.diag_idx] = np.sqrt(rng.chisquare(cache.chi_dfs))
    if cache.n_tril:
        a[cache.tril_idx] = rng.standard_normal(cache.n_tril)
    t, info = lapack.dtrtrs(a, c.T, lower=1)
    if info != 0:
        raise SingularityError("Bartlett factor is singular")
    sigma = t.T @ t
    sigma = 0.5 * (sigma + sigma.T)
    chol_sigma = _chol_lower(sigma, "posterior covariance draw")
    mu = xbar + (chol_sigma @ rng.standard_normal(cache.k)) / cache.sqrt_n
    return mu, sigma


def p_step(completed: np.ndarray, rng: np.random.Generator) -> MvnParams:
    """One posterior draw of (mu, sigma) from a completed data matrix.

    Jeffreys prior: sigma ~ inverse-Wishart with n-1 degrees of freedom and the
    centered cross-product matrix as scale, drawn by Bartlett decomposition;
    then mu ~ Normal(column means, sigma / n).
    """
    x = np.asarray(completed, dtype=float)
    if x.ndim != 2:
        raise ValidationError("completed must be a 2-D matrix")
    n, k = x.shape
    if n <= k + 1:
        raise InsufficientDataError(
            f"posterior draw needs n > k + 1 rows, got n = {n} with k = {k}"
        )
    mu, sigma = _p_step_raw(x, rng, _p_step_cache(n, k))
    return _make_params(mu, sigma)


def multiple_impute(
    data: IncompleteDataset,
    m: int,
    em_cfg: EmConfig | None = None,
    mcmc_cfg: McmcConfig | None = None,
    rng: np.random.Generator | None = None,
    *,
    master_seed: int | None = None,
) -> ImputationSet:
    """Produce M completed copies of the data by data-augmentation MCMC.

    EM locates the posterior mode once; each imputation then comes from its own
    chain started at that mode, alternating I- and P-steps for ``burn_in``
    iterations and keeping the final completion. Chains draw from independent
    child streams spawned from ``rng``, so imputations are mutually independent
    and the whole call is deterministic for a fixed generator state.
    """
    if m < 2:
        raise InsufficientImputationsError(f"need at least 2 imputations, got {m}")
    if rng is None:
        raise ValidationError("an rng stream is required")
    em_cfg = em_cfg or EmConfig()
    mcmc_cfg = mcmc_cfg or McmcConfig()

    if not data.mask.any():
        completed = np.repeat(data.values[np.newaxis], m, axis=0)
        meta = ImputationMeta(master_seed, mcmc_cfg.burn_in, 0)
        return ImputationSet(data, completed, meta)

    n, k = data.values.shape
    if n <= k + 1:
        raise InsufficientDataError(
            f"data-augmentation needs n > k + 1 rows, got n = {n} with k = {k}"
        )
    em = em_fit(data, em_cfg)
    groups = _pattern_groups(data.values, data.mask)
    cache = _p_step_cache(n, k)
    chain_rngs = rng.spawn(m)
    completed = np.empty((m, n, k))
    for chain, chain_rng in enumerate(chain_rngs):
        mu, sigma = em.params.mu, em.params.sigma
        work = data.values.copy()
        for step in range(mcmc_cfg.burn_in):
            _i_step_into(work, groups, mu, sigma, chain_rng)
            if step + 1 < mcmc_cfg.burn_in:
                mu, sigma = _p_step_raw(work, chain_rng, cache)
        completed[chain] = work
    meta = ImputationMeta(master_seed, mcmc_cfg.burn_in, em.n_iter)
    return ImputationSet(data, completed, meta)
