"""Core data model: incomplete datasets, model parameters, imputation sets, and RNG streams.

Missing cells are stored as NaN placeholders, but the boolean mask is the
authority on what is missing; no consumer reads a masked value. All containers
are immutable after construction (arrays are frozen), so they can be shared
freely between concurrent workers.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError

ROLE_OUTCOME = "outcome"
ROLE_PREDICTOR = "predictor"
ROLE_AUXILIARY = "auxiliary"
VALID_ROLES = (ROLE_OUTCOME, ROLE_PREDICTOR, ROLE_AUXILIARY)

PATTERN_MCAR = "mcar"
PATTERN_COORDINATED = "coordinated"
PATTERN_COMPLEMENTARY = "complementary"
VALID_PATTERNS = (PATTERN_MCAR, PATTERN_COORDINATED, PATTERN_COMPLEMENTARY)


def _frozen(a: np.ndarray, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


def rng_stream(
    master_seed: int, cell_index: int = 0, replication: int = 0, chain: int = 0
) -> np.random.Generator:
    """Deterministic, statistically independent random stream for one work unit.

    Streams are keyed hierarchically by (master_seed, cell_index, replication,
    chain), so a grid of experiments reproduces bit-identically under any
    parallel schedule. Identical arguments always yield the identical stream.
    """
    for name, value in (
        ("master_seed", master_seed),
        ("cell_index", cell_index),
        ("replication", replication),
        ("chain", chain),
    ):
        if not isinstance(value, (int, np.integer)) or value < 0:
            raise ValidationError(f"{name} must be a nonnegative integer, got {value!r}")
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(cell_index), int(replication), int(chain)))
    return np.random.default_rng(ss)


@dataclass(frozen=True, eq=False)
class IncompleteDataset:
    """Rectangular real-valued data with a missingness mask and column roles.

    ``mask`` is True where a value is missing. Exactly one column carries the
    outcome role; the rest are predictors or auxiliary variables (used in
    imputation but not in analysis).
    """

    values: np.ndarray
    mask: np.ndarray
    column_names: tuple[str, ...]
    roles: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask)
        if values.ndim != 2:
            raise ValidationError("values must be a 2-D matrix")
        if mask.shape != values.shape:
            raise ValidationError(
                f"mask shape {mask.shape} does not match values shape {values.shape}"
            )
        if mask.dtype != bool:
            raise ValidationError("mask must be boolean")
        n, k = values.shape
        if n < 1 or k < 2:
            raise ValidationError(f"need n >= 1 and k >= 2 columns, got {n}x{k}")
        names = tuple(str(c) for c in self.column_names)
        roles = tuple(self.roles)
        if len(names) != k or len(roles) != k:
            raise ValidationError("column_names and roles must have one entry per column")
        if len(set(names)) != k:
            raise ValidationError("column names must be unique")
        bad = [r for r in roles if r not in VALID_ROLES]
        if bad:
            raise ValidationError(f"unknown column role(s): {bad}")
        if sum(r == ROLE_OUTCOME for r in roles) != 1:
            raise ValidationError("exactly one column must have the outcome role")
        if not np.all(np.isfinite(values[~mask])):
            raise ValidationError("observed cells must be finite")
        # The mask is authoritative; park a quiet NaN in every masked cell so
        # an accidental read is loud instead of silently plausible.
        values = values.copy()
        values[mask] = np.nan
        object.__setattr__(self, "values", _frozen(values, float))
        object.__setattr__(self, "mask", _frozen(mask, bool))
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "roles", roles)

    @classmethod
    def from_values(cls, values, column_names, roles) -> "IncompleteDataset":
        """Build a dataset from a matrix in which NaN already marks missing cells."""
        values = np.asarray(values, dtype=float)
        return cls(values, np.isnan(values), tuple(column_names), tuple(roles))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def outcome_index(self) -> int:
        return self.roles.index(ROLE_OUTCOME)

    @property
    def predictor_indices(self) -> tuple[int, ...]:
        return tuple(j for j, r in enumerate(self.roles) if r == ROLE_PREDICTOR)

    @property
    def auxiliary_indices(self) -> tuple[int, ...]:
        return tuple(j for j, r in enumerate(self.roles) if r == ROLE_AUXILIARY)

    @property
    def y_missing(self) -> np.ndarray:
        """Boolean vector: True where the outcome is missing."""
        return self.mask[:, self.outcome_index]

    @property
    def n_missing(self) -> int:
        return int(self.mask.sum())

    def observed_counts(self) -> np.ndarray:
        """Number of observed values in each column."""
        return (~self.mask).sum(axis=0)

    def subset_rows(self, keep) -> "IncompleteDataset":
        """New dataset restricted to the given rows; columns, names, roles unchanged."""
        keep = np.asarray(keep)
        return IncompleteDataset(
            self.values[keep], self.mask[keep], self.column_names, self.roles
        )


@dataclass(frozen=True, eq=False)
class MvnParams:
    """Mean vector and symmetric positive-definite covariance of the joint model."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if mu.ndim != 1 or sigma.shape != (mu.size, mu.size):
            raise ValidationError("mu must be length k and sigma k x k")
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(sigma)):
            raise ValidationError("mu and sigma must be finite")
        scale = np.max(np.abs(sigma))
        if scale == 0 or np.max(np.abs(sigma - sigma.T)) > 1e-10 * scale:
            raise ValidationError("sigma must be symmetric (relative tolerance 1e-10)")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise ValidationError("sigma must be strictly positive definite") from None
        object.__setattr__(self, "mu", _frozen(mu, float))
        object.__setattr__(self, "sigma", _frozen(sigma, float))

    @property
    def k(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class ImputationMeta:
    """Provenance of an ImputationSet: seed label, burn-in, EM iterations."""

    master_seed: int | None
    burn_in: int
    em_iterations: int


@dataclass(frozen=True, eq=False)
class ImputationSet:
    """M completed copies of a dataset plus the record of what was imputed.

    ``completed`` has shape (M, n, k) and no missing cells; any cell that was
    observed in the source is carried over exactly in every copy.
    """

    source: IncompleteDataset
    completed: np.ndarray
    meta: ImputationMeta

    def __post_init__(self):
        completed = np.asarray(self.completed, dtype=float)
        n, k = self.source.values.shape
        if completed.ndim != 3 or completed.shape[1:] != (n, k):
            raise ValidationError(
                f"completed must have shape (M, {n}, {k}), got {completed.shape}"
            )
        if completed.shape[0] < 2:
            raise ValidationError("an ImputationSet needs M >= 2 completed copies")
        if not np.all(np.isfinite(completed)):
            raise ValidationError("completed copies may not contain missing cells")
        observed = ~self.source.mask
        src = self.source.values[observed]
        for m in range(completed.shape[0]):
            if not np.array_equal(completed[m][observed], src):
                raise ValidationError(
                    f"completed copy {m} does not preserve observed cells exactly"
                )
        object.__setattr__(self, "completed", _frozen(completed, float))

    @property
    def m(self) -> int:
        return self.completed.shape[0]

    @property
    def original_mask(self) -> np.ndarray:
        return self.source.mask

    @property
    def y_imputed(self) -> np.ndarray:
        """True for rows whose outcome value was missing before imputation."""
        return self.source.y_missing


@dataclass(frozen=True)
class ExperimentCell:
    """One cell of the simulation grid.

    Factors: cases per dataset ``n``, predictor correlation ``rho12``, explained
    variance ``r2``, deletion proportion ``p``, missingness ``pattern``, number
    of imputations ``m``, optional auxiliary correlation ``rho_yz`` (None means
    no auxiliary column), replications ``d``, and the master ``seed`` (None
    defers to the grid runner's master seed).
    """

    n: int
    rho12: float
    r2: float
    p: float
    pattern: str
    m: int
    rho_yz: float | None = None
    d: int = 1
    seed: int | None = None

    def __post_init__(self):
        if not -1.0 < self.rho12 < 1.0:
            raise ValidationError(f"rho12 must be in (-1, 1), got {self.rho12}")
        if not 0.0 < self.r2 < 1.0:
            raise ValidationError(f"r2 must be in (0, 1), got {self.r2}")
        if not 0.0 <= self.p <= 0.5:
            raise ValidationError(f"p must be in [0, 0.5], got {self.p}")
        if self.pattern not in VALID_PATTERNS:
            raise ValidationError(
                f"pattern must be one of {VALID_PATTERNS}, got {self.pattern!r}"
            )
        if self.m < 2:
            raise ValidationError(f"m must be >= 2, got {self.m}")
        if self.rho_yz is not None and not 0.0 <= self.rho_yz < 1.0:
            raise ValidationError(f"rho_yz must be in [0, 1), got {self.rho_yz}")
        if self.d < 1:
            raise ValidationError(f"d must be >= 1, got {self.d}")
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")

    def with_seed(self, seed: int) -> "ExperimentCell":
        return replace(self, seed=seed)
