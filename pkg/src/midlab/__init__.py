"""midlab: multivariate-normal multiple imputation, Rubin's rules, and
impute-then-delete strategies, with a Monte Carlo harness for comparing them.
"""

from .dataset import (
    ExperimentCell,
    ImputationMeta,
    ImputationSet,
    IncompleteDataset,
    MvnParams,
    rng_stream,
)
from .errors import (
    AllYImputedError,
    CollinearityError,
    InsufficientDataError,
    InsufficientImputationsError,
    MidlabError,
    SingularityError,
    SingularPivotError,
    TooFewObservedYError,
    UnusableColumnError,
    ValidationError,
)
from .imputer import (
    EmConfig,
    EmResult,
    McmcConfig,
    conditional_params,
    em_fit,
    i_step,
    multiple_impute,
    p_step,
)
from .ols import CompletedFit, fit_ols
from .pooling import (
    PooledEstimate,
    confidence_interval,
    degrees_of_freedom,
    pool,
    se_inflation_pct,
    t_hat_moments,
)
from .simulate import (
    CellMetrics,
    TruthSpec,
    apply_missingness,
    attach_auxiliary,
    expand_grid,
    generate_complete,
    paired_metrics,
    run_cell,
    run_grid,
    run_replications,
)
from .strategies import (
    StrategyResult,
    r_squared_combined,
    run_dmi,
    run_mi,
    run_mid,
)
from .sweep import reverse_sweep, sweep

__version__ = "0.1.0"

__all__ = [
    "AllYImputedError",
    "CellMetrics",
    "CollinearityError",
    "CompletedFit",
    "EmConfig",
    "EmResult",
    "ExperimentCell",
    "ImputationMeta",
    "ImputationSet",
    "IncompleteDataset",
    "InsufficientDataError",
    "InsufficientImputationsError",
    "McmcConfig",
    "MidlabError",
    "MvnParams",
    "PooledEstimate",
    "SingularPivotError",
    "SingularityError",
    "StrategyResult",
    "TooFewObservedYError",
    "TruthSpec",
    "UnusableColumnError",
    "ValidationError",
    "apply_missingness",
    "attach_auxiliary",
    "conditional_params",
    "confidence_interval",
    "degrees_of_freedom",
    "em_fit",
    "expand_grid",
    "fit_ols",
    "generate_complete",
    "i_step",
    "multiple_impute",
    "p_step",
    "paired_metrics",
    "pool",
    "r_squared_combined",
    "reverse_sweep",
    "rng_stream",
    "run_cell",
    "run_dmi",
    "run_grid",
    "run_mi",
    "run_mid",
    "run_replications",
    "se_inflation_pct",
    "sweep",
    "t_hat_moments",
]
