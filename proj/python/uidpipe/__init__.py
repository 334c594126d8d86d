"""Python bindings for the uidpipe C++ core."""

from ._core import (
    ConfigError,
    ConvergenceError,
    DataError,
    __version__,
    aic_bic,
    binned_density,
    f1,
    fit_glmm,
    gvif,
    lasso,
    lasso_fixed,
    log_loss,
    parse_conllu,
    pca,
    run_stage,
    subcat_percentages,
    successive_difference_contrasts,
    surprisal,
    train_mlp_cv,
)

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "__version__",
    "aic_bic",
    "binned_density",
    "f1",
    "fit_glmm",
    "gvif",
    "lasso",
    "lasso_fixed",
    "log_loss",
    "parse_conllu",
    "pca",
    "run_stage",
    "subcat_percentages",
    "successive_difference_contrasts",
    "surprisal",
    "train_mlp_cv",
]
