"""Double-balancing representation learning for heterogeneous dose-response curves.

The heavy lifting lives in the compiled extension; this package re-exports
its surface.
"""

from dbrlab._core import (
    ConfigError,
    RuntimeError,
    balance_diagnostics,
    center,
    dcor,
    make_split,
    make_synthetic,
    otimes,
    pairwise_euclidean,
    pdcor,
    predict_curve,
    project,
    run_experiment,
    true_hdrc,
)

__all__ = [
    "ConfigError",
    "RuntimeError",
    "balance_diagnostics",
    "center",
    "dcor",
    "make_split",
    "make_synthetic",
    "otimes",
    "pairwise_euclidean",
    "pdcor",
    "predict_curve",
    "project",
    "run_experiment",
    "true_hdrc",
]
