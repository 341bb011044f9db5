"""Structural regularization estimators and Monte Carlo harness."""

import json as _json

from ._core import (
    ConfigError,
    __version__,
    canonical_config,
    equilibrium_bid,
    experiment_names,
    fit_2sls,
    fit_ols,
    pointwise_metrics,
    solve_stationary,
    sre_gmm,
    sre_ridge,
)
from ._core import run as _run


def run(config=None, **overrides):
    """Run an experiment. `config` is a dict or JSON string; keyword overrides are merged on top."""
    if isinstance(config, str):
        config = _json.loads(config)
    merged = dict(config or {})
    merged.update(overrides)
    return _run(_json.dumps(merged))


__all__ = [
    "ConfigError",
    "__version__",
    "canonical_config",
    "equilibrium_bid",
    "experiment_names",
    "fit_2sls",
    "fit_ols",
    "pointwise_metrics",
    "run",
    "solve_stationary",
    "sre_gmm",
    "sre_ridge",
]
