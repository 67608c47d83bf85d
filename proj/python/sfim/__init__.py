"""Stacked flexible intelligent metasurface sum-rate simulator and optimizer."""

from ._core import (
    ConfigError,
    DesignState,
    NumericalError,
    Problem,
    UserChannel,
    __version__,
    check_gradients,
    heatmap,
    project_morph,
    project_phase,
    project_power,
    run_experiment,
)

__all__ = [
    "ConfigError",
    "DesignState",
    "NumericalError",
    "Problem",
    "UserChannel",
    "__version__",
    "check_gradients",
    "heatmap",
    "project_morph",
    "project_phase",
    "project_power",
    "run_experiment",
]
