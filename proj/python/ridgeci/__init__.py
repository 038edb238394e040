"""Kernel density ridge estimation with bootstrap confidence regions."""

from ._core import (
    ConfigError,
    Estimator,
    NumericalError,
    RidgeField,
    SyntheticModel,
    confidence_region,
    default_bandwidth,
    default_rho,
    evaluate_field,
    flatness_test,
    nonridgeness,
    run_cli,
)

__all__ = [
    "ConfigError",
    "Estimator",
    "NumericalError",
    "RidgeField",
    "SyntheticModel",
    "confidence_region",
    "default_bandwidth",
    "default_rho",
    "evaluate_field",
    "flatness_test",
    "nonridgeness",
    "run_cli",
]
