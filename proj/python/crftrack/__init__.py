"""Tracklet inactivation with a fully connected CRF."""

from ._core import (
    BpConfig,
    CapacityError,
    CrfTrackError,
    FactorGraph,
    FormatError,
    ModelParams,
    NumericalError,
    build_dataset,
    check_gradients,
    evaluate,
    exact_inference,
    generate_scenario,
    infer,
    log_likelihood,
    max_product,
    sum_product,
    track,
    train,
)

__all__ = [
    "BpConfig",
    "CapacityError",
    "CrfTrackError",
    "FactorGraph",
    "FormatError",
    "ModelParams",
    "NumericalError",
    "build_dataset",
    "check_gradients",
    "evaluate",
    "exact_inference",
    "generate_scenario",
    "infer",
    "log_likelihood",
    "max_product",
    "sum_product",
    "track",
    "train",
]
