"""Curl-free magnetic field mapping with reduced-rank Gaussian processes."""

from ._core import (
    BatchModel,
    Domain,
    DomainError,
    Error,
    FormatError,
    Hyperparameters,
    ModelFileError,
    NumericalError,
    OptimizationError,
    OrderingError,
    ParameterError,
    SequentialEstimator,
    basis_indices,
    k_curlfree,
    load_model,
    nlml,
    optimize_hyperparameters,
    read_samples_csv,
    simulate,
)

__all__ = [
    "BatchModel",
    "Domain",
    "DomainError",
    "Error",
    "FormatError",
    "Hyperparameters",
    "ModelFileError",
    "NumericalError",
    "OptimizationError",
    "OrderingError",
    "ParameterError",
    "SequentialEstimator",
    "basis_indices",
    "k_curlfree",
    "load_model",
    "nlml",
    "optimize_hyperparameters",
    "read_samples_csv",
    "simulate",
]
