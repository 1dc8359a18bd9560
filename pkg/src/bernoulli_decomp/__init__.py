"""Bernoulli process suprema, chopped functionals and the T1 + T2 decomposition."""

from .core import IndexSet, PointSet, SparseVector
from .errors import (
    BernoulliDecompError,
    CapacityExceeded,
    ConfigError,
    DegenerateInput,
    DomainError,
    ExactLimitExceeded,
    ParseError,
    PreconditionViolated,
)

__all__ = [
    "IndexSet",
    "PointSet",
    "SparseVector",
    "BernoulliDecompError",
    "CapacityExceeded",
    "ConfigError",
    "DegenerateInput",
    "DomainError",
    "ExactLimitExceeded",
    "ParseError",
    "PreconditionViolated",
]
