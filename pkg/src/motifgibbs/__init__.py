"""Block-aligned motif Gibbs sampler and tools for studying its convergence."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ContractError,
    DimensionError,
    DomainError,
    MotifGibbsError,
    NumericError,
    ResourceLimitError,
    StructuralError,
)
from .model import ModelParams, Sequence  # noqa: E402

__all__ = [
    "__version__",
    "Sequence",
    "ModelParams",
    "MotifGibbsError",
    "DimensionError",
    "DomainError",
    "ResourceLimitError",
    "NumericError",
    "StructuralError",
    "ContractError",
]
