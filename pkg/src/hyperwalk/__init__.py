"""Decoherent continuous-time quantum walks on cycles and hyper-cycles."""

from hyperwalk._backend import KERNEL_BACKEND
from hyperwalk.core import (
    CycleConfig,
    DomainError,
    HyperCycleConfig,
    NumericError,
    ResourceError,
    decode_multi_index,
    encode_multi_index,
    validate_density_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "CycleConfig",
    "DomainError",
    "HyperCycleConfig",
    "NumericError",
    "ResourceError",
    "decode_multi_index",
    "encode_multi_index",
    "validate_density_matrix",
]
