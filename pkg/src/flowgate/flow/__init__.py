"""Dense optical flow: solver, field types, magnitude processing, .flo I/O."""

from .field import (CLIP_FRACTION, ExpansionFit, FlowConfig, FlowError,
                    FlowField, MagnitudeMap, clip_magnitude, fit_expansion,
                    magnitude, resample_field)
from .floio import FloFormatError, read_flo, write_flo
from .kernels import ACTIVE_BACKEND, available_backends, get_kernels
from .solver import (FlowBackend, VariationalBackend, estimate_flow,
                     get_default_backend, set_default_backend)

__all__ = [
    "CLIP_FRACTION", "ExpansionFit", "FlowConfig", "FlowError", "FlowField",
    "MagnitudeMap", "clip_magnitude", "fit_expansion", "magnitude",
    "resample_field", "FloFormatError", "read_flo", "write_flo",
    "ACTIVE_BACKEND", "available_backends", "get_kernels", "FlowBackend",
    "VariationalBackend", "estimate_flow", "get_default_backend",
    "set_default_backend",
]
