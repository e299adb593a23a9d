"""Low-Mach limits of one- and two-phase compressible flow models in 1-D periodic domains."""

__version__ = "0.1.0"

from .models import (Grid1D, InitSpec, ModelId, PerturbationProfile, PhaseState, PhysParams,  # noqa: E402
                     PintRule, RunConfig, active_fields, default_params, validate)
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "BACKEND", "Grid1D", "InitSpec", "ModelId", "PerturbationProfile", "PhaseState", "PhysParams",
    "PintRule", "RunConfig", "active_fields", "default_params", "validate", "__version__",
]
