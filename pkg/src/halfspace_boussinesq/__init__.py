"""Pseudo-spectral simulator for the anisotropic Boussinesq system on a half-space."""

from .spectral_core import (
    GridSpec,
    MixedSpectralState,
    Parity,
    PhysicalState,
    SpectralScalar,
    build_grid,
)

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "MixedSpectralState",
    "Parity",
    "PhysicalState",
    "SpectralScalar",
    "build_grid",
    "__version__",
]
