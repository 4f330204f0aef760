"""Simulation and verification toolkit for matrix-valued SDEs whose
coefficients act on the spectrum, and for the induced non-colliding
eigenvalue/eigenvector particle systems (Dyson, Wishart, Jacobi families).
"""

from ._backend import BACKEND
from .linalg import (SpectralState, SymmetricMatrixState, apply_spectral_function,
                     eigendecompose, reorthonormalize)
from .models import (ModelId, SpectralCoefficients, catalog, custom_coefficients,
                     eigen_drift, interaction_vector, kernel_G)
from .noise import NoiseBundle, SharedPath, derive_stream, draw_increments
from .spectral import SpectralSchemeConfig, simulate_spectral
from .matrix import MatrixSchemeConfig, simulate_matrix
from .verify import lyapunov_U, lyapunov_drift_components

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "SymmetricMatrixState", "SpectralState", "eigendecompose",
    "apply_spectral_function", "reorthonormalize",
    "ModelId", "SpectralCoefficients", "catalog", "custom_coefficients",
    "kernel_G", "eigen_drift", "interaction_vector",
    "NoiseBundle", "SharedPath", "derive_stream", "draw_increments",
    "SpectralSchemeConfig", "simulate_spectral",
    "MatrixSchemeConfig", "simulate_matrix",
    "lyapunov_U", "lyapunov_drift_components",
    "__version__",
]
