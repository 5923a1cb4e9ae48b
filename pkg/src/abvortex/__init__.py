"""Green functions and self-adjoint extensions for two Aharonov-Bohm vortices."""

from .errors import AbVortexError
from .geometry import PlanePoint, VortexPair
from .special import Energy, as_energy, bessel_k, kappa

__version__ = "0.1.0"

__all__ = [
    "AbVortexError",
    "Energy",
    "PlanePoint",
    "VortexPair",
    "as_energy",
    "bessel_k",
    "kappa",
    "__version__",
]
