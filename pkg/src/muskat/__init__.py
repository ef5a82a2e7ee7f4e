"""Pseudo-spectral simulator and inequality-verification lab for the
one-phase Muskat flow with surface tension beneath an impervious ceiling.

The interface lives on the 2*pi-periodic line as a truncated Fourier
series; the bulk pressure is resolved on the fixed reference strip
through an ALE change of variables, combining one explicit
boundary-driven potential with a variable-coefficient correction solved
by Green-kernel quadrature.  Time stepping is exponential (the linear
dispersion is integrated exactly per mode), and the analysis layer
monitors weighted Wiener norms, the energy inequality, analyticity-radius
growth, and a property-based battery of every quantitative estimate the
solver relies on.
"""

from .errors import (
    BlowupError,
    DomainError,
    InequalityViolation,
    OverflowRisk,
    PinchOffError,
    ShapeError,
    SolverError,
)
from .params import DimensionlessParams, reference_params
from .spectral import PeriodicSpectrum, WienerIndex, wiener_norm

__all__ = [
    "BlowupError",
    "DimensionlessParams",
    "DomainError",
    "InequalityViolation",
    "OverflowRisk",
    "PeriodicSpectrum",
    "PinchOffError",
    "ShapeError",
    "SolverError",
    "WienerIndex",
    "reference_params",
    "wiener_norm",
]

__version__ = "0.1.0"
