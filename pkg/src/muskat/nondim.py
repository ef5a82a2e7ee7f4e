"""Conversion between physical and dimensionless descriptions of the
confined porous-medium flow, plus the dimensional admissibility check.

Units are documented, not enforced: lengths share one unit, and the
combination gamma/(H L rho G) must come out dimensionless.  For a
Hele-Shaw cell between plates at distance d, substitute 12*mu_visc/d^2
for the mu_visc/kappa mobility ratio below.
"""

from __future__ import annotations

from dataclasses import dataclass

from .evolution import THEOREM_C0
from .params import DimensionlessParams


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional description of the fluid layer.

    depth H and cell half-width L are lengths with amplitude <= depth <=
    width; gamma is surface tension (force/length), rho density, gravity
    an acceleration, mu_visc viscosity and kappa permeability.
    """

    depth: float          # H
    width: float          # L
    amplitude: float      # a
    gamma: float
    rho: float
    gravity: float
    mu_visc: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        for name in ("depth", "width", "amplitude", "gamma", "rho", "gravity", "mu_visc", "kappa"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.amplitude <= self.depth:
            raise ValueError("amplitude must not exceed the depth")
        if not self.depth <= self.width:
            raise ValueError("depth must not exceed the cell width")


@dataclass(frozen=True)
class Scales:
    """Conversion factors from dimensionless outputs back to physics."""

    time: float       # mu_visc * L / (rho * kappa * G)
    potential: float  # H * kappa * rho * G / mu_visc
    height: float     # a
    length: float     # L


def to_dimensionless(p: PhysicalParams, **numerics) -> tuple[DimensionlessParams, Scales]:
    """eps = a/H, delta = (H/L)^2, nu = gamma/(H L rho G), alpha = a/L."""
    eps = p.amplitude / p.depth
    delta = (p.depth / p.width) ** 2
    nu = p.gamma / (p.depth * p.width * p.rho * p.gravity)
    params = DimensionlessParams(eps=eps, delta=delta, nu=nu, **numerics)
    scales = Scales(
        time=p.mu_visc * p.width / (p.rho * p.kappa * p.gravity),
        potential=p.depth * p.kappa * p.rho * p.gravity / p.mu_visc,
        height=p.amplitude,
        length=p.width,
    )
    return params, scales


def from_dimensionless(
    params: DimensionlessParams,
    width: float = 1.0,
    rho: float = 1.0,
    gravity: float = 1.0,
    mu_visc: float = 1.0,
    kappa: float = 1.0,
) -> PhysicalParams:
    """A physical realization of the dimensionless parameters (the free
    normalizations default to unit width, density and gravity)."""
    depth = params.sqrt_delta * width
    amplitude = params.eps * depth
    gamma = params.nu * depth * width * rho * gravity
    return PhysicalParams(depth, width, amplitude, gamma, rho, gravity, mu_visc, kappa)


@dataclass(frozen=True)
class DimensionalCheck:
    name: str
    threshold: float
    actual: float

    @property
    def passed(self) -> bool:
        return self.actual < self.threshold


def check_dimensional_theorem(p: PhysicalParams, h0_norm: float) -> tuple[DimensionalCheck, ...]:
    """Dimensional global-existence conditions.

    width^2 < gamma/(rho G), depth < width, and the initial interface
    norm below min((H/L)^2 (gamma - L^2 rho G)/(C0 gamma), H) with
    C0 = 3120.
    """
    cap_length_sq = p.gamma / (p.rho * p.gravity)
    amp_bound = min(
        (p.depth / p.width) ** 2
        * (p.gamma - p.width**2 * p.rho * p.gravity)
        / (THEOREM_C0 * p.gamma),
        p.depth,
    )
    return (
        DimensionalCheck("capillary_length", cap_length_sq, p.width**2),
        DimensionalCheck("shallow_layer", p.width, p.depth),
        DimensionalCheck("initial_amplitude", amp_bound, h0_norm),
    )
