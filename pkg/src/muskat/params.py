"""Dimensionless run configuration and its admissibility constraints."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .spectral import EXP_ARG_LIMIT

_REL_TOL = 1e-12


@dataclass(frozen=True)
class DimensionlessParams:
    """Dimensionless parameters of the confined Muskat flow.

    eps     nonlinearity (amplitude / depth), in (0, 1]
    delta   shallowness (depth / width)^2, in (0, 1]
    nu      Bond number (capillary / gravity), > 1
    alpha   steepness; tied to the others through alpha = eps*sqrt(delta)
    mu      analyticity growth rate of the weighted norms, >= 0
    n_modes Fourier cutoff N
    m_nodes vertical grid intervals M (even)
    dt      time step
    t_final integration horizon

    The stable regime has nu*sqrt(delta) > 1; outside it the flat state is
    Rayleigh-Taylor unstable and ``stable_regime`` is False.  mu must stay
    below sqrt(delta)/16*(nu*sqrt(delta)-1), or below the /4 variant when
    ``wide_mu_range`` is set.
    """

    eps: float
    delta: float
    nu: float
    alpha: float | None = None
    mu: float = 0.0
    n_modes: int = 64
    m_nodes: int = 64
    dt: float = 1e-3
    t_final: float = 1.0
    wide_mu_range: bool = False

    def __post_init__(self):
        if not (0.0 < self.eps <= 1.0):
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if not (0.0 < self.delta <= 1.0):
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if not self.nu > 1.0:
            raise ValueError(f"Bond number must exceed 1, got {self.nu}")
        implied = self.eps * math.sqrt(self.delta)
        if self.alpha is None:
            object.__setattr__(self, "alpha", implied)
        elif abs(self.alpha - implied) > _REL_TOL * max(1.0, implied):
            raise ValueError(
                f"alpha = {self.alpha} inconsistent with eps*sqrt(delta) = {implied}"
            )
        if self.n_modes < 1:
            raise ValueError("need at least one Fourier mode")
        if self.m_nodes < 8 or self.m_nodes % 2:
            raise ValueError("m_nodes must be an even integer >= 8")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_final < 0.0:
            raise ValueError("t_final must be nonnegative")
        if self.mu < 0.0:
            raise ValueError("mu must be nonnegative")
        if self.mu > 0.0 and not self.mu < self.mu_limit:
            raise ValueError(
                f"mu = {self.mu} outside [0, {self.mu_limit:.6g}) "
                f"(wide_mu_range={self.wide_mu_range})"
            )
        if math.sqrt(self.delta) * self.n_modes > EXP_ARG_LIMIT:
            raise ValueError("sqrt(delta)*N exceeds the exponential overflow guard")
        if self.mu * self.t_final * self.n_modes > EXP_ARG_LIMIT:
            raise ValueError("mu*t_final*N exceeds the exponential overflow guard")

    # -- derived quantities -------------------------------------------

    @property
    def sqrt_delta(self) -> float:
        return math.sqrt(self.delta)

    @property
    def stable_regime(self) -> bool:
        """Capillarity beats gravity at every wavelength."""
        return self.nu * self.sqrt_delta > 1.0 and self.sqrt_delta < 1.0

    @property
    def decay_rate(self) -> float:
        """Guaranteed exponential decay rate sqrt(delta)/16*(nu*sqrt(delta)-1)."""
        return max(0.0, self.sqrt_delta / 16.0 * (self.nu * self.sqrt_delta - 1.0))

    @property
    def mu_limit(self) -> float:
        denom = 4.0 if self.wide_mu_range else 16.0
        return max(0.0, self.sqrt_delta / denom * (self.nu * self.sqrt_delta - 1.0))

    def with_updates(self, **kwargs) -> "DimensionlessParams":
        if "alpha" not in kwargs and ("eps" in kwargs or "delta" in kwargs):
            kwargs["alpha"] = None
        return replace(self, **kwargs)


def reference_params(**overrides) -> DimensionlessParams:
    """The documented reference regime: comfortable margins on every
    constraint of the stable configuration."""
    base = dict(eps=0.1, delta=0.25, nu=4.0, mu=0.0, n_modes=64, m_nodes=64, dt=1e-3)
    base.update(overrides)
    return DimensionlessParams(**base)
