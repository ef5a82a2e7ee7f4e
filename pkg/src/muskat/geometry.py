"""Strip geometry: harmonic extension of the interface, the ALE change of
variables, its inverse-Jacobian entries and the induced coefficient
perturbation of the anisotropic Laplacian.

Fields on the strip T x (-1, 0) are stored per Fourier mode as sampled
vertical profiles (``StripField``).  The x1 direction is spectral, the x2
direction is collocated on a uniform grid; products of strip fields are
dealiased per node exactly like 1-D products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .spectral import (
    PRODUCT_PAD,
    PeriodicSpectrum,
    apply_multiplier,
    compose_curvature_factor,
    compose_saturation,
    derivative,
    dirichlet_neumann_symbol,
    product,
    wiener_norm,
)

_REALITY_TOL = 1e-10


def vertical_grid(m_nodes: int) -> np.ndarray:
    """Uniform x2 nodes from -1 (bottom) to 0 (free surface)."""
    return np.linspace(-1.0, 0.0, m_nodes + 1)


@dataclass(frozen=True)
class StripField:
    """Per-mode vertical profiles of a real field on the strip.

    coeffs[i, j] is the coefficient of mode n = i - N at grid node j; d2,
    when present, holds the vertical-derivative profiles (analytic where
    the producer knows them, finite differences otherwise).
    """

    coeffs: np.ndarray
    grid: np.ndarray
    cutoff: int
    d2: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        g = np.asarray(self.grid, dtype=np.float64)
        if c.shape != (2 * self.cutoff + 1, g.size):
            raise ShapeError(f"profile matrix shape {c.shape} does not match grid/cutoff")
        if g.size < 2 or np.any(np.diff(g) <= 0) or abs(g[0] + 1.0) > 1e-13 or abs(g[-1]) > 1e-13:
            raise ShapeError("grid must increase strictly from -1 to 0")
        scale = 1.0 + np.abs(c).max(initial=0.0)
        if np.abs(c[::-1].conj() - c).max(initial=0.0) > _REALITY_TOL * scale:
            raise ValueError("profiles violate conjugate symmetry in the mode index")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "grid", g)
        if self.d2 is not None:
            d = np.asarray(self.d2, dtype=np.complex128)
            if d.shape != c.shape:
                raise ShapeError("derivative profiles must match the value profiles")
            object.__setattr__(self, "d2", d)

    @classmethod
    def zeros(cls, cutoff: int, grid: np.ndarray) -> "StripField":
        shape = (2 * cutoff + 1, np.asarray(grid).size)
        return cls(np.zeros(shape, complex), grid, cutoff, np.zeros(shape, complex))

    def node_spectrum(self, j: int) -> PeriodicSpectrum:
        return PeriodicSpectrum(self.coeffs[:, j], self.cutoff)

    def trace(self) -> PeriodicSpectrum:
        """Restriction to the free surface x2 = 0."""
        return PeriodicSpectrum(self.coeffs[:, -1], self.cutoff)

    def bottom(self) -> PeriodicSpectrum:
        return PeriodicSpectrum(self.coeffs[:, 0], self.cutoff)

    def with_fd_d2(self) -> "StripField":
        """Attach second-order finite-difference vertical derivatives."""
        return StripField(self.coeffs, self.grid, self.cutoff, fd_vertical(self.coeffs, self.grid))

    def __add__(self, other: "StripField") -> "StripField":
        _check_compatible(self, other)
        d2 = None
        if self.d2 is not None and other.d2 is not None:
            d2 = self.d2 + other.d2
        return trusted_field(self.coeffs + other.coeffs, self.grid, self.cutoff, d2)

    def __sub__(self, other: "StripField") -> "StripField":
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "StripField":
        d2 = None if self.d2 is None else self.d2 * scalar
        return trusted_field(self.coeffs * scalar, self.grid, self.cutoff, d2)

    __rmul__ = __mul__

    # -- serialization -------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "grid": self.grid.tolist(),
            "profiles": [[[float(z.real), float(z.imag)] for z in row] for row in self.coeffs],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "StripField":
        c = np.array([[complex(re, im) for re, im in row] for row in data["profiles"]])
        return cls(c, np.asarray(data["grid"]), int(data["cutoff"]))

    def to_binary(self) -> bytes:
        return self.grid.astype("<f8").tobytes() + self.coeffs.astype("<c16").tobytes()

    @classmethod
    def from_binary(cls, payload: bytes, cutoff: int, n_nodes: int) -> "StripField":
        g = np.frombuffer(payload, dtype="<f8", count=n_nodes)
        c = np.frombuffer(payload[8 * n_nodes :], dtype="<c16").reshape(2 * cutoff + 1, n_nodes)
        return cls(c.copy(), g.copy(), cutoff)


def _check_compatible(f: StripField, g: StripField) -> None:
    if f.cutoff != g.cutoff or f.grid.size != g.grid.size:
        raise ShapeError("strip fields live on different mode sets or grids")


def fd_vertical(coeffs: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Second-order d/dx2 of sampled profiles (one-sided at the ends)."""
    h = grid[1] - grid[0]
    d = np.empty_like(coeffs)
    d[:, 1:-1] = (coeffs[:, 2:] - coeffs[:, :-2]) / (2 * h)
    d[:, 0] = (-3 * coeffs[:, 0] + 4 * coeffs[:, 1] - coeffs[:, 2]) / (2 * h)
    d[:, -1] = (3 * coeffs[:, -1] - 4 * coeffs[:, -2] + coeffs[:, -3]) / (2 * h)
    return d


# -- physical-space synthesis for per-node products ---------------------


def trusted_field(coeffs, grid, cutoff, d2=None) -> StripField:
    """Construct a StripField without re-validating invariants.  Only for
    arrays produced by operations that preserve them structurally."""
    obj = object.__new__(StripField)
    object.__setattr__(obj, "coeffs", coeffs)
    object.__setattr__(obj, "grid", grid)
    object.__setattr__(obj, "cutoff", cutoff)
    object.__setattr__(obj, "d2", d2)
    return obj


def modes_to_samples(coeffs: np.ndarray, cutoff: int, npoints: int) -> np.ndarray:
    """Synthesize real x1-samples (rows) for every column of ``coeffs``."""
    if npoints % 2 == 0 and npoints >= 2 * cutoff + 2:
        buf = np.zeros((npoints // 2 + 1, coeffs.shape[1]), dtype=np.complex128)
        buf[: cutoff + 1] = coeffs[cutoff:]
        return np.fft.irfft(buf, n=npoints, axis=0) * npoints
    buf = np.zeros((npoints, coeffs.shape[1]), dtype=np.complex128)
    n = np.arange(-cutoff, cutoff + 1)
    buf[n % npoints, :] = coeffs
    return np.fft.ifft(buf, axis=0).real * npoints

def samples_to_modes(samples: np.ndarray, cutoff: int) -> np.ndarray:
    """Inverse of :func:`modes_to_samples`; conjugate symmetry exact."""
    half = np.fft.rfft(samples, axis=0)[: cutoff + 1, :] / samples.shape[0]
    full = np.concatenate([half[:0:-1].conj(), half], axis=0)
    full[cutoff] = full[cutoff].real
    return full


def strip_product(f: StripField, g: StripField) -> StripField:
    """Dealiased pointwise product per x2 node, with derivative tracking."""
    _check_compatible(f, g)
    npoints = PRODUCT_PAD * (2 * f.cutoff + 1)
    npoints += npoints % 2
    fs = modes_to_samples(f.coeffs, f.cutoff, npoints)
    gs = modes_to_samples(g.coeffs, g.cutoff, npoints)
    vals = samples_to_modes(fs * gs, f.cutoff)
    d2 = None
    if f.d2 is not None and g.d2 is not None:
        dfs = modes_to_samples(f.d2, f.cutoff, npoints)
        dgs = modes_to_samples(g.d2, g.cutoff, npoints)
        d2 = samples_to_modes(dfs * gs + fs * dgs, f.cutoff)
    return trusted_field(vals, f.grid, f.cutoff, d2)


# -- vertical profile symbols -------------------------------------------

_EXPANSION_EPS = 1e-8  # below this, use the kappa -> 0 limits


def _hyperbolic_ratio(kappa: np.ndarray, grid: np.ndarray, num: str, den: str) -> np.ndarray:
    """Stable (modes x nodes) table of num(kappa*(1+x))/den(kappa).

    Written with nonpositive exponential arguments only:
      sinh(k(1+x))/sinh(k) = (e^(kx) - e^(-k(x+2))) / (1 - e^(-2k)),
    and similarly for the cosh variants.
    """
    k = np.asarray(kappa, dtype=np.float64)[:, None]
    x = np.asarray(grid, dtype=np.float64)[None, :]
    small = k < _EXPANSION_EPS
    ksafe = np.where(small, 1.0, k)
    e_up = np.exp(ksafe * x)
    e_dn = np.exp(-ksafe * (x + 2.0))
    numerator = e_up + e_dn if num == "cosh" else e_up - e_dn
    if den == "sinh":
        table = numerator / (1.0 - np.exp(-2.0 * ksafe))
        # cosh/sinh diverges at kappa = 0; callers overwrite that row with
        # the analytic limit of their full expression
        limit = (1.0 + x) if num == "sinh" else np.zeros_like(e_up)
    else:
        table = numerator / (1.0 + np.exp(-2.0 * ksafe))
        limit = np.ones_like(e_up) if num == "cosh" else np.zeros_like(e_up)
    return np.where(small, limit, table)


def harmonic_extension(h: PeriodicSpectrum, m_nodes: int = 64) -> StripField:
    """Harmonic extension of h: equals h on x2 = 0 and vanishes on x2 = -1.

    Per mode the profile is sinh(|n|(1+x2))/sinh(|n|) times the
    coefficient; the mode-0 limit is the linear ramp 1 + x2 (unused for
    zero-mean boundary data).
    """
    h.require_zero_mean("boundary data of the harmonic extension")
    grid = vertical_grid(m_nodes)
    k = np.abs(h.modes).astype(np.float64)
    vals = _hyperbolic_ratio(k, grid, "sinh", "sinh") * h.coeffs[:, None]
    d2 = k[:, None] * _hyperbolic_ratio(k, grid, "cosh", "sinh") * h.coeffs[:, None]
    d2[h.cutoff] = h.mode(0).real  # ramp slope at the mode-0 limit
    return trusted_field(vals, grid, h.cutoff, d2)


def harmonic_extension_gradient(
    h: PeriodicSpectrum, m_nodes: int = 64
) -> tuple[StripField, StripField]:
    """(d/dx1, d/dx2) of the harmonic extension, with analytic d2 data."""
    h.require_zero_mean("boundary data of the harmonic extension")
    grid = vertical_grid(m_nodes)
    n = h.modes.astype(np.float64)
    k = np.abs(n)
    sinh_r = _hyperbolic_ratio(k, grid, "sinh", "sinh")
    cosh_r = _hyperbolic_ratio(k, grid, "cosh", "sinh")
    cosh_r[h.cutoff] = 0.0  # zero-mean data carries no mode-0 mass
    d1 = (1j * n)[:, None] * sinh_r * h.coeffs[:, None]
    d1_d2 = (1j * n * k)[:, None] * cosh_r * h.coeffs[:, None]
    d2f = k[:, None] * cosh_r * h.coeffs[:, None]
    d2f_d2 = (k**2)[:, None] * sinh_r * h.coeffs[:, None]
    return (
        trusted_field(d1, grid, h.cutoff, d1_d2),
        trusted_field(d2f, grid, h.cutoff, d2f_d2),
    )


def dirichlet_neumann(h: PeriodicSpectrum) -> PeriodicSpectrum:
    """Normal derivative at the surface of the harmonic extension of h."""
    h.require_zero_mean("Dirichlet-Neumann input")
    return apply_multiplier(dirichlet_neumann_symbol(), h)


def curvature(h: PeriodicSpectrum, alpha: float) -> PeriodicSpectrum:
    """Graph curvature h'' / (1 + (alpha h')^2)^(3/2), dealiased.

    Assembled as h'' * (1 + flattening(alpha h')) so the only non-polynomial
    composition is the flattening factor, which vanishes with the slope.
    """
    h2 = derivative(h, 2)
    factor = compose_curvature_factor(derivative(h, 1), alpha)
    return h2 + product(h2, factor)


def diffeo_check(h: PeriodicSpectrum, eps: float) -> tuple[bool, float]:
    """Validity of the strip transform; margin = 1/2 - eps*|h|_1."""
    margin = 0.5 - eps * wiener_norm(h, 1.0, 0.0)
    return margin > 0.0, margin


@dataclass(frozen=True)
class AleMatrices:
    """Inverse-Jacobian entries of the strip transform and the symmetric
    coefficient perturbation of the anisotropic Laplacian.

    The inverse Jacobian has first row (1, 0); a12 and a22 are its second
    row.  q11, q12, q22 are the entries of the symmetric perturbation Q
    with Q21 = Q12; the transformed pressure equation reads
    div_delta((I + eps*Q) grad_delta phi) = 0.  trace_a12 / trace_a22 are
    the surface restrictions of a12 / a22, computed through the
    saturation composition of the Dirichlet-Neumann trace.
    """

    a12: StripField
    a22: StripField
    q11: StripField
    q12: StripField
    q22: StripField
    trace_a12: PeriodicSpectrum
    trace_a22: PeriodicSpectrum
    jacobian_min: float


def ale_matrices(
    h: PeriodicSpectrum, eps: float, delta: float, m_nodes: int = 64
) -> AleMatrices:
    """Assemble the ALE matrices for interface h.

    Requires the transform to be a diffeomorphism and the sampled vertical
    stretch eps*d2(extension) to stay strictly above -1 (no Jacobian
    degeneration on the grid).
    """
    ok, margin = diffeo_check(h, eps)
    if not ok:
        raise DomainError(f"strip transform is not a diffeomorphism (margin {margin:.3g})")
    sd = float(np.sqrt(delta))
    s1, s2 = harmonic_extension_gradient(h, m_nodes)
    grid = s1.grid
    npoints = PRODUCT_PAD * (2 * h.cutoff + 1)

    p1 = modes_to_samples(s1.coeffs, h.cutoff, npoints)
    p2 = modes_to_samples(s2.coeffs, h.cutoff, npoints)
    dp1 = modes_to_samples(s1.d2, h.cutoff, npoints)
    dp2 = modes_to_samples(s2.d2, h.cutoff, npoints)

    stretch_sup = float(np.abs(eps * p2).max())
    if stretch_sup >= 1.0:
        raise DomainError(f"Jacobian pole guard: sup|eps*dx2(extension)| = {stretch_sup:.4g} >= 1", stretch_sup)
    jac = 1.0 + eps * p2
    djac = eps * dp2

    def pack(vals, dvals):
        return trusted_field(
            samples_to_modes(vals, h.cutoff), grid, h.cutoff, samples_to_modes(dvals, h.cutoff)
        )

    a12 = pack(-eps * p1 / jac, -eps * (dp1 * jac - p1 * djac) / jac**2)
    a22 = pack(1.0 / jac, -djac / jac**2)
    q11 = trusted_field(s2.coeffs, grid, h.cutoff, s2.d2)
    q12 = (-sd) * trusted_field(s1.coeffs, grid, h.cutoff, s1.d2)
    num = -p2 + eps * delta * p1**2
    dnum = -dp2 + 2.0 * eps * delta * p1 * dp1
    q22 = pack(num / jac, (dnum * jac - num * djac) / jac**2)

    dn = dirichlet_neumann(h)
    sat = compose_saturation(eps * dn)
    trace_a12 = eps * product(derivative(h, 1), sat.with_mode0(sat.mode(0).real - 1.0))
    trace_a22 = (-1.0 * sat).with_mode0(1.0 - sat.mode(0).real)
    return AleMatrices(a12, a22, q11, q12, q22, trace_a12, trace_a22, float(jac.min()))


# -- Wiener-Sobolev norms on the strip ----------------------------------


def simpson_weights(n_nodes: int, h: float) -> np.ndarray:
    if n_nodes % 2 == 0 or n_nodes < 3:
        raise ShapeError("composite Simpson needs an odd node count")
    w = np.ones(n_nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def strip_norm(field: StripField, s: float = 0.0, lam: float = 0.0, k: int = 1) -> float:
    """Wiener-Sobolev norm: sum_n (1+|n|)^s e^(lam|n|) int |d2^k profile|.

    k = 0 integrates the profiles themselves, k = 1 their vertical
    derivative (which must be attached).  Simpson quadrature on the
    uniform grid.
    """
    if k == 0:
        data = field.coeffs
    elif k == 1:
        if field.d2 is None:
            raise ShapeError("k = 1 norm needs vertical-derivative profiles")
        data = field.d2
    else:
        raise ValueError("only k = 0 and k = 1 are supported here")
    h = field.grid[1] - field.grid[0]
    w = simpson_weights(field.grid.size, h)
    integrals = np.abs(data) @ w
    n = np.abs(np.arange(-field.cutoff, field.cutoff + 1)).astype(np.float64)
    if lam * field.cutoff > 700.0:
        raise DomainError("exp weight overflow in strip norm")
    return float(np.sum((1.0 + n) ** s * np.exp(lam * n) * integrals))


def sup_norm_profile(field: StripField, s: float = 0.0, lam: float = 0.0) -> float:
    """sup over x2 of the Wiener norm of the horizontal slices."""
    n = np.abs(np.arange(-field.cutoff, field.cutoff + 1)).astype(np.float64)
    w = (1.0 + n) ** s * np.exp(lam * n)
    return float(np.max(w @ np.abs(field.coeffs)))
