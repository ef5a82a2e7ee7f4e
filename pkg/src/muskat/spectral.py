"""Truncated Fourier representation on the 2*pi-periodic interval.

A function is stored through its complex coefficients on the modes
|n| <= N (ascending order, index i <-> mode i - N).  Real functions keep
the conjugate symmetry c(-n) = conj(c(n)) and every operation here
preserves it exactly.  Nonlinear operations are evaluated on zero-padded
physical grids: products use padding factor 2 (retained modes are then
aliasing free), pointwise compositions of non-polynomial functions use
factor 4.

Norms are of Wiener type,

    |v|_{s,lam} = sum_n (1 + |n|)^s exp(lam |n|) |c(n)|,

so membership with lam > 0 encodes analyticity in a complex strip of
half-width lam.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError, OverflowRisk, ShapeError

# exp arguments beyond this overflow float64
EXP_ARG_LIMIT = 700.0

# tolerance for validating conjugate symmetry of user-supplied coefficients
_REALITY_TOL = 1e-10

PRODUCT_PAD = 2
COMPOSE_PAD = 4


class WienerIndex(NamedTuple):
    """Pair (s, lam): regularity exponent and analyticity radius,
    both nonnegative."""

    s: float
    lam: float

    def validated(self) -> "WienerIndex":
        if self.s < 0 or self.lam < 0:
            raise ValueError("Wiener indices must satisfy s >= 0, lam >= 0")
        return self


@dataclass(frozen=True)
class PeriodicSpectrum:
    """Fourier coefficients of a real periodic function, modes -N..N."""

    coeffs: np.ndarray
    cutoff: int

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 1 or c.size != 2 * self.cutoff + 1:
            raise ShapeError(
                f"expected {2 * self.cutoff + 1} coefficients, got shape {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite Fourier coefficient")
        scale = 1.0 + np.abs(c).max(initial=0.0)
        if np.abs(c[::-1].conj() - c).max(initial=0.0) > _REALITY_TOL * scale:
            raise ValueError("coefficients violate conjugate symmetry c(-n) = conj(c(n))")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # -- constructors -------------------------------------------------

    @classmethod
    def zeros(cls, cutoff: int) -> "PeriodicSpectrum":
        return cls(np.zeros(2 * cutoff + 1, dtype=np.complex128), cutoff)

    @classmethod
    def from_modes(cls, cutoff: int, modes: dict[int, complex]) -> "PeriodicSpectrum":
        """Build from nonnegative modes; negative ones follow by conjugation."""
        c = np.zeros(2 * cutoff + 1, dtype=np.complex128)
        for n, val in modes.items():
            if n < 0 or n > cutoff:
                raise ShapeError(f"mode {n} outside [0, {cutoff}]")
            c[cutoff + n] = val
            if n > 0:
                c[cutoff - n] = np.conj(val)
            elif abs(complex(val).imag) > 0:
                raise ValueError("mode 0 of a real function must be real")
        return cls(c, cutoff)

    @classmethod
    def from_half(cls, half: np.ndarray) -> "PeriodicSpectrum":
        """Build from coefficients on modes 0..N."""
        half = np.asarray(half, dtype=np.complex128)
        cutoff = half.size - 1
        c = np.concatenate([half[:0:-1].conj(), half])
        c[cutoff] = half[0].real
        return cls(c, cutoff)

    @classmethod
    def from_physical(cls, samples: np.ndarray, cutoff: int) -> "PeriodicSpectrum":
        """Coefficients of real equispaced samples; symmetry enforced exactly."""
        samples = np.asarray(samples, dtype=np.float64)
        if samples.size < 2 * cutoff + 1:
            raise ShapeError("grid too coarse for the requested cutoff")
        c = np.fft.rfft(samples)[: cutoff + 1] / samples.size
        return cls.from_half(c)

    # -- accessors ----------------------------------------------------

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.cutoff, self.cutoff + 1)

    def mode(self, n: int) -> complex:
        if abs(n) > self.cutoff:
            return 0.0 + 0.0j
        return complex(self.coeffs[self.cutoff + n])

    def half(self) -> np.ndarray:
        """Coefficients on modes 0..N."""
        return self.coeffs[self.cutoff :].copy()

    @property
    def is_zero_mean(self) -> bool:
        return abs(self.mode(0)) <= 1e-14 * (1.0 + np.abs(self.coeffs).max())

    def require_zero_mean(self, what: str = "input") -> None:
        if not self.is_zero_mean:
            raise DomainError(f"{what} must have zero mean, got c(0)={self.mode(0)}")

    def to_physical(self, npoints: int | None = None) -> np.ndarray:
        """Real samples on an equispaced grid of x_j = 2*pi*j/npoints."""
        if npoints is None:
            npoints = PRODUCT_PAD * (2 * self.cutoff + 1)
        if npoints < 2 * self.cutoff + 1:
            raise ShapeError("grid too coarse to hold all modes")
        if npoints % 2 == 0 and npoints >= 2 * self.cutoff + 2:
            buf = np.zeros(npoints // 2 + 1, dtype=np.complex128)
            buf[: self.cutoff + 1] = self.coeffs[self.cutoff :]
            return np.fft.irfft(buf, n=npoints) * npoints
        buf = np.zeros(npoints, dtype=np.complex128)
        n = np.arange(-self.cutoff, self.cutoff + 1)
        buf[n % npoints] = self.coeffs
        return np.fft.ifft(buf).real * npoints

    def sup_physical(self) -> float:
        """Max of |v| over a 4x-padded sample grid (used by pole guards)."""
        return float(np.abs(self.to_physical(COMPOSE_PAD * (2 * self.cutoff + 1))).max())

    # -- arithmetic ---------------------------------------------------

    def _like(self, coeffs: np.ndarray) -> "PeriodicSpectrum":
        return PeriodicSpectrum(coeffs, self.cutoff)

    def __add__(self, other: "PeriodicSpectrum") -> "PeriodicSpectrum":
        _check_same(self, other)
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other: "PeriodicSpectrum") -> "PeriodicSpectrum":
        _check_same(self, other)
        return self._like(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "PeriodicSpectrum":
        return self._like(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "PeriodicSpectrum":
        return self._like(-self.coeffs)

    def with_mode0(self, value: float) -> "PeriodicSpectrum":
        c = self.coeffs.copy()
        c[self.cutoff] = float(value)
        return self._like(c)

    # -- serialization ------------------------------------------------

    def to_json_dict(self) -> dict:
        """Modes n >= 1 only; conjugate symmetry restores n < 0.  A nonzero
        mean is carried separately."""
        out = {
            "cutoff": self.cutoff,
            "modes": [
                [int(n), float(self.mode(n).real), float(self.mode(n).imag)]
                for n in range(1, self.cutoff + 1)
                if self.mode(n) != 0
            ],
        }
        if self.mode(0) != 0:
            out["mean"] = float(self.mode(0).real)
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "PeriodicSpectrum":
        modes = {int(n): complex(re, im) for n, re, im in data["modes"]}
        if "mean" in data:
            modes[0] = float(data["mean"])
        return cls.from_modes(int(data["cutoff"]), modes)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "PeriodicSpectrum":
        return cls.from_json_dict(json.loads(text))

    def to_binary(self) -> bytes:
        """Little-endian f64 (re, im) pairs for modes 0..N."""
        half = self.half().astype("<c16")
        return half.tobytes()

    @classmethod
    def from_binary(cls, payload: bytes, cutoff: int) -> "PeriodicSpectrum":
        half = np.frombuffer(payload, dtype="<c16", count=cutoff + 1)
        return cls.from_half(half)


def _check_same(f: PeriodicSpectrum, g: PeriodicSpectrum) -> None:
    if f.cutoff != g.cutoff:
        raise ShapeError(f"cutoff mismatch: {f.cutoff} vs {g.cutoff}")


# -- Fourier multipliers ----------------------------------------------


@dataclass(frozen=True)
class MultiplierSymbol:
    """Even real symbol m(|n|) with an explicitly declared value at n = 0."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    at_zero: float
    name: str = ""

    def values(self, cutoff: int) -> np.ndarray:
        n = np.arange(-cutoff, cutoff + 1)
        out = np.empty(n.size, dtype=np.float64)
        nz = n != 0
        out[nz] = self.evaluator(np.abs(n[nz]).astype(np.float64))
        out[~nz] = self.at_zero
        if not np.all(np.isfinite(out)):
            raise ValueError(f"multiplier {self.name or '<anon>'} not finite on [0, {cutoff}]")
        return out


def lambda_symbol() -> MultiplierSymbol:
    """|n|, the first-order smoothing/derivative scale."""
    return MultiplierSymbol(lambda a: a, 0.0, "Lambda")


def tanh_scaled_symbol(scale: float) -> MultiplierSymbol:
    """tanh(scale * |n|)."""
    return MultiplierSymbol(lambda a: np.tanh(scale * a), 0.0, f"tanh({scale}*Lambda)")


def dirichlet_neumann_symbol() -> MultiplierSymbol:
    """|n| / tanh(|n|) with the analytic limit 1 at n = 0.

    This is the flat-strip Dirichlet-Neumann symbol: it maps boundary data
    to the normal derivative of its harmonic extension in T x (-1, 0).
    """
    return MultiplierSymbol(lambda a: a / np.tanh(a), 1.0, "Lambda/tanh(Lambda)")


def apply_multiplier(m: MultiplierSymbol, v: PeriodicSpectrum) -> PeriodicSpectrum:
    return PeriodicSpectrum(m.values(v.cutoff) * v.coeffs, v.cutoff)


def derivative(v: PeriodicSpectrum, order: int = 1) -> PeriodicSpectrum:
    """d^order/dx^order, i.e. multiplication by (i n)^order."""
    n = v.modes.astype(np.float64)
    return PeriodicSpectrum((1j * n) ** order * v.coeffs, v.cutoff)


def project_modes(v: PeriodicSpectrum, m: int) -> PeriodicSpectrum:
    """Hard Fourier cutoff: zero every coefficient with |n| > m."""
    if m < 0 or m > v.cutoff:
        raise ShapeError(f"projection cutoff {m} outside [0, {v.cutoff}]")
    c = v.coeffs.copy()
    n = np.abs(v.modes)
    c[n > m] = 0.0
    return PeriodicSpectrum(c, v.cutoff)


# -- norms -------------------------------------------------------------


def _weights(cutoff: int, s: float, lam: float) -> np.ndarray:
    if s < 0 or lam < 0:
        raise ValueError("Wiener indices must satisfy s >= 0, lam >= 0")
    if lam * cutoff > EXP_ARG_LIMIT:
        raise OverflowRisk(
            f"exp weight overflow: lam*N = {lam * cutoff:.3g} > {EXP_ARG_LIMIT}",
            lam=lam,
            cutoff=cutoff,
        )
    n = np.abs(np.arange(-cutoff, cutoff + 1)).astype(np.float64)
    return (1.0 + n) ** s * np.exp(lam * n)


def wiener_norm(v: PeriodicSpectrum, s=0.0, lam: float = 0.0) -> float:
    """sum_n (1+|n|)^s exp(lam|n|) |c(n)|; accepts a WienerIndex for s."""
    if isinstance(s, WienerIndex):
        s, lam = s.validated()
    return float(np.sum(_weights(v.cutoff, s, lam) * np.abs(v.coeffs)))


def wiener_seminorm(v: PeriodicSpectrum, s: float = 0.0, lam: float = 0.0) -> float:
    """Homogeneous variant sum_{n != 0} |n|^s exp(lam|n|) |c(n)|."""
    if lam * v.cutoff > EXP_ARG_LIMIT:
        raise OverflowRisk("exp weight overflow", lam=lam, cutoff=v.cutoff)
    n = np.abs(v.modes).astype(np.float64)
    w = np.where(n > 0, n, 1.0) ** s * np.exp(lam * n)
    w[v.cutoff] = 0.0
    return float(np.sum(w * np.abs(v.coeffs)))


def product_constant(s: float) -> float:
    """Constant of the Wiener product rule: 1 on s in [0,1], else 2^s."""
    if s < 0:
        raise ValueError("s must be >= 0")
    return 1.0 if s <= 1.0 else 2.0**s


def power_product_constant(s: float, n: int) -> float:
    """Constant bounding |v^n|_{s,lam} by |v|_{0,lam}^{n-1} |v|_{s,lam}.

    Equals n for s in [0,1]; for s > 1 it is the geometric sum
    K*(K^(n-1) - 1)/(K - 1) with K = 2^s.
    """
    if n < 2:
        raise ValueError("power must be >= 2")
    if s <= 1.0:
        return float(n)
    k = 2.0**s
    return k * (k ** (n - 1) - 1.0) / (k - 1.0)


# -- dealiased products and compositions -------------------------------


def product(f: PeriodicSpectrum, g: PeriodicSpectrum) -> PeriodicSpectrum:
    """Pointwise product, exact on all retained modes.

    Both operands are synthesized on a grid of 2*(2N+1) points, multiplied
    there and transformed back; the padding makes the |n| <= N output
    coefficients equal to the exact convolution of the inputs.
    """
    _check_same(f, g)
    npoints = PRODUCT_PAD * (2 * f.cutoff + 1)
    samples = f.to_physical(npoints) * g.to_physical(npoints)
    return PeriodicSpectrum.from_physical(samples, f.cutoff)


def compose_pointwise(
    v: PeriodicSpectrum,
    func: Callable[[np.ndarray], np.ndarray],
    pad: int = COMPOSE_PAD,
) -> PeriodicSpectrum:
    """Spectrum of func(v(x)) sampled on a pad*(2N+1) grid and truncated."""
    npoints = pad * (2 * v.cutoff + 1)
    return PeriodicSpectrum.from_physical(func(v.to_physical(npoints)), v.cutoff)


def compose_curvature_factor(v: PeriodicSpectrum, alpha: float = 1.0) -> PeriodicSpectrum:
    """Spectrum of (1 + (alpha*v)^2)^(-3/2) - 1.

    The composed function vanishes at 0 and is entire on the reals, so no
    pole guard is needed; it flattens the linear curvature of a graph with
    slope alpha*v.
    """
    return compose_pointwise(v, lambda x: (1.0 + (alpha * x) ** 2) ** -1.5 - 1.0)


def compose_saturation(v: PeriodicSpectrum) -> PeriodicSpectrum:
    """Spectrum of v/(1 + v); requires sup|v| < 1 away from the pole at -1."""
    sup = v.sup_physical()
    if sup >= 1.0:
        raise DomainError(f"saturation pole guard: sup|v| = {sup:.6g} >= 1", sup)
    return compose_pointwise(v, lambda x: x / (1.0 + x))


def reciprocal_one_plus(v: PeriodicSpectrum) -> PeriodicSpectrum:
    """Spectrum of 1/(1 + v); requires sup|v| < 1."""
    sup = v.sup_physical()
    if sup >= 1.0:
        raise DomainError(f"reciprocal pole guard: sup|v| = {sup:.6g} >= 1", sup)
    return compose_pointwise(v, lambda x: 1.0 / (1.0 + x))
