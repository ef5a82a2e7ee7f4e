"""Interface evolution: dispersion symbol, nonlinear surface terms, and an
exponential time integrator.

The linearization of the interface motion is diagonal in Fourier space
with symbol

    L(k) = (1/eps) * tanh(sqrt(delta)|k|) * (nu*alpha*|k|^3 - eps*|k|),

positive at every wavelength exactly when nu*sqrt(delta) > 1 (surface
tension beats the unstable gravity direction).  The cubic growth of L
makes explicit schemes useless at practical cutoffs, so steps are taken
with a second-order exponential integrator that damps the linear part
exactly and treats the quadratically small surface terms with
Runge-Kutta weights.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BlowupError, DomainError, PinchOffError
from .geometry import StripField, diffeo_check, dirichlet_neumann, vertical_grid
from .params import DimensionlessParams
from .potentials import (
    PoissonSolution,
    solve_correction_potential,
    surface_potential_traces,
)
from .spectral import (
    PeriodicSpectrum,
    apply_multiplier,
    compose_curvature_factor,
    compose_saturation,
    derivative,
    lambda_symbol,
    product,
    project_modes,
    tanh_scaled_symbol,
)

# explicit constant of the global smallness threshold
THEOREM_C0 = 3120.0


def linear_symbol(k: int, params: DimensionlessParams) -> float:
    """Decay rate of mode k in the linearized dynamics (negative values
    mean Rayleigh-Taylor growth)."""
    a = abs(k)
    if a == 0:
        return 0.0
    return (
        (1.0 / params.eps)
        * np.tanh(params.sqrt_delta * a)
        * (params.nu * params.alpha * a**3 - params.eps * a)
    )


def _linear_symbol_array(params: DimensionlessParams) -> np.ndarray:
    n = np.abs(np.arange(-params.n_modes, params.n_modes + 1)).astype(np.float64)
    out = (1.0 / params.eps) * np.tanh(params.sqrt_delta * n) * (
        params.nu * params.alpha * n**3 - params.eps * n
    )
    out[params.n_modes] = 0.0
    return out


def smallness_threshold(params: DimensionlessParams) -> float:
    """Global-existence threshold on |h0|_1:
    min{1/(C0*eps), 1} * (nu*sqrt(delta) - 1)/nu with C0 = 3120."""
    return min(1.0 / (THEOREM_C0 * params.eps), 1.0) * (
        params.nu * params.sqrt_delta - 1.0
    ) / params.nu


@dataclass
class RhsResult:
    """Truncated nonlinear right-hand side plus its diagnostics."""

    total: PeriodicSpectrum
    advection_surface: PeriodicSpectrum
    advection_correction: PeriodicSpectrum
    explicit_remainder: PeriodicSpectrum
    mean_removed: float
    phi2_iterations: int
    phi2_contraction: float
    phi2_solution: PoissonSolution | None


def _saturation_trace(h: PeriodicSpectrum, params: DimensionlessParams) -> PeriodicSpectrum:
    """Saturation composition of the Dirichlet-Neumann trace (the surface
    restriction of the vertical stretch enters only through this)."""
    return compose_saturation(params.eps * dirichlet_neumann(h))


def surface_advection_term(
    h: PeriodicSpectrum, params: DimensionlessParams
) -> PeriodicSpectrum:
    """-sqrt(delta) * (A1k dk phi1)|surf * dx1 h, explicit in h."""
    dh = derivative(h, 1)
    sat = _saturation_trace(h, params)
    a12_t = params.eps * product(dh, sat.with_mode0(sat.mode(0).real - 1.0))
    d1phi1, d2phi1 = surface_potential_traces(h, params)
    return (-params.sqrt_delta) * product(d1phi1 + product(a12_t, d2phi1), dh)


def correction_advection_term(
    h: PeriodicSpectrum,
    params: DimensionlessParams,
    phi2: PoissonSolution | None = None,
    warm: tuple[StripField, StripField] | None = None,
    override_smallness: bool = False,
) -> tuple[PeriodicSpectrum, PoissonSolution]:
    """-sqrt(delta) A12 d2 phi2|surf dx1 h + (1/alpha) A22 d2 phi2|surf.

    The tangential derivative of the correction vanishes on the surface
    (it has homogeneous Dirichlet data), so only its vertical trace
    enters."""
    if phi2 is None:
        phi2 = solve_correction_potential(
            h, params, warm=warm, override_smallness=override_smallness
        )
    dh = derivative(h, 1)
    sat = _saturation_trace(h, params)
    a12_t = params.eps * product(dh, sat.with_mode0(sat.mode(0).real - 1.0))
    tr2 = phi2.trace_d2
    term = (-params.sqrt_delta) * product(product(a12_t, tr2), dh) + (
        1.0 / params.alpha
    ) * (tr2 - product(sat, tr2))
    return term, phi2


def remainder_term(h: PeriodicSpectrum, params: DimensionlessParams) -> PeriodicSpectrum:
    """Closed-form commutator of the linear part with the change of
    variables: saturation and curvature-factor compositions of h alone."""
    sd = params.sqrt_delta
    dh = derivative(h, 1)
    sat = _saturation_trace(h, params)
    lam = lambda_symbol()
    tanh_sym = tanh_scaled_symbol(sd)
    stiff = apply_multiplier(
        tanh_sym,
        PeriodicSpectrum(
            (params.nu * params.alpha * np.abs(h.modes) ** 3 - params.eps * np.abs(h.modes))
            * h.coeffs,
            h.cutoff,
        ),
    )
    flat = compose_curvature_factor(dh, params.alpha)
    lam2h = apply_multiplier(lam, apply_multiplier(lam, h))
    inner = apply_multiplier(tanh_sym, apply_multiplier(lam, product(flat, lam2h)))
    return sd * (
        product(sat, stiff) - params.nu * params.alpha * (inner - product(sat, inner))
    )


def nonlinear_terms(
    state_h: PeriodicSpectrum,
    params: DimensionlessParams,
    warm: tuple[StripField, StripField] | None = None,
    override_smallness: bool = False,
) -> RhsResult:
    """The full nonlinear right-hand side of the evolution.

    Every term is at least quadratic in h.  The output is truncated to
    the working cutoff and the (aliasing-induced) mean of the sum is
    removed and reported.
    """
    h = state_h
    n_phi1 = surface_advection_term(h, params)
    n_phi2, phi2 = correction_advection_term(
        h, params, warm=warm, override_smallness=override_smallness
    )
    n_h = remainder_term(h, params)

    total = n_phi1 + n_phi2 + n_h
    mean = total.mode(0).real
    total = project_modes(total.with_mode0(0.0), h.cutoff)
    return RhsResult(
        total=total,
        advection_surface=n_phi1,
        advection_correction=n_phi2,
        explicit_remainder=n_h,
        mean_removed=mean,
        phi2_iterations=phi2.iterations,
        phi2_contraction=phi2.contraction,
        phi2_solution=phi2,
    )


def nonlinear_rhs(
    state_h: PeriodicSpectrum,
    params: DimensionlessParams,
    **kwargs,
) -> PeriodicSpectrum:
    return nonlinear_terms(state_h, params, **kwargs).total


@dataclass
class SimState:
    t: float
    h: PeriodicSpectrum
    phi2_cache: tuple[StripField, StripField] | None = None
    last_rhs_mean: float = 0.0
    last_phi2_iterations: int = 0
    last_phi2_contraction: float = 0.0


def _etd_weights(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """phi1(z) = (e^z - 1)/z and phi2(z) = (e^z - 1 - z)/z^2, stable for
    small |z| via series."""
    w1 = np.empty_like(z)
    w2 = np.empty_like(z)
    small = np.abs(z) < 1e-2
    zs = z[small]
    w1[small] = 1.0 + zs / 2 + zs**2 / 6 + zs**3 / 24 + zs**4 / 120
    w2[small] = 0.5 + zs / 6 + zs**2 / 24 + zs**3 / 120 + zs**4 / 720
    zb = z[~small]
    em = np.expm1(zb)
    w1[~small] = em / zb
    w2[~small] = (em - zb) / zb**2
    return w1, w2


def _mirror_clean(coeffs: np.ndarray, cutoff: int) -> np.ndarray:
    """Re-impose conjugate symmetry and zero mean exactly."""
    half = coeffs[cutoff:].copy()
    half[0] = 0.0
    return np.concatenate([half[:0:-1].conj(), half])


def step(
    state: SimState,
    params: DimensionlessParams,
    linear_only: bool = False,
    override_smallness: bool = False,
) -> SimState:
    """One exponential Runge-Kutta step of size params.dt.

    Per mode the linear factor exp(-L(k) dt) is exact; the nonlinear
    terms enter with second-order exponential weights.  Zero mean and
    conjugate symmetry are re-imposed after the update; the result must
    keep the strip transform a diffeomorphism.
    """
    dt = params.dt
    lin = _linear_symbol_array(params)
    efac = np.exp(-lin * dt)
    w1, w2 = _etd_weights(-lin * dt)

    h0 = state.h
    if linear_only:
        new_coeffs = efac * h0.coeffs
        new = PeriodicSpectrum(_mirror_clean(new_coeffs, h0.cutoff), h0.cutoff)
        out = SimState(state.t + dt, new, None, 0.0, 0, 0.0)
    else:
        r0 = nonlinear_terms(h0, params, warm=state.phi2_cache, override_smallness=override_smallness)
        predictor = PeriodicSpectrum(
            _mirror_clean(efac * h0.coeffs + dt * w1 * r0.total.coeffs, h0.cutoff),
            h0.cutoff,
        )
        cache = (r0.phi2_solution.grad1, r0.phi2_solution.grad2)
        r1 = nonlinear_terms(predictor, params, warm=cache, override_smallness=override_smallness)
        new_coeffs = predictor.coeffs + dt * w2 * (r1.total.coeffs - r0.total.coeffs)
        new = PeriodicSpectrum(_mirror_clean(new_coeffs, h0.cutoff), h0.cutoff)
        out = SimState(
            state.t + dt,
            new,
            (r1.phi2_solution.grad1, r1.phi2_solution.grad2),
            0.5 * (abs(r0.mean_removed) + abs(r1.mean_removed)),
            max(r0.phi2_iterations, r1.phi2_iterations),
            max(r0.phi2_contraction, r1.phi2_contraction),
        )

    if not np.all(np.isfinite(out.h.coeffs)):
        raise BlowupError(f"non-finite spectrum at t = {out.t:.6g}")
    ok, margin = diffeo_check(out.h, params.eps)
    if not ok:
        raise PinchOffError(
            f"interface reached the strip-transform limit at t = {out.t:.6g} "
            f"(margin {margin:.3g})"
        )
    return out


def run(
    h0: PeriodicSpectrum,
    params: DimensionlessParams,
    linear_only: bool = False,
    override_smallness: bool = False,
    output_interval: float = 0.1,
    checkpoint_path: str | None = None,
    checkpoint_interval: float | None = None,
):
    """Integrate to params.t_final, recording a ledger row every
    ``output_interval`` and optionally checkpointing.

    The initial data must be admissible (zero mean, diffeomorphism, and
    below the global smallness threshold) unless override_smallness is
    set; blow-up or pinch-off aborts with the partial ledger attached to
    the raised exception.
    """
    from .analysis import EnergyLedger  # lazy: analysis depends on this module

    h0.require_zero_mean("initial data")
    ok, margin = diffeo_check(h0, params.eps)
    if not ok:
        raise DomainError(f"initial data breaks the strip transform (margin {margin:.3g})")
    from .spectral import wiener_norm

    below = wiener_norm(h0, 1.0, 0.0) < smallness_threshold(params)
    if not (below and params.stable_regime) and not (override_smallness or linear_only):
        raise DomainError(
            "initial data outside the guaranteed-decay regime; "
            "pass override_smallness=True to integrate anyway"
        )

    ledger = EnergyLedger(params=params)
    state = SimState(0.0, h0, None)
    ledger.record(state, params, flags=_flags(params, below))

    steps_per_row = max(1, round(output_interval / params.dt))
    total_steps = round(params.t_final / params.dt)
    ckpt_every = None
    if checkpoint_path is not None:
        ckpt_every = max(
            1,
            round((checkpoint_interval or 10 * output_interval) / params.dt),
        )

    try:
        for k in range(1, total_steps + 1):
            state = step(state, params, linear_only, override_smallness)
            if k % steps_per_row == 0 or k == total_steps:
                ledger.record(state, params, flags=_flags(params, below))
            if ckpt_every is not None and (k % ckpt_every == 0 or k == total_steps):
                write_checkpoint(checkpoint_path, state, params)
    except (PinchOffError, BlowupError) as exc:
        exc.ledger = ledger
        raise
    return ledger, state


def _flags(params: DimensionlessParams, smallness_ok: bool) -> str:
    bits = ["stable" if params.stable_regime else "rt-unstable"]
    bits.append("small" if smallness_ok else "large")
    return "|".join(bits)


# -- checkpoints ---------------------------------------------------------


def write_checkpoint(path: str, state: SimState, params: DimensionlessParams) -> None:
    """Binary checkpoint: JSON header, then little-endian complex128
    blocks (interface modes 0..N; optionally the cached correction
    gradient profiles so a resumed run is bit-identical)."""
    header = {
        "format": 1,
        "t": state.t,
        "params": asdict(params),
        "cutoff": state.h.cutoff,
        "m_nodes": params.m_nodes,
        "has_cache": state.phi2_cache is not None,
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        f.write(state.h.to_binary())
        if state.phi2_cache is not None:
            for fld in state.phi2_cache:
                f.write(np.ascontiguousarray(fld.coeffs, dtype="<c16").tobytes())
                f.write(np.ascontiguousarray(fld.d2, dtype="<c16").tobytes())


def load_checkpoint(path: str) -> tuple[SimState, DimensionlessParams]:
    with open(path, "rb") as f:
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode())
        params = DimensionlessParams(**header["params"])
        cutoff = header["cutoff"]
        h = PeriodicSpectrum.from_binary(f.read(16 * (cutoff + 1)), cutoff)
        cache = None
        if header["has_cache"]:
            grid = vertical_grid(header["m_nodes"])
            shape = (2 * cutoff + 1, grid.size)
            count = shape[0] * shape[1]
            fields = []
            for _ in range(2):
                vals = np.frombuffer(f.read(16 * count), dtype="<c16").reshape(shape)
                d2 = np.frombuffer(f.read(16 * count), dtype="<c16").reshape(shape)
                fields.append(StripField(vals.copy(), grid, cutoff, d2.copy()))
            cache = tuple(fields)
    return SimState(header["t"], h, cache), params
