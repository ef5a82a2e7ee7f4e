import math
import os

import numpy as np
import pytest

from muskat.errors import BlowupError, DomainError, PinchOffError
from muskat.evolution import (
    SimState,
    linear_symbol,
    load_checkpoint,
    nonlinear_terms,
    remainder_term,
    run,
    smallness_threshold,
    step,
    write_checkpoint,
)
from muskat.params import DimensionlessParams, reference_params
from muskat.spectral import PeriodicSpectrum, wiener_norm

from conftest import make_spectrum


class TestParams:
    def test_alpha_identity_enforced(self):
        p = DimensionlessParams(eps=0.1, delta=0.25, nu=4.0)
        assert p.alpha == pytest.approx(0.05)
        with pytest.raises(ValueError):
            DimensionlessParams(eps=0.1, delta=0.25, nu=4.0, alpha=0.2)

    def test_range_checks(self):
        with pytest.raises(ValueError):
            DimensionlessParams(eps=1.5, delta=0.25, nu=4.0)
        with pytest.raises(ValueError):
            DimensionlessParams(eps=0.1, delta=1.5, nu=4.0)
        with pytest.raises(ValueError):
            DimensionlessParams(eps=0.1, delta=0.25, nu=0.5)
        with pytest.raises(ValueError):
            DimensionlessParams(eps=0.1, delta=0.25, nu=4.0, m_nodes=15)

    def test_stable_flag(self):
        assert reference_params().stable_regime
        assert not reference_params(nu=1.5).stable_regime

    def test_mu_range(self):
        # conservative bound: sqrt(delta)/16 (nu sqrt(delta) - 1) = 0.03125
        reference_params(mu=0.03)
        with pytest.raises(ValueError):
            reference_params(mu=0.0313)
        # the /4 variant admits up to 0.125
        reference_params(mu=0.1, wide_mu_range=True)

    def test_unstable_requires_zero_mu(self):
        with pytest.raises(ValueError):
            reference_params(nu=1.5, mu=0.01)
        reference_params(nu=1.5, mu=0.0)

    def test_decay_rate(self):
        assert reference_params().decay_rate == pytest.approx(0.03125)


class TestLinearSymbol:
    def test_zero_mode(self):
        assert linear_symbol(0, reference_params()) == 0.0

    def test_reference_values(self):
        p = reference_params()
        assert linear_symbol(1, p) == pytest.approx(0.4621171572600098, rel=1e-12)
        assert linear_symbol(2, p) == pytest.approx(10.662318183380709, rel=1e-12)

    def test_sign_criterion(self):
        stable = reference_params()
        assert all(linear_symbol(k, stable) > 0 for k in range(1, 65))
        unstable = reference_params(nu=1.5)
        assert linear_symbol(1, unstable) < 0

    def test_smallness_threshold_value(self):
        assert smallness_threshold(reference_params()) == pytest.approx(
            8.012820512820513e-4, rel=1e-12
        )


class TestNonlinearRhs:
    def test_flat_equilibrium(self):
        p = reference_params(n_modes=8, m_nodes=16)
        r = nonlinear_terms(PeriodicSpectrum.zeros(8), p)
        assert wiener_norm(r.total) == 0.0

    def test_quadratic_scaling(self):
        p = reference_params(n_modes=16, m_nodes=32)
        norms = {}
        for a in (1e-8, 1e-6, 1e-4):
            h = PeriodicSpectrum.from_modes(16, {1: a / 2})
            norms[a] = wiener_norm(nonlinear_terms(h, p).total, 0, 0)
        slope1 = math.log(norms[1e-6] / norms[1e-8]) / math.log(100.0)
        slope2 = math.log(norms[1e-4] / norms[1e-6]) / math.log(100.0)
        assert slope1 == pytest.approx(2.0, abs=0.05)
        assert slope2 == pytest.approx(2.0, abs=0.05)

    def test_mean_removed_and_logged(self, rng):
        p = reference_params(n_modes=16, m_nodes=32)
        h = make_spectrum(rng, cutoff=16)
        h = (1e-3 / wiener_norm(h, 1, 0)) * h
        r = nonlinear_terms(h, p)
        assert r.total.mode(0) == 0.0
        assert np.isfinite(r.mean_removed)

    def test_remainder_norm_bound(self, rng):
        p = reference_params(n_modes=16, m_nodes=32)
        for _ in range(5):
            h = make_spectrum(rng, cutoff=16)
            h = (np.exp(rng.uniform(np.log(1e-4), np.log(1.0))) / wiener_norm(h, 1, 0)) * h
            h1 = wiener_norm(h, 1, 0)
            lhs = wiener_norm(remainder_term(h, p), 1, 0)
            rhs = (
                2.0
                * p.sqrt_delta
                * p.nu
                * p.alpha
                * h1
                * ((1 + p.alpha) * p.eps / (1 - p.eps * h1) + p.alpha)
                * wiener_norm(h, 4, 0)
            )
            assert lhs <= rhs * (1 + 1e-9)


class TestStep:
    def test_flat_stays_flat(self):
        p = reference_params(n_modes=8, m_nodes=16, dt=0.1)
        st = step(SimState(0.0, PeriodicSpectrum.zeros(8)), p)
        assert wiener_norm(st.h) == 0.0

    def test_pure_linear_exact_per_mode(self):
        p = reference_params(n_modes=8, m_nodes=16, dt=0.02)
        h0 = PeriodicSpectrum.from_modes(8, {1: 1e-3, 3: 2e-4})
        st = SimState(0.0, h0)
        for _ in range(50):
            st = step(st, p, linear_only=True)
        for k in (1, 3):
            expected = h0.mode(k) * math.exp(-linear_symbol(k, p) * 1.0)
            assert st.h.mode(k) == pytest.approx(expected, rel=1e-12)

    def test_tiny_data_rate_matches_symbol(self):
        p = reference_params(n_modes=16, m_nodes=32, dt=0.01)
        h0 = PeriodicSpectrum.from_modes(16, {1: 5e-7})
        st = SimState(0.0, h0)
        for _ in range(100):
            st = step(st, p)
        rate = -math.log(abs(st.h.mode(1)) / 5e-7) / st.t
        assert rate == pytest.approx(linear_symbol(1, p), rel=0.01)

    def test_reality_and_zero_mean_preserved(self, rng):
        # conjugate symmetry and the zero mean are re-imposed exactly after
        # every update, so preservation is exact at any step count
        p = reference_params(n_modes=16, m_nodes=32, dt=0.005)
        h = make_spectrum(rng, cutoff=16)
        h = (2e-4 / wiener_norm(h, 1, 0)) * h
        st = SimState(0.0, h)
        for _ in range(200):
            st = step(st, p)
        c = st.h.coeffs
        assert np.abs(c[::-1].conj() - c).max() == 0.0
        assert abs(st.h.mode(0)) == 0.0

    def test_second_order_self_convergence(self):
        # fixed quadratically nonlinear trajectory; halving dt must cut the
        # terminal error by about four
        h0 = PeriodicSpectrum.from_modes(8, {1: 2e-3, 2: 1e-3})
        terminal = {}
        for dt in (0.08, 0.04, 0.02, 0.0025):
            p = reference_params(n_modes=8, m_nodes=32, dt=dt)
            st = SimState(0.0, h0)
            for _ in range(round(0.8 / dt)):
                st = step(st, p)
            terminal[dt] = st.h.coeffs
        ref = terminal[0.0025]
        e1 = np.abs(terminal[0.08] - ref).max()
        e2 = np.abs(terminal[0.04] - ref).max()
        e3 = np.abs(terminal[0.02] - ref).max()
        assert math.log2(e1 / e2) > 1.6
        assert math.log2(e2 / e3) > 1.6

    def test_blowup_detection(self):
        p = reference_params(n_modes=8, m_nodes=16, dt=1e-3)
        # force non-finite data through an absurd override amplitude
        h = PeriodicSpectrum.from_modes(8, {1: 1e150})
        with pytest.raises((BlowupError, PinchOffError, DomainError)):
            st = SimState(0.0, h)
            for _ in range(3):
                st = step(st, p, linear_only=True)
                st = SimState(st.t, 1e150 * st.h)
                st = step(st, p, linear_only=True)


class TestRun:
    def test_zero_initial_data(self):
        p = reference_params(n_modes=8, m_nodes=16, dt=0.01, t_final=0.1)
        ledger, state = run(PeriodicSpectrum.zeros(8), p)
        assert all(r["h_s1"] == 0.0 for r in ledger.rows)

    def test_smallness_gate(self):
        p = reference_params(n_modes=8, m_nodes=16, dt=0.01, t_final=0.05)
        big = PeriodicSpectrum.from_modes(8, {1: 0.05})
        with pytest.raises(DomainError):
            run(big, p)
        run(big, p, override_smallness=True)

    def test_weighted_norm_nonincreasing(self):
        p = reference_params(n_modes=16, m_nodes=32, dt=0.01, t_final=1.0, mu=0.01)
        h0 = PeriodicSpectrum.from_modes(16, {n: 1 / (1 + n) ** 4 for n in range(1, 17)})
        h0 = (4e-4 / wiener_norm(h0, 1, 0)) * h0
        ledger, _ = run(h0, p, output_interval=0.1)
        vals = ledger.column("h1_mu")
        assert np.all(np.diff(vals) <= 1e-12)

    def test_pinch_off_aborts_with_ledger(self):
        # Rayleigh-Taylor growth from moderate data reaches the transform
        # limit; the partial ledger rides on the exception
        p = reference_params(
            nu=1.5, eps=0.9, delta=0.25, n_modes=8, m_nodes=16, dt=0.05, t_final=400.0
        )
        h0 = PeriodicSpectrum.from_modes(8, {1: 0.12})
        with pytest.raises(PinchOffError) as err:
            run(h0, p, linear_only=True, override_smallness=True, output_interval=1.0)
        assert len(err.value.ledger.rows) > 1

    def test_rt_unstable_growth_rate(self):
        p = reference_params(nu=1.5, n_modes=8, m_nodes=16, dt=0.01, t_final=5.0)
        h0 = PeriodicSpectrum.from_modes(8, {1: 1e-6})
        ledger, state = run(h0, p, linear_only=True, output_interval=1.0)
        rate = math.log(abs(state.h.mode(1)) / 1e-6) / state.t
        assert rate == pytest.approx(abs(linear_symbol(1, p)), rel=1e-9)


class TestCheckpoints:
    def test_resume_bit_identical(self, tmp_path):
        p = reference_params(n_modes=8, m_nodes=32, dt=0.01)
        h0 = PeriodicSpectrum.from_modes(8, {1: 2e-4, 2: 1e-4})
        direct = SimState(0.0, h0)
        for _ in range(20):
            direct = step(direct, p)

        st = SimState(0.0, h0)
        for _ in range(10):
            st = step(st, p)
        path = os.path.join(tmp_path, "ck.bin")
        write_checkpoint(path, st, p)
        resumed, loaded_params = load_checkpoint(path)
        assert loaded_params == p
        for _ in range(10):
            resumed = step(resumed, p)
        assert np.array_equal(resumed.h.coeffs, direct.h.coeffs)
        assert resumed.t == direct.t

    def test_checkpoint_without_cache(self, tmp_path):
        p = reference_params(n_modes=8, m_nodes=16)
        st = SimState(0.5, PeriodicSpectrum.from_modes(8, {1: 1e-4}))
        path = os.path.join(tmp_path, "ck.bin")
        write_checkpoint(path, st, p)
        loaded, _ = load_checkpoint(path)
        assert loaded.phi2_cache is None
        assert np.array_equal(loaded.h.coeffs, st.h.coeffs)


class TestIndependentIntegratorReference:
    def test_etd_matches_adaptive_reference(self):
        """The stepped trajectory must agree with a high-order adaptive
        integration of the same spectral ODE far below the size of the
        nonlinear displacement it resolves."""
        from scipy.integrate import solve_ivp

        from muskat.evolution import _linear_symbol_array, nonlinear_terms

        p = reference_params(n_modes=8, m_nodes=32, dt=0.005)
        h0 = PeriodicSpectrum.from_modes(8, {1: 1e-3, 2: 4e-4})
        n = 8
        lin = _linear_symbol_array(p)

        def pack(h):
            half = h.half()
            return np.concatenate([half.real, half.imag])

        def unpack(y):
            return PeriodicSpectrum.from_half(y[: n + 1] + 1j * y[n + 1 :])

        def rhs(t, y):
            h = unpack(y)
            total = nonlinear_terms(h, p).total
            dh = -lin[n:] * h.half() + total.half()
            return np.concatenate([dh.real, dh.imag])

        horizon = 0.3
        ref = solve_ivp(rhs, (0, horizon), pack(h0), method="DOP853", rtol=1e-11, atol=1e-14)
        h_ref = unpack(ref.y[:, -1])
        st = SimState(0.0, h0)
        for _ in range(round(horizon / p.dt)):
            st = step(st, p)
        h_lin = PeriodicSpectrum(np.exp(-lin * horizon) * h0.coeffs, n)
        nonlinear_size = np.abs(h_ref.coeffs - h_lin.coeffs).max()
        etd_err = np.abs(st.h.coeffs - h_ref.coeffs).max()
        assert nonlinear_size > 1e-8  # the test has power
        assert etd_err < 0.01 * nonlinear_size


class TestCheckpointProperty:
    def test_random_state_round_trip(self, rng, tmp_path):
        import os

        for k in range(5):
            p = reference_params(n_modes=int(rng.integers(4, 12)), m_nodes=16)
            h = make_spectrum(rng, cutoff=p.n_modes, scale=1e-3)
            st = SimState(float(rng.uniform(0, 10)), h)
            path = os.path.join(tmp_path, f"ck{k}.bin")
            write_checkpoint(path, st, p)
            back, back_p = load_checkpoint(path)
            assert back_p == p
            assert back.t == st.t
            assert np.array_equal(back.h.coeffs, st.h.coeffs)
