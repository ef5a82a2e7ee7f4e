import numpy as np
import pytest

from muskat.errors import DomainError, ShapeError
from muskat.geometry import (
    StripField,
    ale_matrices,
    curvature,
    diffeo_check,
    dirichlet_neumann,
    fd_vertical,
    harmonic_extension,
    harmonic_extension_gradient,
    modes_to_samples,
    strip_norm,
    strip_product,
    vertical_grid,
)
from muskat.spectral import PeriodicSpectrum, wiener_norm

from conftest import make_spectrum

COS1 = PeriodicSpectrum.from_modes(8, {1: 0.5})


class TestHarmonicExtension:
    def test_zero(self):
        fld = harmonic_extension(PeriodicSpectrum.zeros(4), 16)
        assert np.abs(fld.coeffs).max() == 0.0

    def test_boundary_values(self):
        fld = harmonic_extension(COS1, 32)
        assert np.abs(fld.coeffs[:, 0]).max() == 0.0  # bottom Dirichlet
        assert np.abs(fld.trace().coeffs - COS1.coeffs).max() == 0.0

    def test_half_depth_ratio(self):
        fld = harmonic_extension(COS1, 64)
        mid = fld.coeffs[fld.cutoff + 1, 32] / 0.5
        assert mid.real == pytest.approx(0.443409441985037, rel=1e-12)

    def test_requires_zero_mean(self):
        with pytest.raises(DomainError):
            harmonic_extension(PeriodicSpectrum.from_modes(4, {0: 1.0}), 16)

    @pytest.mark.parametrize("m", [32, 64])
    def test_discrete_harmonicity(self, m, rng):
        h = make_spectrum(rng)
        fld = harmonic_extension(h, m)
        dx = fld.grid[1] - fld.grid[0]
        n2 = (np.arange(-8, 9) ** 2)[:, None]
        lap = (fld.coeffs[:, 2:] - 2 * fld.coeffs[:, 1:-1] + fld.coeffs[:, :-2]) / dx**2
        resid = np.abs(lap - n2 * fld.coeffs[:, 1:-1]).max()
        # second-order residual of the exact harmonic profiles
        assert resid < 30.0 * dx**2

    def test_harmonicity_converges_second_order(self, rng):
        h = make_spectrum(rng)

        def resid(m):
            fld = harmonic_extension(h, m)
            dx = fld.grid[1] - fld.grid[0]
            n2 = (np.arange(-8, 9) ** 2)[:, None]
            lap = (fld.coeffs[:, 2:] - 2 * fld.coeffs[:, 1:-1] + fld.coeffs[:, :-2]) / dx**2
            return np.abs(lap - n2 * fld.coeffs[:, 1:-1]).max()

        assert resid(32) / resid(64) == pytest.approx(4.0, rel=0.2)


class TestGradient:
    def test_zero(self):
        g1, g2 = harmonic_extension_gradient(PeriodicSpectrum.zeros(4), 16)
        assert np.abs(g1.coeffs).max() == 0.0 and np.abs(g2.coeffs).max() == 0.0

    def test_vertical_trace_is_dirichlet_neumann(self, rng):
        h = make_spectrum(rng)
        _, g2 = harmonic_extension_gradient(h, 32)
        expected = dirichlet_neumann(h)
        assert np.abs(g2.trace().coeffs - expected.coeffs).max() < 1e-13

    def test_d2_profiles_match_finite_differences(self, rng):
        h = make_spectrum(rng)
        g1, g2 = harmonic_extension_gradient(h, 128)
        fd = fd_vertical(g1.coeffs, g1.grid)
        interior = np.abs(fd[:, 2:-2] - g1.d2[:, 2:-2]).max()
        assert interior < 1e-2 * max(np.abs(g1.d2).max(), 1e-30)


class TestDirichletNeumann:
    def test_mode_one(self):
        out = dirichlet_neumann(COS1)
        assert out.mode(1) * 2 == pytest.approx(1.3130352854993312, rel=1e-12)

    def test_high_mode_approaches_slope(self):
        h = PeriodicSpectrum.from_modes(8, {5: 0.5})
        out = dirichlet_neumann(h)
        assert out.mode(5) * 2 == pytest.approx(5.0004540199101, rel=1e-12)


class TestCurvature:
    def test_zero(self):
        assert wiener_norm(curvature(PeriodicSpectrum.zeros(6), 0.3)) == 0.0

    def test_linear_limit(self):
        out = curvature(COS1, 0.0)
        assert out.mode(1) * 2 == pytest.approx(-1.0, rel=1e-14)

    def test_pointwise_against_direct_formula(self):
        out = curvature(COS1, 0.05)
        x = np.linspace(0, 2 * np.pi, 720, endpoint=False)
        direct = -np.cos(x) / (1 + (0.05 * np.sin(x)) ** 2) ** 1.5
        assert np.abs(out.to_physical(720) - direct).max() < 1e-10


class TestDiffeo:
    def test_flat_margin(self):
        ok, margin = diffeo_check(PeriodicSpectrum.zeros(4), 0.2)
        assert ok and margin == pytest.approx(0.5)

    def test_small_slope_passes(self):
        ok, margin = diffeo_check(COS1, 0.1)  # |h|_1 = 2
        assert ok and margin == pytest.approx(0.3, rel=1e-12)

    def test_large_slope_fails(self):
        ok, margin = diffeo_check(COS1, 0.3)
        assert not ok and margin == pytest.approx(-0.1, rel=1e-12)


class TestAleMatrices:
    def test_flat_interface(self):
        mats = ale_matrices(PeriodicSpectrum.zeros(6), 0.1, 0.25, 16)
        for fld in (mats.a12, mats.q11, mats.q12, mats.q22):
            assert np.abs(fld.coeffs).max() == 0.0
        assert np.abs(mats.a22.coeffs[mats.a22.cutoff] - 1.0).max() < 1e-14
        assert mats.jacobian_min == pytest.approx(1.0)

    def test_trace_composition_matches_direct(self, rng):
        # band-limited small interface keeps the truncation tail below the
        # comparison tolerance
        h = PeriodicSpectrum.from_modes(8, {1: 5e-3, 2: 2e-3 * np.exp(0.4j)})
        mats = ale_matrices(h, 0.1, 0.25, 32)
        s1, s2 = harmonic_extension_gradient(h, 32)
        pts = 2 * (2 * h.cutoff + 1)
        p1 = modes_to_samples(s1.coeffs, h.cutoff, pts)[:, -1]
        p2 = modes_to_samples(s2.coeffs, h.cutoff, pts)[:, -1]
        direct12 = -0.1 * p1 / (1 + 0.1 * p2)
        direct22 = 1.0 / (1 + 0.1 * p2)
        assert np.abs(mats.trace_a12.to_physical(pts) - direct12).max() < 1e-8
        assert np.abs(mats.trace_a22.to_physical(pts) - direct22).max() < 1e-8

    def test_inverse_jacobian_identity(self, rng):
        # A * grad(transform) = identity pointwise on the sample grid
        h = PeriodicSpectrum.from_modes(8, {1: 5e-3, 2: 2e-3 * np.exp(0.4j)})
        eps = 0.1
        mats = ale_matrices(h, eps, 0.25, 32)
        s1, s2 = harmonic_extension_gradient(h, 32)
        pts = 2 * (2 * h.cutoff + 1)
        j21 = eps * modes_to_samples(s1.coeffs, h.cutoff, pts)
        j22 = 1.0 + eps * modes_to_samples(s2.coeffs, h.cutoff, pts)
        a12 = modes_to_samples(mats.a12.coeffs, h.cutoff, pts)
        a22 = modes_to_samples(mats.a22.coeffs, h.cutoff, pts)
        assert np.abs(a12 + a22 * j21).max() < 1e-10  # row 2 x column 1
        assert np.abs(a22 * j22 - 1.0).max() < 1e-10  # row 2 x column 2

    def test_determinant_positive_under_diffeo(self, rng):
        h = 0.05 * make_spectrum(rng)
        assert diffeo_check(h, 0.1)[0]
        mats = ale_matrices(h, 0.1, 0.25, 32)
        assert mats.jacobian_min > 0.0

    def test_symmetric_perturbation(self, rng):
        h = 0.02 * make_spectrum(rng)
        mats = ale_matrices(h, 0.1, 0.25, 16)
        s1, _ = harmonic_extension_gradient(h, 16)
        assert np.abs(mats.q12.coeffs + 0.5 * s1.coeffs).max() < 1e-14

    def test_coefficient_norm_bound(self, rng):
        # ||Q||_{s,1} <= 10 |h|_{s+1} under the stated smallness
        eps = 0.1
        for s in (0.0, 1.0):
            h = make_spectrum(rng)
            h = (0.2 / (4 * eps) / wiener_norm(h, 1, 0)) * h
            mats = ale_matrices(h, eps, 0.25, 32)
            lhs = (
                strip_norm(mats.q11, s, 0, 1)
                + 2 * strip_norm(mats.q12, s, 0, 1)
                + strip_norm(mats.q22, s, 0, 1)
            )
            assert lhs <= 10.0 * wiener_norm(h, s + 1, 0) * (1 + 1e-9)

    def test_jacobian_pole_guard(self):
        big = PeriodicSpectrum.from_modes(4, {1: 2.0})
        with pytest.raises(DomainError):
            ale_matrices(big, 0.3, 0.25, 16)


class TestStripField:
    def test_grid_validation(self):
        with pytest.raises(ShapeError):
            StripField(np.zeros((5, 3), complex), np.array([0.0, 0.5, 1.0]), 2)

    def test_reality_validation(self):
        grid = vertical_grid(4)
        c = np.zeros((5, 5), complex)
        c[3] = 1.0
        with pytest.raises(ValueError):
            StripField(c, grid, 2)

    def test_product_values_and_derivative(self, rng):
        h1, h2 = make_spectrum(rng), make_spectrum(rng)
        f = harmonic_extension(h1, 16)
        g = harmonic_extension(h2, 16)
        fg = strip_product(f, g)
        # spot check one node against the 1-D product
        from muskat.spectral import product

        node = 7
        direct = product(f.node_spectrum(node), g.node_spectrum(node))
        assert np.abs(fg.coeffs[:, node] - direct.coeffs).max() < 1e-14
        # derivative tracking: product rule per node
        direct_d2 = product(
            PeriodicSpectrum(f.d2[:, node], 8), g.node_spectrum(node)
        ) + product(f.node_spectrum(node), PeriodicSpectrum(g.d2[:, node], 8))
        assert np.abs(fg.d2[:, node] - direct_d2.coeffs).max() < 1e-14

    def test_strip_norm_needs_d2(self):
        fld = StripField(np.zeros((5, 17), complex), vertical_grid(16), 2)
        with pytest.raises(ShapeError):
            strip_norm(fld, 0, 0, 1)

    def test_json_round_trip(self, rng):
        fld = harmonic_extension(make_spectrum(rng, cutoff=3), 8)
        back = StripField.from_json_dict(fld.to_json_dict())
        assert np.abs(back.coeffs - fld.coeffs).max() < 1e-15

    def test_binary_round_trip(self, rng):
        fld = harmonic_extension(make_spectrum(rng, cutoff=3), 8)
        back = StripField.from_binary(fld.to_binary(), 3, 9)
        assert np.array_equal(back.coeffs, fld.coeffs)
        assert np.array_equal(back.grid, fld.grid)
