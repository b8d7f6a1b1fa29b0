import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from twistnls.spectral_core import (
    Grid,
    SpatialField,
    bessel_potential,
    free_propagate,
    riesz_potential,
    twist,
)


def gaussian(grid):
    return SpatialField.from_function(grid, lambda x: np.exp(-0.5 * x**2))


def random_field(grid, seed, band=20):
    rng = np.random.default_rng(seed)
    spec = np.zeros(grid.n_points, dtype=complex)
    mid = grid.n_points // 2
    spec[mid - band: mid + band + 1] = rng.standard_normal(2 * band + 1) + 1j * rng.standard_normal(2 * band + 1)
    return SpatialField.from_spectrum(grid, spec)


def l2(f):
    return np.sqrt(f.grid.dx * np.sum(np.abs(f.values) ** 2))


class TestGrid:
    def test_layout(self):
        g = Grid(16, 2 * np.pi)
        assert g.x[0] == pytest.approx(-np.pi)
        assert g.dx == pytest.approx(np.pi / 8)
        assert g.frequencies[0] == -8 and g.frequencies[-1] == 7
        assert sorted(g.k) == list(g.frequencies)

    @pytest.mark.parametrize("n", [0, 4, 12, 100, 7.0])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError):
            Grid(n, 1.0)

    @pytest.mark.parametrize("length", [0.0, -1.0, np.inf, np.nan])
    def test_rejects_bad_length(self, length):
        with pytest.raises(ValueError):
            Grid(16, length)

    def test_mode_out_of_range(self):
        with pytest.raises(ValueError):
            Grid(16, 1.0).mode(8)

    def test_refined_keeps_domain(self):
        g = Grid(64, 3.0).refined(2)
        assert g.n_points == 128 and g.length == 3.0


class TestSpectrum:
    def test_gaussian_transform(self, grid):
        # unitary transform of exp(-x^2/2) is exp(-xi^2/2)
        f = gaussian(grid)
        xi = grid.frequencies
        np.testing.assert_allclose(f.spectrum, np.exp(-0.5 * xi**2), atol=1e-13)

    def test_round_trip(self, grid):
        f = random_field(grid, 1)
        g = SpatialField.from_spectrum(grid, f.spectrum)
        np.testing.assert_allclose(g.values, f.values, atol=1e-13)

    @given(st.integers(0, 2**32 - 1))
    def test_parseval(self, seed):
        g = Grid(64, 10.0)
        f = random_field(g, seed, band=10)
        lhs = g.dxi * np.sum(np.abs(f.spectrum) ** 2)
        assert lhs == pytest.approx(l2(f) ** 2, rel=1e-12)

    def test_values_are_read_only(self, grid):
        f = gaussian(grid)
        with pytest.raises(ValueError):
            f.values[0] = 1.0

    def test_shape_mismatch(self, grid):
        with pytest.raises(ValueError):
            SpatialField(grid, np.zeros(3))


class TestPropagator:
    def test_gaussian_closed_form(self, grid):
        t = 0.7
        u = free_propagate(gaussian(grid), t)
        a = 1 + 2j * t
        exact = a**-0.5 * np.exp(-grid.x**2 / (2 * a))
        np.testing.assert_allclose(u.values, exact, atol=1e-12)

    @pytest.mark.parametrize("index", [-5, 0, 3, 31])
    def test_single_mode(self, index):
        g = Grid(64, 2 * np.pi)
        xi = g.dxi * index
        u = free_propagate(g.mode(index), 0.3)
        np.testing.assert_allclose(u.values, np.exp(-0.3j * xi**2) * g.mode(index).values, atol=1e-12)

    @given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
    def test_group_law(self, t1, t2, seed):
        g = Grid(64, 10.0)
        f = random_field(g, seed, band=10)
        lhs = free_propagate(free_propagate(f, t1), t2)
        rhs = free_propagate(f, t1 + t2)
        np.testing.assert_allclose(lhs.values, rhs.values, atol=1e-10)

    @given(st.floats(-10, 10), st.integers(0, 1000))
    def test_unitary(self, t, seed):
        g = Grid(64, 10.0)
        f = random_field(g, seed, band=10)
        assert l2(free_propagate(f, t)) == pytest.approx(l2(f), rel=1e-12)

    @given(st.floats(-10, 10), st.integers(0, 1000))
    def test_twist_inverts(self, t, seed):
        g = Grid(64, 10.0)
        f = random_field(g, seed, band=10)
        np.testing.assert_allclose(twist(free_propagate(f, t), t).values, f.values, atol=1e-11)

    def test_zero_time_identity(self, grid):
        f = gaussian(grid)
        assert free_propagate(f, 0.0) is f

    def test_rejects_nonfinite(self, grid):
        bad = SpatialField(grid, np.full(grid.n_points, np.nan))
        with pytest.raises(ValueError):
            free_propagate(bad, 1.0)
        with pytest.raises(ValueError):
            free_propagate(gaussian(grid), np.inf)

    def test_linear(self, grid):
        f, g = random_field(grid, 2), random_field(grid, 3)
        lhs = free_propagate(2.0 * f + 1j * g, 0.4)
        rhs = 2.0 * free_propagate(f, 0.4) + 1j * free_propagate(g, 0.4)
        np.testing.assert_allclose(lhs.values, rhs.values, atol=1e-12)


class TestPotentials:
    def test_bessel_single_mode(self):
        g = Grid(32, 2 * np.pi)
        out = bessel_potential(g.mode(4), 0.5)
        np.testing.assert_allclose(out.values, 17**0.25 * g.mode(4).values, atol=1e-12)

    def test_bessel_l2_norm_of_gaussian(self, grid):
        # ||<D>^s f||_2^2 = int (1 + xi^2)^s exp(-xi^2) dxi for f = exp(-x^2/2)
        s = 0.7
        ref = np.sqrt(quad(lambda xi: (1 + xi**2) ** s * np.exp(-xi**2), -np.inf, np.inf)[0])
        assert l2(bessel_potential(gaussian(grid), s)) == pytest.approx(ref, rel=1e-12)

    @given(st.floats(-2, 2), st.floats(-2, 2))
    def test_bessel_semigroup(self, a, b):
        g = Grid(64, 10.0)
        f = random_field(g, 5, band=10)
        lhs = bessel_potential(bessel_potential(f, a), b)
        np.testing.assert_allclose(lhs.values, bessel_potential(f, a + b).values, atol=1e-10)

    def test_bessel_zero_order(self, grid):
        f = gaussian(grid)
        assert bessel_potential(f, 0) is f

    def test_riesz_kills_constants(self):
        g = Grid(32, 2 * np.pi)
        one = SpatialField(g, np.ones(32))
        np.testing.assert_allclose(riesz_potential(one, 0.5).values, 0, atol=1e-14)

    def test_riesz_single_mode(self):
        g = Grid(32, 4 * np.pi)
        out = riesz_potential(g.mode(-6), 1.5)
        np.testing.assert_allclose(out.values, 3.0**1.5 * g.mode(-6).values, atol=1e-12)

    def test_riesz_negative_order(self):
        g = Grid(32, 2 * np.pi)
        out = riesz_potential(g.mode(2), -1)
        np.testing.assert_allclose(out.values, 0.5 * g.mode(2).values, atol=1e-13)
        with pytest.raises(ValueError):
            riesz_potential(SpatialField(g, np.ones(32)), -1)

    def test_riesz_derivative(self):
        # |D|^2 = -d_xx
        g = Grid(64, 2 * np.pi)
        f = SpatialField.from_function(g, lambda x: np.sin(3 * x) + np.cos(x))
        exact = 9 * np.sin(3 * g.x) + np.cos(g.x)
        np.testing.assert_allclose(riesz_potential(f, 2).values, exact, atol=1e-11)


def test_field_arithmetic(grid):
    f = gaussian(grid)
    np.testing.assert_allclose((f + f - 2 * f).values, 0)
    np.testing.assert_allclose((f * f).values, np.exp(-grid.x**2))
    np.testing.assert_allclose((-f).conj().values, -f.values)
    with pytest.raises(ValueError):
        f + gaussian(Grid(128, 1.0))
