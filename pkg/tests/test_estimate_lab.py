import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.integrate import quad

from twistnls.errors import ValidationError
from twistnls.estimate_lab import (
    InequalityReport,
    SampleSpec,
    check_decay_embedding,
    check_duhamel_weighted,
    check_fefferman_stein,
    check_fractional_leibniz,
    check_homogeneous_strichartz,
    check_inhomogeneous_strichartz,
    check_trilinear,
    draw_fields,
    refine_field,
    uniqueness_experiment,
    uniqueness_tuple,
)
from twistnls.exponents import main_exponents
from twistnls.norms import SpaceTimeField
from twistnls.picard_solver import SolverConfig, trilinear_ratios
from twistnls.spectral_core import Grid, SpatialField

L = 8 * np.pi
SMALL = SampleSpec(seed=11, count=12)


def constant_spec(count=3):
    # band_limit = 0: every sample is a constant field, all norms closed form
    return SampleSpec(seed=5, count=count, band_limit=0, grid=Grid(32, L))


def soliton(grid):
    return SpatialField.from_function(grid, lambda x: np.sqrt(2) / np.cosh(x))


class TestSampleSpec:
    @pytest.mark.parametrize("kw", [dict(count=0), dict(band_limit=43), dict(spectral_decay=-1)])
    def test_invariants(self, kw):
        with pytest.raises(ValueError):
            SampleSpec(**kw)

    def test_deterministic(self):
        assert np.array_equal(draw_fields(SMALL), draw_fields(SMALL))
        other = SampleSpec(seed=12, count=12)
        assert not np.array_equal(draw_fields(SMALL), draw_fields(other))

    def test_independent_of_grid(self):
        coarse = draw_fields(SMALL)
        fine = draw_fields(SMALL.refined())
        np.testing.assert_allclose(fine[..., ::2], coarse, atol=1e-12)

    def test_band_limited(self):
        vals = draw_fields(SMALL)[0, 0]
        xi = SpatialField(SMALL.grid, vals).spectrum
        k = np.arange(-64, 64)
        assert np.max(np.abs(xi[np.abs(k) > 12])) < 1e-12


class TestReport:
    def test_summary(self):
        rep = InequalityReport("x", [0.5, 2.0, 1.0], {})
        assert rep.max_ratio == rep.empirical_constant == 2.0
        assert rep.median_ratio == 1.0
        assert rep.as_dict()["ratios"] == [0.5, 2.0, 1.0]

    @pytest.mark.parametrize("bad", [[np.nan], [-1.0], [np.inf]])
    def test_invariants(self, bad):
        with pytest.raises(ValueError):
            InequalityReport("x", bad, {})


class TestDecay:
    def test_unitarity(self):
        rep = check_decay_embedding(SMALL, 2, 0, 4, 2, refine=False)
        assert np.all(np.abs(rep.extras["pointwise_max"] - 1) <= 1e-10)
        assert np.all(np.abs(rep.extras["pointwise_min"] - 1) <= 1e-10)

    def test_constant_closed_form(self):
        p, s, q, r, W = F(7, 4), F(1, 10), 4, 3, 0.5
        rep = check_decay_embedding(constant_spec(), p, s, q, r, window=W, refine=False)
        pf = float(p)
        integrated = L ** (1 / r - 1 / pf) * W ** (1 / q)
        np.testing.assert_allclose(rep.ratios, integrated, rtol=1e-12)
        pointwise = L ** (1 / r - 1 / pf) * (4 * np.pi * W) ** (1 / pf - 0.5)
        np.testing.assert_allclose(rep.extras["pointwise_max"], pointwise, rtol=1e-12)

    def test_rejects_out_of_hypothesis(self):
        with pytest.raises(ValidationError):
            check_decay_embedding(SMALL, F(7, 4), 0, 4, 8)

    def test_drift_small(self):
        rep = check_decay_embedding(SMALL, F(7, 4), 0.1, 4, 3)
        assert rep.refinement_drift <= 0.05


class TestHomogeneous:
    def test_degenerate_unitarity_needs_override(self):
        with pytest.raises(ValidationError):
            check_homogeneous_strichartz(SMALL, 2, math.inf, 2)
        rep = check_homogeneous_strichartz(SMALL, 2, math.inf, 2, enforce=False, refine=False)
        assert not rep.in_hypothesis
        np.testing.assert_allclose(rep.ratios, 1.0, atol=1e-12)

    def test_invalid_pair(self):
        with pytest.raises(ValidationError):
            check_homogeneous_strichartz(SMALL, 2, 2, math.inf)

    def test_window_recorded(self):
        rep = check_homogeneous_strichartz(SMALL, 2, 16, F(8, 3), window=0.5, refine=False)
        assert rep.params["window"] == [-0.5, 0.5]
        assert np.isfinite(rep.max_ratio)


class TestFeffermanStein:
    def test_constant_closed_form(self):
        W, p, q, r = 1.0, 2, 6, 6
        rep = check_fefferman_stein(constant_spec(), p, q, r, window=W, refine=False)
        fields = draw_fields(constant_spec())[:, 0, 0]
        dual = 2.0
        lhs = np.abs(fields) * L ** (1 / r) * (2 * W) ** (1 / q)
        rhs = np.abs(fields) * L / np.sqrt(2 * np.pi) * (2 * np.pi / L) ** (1 / dual)
        np.testing.assert_allclose(rep.ratios, lhs / rhs, rtol=1e-12)

    def test_rejects_boundary_pair(self):
        with pytest.raises(ValidationError):
            check_fefferman_stein(SMALL, 2, 4, math.inf)


class TestInhomogeneous:
    def test_constant_against_quad(self):
        # F(tau) = sum_m (tau/W)^m g_m with constant g_m: D(t) = int_0^t F
        W = 1.0
        t = main_exponents(2, F(1, 4))
        spec = constant_spec(2)
        rep = check_inhomogeneous_strichartz(spec, t, window=W, refine=False)
        q, r, gam, rho = (float(x) for x in (t.q, t.r, t.gamma, t.rho))
        for g, got in zip(draw_fields(spec, per_sample=3)[:, :, 0], rep.ratios):
            Ff = lambda s: abs(sum(c * (s / W) ** m for m, c in enumerate(g)))  # noqa: E731
            Df = lambda s: abs(sum(c * W * (s / W) ** (m + 1) / (m + 1) for m, c in enumerate(g)))  # noqa: E731
            lhs = L ** (1 / r) * quad(lambda s: Df(s) ** q, 0, W, epsabs=0, epsrel=1e-13)[0] ** (1 / q)
            rhs = L ** (1 / rho) * quad(lambda s: Ff(s) ** gam, 0, W, epsabs=0, epsrel=1e-13)[0] ** (1 / gam)
            # composite Simpson on 65 nodes of |F|^gamma, |D|^q
            assert got == pytest.approx(lhs / rhs, rel=5e-5)

    def test_rejects_invalid(self):
        from twistnls.exponents import ExponentTuple
        bad = ExponentTuple(p=F(2), s=F(0), inv_q=F(1, 2), inv_r=F(1, 2), inv_gamma=F(1), inv_rho=F(1))
        with pytest.raises(ValidationError):
            check_inhomogeneous_strichartz(SMALL, bad)


class TestDuhamelWeighted:
    @pytest.mark.parametrize("p,s", [(2, F(1, 4)), (F(7, 4), F(1, 5))])
    def test_constant_against_quad(self, p, s):
        W = 1.0
        t = main_exponents(p, s)
        spec = constant_spec(2)
        rep = check_duhamel_weighted(spec, t, window=W, refine=False)
        pf, sig, rho = (float(x) for x in (t.p, t.sigma, t.rho))
        nodes = np.linspace(0, W, 65)
        for g, got in zip(draw_fields(spec, per_sample=3)[:, :, 0], rep.ratios):
            Ff = lambda s: abs(sum(c * (s / W) ** m for m, c in enumerate(g)))  # noqa: E731
            D = np.abs([sum(c * W * (s / W) ** (m + 1) / (m + 1) for m, c in enumerate(g)) for s in nodes])
            lhs = L ** (1 / pf) * D.max()
            integrand = lambda s: (s ** (1 / pf - 0.5) * Ff(s)) ** sig  # noqa: E731
            rhs = L ** (1 / rho) * quad(integrand, 0, W, epsabs=0, epsrel=1e-13)[0] ** (1 / sig)
            # the weight tau^(1/p - 1/2) is not smooth at 0 when p < 2
            assert got == pytest.approx(lhs / rhs, rel=1e-9 if p == 2 else 1e-5)

    def test_needs_sigma(self):
        tup = uniqueness_tuple(2, F(1, 5))[1]
        with pytest.raises(ValueError):
            check_duhamel_weighted(SMALL, tup)


class TestTrilinear:
    def test_zero_triple(self):
        g = Grid(32, L)
        cfg = SolverConfig(p=2, s=0.25, grid=g)
        mesh = cfg.mesh(1.0)
        z = SpaceTimeField(mesh, g, np.zeros((len(mesh), 32)))
        assert trilinear_ratios(z, z, z, cfg) == (0.0, 0.0)

    def test_single_mode_triple(self):
        g = Grid(64, 2 * np.pi)
        cfg = SolverConfig(p=2, s=0.25, grid=g, time_nodes_per_interval=513)
        T = 0.5
        mesh = cfg.mesh(T)
        ks, amps = (1, 2, -1), (1.0, 0.5j, 2.0)
        us = [SpaceTimeField.free_evolution(g.mode(k, a), mesh) for k, a in zip(ks, amps)]
        got, _ = trilinear_ratios(*us, cfg)
        # product: mode k = k1 + k2 - k3, frequency w = k1^2 + k2^2 - k3^2
        k, w = 4, 1 + 4 - 1
        amp = abs(amps[0] * amps[1] * np.conj(amps[2]))

        def D(t):
            re = quad(lambda s: np.cos(-(t - s) * k * k - w * s), 0, t, epsabs=1e-14)[0]
            im = quad(lambda s: np.sin(-(t - s) * k * k - w * s), 0, t, epsabs=1e-14)[0]
            return abs(re + 1j * im)

        q, r, s = cfg.q, cfg.r, 0.25
        Lp = 2 * np.pi
        time_part = quad(lambda t: D(t) ** q, 0, T, epsabs=0, epsrel=1e-12, limit=200)[0] ** (1 / q)
        lhs = amp * (1 + k * k) ** (s / 2) * Lp ** (1 / r) * time_part
        rhs = np.prod([abs(a) * (1 + kk * kk) ** (s / 2) * Lp ** (1 / r) * T ** (1 / q) for kk, a in zip(ks, amps)])
        assert got == pytest.approx(lhs / rhs, rel=1e-6)

    def test_resolution_guard(self):
        spec = SampleSpec(count=2, band_limit=12, grid=Grid(128, L))
        with pytest.raises(ValueError, match="Nyquist"):
            check_trilinear(spec, 2, 0.25)

    def test_slope_quick(self):
        spec = SampleSpec(seed=3, count=3, band_limit=32, grid=Grid(1024, 16 * np.pi))
        rep = check_trilinear(spec, 2, 0.25, T_list=[1.0, 0.5, 0.25], time_nodes=17)
        assert rep.extras["expected_slope"] == pytest.approx(0.75)
        assert abs(rep.extras["slope"] - 0.75) <= 0.1
        assert abs(rep.extras["slope_twisted"] - 0.75) <= 0.1


class TestLeibniz:
    def test_holder_case(self):
        rep = check_fractional_leibniz(SMALL, 0, F(8, 3), F(8, 5), refine=False)
        assert rep.max_ratio <= 1 + 1e-12

    def test_constants_exact(self):
        # constant fields: both bound terms equal the left side
        rep = check_fractional_leibniz(constant_spec(), F(1, 4), F(8, 3), F(8, 5), refine=False)
        np.testing.assert_allclose(rep.ratios, 0.5, rtol=1e-12)

    def test_single_modes_exact(self):
        # modes k1, k2, k3 on [0, L): all norms closed form
        g = Grid(64, 2 * np.pi)
        from twistnls.norms import lp_norm, sobolev_norm
        s, r, rho = 0.25, 8 / 3, 8 / 5
        kappa = 1 / (1 / rho - 1 / r)
        e = 1 / (1 / rho - 1 / (2 * kappa))
        u1, u2, u3 = g.mode(3), g.mode(2), g.mode(-1)
        pair = u2 * u3.conj()
        Lp = 2 * np.pi
        assert sobolev_norm(u1 * pair, s, rho) == pytest.approx(37 ** (s / 2) * Lp ** (1 / rho))
        assert sobolev_norm(pair, s, e) == pytest.approx(10 ** (s / 2) * Lp ** (1 / e))
        assert lp_norm(pair, kappa) == pytest.approx(Lp ** (1 / kappa))

    def test_finite_at_quarter(self):
        rep = check_fractional_leibniz(SMALL, F(1, 4), F(8, 3), F(8, 5))
        assert np.isfinite(rep.max_ratio) and rep.refinement_drift <= 0.05

    def test_rejects_bad_exponents(self):
        with pytest.raises(ValidationError):
            check_fractional_leibniz(SMALL, 0.25, 2, 3)


def test_workers_do_not_change_results():
    a = check_decay_embedding(SMALL, F(7, 4), 0.1, 4, 3, refine=False)
    b = check_decay_embedding(SMALL, F(7, 4), 0.1, 4, 3, refine=False, workers=3)
    assert np.array_equal(a.ratios, b.ratios)


def test_refine_field_is_interpolant():
    g = Grid(128, L)
    f = SpatialField.from_function(g, lambda x: np.exp(-x**2))
    fine = refine_field(f)
    np.testing.assert_allclose(fine.values[::2], f.values, atol=1e-14)
    np.testing.assert_allclose(fine.values, np.exp(-fine.grid.x**2), atol=1e-12)


class TestUniqueness:
    @pytest.mark.parametrize("p,s,case", [(2, F(1, 5), 2), (F(3, 2), F(1, 20), 1), (F(7, 5), F(1, 20), 1)])
    def test_case_selection(self, p, s, case):
        assert uniqueness_tuple(p, s)[0] == case

    @pytest.mark.parametrize("p,s", [(F(4, 3), 0.1), (2, F(1, 7)), (2, F(1, 2)), (F(5, 2), 0.1)])
    def test_rejects(self, p, s):
        with pytest.raises(ValidationError):
            uniqueness_tuple(p, s)

    @staticmethod
    @pytest.fixture(scope="class")
    def report():
        g = Grid(256, 32 * np.pi)
        exact = lambda t, x: np.sqrt(2) / np.cosh(x) * np.exp(1j * t)  # noqa: E731
        return uniqueness_experiment(soliton(g), 2, F(1, 5), 0.05, exact=exact)

    def test_distances_within_error_estimates(self, report):
        est = {k: v["strichartz"] for k, v in report.error_estimates.items()}
        for pair, d in report.distances.items():
            a, b = pair.split("-")
            assert d["strichartz"] <= est[a] + est[b]

    def test_T0_formula(self, report):
        p = float(report.p)
        assert report.T0 > 0 and np.isfinite(report.T0)
        lhs = 3 * report.constant * report.T0 ** (1 - 1 / p) * report.eta**2
        assert lhs == pytest.approx(0.5, rel=1e-12)

    def test_eta_attached(self, report):
        assert report.solutions["picard"].eta == report.eta

    def test_rerun_identical(self, report):
        g = Grid(256, 32 * np.pi)
        exact = lambda t, x: np.sqrt(2) / np.cosh(x) * np.exp(1j * t)  # noqa: E731
        again = uniqueness_experiment(soliton(g), 2, F(1, 5), 0.05, exact=exact)
        assert again.as_dict() == report.as_dict()
        assert np.array_equal(again.solutions["picard"].field.values,
                              report.solutions["picard"].field.values)
