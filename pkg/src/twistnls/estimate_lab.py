"""
Empirical checks of the estimates behind the local theory.

Each ``check_*`` function draws a seeded ensemble, evaluates the ratio of
the two sides of one inequality per sample and returns an
:class:`InequalityReport`.  Checks refuse tuples that fail the matching
validator in :mod:`twistnls.exponents` unless ``enforce=False`` is passed
explicitly, in which case the report is marked out of hypothesis.

The ``refinement_drift`` of a report is the relative change of the maximal
ratio when the grid and the time mesh are both doubled.  Global-in-time
estimates are truncated to the window ``[-window, window]``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
import math

import numpy as np
from scipy.special import roots_legendre

from .errors import SolverError, ValidationError
from .exponents import (
    feasible_delta_range,
    format_exponent,
    main_exponents,
    threshold_sc,
    to_fraction,
    uniqueness_exponents_case1,
    uniqueness_exponents_case2,
    validate_decay_embedding,
    validate_duhamel_weighted,
    validate_fefferman_stein,
    validate_homogeneous_strichartz,
    validate_inhomogeneous_strichartz,
)
from .norms import (
    SpaceTimeField,
    TimeMesh,
    _lp_rows,
    lp_norm,
    sobolev_norm,
    spatial_norms,
    time_norm,
    twisted_sup_norm,
    twisted_values,
)
from .picard_solver import (
    SolverConfig,
    continue_solution,
    duhamel_field,
    picard_solve,
    splitstep_reference,
    trilinear_ratios,
)
from .spectral_core import Grid, SpatialField, apply_multiplier, bessel_symbol

__all__ = [
    "SampleSpec",
    "InequalityReport",
    "UniquenessReport",
    "draw_fields",
    "check_decay_embedding",
    "check_homogeneous_strichartz",
    "check_fefferman_stein",
    "check_inhomogeneous_strichartz",
    "check_duhamel_weighted",
    "check_trilinear",
    "check_fractional_leibniz",
    "uniqueness_experiment",
    "refine_field",
]

DECAY_EXPONENTS = (0.6, 1.1, 2.1)


@dataclass(frozen=True)
class SampleSpec:
    """Seeded ensemble of band-limited random fields.

    Sample ``n`` has Fourier coefficients ``c_k ~ CN(0, 1) (1 + |k|)^(-alpha)``
    on the modes ``|k| <= band_limit``; the draws do not depend on the grid
    size, so the same ensemble can be evaluated on refined grids.
    """

    seed: int = 0
    count: int = 100
    band_limit: int = 12
    spectral_decay: float = 1.1
    grid: Grid = field(default_factory=lambda: Grid(128, 8 * np.pi))

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not 0 <= self.band_limit < self.grid.n_points / 3:
            raise ValueError(
                f"band_limit {self.band_limit} must be below n_points/3 = {self.grid.n_points / 3:.1f}"
            )
        if self.spectral_decay < 0:
            raise ValueError("spectral_decay must be >= 0")

    def refined(self):
        return replace(self, grid=self.grid.refined(2))

    def as_dict(self):
        return {
            "seed": self.seed,
            "count": self.count,
            "band_limit": self.band_limit,
            "spectral_decay": self.spectral_decay,
            "n_points": self.grid.n_points,
            "length": self.grid.length,
        }


def draw_fields(spec, per_sample=1):
    """Physical values, shape ``(count, per_sample, n_points)``."""
    rng = np.random.default_rng(spec.seed)
    K = spec.band_limit
    modes = np.arange(-K, K + 1)
    weight = (1.0 + np.abs(modes)) ** (-spec.spectral_decay)
    shape = (spec.count, per_sample, modes.size)
    c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2) * weight
    x = spec.grid.x
    basis = np.exp(1j * spec.grid.dxi * np.outer(modes, x))
    return c @ basis


@dataclass
class InequalityReport:
    name: str
    ratios: np.ndarray
    params: dict
    refinement_drift: float = None
    in_hypothesis: bool = True
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ratios = np.asarray(self.ratios, dtype=float)
        if not np.all(np.isfinite(self.ratios)) or np.any(self.ratios < 0):
            raise ValueError(f"{self.name}: ratios must be finite and nonnegative")

    @property
    def max_ratio(self):
        return float(self.ratios.max())

    @property
    def median_ratio(self):
        return float(np.median(self.ratios))

    @property
    def empirical_constant(self):
        return self.max_ratio

    def as_dict(self, include_samples=True):
        out = {
            "name": self.name,
            "params": self.params,
            "in_hypothesis": self.in_hypothesis,
            "max_ratio": self.max_ratio,
            "median_ratio": self.median_ratio,
            "empirical_constant": self.empirical_constant,
            "refinement_drift": self.refinement_drift,
            "quantiles": {
                str(q): float(np.quantile(self.ratios, q)) for q in (0.05, 0.25, 0.5, 0.75, 0.95)
            },
            "extras": _plain(self.extras),
        }
        if include_samples:
            out["ratios"] = [float(r) for r in self.ratios]
        return out


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def _ratio(num, den):
    if den == 0:
        if num == 0:
            return 0.0
        raise ZeroDivisionError("nonzero left side over a zero envelope")
    return num / den


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _gate(report, enforce, what):
    if report.overall:
        return True
    if enforce:
        raise ValidationError(f"{what} refused: {report.summary()}", report)
    return False


def _drift(coarse, fine):
    return abs(fine - coarse) / coarse if coarse else abs(fine - coarse)


def _exp(x):
    return format_exponent(x)


# -- decay embedding ----------------------------------------------------------


def _decay_core(spec, p, s, q, r, window, time_nodes, workers):
    fields = draw_fields(spec)[:, 0]
    mesh = TimeMesh.uniform(window, time_nodes)
    t = mesh.nodes[1:]
    gap = float(1 / to_fraction(p) - Fraction(1, 2))
    envelope = (4 * np.pi * t) ** (-gap)
    pf, sf, qf, rf = float(p), float(s), float(q), float(r)

    def one(values):
        f = SpatialField(spec.grid, values)
        u = SpaceTimeField.free_evolution(f, mesh)
        lhs_t = spatial_norms(u, rf)
        twisted = _lp_rows(apply_multiplier(twisted_values(u), bessel_symbol(spec.grid, sf)), pf, spec.grid.dx)
        rhs = float(twisted.max())
        pointwise = lhs_t[1:] / (envelope * twisted[1:])
        return _ratio(time_norm(lhs_t, mesh, qf), rhs), pointwise.max(), pointwise.min()

    res = np.array(_map(one, fields, workers))
    return res[:, 0], res[:, 1], res[:, 2]


def check_decay_embedding(spec, p, s, q, r, window=1.0, time_nodes=65, refine=True, workers=1):
    """Twisted-norm embedding ``||u||_{L^q(I; L^r)} <= C ||u||_{twisted L^inf(I; H^s_p)}``.

    Samples are free solutions ``u(t) = exp(i t d_xx) f`` on ``I = [0, window]``.
    Besides the integrated ratio, each sample records the pointwise ratio
    ``||u(t)||_{L^r} / ((4 pi t)^(-(1/p - 1/2)) ||twist u(t)||_{H^s_p})`` for
    ``t > 0`` (``extras['pointwise_max']`` / ``['pointwise_min']``).
    """
    _gate(validate_decay_embedding(p, s, q, r), True, "decay embedding")
    ratios, pmax, pmin = _decay_core(spec, p, s, q, r, window, time_nodes, workers)
    drift = None
    if refine:
        fine, _, _ = _decay_core(spec.refined(), p, s, q, r, window, 2 * time_nodes - 1, workers)
        drift = _drift(ratios.max(), fine.max())
    params = {"p": _exp(p), "s": _exp(s), "q": _exp(q), "r": _exp(r), "window": [0.0, window],
              "time_nodes": time_nodes, "sample": spec.as_dict()}
    return InequalityReport(
        "decay_embedding", ratios, params, drift,
        extras={"pointwise_max": pmax, "pointwise_min": pmin},
    )


# -- homogeneous / Fefferman-Stein ------------------------------------------------


def _free_window_norms(spec, q, r, window, time_nodes, rhs, workers):
    fields = draw_fields(spec)[:, 0]
    mesh = TimeMesh.uniform(2 * window, time_nodes, start=-window)
    qf, rf = float(q), float(r)

    def one(values):
        f = SpatialField(spec.grid, values)
        u = SpaceTimeField.free_evolution(f, mesh)
        return _ratio(time_norm(spatial_norms(u, rf), mesh, qf), rhs(f))

    return np.array(_map(one, fields, workers))


def _window_check(name, spec, p, q, r, window, time_nodes, refine, workers, rhs, in_hyp):
    ratios = _free_window_norms(spec, q, r, window, time_nodes, rhs, workers)
    drift = None
    if refine:
        fine = _free_window_norms(spec.refined(), q, r, window, 2 * time_nodes - 1, rhs, workers)
        drift = _drift(ratios.max(), fine.max())
    params = {"p": _exp(p), "q": _exp(q), "r": _exp(r), "window": [-window, window],
              "time_nodes": time_nodes, "sample": spec.as_dict()}
    return InequalityReport(name, ratios, params, drift, in_hypothesis=in_hyp)


def check_homogeneous_strichartz(spec, p, q, r, window=1.0, time_nodes=129, refine=True,
                                 workers=1, enforce=True):
    """``||exp(i t d_xx) phi||_{L^q([-W, W]; L^r)} / ||phi||_{L^p}`` over the ensemble."""
    ok = _gate(validate_homogeneous_strichartz(p, q, r), enforce, "homogeneous Strichartz")
    pf = float(p)
    return _window_check("homogeneous_strichartz", spec, p, q, r, window, time_nodes, refine,
                         workers, lambda f: lp_norm(f, pf), ok)


def fourier_lp_norm(f, exponent):
    """``||f_hat||_{L^exponent}`` of the unitary Fourier transform, rectangle rule in ``xi``."""
    return float(_lp_rows(f.spectrum, float(exponent), f.grid.dxi))


def check_fefferman_stein(spec, p, q, r, window=1.0, time_nodes=129, refine=True, workers=1,
                          enforce=True):
    """``||exp(i t d_xx) phi||_{L^q([-W, W]; L^r)} / ||phi_hat||_{L^{p'}}``."""
    ok = _gate(validate_fefferman_stein(p, q, r), enforce, "Fefferman-Stein")
    pf = float(p)
    dual = math.inf if pf == 1 else pf / (pf - 1)
    return _window_check("fefferman_stein", spec, p, q, r, window, time_nodes, refine, workers,
                         lambda f: fourier_lp_norm(f, dual), ok)


# -- Duhamel-type checks ---------------------------------------------------------


def _forcing(spec, window):
    """Per sample, three fields ``g_m``: ``F(tau) = sum_m (tau / window)^m g_m``."""
    return draw_fields(spec, per_sample=3)


def _forcing_at(g, tau, window):
    powers = (np.asarray(tau)[:, None] / window) ** np.arange(g.shape[0])
    return powers @ g


def _inhomogeneous_core(spec, t, window, time_nodes, workers):
    gs = _forcing(spec, window)
    mesh = TimeMesh.uniform(window, time_nodes)
    q, r, gam, rho = (float(x) for x in (t.q, t.r, t.gamma, t.rho))

    def one(g):
        F = SpaceTimeField(mesh, spec.grid, _forcing_at(g, mesh.nodes, window))
        D = duhamel_field(F)
        lhs = time_norm(spatial_norms(D, r), mesh, q)
        rhs = time_norm(spatial_norms(F, rho), mesh, gam)
        return _ratio(lhs, rhs)

    return np.array(_map(one, gs, workers))


def check_inhomogeneous_strichartz(spec, tuple_, window=1.0, time_nodes=65, refine=True,
                                   workers=1, enforce=True):
    """``||int_0^t exp(i(t-tau) d_xx) F||_{L^q L^r} / ||F||_{L^gamma L^rho}`` on ``[0, window]``.

    Forcings are random quadratic-in-time combinations of ensemble fields.
    """
    t = tuple_
    ok = _gate(validate_inhomogeneous_strichartz(t.q, t.r, t.gamma, t.rho), enforce,
               "inhomogeneous Strichartz")
    ratios = _inhomogeneous_core(spec, t, window, time_nodes, workers)
    drift = None
    if refine:
        fine = _inhomogeneous_core(spec.refined(), t, window, 2 * time_nodes - 1, workers)
        drift = _drift(ratios.max(), fine.max())
    params = {"tuple": t.as_dict(), "window": [0.0, window], "time_nodes": time_nodes,
              "sample": spec.as_dict()}
    return InequalityReport("inhomogeneous_strichartz", ratios, params, drift, in_hypothesis=ok)


def _gauss_panels(window, panels, order=8):
    x, w = roots_legendre(order)
    edges = np.linspace(0.0, window, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    tau = (mid[:, None] + half[:, None] * x).ravel()
    wts = (half[:, None] * w).ravel()
    return tau, wts


def _weighted_core(spec, t, window, time_nodes, workers):
    gs = _forcing(spec, window)
    mesh = TimeMesh.uniform(window, time_nodes)
    tau, wts = _gauss_panels(window, time_nodes - 1)
    p, s, sigma, rho = (float(x) for x in (t.p, t.s, t.sigma, t.rho))
    weight = tau ** (1 / p - 0.5)
    bessel = bessel_symbol(spec.grid, s)

    def one(g):
        F = SpaceTimeField(mesh, spec.grid, _forcing_at(g, mesh.nodes, window))
        lhs = twisted_sup_norm(duhamel_field(F), s, p)
        Fg = apply_multiplier(_forcing_at(g, tau, window), bessel)
        vals = weight * _lp_rows(Fg, rho, spec.grid.dx)
        m = vals.max()
        rhs = m * np.dot(wts, (vals / m) ** sigma) ** (1 / sigma) if m > 0 else 0.0
        return _ratio(lhs, rhs)

    return np.array(_map(one, gs, workers))


def check_duhamel_weighted(spec, tuple_, window=1.0, time_nodes=65, refine=True, workers=1,
                           enforce=True):
    """Weighted Duhamel estimate into the twisted sup norm.

    Left side: twisted ``L^inf_t H^s_p`` norm of the Duhamel integral at the
    mesh nodes.  Right side: ``||tau^(1/p-1/2) F||_{L^sigma H^s_rho}``,
    integrated with composite Gauss-Legendre (no node at ``tau = 0``).
    """
    t = tuple_
    if t.sigma is None:
        raise ValueError("tuple carries no sigma exponent; use main_exponents")
    ok = _gate(validate_duhamel_weighted(t.p, t.sigma, t.rho), enforce, "weighted Duhamel")
    ratios = _weighted_core(spec, t, window, time_nodes, workers)
    drift = None
    if refine:
        fine = _weighted_core(spec.refined(), t, window, 2 * time_nodes - 1, workers)
        drift = _drift(ratios.max(), fine.max())
    params = {"tuple": t.as_dict(), "window": [0.0, window], "time_nodes": time_nodes,
              "sample": spec.as_dict()}
    return InequalityReport("duhamel_weighted", ratios, params, drift, in_hypothesis=ok)


# -- trilinear -----------------------------------------------------------------


_MIN_WIDTH = 0.7


def _scaled_profiles(spec, n_modes=5):
    """Gaussian-windowed random wave packets, evaluated later at ``x / sqrt(T)``."""
    rng = np.random.default_rng(spec.seed)
    band = spec.band_limit * spec.grid.dxi
    out = []
    for _ in range(spec.count):
        triple = []
        for _ in range(3):
            triple.append(dict(
                xi=rng.uniform(-band, band, n_modes),
                c=rng.standard_normal(n_modes) + 1j * rng.standard_normal(n_modes),
                centre=rng.uniform(-1.0, 1.0),
                width=rng.uniform(_MIN_WIDTH, 1.3),
            ))
        out.append(triple)
    return out


def _eval_profile(prof, y):
    env = np.exp(-0.5 * ((y - prof["centre"]) / prof["width"]) ** 2)
    return env * (np.exp(1j * np.outer(y, prof["xi"])) @ prof["c"])


def _trilinear_core(spec, p, s, T_list, time_nodes, workers):
    cfg = SolverConfig(p=p, s=s, grid=spec.grid, time_nodes_per_interval=time_nodes)
    power = cfg.time_power
    profiles = _scaled_profiles(spec)
    x = spec.grid.x
    raw = np.zeros((len(T_list), spec.count, 2))
    for i, T in enumerate(T_list):
        mesh = cfg.mesh(T)

        def one(triple, T=T, mesh=mesh):
            us = [
                SpaceTimeField.free_evolution(SpatialField(spec.grid, _eval_profile(pr, x / np.sqrt(T))), mesh)
                for pr in triple
            ]
            return trilinear_ratios(*us, cfg)

        raw[i] = np.array(_map(one, profiles, workers))
    scaled = raw / np.asarray(T_list)[:, None, None] ** power
    return raw, scaled, power


def check_trilinear(spec, p, s, T_list=None, time_nodes=33, refine=False, workers=1):
    """Time scaling of the trilinear Duhamel estimates.

    For every ``T`` the random triples are parabolically rescaled copies
    ``u_j(t, x) = U_j(t / T, x / sqrt(T))`` of one fixed family of free wave
    packets, so each ``T`` probes the same profiles at the matching scale.
    The slope of ``log max_ratio`` against ``log T`` is fitted for both the
    ``L^q H^s_r`` estimate (``extras['slope']``) and the twisted
    ``H^s_p`` one (``extras['slope_twisted']``); the expected value is
    ``1 + s - 1/p``.  ``ratios`` hold the constants with ``T^(1+s-1/p)``
    divided out.
    """
    main_exponents(p, s)
    if T_list is None:
        T_list = [2.0**-k for k in range(7)]
    T_list = sorted(float(T) for T in T_list)
    # carrier band plus four envelope standard deviations, at the finest scale
    k_max = (spec.band_limit * spec.grid.dxi + 4.0 / _MIN_WIDTH) / math.sqrt(T_list[0])
    nyquist = math.pi / spec.grid.dx
    if k_max > nyquist:
        raise ValueError(
            f"profiles at T={T_list[0]:g} reach |xi| ~ {k_max:.3g}, beyond the grid's "
            f"Nyquist frequency {nyquist:.3g}"
        )
    raw, scaled, power = _trilinear_core(spec, p, s, T_list, time_nodes, workers)
    logT = np.log(T_list)
    maxima = raw.max(axis=1)
    slope = float(np.polyfit(logT, np.log(maxima[:, 0]), 1)[0])
    slope_tw = float(np.polyfit(logT, np.log(maxima[:, 1]), 1)[0])
    drift = None
    if refine:
        _, fine, _ = _trilinear_core(spec.refined(), p, s, T_list, 2 * time_nodes - 1, workers)
        drift = _drift(scaled.max(), fine.max())
    params = {"p": _exp(p), "s": _exp(s), "T_list": T_list, "time_nodes": time_nodes,
              "sample": spec.as_dict()}
    extras = {
        "slope": slope,
        "slope_twisted": slope_tw,
        "expected_slope": power,
        "max_raw_by_T": maxima[:, 0],
        "max_raw_twisted_by_T": maxima[:, 1],
    }
    return InequalityReport("trilinear", scaled.reshape(-1), params, drift, extras=extras)


# -- fractional Leibniz ------------------------------------------------------------


def _leibniz_core(spec, s, r, rho, workers):
    gs = draw_fields(spec, per_sample=3)
    ir, irho = 1 / to_fraction(r), 1 / to_fraction(rho)
    inv_kappa = irho - ir
    inv_second = irho - inv_kappa / 2
    kappa = float(1 / inv_kappa)
    second = float(1 / inv_second)
    s, r, rho = float(s), float(r), float(rho)
    grid = spec.grid

    def one(g):
        u1, u2, u3 = (SpatialField(grid, v) for v in g)
        pair = u2 * u3.conj()
        lhs = sobolev_norm(u1 * pair, s, rho)
        rhs = (sobolev_norm(u1, s, r) * lp_norm(pair, kappa)
               + lp_norm(u1, 2 * kappa) * sobolev_norm(pair, s, second))
        return _ratio(lhs, rhs)

    return np.array(_map(one, gs, workers)), kappa, second


def check_fractional_leibniz(spec, s, r, rho, refine=True, workers=1):
    """Product estimate ``||u1 u2 conj(u3)||_{H^s_rho}`` against the two-term bound.

    The bound is ``||u1||_{H^s_r} ||u2 conj(u3)||_{L^kappa}
    + ||u1||_{L^{2 kappa}} ||u2 conj(u3)||_{H^s_e}`` with
    ``1/kappa = 1/rho - 1/r`` and ``1/e = 1/rho - 1/(2 kappa)``.  At ``s = 0``
    the first term alone is Hoelder's inequality, so ratios never exceed 1.
    """
    ir, irho = 1 / to_fraction(r), 1 / to_fraction(rho)
    if not (0 <= ir < irho <= 1) or to_fraction(s) < 0:
        raise ValidationError(f"need 1 <= rho < r and s >= 0, got s={s}, r={r}, rho={rho}")
    ratios, kappa, second = _leibniz_core(spec, s, r, rho, workers)
    drift = None
    if refine:
        fine, _, _ = _leibniz_core(spec.refined(), s, r, rho, workers)
        drift = _drift(ratios.max(), fine.max())
    params = {"s": _exp(s), "r": _exp(r), "rho": _exp(rho), "kappa": kappa,
              "second_exponent": second, "sample": spec.as_dict()}
    return InequalityReport("fractional_leibniz", ratios, params, drift)


# -- uniqueness ----------------------------------------------------------------


@dataclass
class UniquenessReport:
    p: Fraction
    s: Fraction
    case: int
    tuple: object
    T: float
    distances: dict
    error_estimates: dict
    eta: float
    constant: float
    T0: float
    exact_errors: dict = field(default_factory=dict)
    solutions: dict = field(default_factory=dict, repr=False)

    def as_dict(self):
        return _plain({
            "p": self.p, "s": self.s, "case": self.case, "tuple": self.tuple.as_dict(),
            "T": self.T, "distances": self.distances, "error_estimates": self.error_estimates,
            "eta": self.eta, "constant": self.constant, "T0": self.T0,
            "exact_errors": self.exact_errors,
        })


def refine_field(f, factor=2):
    """Trigonometric interpolant of ``f`` on a ``factor`` times finer grid."""
    g = f.grid
    fine = g.refined(factor)
    fh = np.fft.fft(f.values)
    n, half = g.n_points, g.n_points // 2
    big = np.zeros(fine.n_points, dtype=complex)
    big[:half] = fh[:half]
    big[-half:] = fh[-half:]
    return SpatialField(fine, np.fft.ifft(big) * factor)


def uniqueness_tuple(p, s):
    """Case and difference-estimate tuple used to compare solutions at ``(p, s)``.

    The slack ``delta`` is capped at the midpoint of its feasible range;
    uniqueness in the larger space then covers the requested ``s``.
    """
    p, s = to_fraction(p), to_fraction(s)
    if not (Fraction(4, 3) < p <= 2):
        raise ValidationError(f"unconditional uniqueness needs 4/3 < p <= 2, got p = {p}")
    if not s < Fraction(3, 2) - 2 / p:
        raise ValidationError(f"s = {s} violates s < 3/2 - 2/p")
    sc = threshold_sc(p)
    if not s > sc:
        raise ValidationError(f"s = {s} is not above the threshold s_c(p) = {sc}")
    if p <= Fraction(3, 2):
        rng = feasible_delta_range(p, 1)
        delta = min(s, rng.midpoint())
        return 1, uniqueness_exponents_case1(p, delta)
    rng = feasible_delta_range(p, 2)
    delta = min(s - sc, rng.midpoint())
    return 2, uniqueness_exponents_case2(p, sc + delta)["literal"][0]


def _solve_to(phi, cfg, T):
    cfg = replace(cfg, T_policy="fixed", T_max=T)
    sol = picard_solve(phi, cfg)
    n = int(round(T / sol.trace.chosen_T))
    return continue_solution(sol, phi, n, cfg) if n > 1 else sol


def _time_refined_difference(phi, cfg, T, sol):
    """``u - u'`` at the nodes of ``sol``, ``u'`` solved on a mesh with halved steps."""
    n = cfg.time_nodes_per_interval
    ref = _solve_to(phi, replace(cfg, time_nodes_per_interval=2 * n - 1), T)
    if len(ref.field.mesh) != 2 * len(sol.field.mesh) - 1:
        raise SolverError("time-refined run chose different local intervals", ref)
    return SpaceTimeField(sol.field.mesh, sol.field.grid, sol.field.values - ref.field.values[::2])


def _coarsen(u, grid):
    factor = u.grid.n_points // grid.n_points
    return SpaceTimeField(u.mesh, grid, u.values[:, ::factor])


def uniqueness_experiment(phi, p, s, T, cfg=None, dt_max=2e-4, exact=None,
                          constant_samples=20, constant_seed=7):
    """Three independent solutions from the same data and their mutual distances.

    Solutions: Picard on ``phi.grid``, Strang split-step on the same grid,
    and Picard on the doubled grid (compared at the coarse points).
    Distances use ``L^q([0, T]; L^r)`` with ``(q, r)`` from the uniqueness
    tuple and the twisted ``L^inf H^s_p`` norm.  ``eta`` is the largest
    ``L^q L^r`` norm among the solutions, ``constant`` the measured
    inhomogeneous Strichartz constant of the tuple on ``[0, T]``, and ``T0``
    solves ``3 C T0^(1-1/p) eta^2 = 1/2``.  ``exact(t, x)``, when given, adds
    errors against a closed-form solution.
    """
    case, tup = uniqueness_tuple(p, s)
    pf, sf = float(p), float(s)
    if cfg is None:
        cfg = SolverConfig(p=pf, s=sf, grid=phi.grid)
    cfg = replace(cfg, p=pf, s=sf, grid=phi.grid)
    coarse = _solve_to(phi, cfg, T)
    fine_phi = refine_field(phi)
    fine = _solve_to(fine_phi, replace(cfg, grid=fine_phi.grid), T)
    fine_on_coarse = _coarsen(fine.field, phi.grid)

    mesh = coarse.field.mesh
    h = mesh.nodes[1] - mesh.nodes[0]
    sub = max(1, math.ceil(h / dt_max))
    dt = h / sub
    split = splitstep_reference(phi, mesh.end, dt, save_every=sub)
    split = SpaceTimeField(mesh, phi.grid, split.values)
    split_half = splitstep_reference(phi, mesh.end, dt / 2, save_every=2 * sub)
    split_half = SpaceTimeField(mesh, phi.grid, split_half.values)

    q, r = float(tup.q), float(tup.r)

    def strichartz(u):
        return time_norm(spatial_norms(u, r), mesh, q)

    def both(a, b):
        w = a - b
        return {"strichartz": strichartz(w), "twisted": twisted_sup_norm(w, sf, pf)}

    sols = {"picard": coarse.field, "splitstep": split, "picard_fine": fine_on_coarse}
    distances = {
        "picard-splitstep": both(sols["picard"], sols["splitstep"]),
        "picard-picard_fine": both(sols["picard"], sols["picard_fine"]),
        "splitstep-picard_fine": both(sols["splitstep"], sols["picard_fine"]),
    }
    # Spatial error of the coarse grid, shared by both coarse-grid methods, is
    # measured against the doubled grid.  Picard adds its time-refinement
    # difference and residual; Strang adds Richardson, |u_dt - u_{dt/2}| * 4/3.
    spatial = distances["picard-picard_fine"]["strichartz"]
    coarse_t = _time_refined_difference(phi, cfg, T, coarse)
    fine_t = _time_refined_difference(fine_phi, replace(cfg, grid=fine_phi.grid), T, fine)
    estimates = {
        "picard": {"strichartz": spatial + strichartz(coarse_t) + coarse.residual},
        "picard_fine": {"strichartz": strichartz(_coarsen(fine_t, phi.grid)) + fine.residual},
        "splitstep": {"strichartz": spatial + strichartz(split - split_half) * 4 / 3},
    }
    eta = max(strichartz(u) for u in sols.values())
    coarse.eta = fine.eta = eta
    spec = SampleSpec(seed=constant_seed, count=constant_samples,
                      band_limit=min(16, phi.grid.n_points // 4 - 1), grid=phi.grid)
    C = check_inhomogeneous_strichartz(spec, tup, window=mesh.end,
                                       time_nodes=cfg.time_nodes_per_interval, refine=False).max_ratio
    T0 = (1.0 / (6.0 * C * eta**2)) ** (pf / (pf - 1))
    exact_errors = {}
    if exact is not None:
        ref = exact(mesh.nodes[:, None], phi.grid.x[None, :])
        for name, u in sols.items():
            w = SpaceTimeField(mesh, phi.grid, u.values - ref)
            exact_errors[name] = {"strichartz": strichartz(w), "sup": float(np.max(np.abs(w.values)))}
    return UniquenessReport(
        p=to_fraction(p), s=to_fraction(s), case=case, tuple=tup, T=float(mesh.end),
        distances=distances, error_estimates=estimates, eta=eta, constant=C, T0=T0,
        exact_errors=exact_errors, solutions={"picard": coarse, "picard_fine": fine, "splitstep": split},
    )
