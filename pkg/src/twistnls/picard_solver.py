"""
Local solutions of ``i u_t + u_xx + |u|^2 u = 0`` by Picard iteration.

The iteration acts on whole space-time fields: with ``u_0`` the free
evolution of the data, ``u_{k+1} = S u_k`` where

    S u (t) = exp(i t d_xx) phi + i * int_0^t exp(i (t - tau) d_xx) |u|^2 u (tau) dtau.

Distances are measured in the metric

    d(u, v) = ||u - v||_{twisted L^inf_t H^s_p} + ||u - v||_{L^q_t H^s_r}

with ``(q, r)`` from :func:`twistnls.exponents.main_exponents`.  The local
time is chosen from the scaling law ``T^(1+s-1/p) ~ ||phi||^-2`` with an
empirically measured constant and then halved until the measured
contraction ratio is below the target.

:func:`splitstep_reference` is an independent Strang splitting integrator
used as an oracle.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
import logging
import math
from typing import NamedTuple

import numpy as np
from scipy.special import roots_legendre

from .errors import SolverError, ValidationError
from .exponents import main_exponents
from .norms import (
    SpaceTimeField,
    TimeMesh,
    sobolev_norm,
    spatial_norms,
    time_norm,
    twisted_sup_norm,
)
from .spectral_core import Grid, SpatialField, propagator_symbol

__all__ = [
    "SolverConfig",
    "IterationTrace",
    "Solution",
    "LocalTime",
    "duhamel",
    "duhamel_field",
    "cubic_term",
    "triple_product",
    "apply_S",
    "solver_distance",
    "ball_norm",
    "empirical_constant",
    "trilinear_ratios",
    "select_local_time",
    "picard_solve",
    "continue_solution",
    "splitstep_reference",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of a Picard solve.

    ``T_policy='formula'`` starts from the scaling-law time (capped at
    ``T_max``); ``'fixed'`` starts from ``T_max`` itself.  Either way the
    time is halved until the measured contraction ratio is at most
    ``contraction_target``.
    """

    p: float
    s: float
    grid: Grid
    time_nodes_per_interval: int = 17
    quadrature_order: int = 8
    interpolation_points: int = 6
    interpolation_frame: str = "twisted"
    tol: float = 1e-10
    max_iter: int = 30
    contraction_target: float = 0.75
    dealias: bool = True
    T_max: float = 1.0
    T_policy: str = "formula"
    max_halvings: int = 30
    constant_samples: int = 8
    constant_seed: int = 20240607

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.contraction_target < 1:
            raise ValueError("contraction_target must lie in (0, 1)")
        if self.time_nodes_per_interval < 9:
            raise ValueError("need at least 9 time nodes per interval")
        if self.T_policy not in ("formula", "fixed"):
            raise ValueError(f"unknown T policy {self.T_policy!r}")
        if not self.T_max > 0:
            raise ValueError("T_max must be positive")
        if self.interpolation_frame not in ("twisted", "plain"):
            raise ValueError(f"unknown interpolation frame {self.interpolation_frame!r}")
        if not 2 <= self.interpolation_points <= self.time_nodes_per_interval:
            raise ValueError("interpolation_points must lie in [2, time_nodes_per_interval]")

    @cached_property
    def exponents(self):
        return main_exponents(self.p, self.s)

    @property
    def q(self):
        return float(self.exponents.q)

    @property
    def r(self):
        return float(self.exponents.r)

    @property
    def time_power(self):
        """``1 + s - 1/p``, the power of ``T`` in the trilinear estimates."""
        e = self.exponents
        return float(1 + e.s - 1 / e.p)

    def mesh(self, T, start=0.0):
        return TimeMesh.uniform(T, self.time_nodes_per_interval, start=start)


@dataclass
class IterationTrace:
    distances: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    ball_norms: list = field(default_factory=list)
    chosen_T: float = 0.0
    halvings: int = 0
    R: float = 0.0
    constant: float = 0.0

    @property
    def iterations(self):
        return len(self.distances)

    def as_dict(self):
        return {
            "distances": [float(d) for d in self.distances],
            "ratios": [float(r) for r in self.ratios],
            "ball_norms": [float(b) for b in self.ball_norms],
            "chosen_T": float(self.chosen_T),
            "halvings": int(self.halvings),
            "R": float(self.R),
            "constant": float(self.constant),
            "iterations": self.iterations,
        }


@dataclass
class Solution:
    field: SpaceTimeField
    trace: IterationTrace
    residual: float
    eta: float = None
    segments: list = field(default_factory=list)
    junction_jumps: list = field(default_factory=list)

    @property
    def T(self):
        return self.field.mesh.end

    @property
    def final(self):
        return self.field.final


class LocalTime(NamedTuple):
    T: float
    R: float
    halvings: int
    constant: float
    first_ratio: float


# -- Duhamel quadrature -----------------------------------------------------


@lru_cache(maxsize=64)
def _panel_rule(node_key, order, stencil):
    """Gauss-Legendre points, weights and node-to-point interpolation matrix.

    ``node_key`` is the tuple of nodes shifted to start at zero.  On each
    panel ``[t_i, t_{i+1}]`` the integrand is interpolated by the Lagrange
    polynomial through the ``stencil`` nodes closest to the panel.
    """
    t = np.asarray(node_key)
    n_panels = t.size - 1
    x, w = roots_legendre(order)
    pts = np.empty((n_panels, order))
    wts = np.empty((n_panels, order))
    interp = np.zeros((n_panels * order, t.size))
    for i in range(n_panels):
        a, b = t[i], t[i + 1]
        tau = 0.5 * (b - a) * x + 0.5 * (a + b)
        pts[i], wts[i] = tau, 0.5 * (b - a) * w
        first = min(max(i + 1 - stencil // 2, 0), t.size - stencil)
        idx = np.arange(first, first + stencil)
        nodes = t[idx]
        for m, node in enumerate(nodes):
            others = np.delete(nodes, m)
            basis = np.prod((tau[:, None] - others) / (node - others), axis=1)
            interp[i * order:(i + 1) * order, idx[m]] = basis
    for arr in (pts, wts, interp):
        arr.flags.writeable = False
    return pts, wts, interp


def _duhamel_spectral(F_hat, mesh, grid, order, stencil, frame="twisted"):
    """Duhamel integrals at every node, spectral in and out (FFT order)."""
    t = mesh.nodes - mesh.start
    pts, wts, interp = _panel_rule(tuple(t.tolist()), order, min(stencil, t.size))
    if frame == "twisted":
        # interpolate exp(i tau xi^2) F(tau), constant in tau for free waves
        G = np.conj(propagator_symbol(grid, t)) * F_hat
        Gg = (interp @ G).reshape(pts.shape + (grid.n_points,))
    elif frame == "plain":
        Fg = (interp @ F_hat).reshape(pts.shape + (grid.n_points,))
        Gg = np.conj(propagator_symbol(grid, pts)) * Fg
    else:
        raise ValueError(f"unknown interpolation frame {frame!r}")
    # twisted panel sums: sum_g w_g exp(i tau_g xi^2) F(tau_g)
    panels = np.einsum("ig,ign->in", wts, Gg)
    cum = np.zeros((t.size, grid.n_points), dtype=complex)
    np.cumsum(panels, axis=0, out=cum[1:])
    return propagator_symbol(grid, t) * cum


def duhamel_field(F, order=8, stencil=6, frame="twisted"):
    """``D(t_j) = int_{t_0}^{t_j} exp(i (t_j - tau) d_xx) F(tau) dtau`` at all nodes.

    ``F`` is interpolated in time by local Lagrange polynomials through
    ``stencil`` nodes and the integral is evaluated with composite
    Gauss-Legendre of ``order`` points per panel.  With ``frame='twisted'``
    the interpolated quantity is ``exp(-i tau d_xx) F(tau)`` (exact for free
    waves); ``'plain'`` interpolates ``F`` itself.  Linear in ``F``.
    """
    if not np.all(np.isfinite(F.values)):
        raise ValueError("Duhamel integrand contains non-finite samples")
    F_hat = np.fft.fft(F.values, axis=-1)
    D_hat = _duhamel_spectral(F_hat, F.mesh, F.grid, order, stencil, frame)
    return SpaceTimeField(F.mesh, F.grid, np.fft.ifft(D_hat, axis=-1))


def duhamel(F, t, order=8, stencil=6, frame="twisted"):
    """Duhamel integral at the mesh node ``t`` (no extrapolation off the mesh)."""
    j = F.mesh.index_of(t)
    return duhamel_field(F, order, stencil, frame).snapshot(j)


# -- the map S ----------------------------------------------------------------


def _pad(uh, n):
    half = n // 2
    pad = np.zeros(uh.shape[:-1] + (2 * n,), dtype=complex)
    pad[..., :half] = uh[..., :half]
    pad[..., -half:] = uh[..., -half:]
    return np.fft.ifft(pad, axis=-1) * 2


def triple_product(v1, v2, v3, dealias=True):
    """``v1 v2 conj(v3)`` row-wise, optionally free of aliasing.

    With ``dealias`` the product is formed on a grid padded to twice the
    size and projected back, which removes aliasing without discarding any
    resolved mode.
    """
    if not dealias:
        return v1 * v2 * np.conj(v3)
    n = v1.shape[-1]
    half = n // 2
    p1 = _pad(np.fft.fft(v1, axis=-1), n)
    p2 = p1 if v2 is v1 else _pad(np.fft.fft(v2, axis=-1), n)
    p3 = p1 if v3 is v1 else _pad(np.fft.fft(v3, axis=-1), n)
    ch = np.fft.fft(p1 * p2 * np.conj(p3), axis=-1) / 2
    out = np.empty(ch.shape[:-1] + (n,), dtype=complex)
    out[..., :half] = ch[..., :half]
    out[..., -half:] = ch[..., -half:]
    return np.fft.ifft(out, axis=-1)


def cubic_term(values, dealias=True):
    """``|u|^2 u`` row-wise; see :func:`triple_product` for ``dealias``."""
    return triple_product(values, values, values, dealias)


def _apply_S_values(u_values, free_values, mesh, grid, cfg):
    F = SpaceTimeField(mesh, grid, cubic_term(u_values, cfg.dealias))
    D = duhamel_field(F, cfg.quadrature_order, cfg.interpolation_points, cfg.interpolation_frame)
    return free_values + 1j * D.values


def apply_S(u, phi, cfg):
    """One application of the Duhamel map to the space-time field ``u``."""
    if u.grid != phi.grid:
        raise ValueError("iterate and data live on different grids")
    free = SpaceTimeField.free_evolution(phi, u.mesh)
    return SpaceTimeField(u.mesh, u.grid, _apply_S_values(u.values, free.values, u.mesh, u.grid, cfg))


def _mixed(u, cfg):
    return time_norm(spatial_norms(u, cfg.r, cfg.s), u.mesh, cfg.q)


def solver_distance(u, v, cfg):
    """The solver metric ``d(u, v)`` (equal weights on both norms)."""
    w = u - v
    return twisted_sup_norm(w, cfg.s, cfg.p) + _mixed(w, cfg)


def ball_norm(u, cfg):
    """``||u||_{twisted L^inf H^s_p} + ||u||_{L^q H^s_r}``."""
    return twisted_sup_norm(u, cfg.s, cfg.p) + _mixed(u, cfg)


# -- empirical constant -------------------------------------------------------


def _random_profile(grid, rng, band=2.0):
    """Smooth random data: Gaussian-windowed sum of low modes, unit H^0 scale."""
    x = grid.x
    n_modes = 5
    xi = rng.uniform(-band, band, n_modes)
    c = rng.normal(size=n_modes) + 1j * rng.normal(size=n_modes)
    centre = rng.uniform(-2, 2)
    width = rng.uniform(1.0, 3.0)
    env = np.exp(-0.5 * ((x - centre) / width) ** 2)
    return SpatialField(grid, env * (np.exp(1j * np.outer(x, xi)) @ c))


def trilinear_ratios(u1, u2, u3, cfg):
    """Trilinear Duhamel ratios without the time factor.

    Returns ``(strichartz, twisted)`` where each is the Duhamel integral of
    ``u1 u2 conj(u3)`` measured in ``L^q H^s_r`` (resp. the twisted sup
    norm in ``H^s_p``) divided by ``prod ||u_j||_{L^q H^s_r}``.  Zero
    inputs give zero.
    """
    prod = triple_product(u1.values, u2.values, u3.values, cfg.dealias)
    F = SpaceTimeField(u1.mesh, u1.grid, prod)
    D = duhamel_field(F, cfg.quadrature_order, cfg.interpolation_points, cfg.interpolation_frame)
    denom = _mixed(u1, cfg) * _mixed(u2, cfg) * _mixed(u3, cfg)
    if denom == 0:
        return 0.0, 0.0
    return _mixed(D, cfg) / denom, twisted_sup_norm(D, cfg.s, cfg.p) / denom


@lru_cache(maxsize=32)
def _constant_cached(p, s, grid, n_nodes, order, stencil, frame, samples, seed):
    cfg = SolverConfig(
        p=p, s=s, grid=grid, time_nodes_per_interval=n_nodes, quadrature_order=order,
        interpolation_points=stencil, interpolation_frame=frame,
    )
    rng = np.random.default_rng(seed)
    mesh = cfg.mesh(1.0)
    tri = lin = 0.0
    for _ in range(samples):
        fields = []
        for _ in range(3):
            g = _random_profile(grid, rng)
            u = SpaceTimeField.free_evolution(g, mesh)
            lin = max(lin, ball_norm(u, cfg) / _sobolev(g, cfg))
            fields.append(u)
        tri = max(tri, *trilinear_ratios(*fields, cfg))
    return tri, lin


def _sobolev(f, cfg):
    return sobolev_norm(f, cfg.s, cfg.p)


def empirical_constant(cfg):
    """``(C_trilinear, C_linear)`` measured at ``T = 1`` on seeded random data.

    Cached per ``(p, s, grid, time discretization)``.
    """
    return _constant_cached(
        float(cfg.p), float(cfg.s), cfg.grid, cfg.time_nodes_per_interval,
        cfg.quadrature_order, cfg.interpolation_points, cfg.interpolation_frame,
        cfg.constant_samples, cfg.constant_seed,
    )


# -- local time ----------------------------------------------------------------


@dataclass
class _Probe:
    mesh: TimeMesh
    free: np.ndarray
    iterates: list
    distances: list


def _probe(phi, cfg, T):
    mesh = cfg.mesh(T)
    free = SpaceTimeField.free_evolution(phi, mesh)
    u0 = free
    u1 = SpaceTimeField(mesh, phi.grid, _apply_S_values(u0.values, free.values, mesh, phi.grid, cfg))
    u2 = SpaceTimeField(mesh, phi.grid, _apply_S_values(u1.values, free.values, mesh, phi.grid, cfg))
    d0 = solver_distance(u1, u0, cfg)
    d1 = solver_distance(u2, u1, cfg)
    return _Probe(mesh, free.values, [u0, u1, u2], [d0, d1])


def _ratio(a, b):
    if b == 0:
        return 0.0
    return a / b


def _select(phi, cfg):
    norm = sobolev_norm(phi, cfg.s, cfg.p)
    c_tri, c_lin = empirical_constant(cfg)
    # the data's own linear ratio keeps the free evolution inside the R/2 ball
    ref = SpaceTimeField.free_evolution(phi, cfg.mesh(max(1.0, cfg.T_max)))
    C = max(c_tri, c_lin, ball_norm(ref, cfg) / norm)
    R = 2.0 * C * norm
    if cfg.T_policy == "formula":
        T = min(cfg.T_max, (R**-2 / (4.0 * C)) ** (1.0 / cfg.time_power))
    else:
        T = cfg.T_max
    halvings = 0
    while True:
        probe = _probe(phi, cfg, T)
        ratio = _ratio(probe.distances[1], probe.distances[0])
        if not all(math.isfinite(d) for d in probe.distances):
            ratio = math.inf
        if ratio <= cfg.contraction_target:
            return LocalTime(T, R, halvings, C, ratio), probe
        if halvings >= cfg.max_halvings:
            raise SolverError(
                f"no contraction after {halvings} halvings (last ratio {ratio:.3g} at T={T:.3g}); "
                "the empirical constant is unusable at this resolution"
            )
        log.debug("contraction ratio %.3g at T=%.3g, halving", ratio, T)
        T *= 0.5
        halvings += 1


def select_local_time(phi, cfg):
    """Local time and ball radius: ``R = 2 C ||phi||``, ``T`` halved until contracting."""
    main_exponents(cfg.p, cfg.s)
    if not np.any(phi.values):
        raise ValidationError("local time is undefined for zero data")
    lt, _ = _select(phi, cfg)
    return lt


# -- solve ---------------------------------------------------------------------


def _zero_solution(phi, cfg):
    mesh = cfg.mesh(cfg.T_max)
    u = SpaceTimeField(mesh, phi.grid, np.zeros((len(mesh), phi.grid.n_points)))
    trace = IterationTrace(distances=[0.0], chosen_T=cfg.T_max, ball_norms=[0.0])
    return Solution(u, trace, 0.0)


def picard_solve(phi, cfg):
    """Fixed point of the Duhamel map on the contraction interval.

    Raises :class:`ValidationError` outside ``4/3 < p <= 2, 0 < s < 3/2 - 2/p``
    and :class:`SolverError` when the iteration fails to contract or
    produces non-finite values.
    """
    main_exponents(cfg.p, cfg.s)
    if phi.grid != cfg.grid:
        raise ValueError("data grid differs from the configured grid")
    if not np.all(np.isfinite(phi.values)):
        raise ValueError("initial data contains non-finite samples")
    if not np.any(phi.values):
        return _zero_solution(phi, cfg)

    lt, probe = _select(phi, cfg)
    trace = IterationTrace(chosen_T=lt.T, halvings=lt.halvings, R=lt.R, constant=lt.constant)
    mesh, free, grid = probe.mesh, probe.free, phi.grid
    trace.distances.extend(probe.distances)
    trace.ratios.append(lt.first_ratio)
    trace.ball_norms.extend(ball_norm(u, cfg) for u in probe.iterates)
    u = probe.iterates[-1]
    while trace.distances[-1] > cfg.tol:
        if trace.iterations >= cfg.max_iter:
            raise SolverError(
                f"no convergence to tol={cfg.tol:g} in {cfg.max_iter} iterations "
                f"(last distance {trace.distances[-1]:.3g})",
                partial=Solution(u, trace, trace.distances[-1]),
            )
        v = SpaceTimeField(mesh, grid, _apply_S_values(u.values, free, mesh, grid, cfg))
        if not np.all(np.isfinite(v.values)):
            raise SolverError("non-finite Picard iterate", partial=Solution(u, trace, math.nan))
        d = solver_distance(v, u, cfg)
        trace.ratios.append(_ratio(d, trace.distances[-1]))
        trace.distances.append(d)
        trace.ball_norms.append(ball_norm(v, cfg))
        u = v
    Su = SpaceTimeField(mesh, grid, _apply_S_values(u.values, free, mesh, grid, cfg))
    residual = solver_distance(Su, u, cfg)
    return Solution(u, trace, residual)


def _glue(fields):
    nodes = [fields[0].mesh.nodes]
    values = [fields[0].values]
    for f in fields[1:]:
        nodes.append(f.mesh.nodes[1:])
        values.append(f.values[1:])
    return SpaceTimeField(TimeMesh(np.concatenate(nodes)), fields[0].grid, np.concatenate(values))


def continue_solution(sol, phi, n_intervals, cfg):
    """Extend ``sol`` to ``n_intervals`` consecutive intervals of equal length.

    Each restart solves from the terminal snapshot of the previous interval
    with the step fixed to ``sol``'s interval length; a sub-solve that does
    not contract at that step aborts with the glued partial result attached.
    """
    if n_intervals < 1:
        raise ValueError("n_intervals must be >= 1")
    if np.max(np.abs(sol.field.values[0] - phi.values)) > 1e-12 * max(1.0, np.max(np.abs(phi.values))):
        raise ValueError("solution does not start from the given data")
    if n_intervals == 1:
        return sol
    step = sol.field.mesh.length
    sub_cfg = replace(cfg, T_policy="fixed", T_max=step, max_halvings=0)
    pieces, traces = [sol.field], [sol.trace]
    jumps, residual = [], sol.residual
    for n in range(1, n_intervals):
        start = pieces[-1].final
        try:
            sub = picard_solve(start, sub_cfg)
        except SolverError as exc:
            partial = Solution(_glue(pieces), sol.trace, residual, segments=traces)
            raise SolverError(f"sub-solve {n} failed: {exc}", partial=partial) from exc
        shifted = SpaceTimeField(sub.field.mesh.shifted(n * step), sub.field.grid, sub.field.values)
        jumps.append(float(np.max(np.abs(shifted.values[0] - start.values))))
        pieces.append(shifted)
        traces.append(sub.trace)
        residual = max(residual, sub.residual)
    return Solution(_glue(pieces), sol.trace, residual, segments=traces, junction_jumps=jumps)


# -- split-step oracle ---------------------------------------------------------


def splitstep_reference(phi, T, dt, save_every=1, blowup_factor=1e3):
    """Strang splitting: half linear step, exact nonlinear phase, half linear step.

    Returns snapshots every ``save_every`` steps (including ``t = 0``).
    """
    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * T:
        raise ValueError(f"dt={dt} does not divide T={T}")
    if n_steps % save_every:
        raise ValueError("save_every must divide the number of steps")
    grid = phi.grid
    half = np.exp(-0.5j * dt * grid.k2)
    u = np.array(phi.values)
    limit = blowup_factor * max(np.max(np.abs(u)), 1e-300)
    out = [u.copy()]
    for n in range(1, n_steps + 1):
        u = np.fft.ifft(half * np.fft.fft(u))
        u = u * np.exp(1j * dt * np.abs(u) ** 2)
        u = np.fft.ifft(half * np.fft.fft(u))
        if n % save_every == 0:
            if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > limit:
                raise SolverError(f"split-step blow-up detected at t={n * dt:g}")
            out.append(u.copy())
    mesh = TimeMesh(np.arange(len(out)) * dt * save_every)
    return SpaceTimeField(mesh, grid, np.array(out))
