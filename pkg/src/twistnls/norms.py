"""
Spatial and space-time norms.

Spatial integrals use the rectangle rule on the periodic grid.  Time
integrals use composite Simpson on uniform meshes with an even number of
panels and the trapezoid rule otherwise.  Suprema (``r = inf`` or
``q = inf``) are discrete maxima over samples or nodes.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .spectral_core import (
    Grid,
    SpatialField,
    apply_multiplier,
    bessel_symbol,
    propagator_symbol,
)

__all__ = [
    "TimeMesh",
    "SpaceTimeField",
    "MixedNormSpec",
    "as_exponent",
    "lp_norm",
    "sobolev_norm",
    "mixed_norm",
    "twisted_sup_norm",
    "twisted_values",
]


def as_exponent(r):
    """Float value of an exponent; accepts ints, floats, Fractions and ``inf``."""
    r = float(r)
    if math.isnan(r):
        raise ValueError("exponent is NaN")
    return r


@dataclass(frozen=True, eq=False)
class TimeMesh:
    """Strictly increasing time nodes with positive quadrature weights."""

    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        t = np.array(self.nodes, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a time mesh needs at least two nodes")
        if not np.all(np.diff(t) > 0):
            raise ValueError("time nodes must be strictly increasing")
        w = _quadrature_weights(t) if self.weights is None else np.array(self.weights, dtype=float)
        if w.shape != t.shape or np.any(w <= 0):
            raise ValueError("quadrature weights must be positive, one per node")
        t.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "nodes", t)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, T, n_nodes, start=0.0):
        if not T > 0:
            raise ValueError(f"interval length must be positive, got {T}")
        return cls(start + np.linspace(0.0, T, n_nodes))

    @property
    def start(self):
        return float(self.nodes[0])

    @property
    def end(self):
        return float(self.nodes[-1])

    @property
    def length(self):
        return self.end - self.start

    def __len__(self):
        return self.nodes.size

    @property
    def is_uniform(self):
        h = np.diff(self.nodes)
        return bool(np.allclose(h, h[0], rtol=1e-12, atol=0))

    def index_of(self, t):
        """Index of node ``t``; raises if ``t`` is not a node."""
        j = int(np.argmin(np.abs(self.nodes - t)))
        tol = 1e-12 * max(1.0, abs(self.length))
        if abs(self.nodes[j] - t) > tol:
            raise ValueError(f"t={t} is not a node of the time mesh")
        return j

    def refined(self, factor=2):
        """Uniform refinement: each panel split into ``factor`` panels."""
        n = (len(self) - 1) * factor + 1
        fine = np.interp(np.linspace(0, len(self) - 1, n), np.arange(len(self)), self.nodes)
        return TimeMesh(fine)

    def shifted(self, offset):
        return TimeMesh(self.nodes + offset, self.weights)


def _quadrature_weights(t):
    h = np.diff(t)
    n_panels = h.size
    if n_panels % 2 == 0 and np.allclose(h, h[0], rtol=1e-12, atol=0):
        w = np.ones(n_panels + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * (t[-1] - t[0]) / (3.0 * n_panels)
    w = np.zeros(n_panels + 1)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Samples ``values[j, :]`` of ``u(t_j, .)`` on a shared grid."""

    mesh: TimeMesh
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex, copy=True)
        if v.shape != (len(self.mesh), self.grid.n_points):
            raise ValueError(
                f"snapshot array has shape {v.shape}, expected "
                f"({len(self.mesh)}, {self.grid.n_points})"
            )
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_snapshots(cls, mesh, snapshots):
        snapshots = list(snapshots)
        if len(snapshots) != len(mesh):
            raise ValueError("snapshot count differs from node count")
        grid = snapshots[0].grid
        if any(f.grid != grid for f in snapshots):
            raise ValueError("snapshots live on different grids")
        return cls(mesh, grid, np.stack([f.values for f in snapshots]))

    @classmethod
    def free_evolution(cls, phi, mesh):
        """``exp(i t d_xx) phi`` at every node of ``mesh``."""
        vals = apply_multiplier(phi.values[None, :], propagator_symbol(phi.grid, mesh.nodes))
        return cls(mesh, phi.grid, vals)

    @property
    def snapshots(self):
        return [SpatialField(self.grid, row) for row in self.values]

    def snapshot(self, j):
        return SpatialField(self.grid, self.values[j])

    @property
    def final(self):
        return self.snapshot(-1)

    def __sub__(self, other):
        self._check_compatible(other)
        return SpaceTimeField(self.mesh, self.grid, self.values - other.values)

    def __add__(self, other):
        self._check_compatible(other)
        return SpaceTimeField(self.mesh, self.grid, self.values + other.values)

    def _check_compatible(self, other):
        if other.grid != self.grid or len(other.mesh) != len(self.mesh) or not np.allclose(
            other.mesh.nodes, self.mesh.nodes, rtol=0, atol=1e-14
        ):
            raise ValueError("space-time fields live on different meshes")


@dataclass(frozen=True)
class MixedNormSpec:
    """Selects ``L^q(I; L^r)`` (``r`` set) or ``L^q(I; H^s_p)`` (``s``, ``p`` set).

    ``twisted=True`` measures the twisted variable and is only supported with
    ``q = inf``.
    """

    q: float
    r: float = None
    s: float = 0.0
    p: float = None
    twisted: bool = False

    def __post_init__(self):
        q = as_exponent(self.q)
        if not (q >= 1):
            raise ValueError(f"time exponent must be >= 1, got {self.q}")
        if (self.r is None) == (self.p is None):
            raise ValueError("give exactly one of r (Lebesgue) or p (Bessel)")
        if self.twisted and q != math.inf:
            raise ValueError("twisted norms are only defined here with q = inf")

    @property
    def spatial_exponent(self):
        return self.r if self.r is not None else self.p

    @property
    def order(self):
        return 0.0 if self.r is not None else float(self.s)


# -- spatial ---------------------------------------------------------------


def _lp_rows(values, r, dx):
    """L^r norm along the last axis (rectangle rule), overflow-safe."""
    a = np.abs(values)
    if r == math.inf:
        return a.max(axis=-1)
    m = a.max(axis=-1, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    inner = dx * np.sum((a / safe) ** r, axis=-1)
    return np.squeeze(m, -1) * inner ** (1.0 / r)


def _check_lebesgue(r):
    r = as_exponent(r)
    if r < 1:
        raise ValueError(f"Lebesgue exponent must be >= 1, got {r}")
    return r


def lp_norm(f, r):
    """``(dx * sum |f|^r)^(1/r)``, or ``max |f|`` for ``r = inf``."""
    r = _check_lebesgue(r)
    return float(_lp_rows(f.values, r, f.grid.dx))


def sobolev_norm(f, s, p):
    """Bessel potential norm ``||<D>^s f||_{L^p}``."""
    p = _check_lebesgue(p)
    return float(_sobolev_rows(f.values, f.grid, s, p))


def _sobolev_rows(values, grid, s, p):
    if float(s) != 0:
        values = apply_multiplier(values, bessel_symbol(grid, s))
    return _lp_rows(values, p, grid.dx)


def spatial_norms(u, spatial_exponent, s=0.0):
    """Per-node spatial norms of a space-time field."""
    p = _check_lebesgue(spatial_exponent)
    return _sobolev_rows(u.values, u.grid, s, p)


# -- time ------------------------------------------------------------------


def time_norm(samples, mesh, q):
    """``L^q`` norm over the mesh of nonnegative per-node samples."""
    q = as_exponent(q)
    samples = np.asarray(samples, dtype=float)
    if q == math.inf:
        return float(samples.max())
    m = samples.max()
    if m == 0:
        return 0.0
    return float(m * np.dot(mesh.weights, (samples / m) ** q) ** (1.0 / q))


def mixed_norm(u, spec):
    """``(integral ||u(t)||^q dt)^(1/q)`` of the selected spatial norm."""
    if spec.twisted:
        raise ValueError("use twisted_sup_norm for twisted norms")
    return time_norm(spatial_norms(u, spec.spatial_exponent, spec.order), u.mesh, spec.q)


def twisted_values(u):
    """Rows ``exp(-i t_j d_xx) u(t_j)``."""
    return apply_multiplier(u.values, propagator_symbol(u.grid, -u.mesh.nodes))


def twisted_sup_norm(u, s, p):
    """``max_j ||exp(-i t_j d_xx) u(t_j)||_{H^s_p}``."""
    p = _check_lebesgue(p)
    return float(_sobolev_rows(twisted_values(u), u.grid, s, p).max())
