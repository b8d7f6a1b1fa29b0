"""
Periodic pseudospectral substrate.

The real line is replaced by the periodic interval ``[-L/2, L/2)`` sampled
at ``N`` equispaced points.  Every operator in this module is a Fourier
multiplier, i.e. diagonal in the discrete frequencies
``xi_k = 2 pi k / L``:

    free propagator    exp(-i t xi^2)      (solves i u_t + u_xx = 0)
    twist              exp(+i t xi^2)      (inverse of the propagator)
    Bessel potential   (1 + xi^2)^(s/2)
    Riesz potential    |xi|^s              (zero mode sent to 0)

Fields are immutable; operators return new fields.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "SpatialField",
    "free_propagate",
    "twist",
    "bessel_potential",
    "riesz_potential",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic mesh on ``[-length/2, length/2)``.

    Parameters
    ----------
    n_points : int
        Number of samples, a power of two no smaller than 8.
    length : float
        Period of the domain.
    """

    n_points: int
    length: float

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 8, got {n!r}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"length must be positive and finite, got {self.length!r}")
        object.__setattr__(self, "n_points", int(n))
        object.__setattr__(self, "length", float(self.length))

    @property
    def dx(self):
        return self.length / self.n_points

    @property
    def dxi(self):
        """Spacing of the frequency lattice, ``2 pi / length``."""
        return 2.0 * np.pi / self.length

    @cached_property
    def x(self):
        x = -0.5 * self.length + self.dx * np.arange(self.n_points)
        x.flags.writeable = False
        return x

    @cached_property
    def frequencies(self):
        """Angular wavenumbers in increasing order, ``k = -N/2 .. N/2-1``."""
        k = np.arange(-self.n_points // 2, self.n_points // 2)
        xi = self.dxi * k
        xi.flags.writeable = False
        return xi

    @cached_property
    def k(self):
        """Angular wavenumbers in FFT storage order."""
        k = self.dxi * np.fft.fftfreq(self.n_points, d=1.0 / self.n_points)
        k.flags.writeable = False
        return k

    @cached_property
    def k2(self):
        k2 = self.k**2
        k2.flags.writeable = False
        return k2

    @cached_property
    def _shift_phase(self):
        # exp(-i xi_k x_0) with x_0 = -L/2, i.e. (-1)^k in FFT order
        idx = np.fft.fftfreq(self.n_points, d=1.0 / self.n_points).astype(int)
        ph = np.where(idx % 2 == 0, 1.0, -1.0)
        ph.flags.writeable = False
        return ph

    def refined(self, factor=2):
        """Same domain, ``factor`` times as many points."""
        return Grid(self.n_points * factor, self.length)

    def mode(self, index, amplitude=1.0):
        """Single on-grid Fourier mode ``amplitude * exp(i xi x)`` with ``xi = 2 pi index / L``."""
        if not -self.n_points // 2 <= index < self.n_points // 2:
            raise ValueError(f"mode index {index} is not resolved on {self.n_points} points")
        xi = self.dxi * index
        return SpatialField(self, amplitude * np.exp(1j * xi * self.x))


def _check_finite(values, what="field"):
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} contains non-finite samples")


@dataclass(frozen=True, eq=False)
class SpatialField:
    """Complex samples of one function on a :class:`Grid`.

    ``values`` is the physical representation.  ``spectrum`` approximates the
    unitary continuous Fourier transform
    ``(2 pi)^(-1/2) * integral f(x) exp(-i x xi) dx`` at ``grid.frequencies``
    (increasing order), so that ``dxi * sum|spectrum|^2 == dx * sum|values|^2``.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex, copy=True)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} samples, got shape {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, func(grid.x))

    @classmethod
    def from_spectrum(cls, grid, spectrum):
        """Inverse of :attr:`spectrum` (coefficients in increasing-frequency order)."""
        spec = np.fft.ifftshift(np.asarray(spectrum, dtype=complex))
        raw = spec / (grid.dx / np.sqrt(2 * np.pi) * grid._shift_phase)
        return cls(grid, np.fft.ifft(raw))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n_points, dtype=complex))

    @cached_property
    def spectrum(self):
        g = self.grid
        raw = np.fft.fft(self.values) * g._shift_phase * (g.dx / np.sqrt(2 * np.pi))
        out = np.fft.fftshift(raw)
        out.flags.writeable = False
        return out

    def with_values(self, values):
        return SpatialField(self.grid, values)

    def __add__(self, other):
        return SpatialField(self.grid, self.values + _values_of(other, self.grid))

    def __sub__(self, other):
        return SpatialField(self.grid, self.values - _values_of(other, self.grid))

    def __mul__(self, c):
        if isinstance(c, SpatialField):
            return SpatialField(self.grid, self.values * _values_of(c, self.grid))
        return SpatialField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return SpatialField(self.grid, -self.values)

    def conj(self):
        return SpatialField(self.grid, self.values.conj())


def _values_of(other, grid):
    if isinstance(other, SpatialField):
        if other.grid != grid:
            raise ValueError("fields live on different grids")
        return other.values
    return other


def apply_multiplier(values, multiplier):
    """Apply a multiplier given in FFT order along the last axis of ``values``."""
    return np.fft.ifft(np.fft.fft(values, axis=-1) * multiplier, axis=-1)


def propagator_symbol(grid, t):
    """exp(-i t xi^2) in FFT order; ``t`` may be an array (one row per time)."""
    t = np.asarray(t, dtype=float)
    return np.exp(-1j * np.multiply.outer(t, grid.k2))


def bessel_symbol(grid, s):
    return (1.0 + grid.k2) ** (0.5 * float(s))


def riesz_symbol(grid, s):
    s = float(s)
    absk = np.abs(grid.k)
    out = np.zeros_like(absk)
    nz = absk > 0
    out[nz] = absk[nz] ** s
    if s == 0:
        out[~nz] = 1.0
    return out


def free_propagate(f, t):
    """Free Schrodinger evolution ``exp(i t d_xx) f``.

    Examples
    --------
    >>> g = Grid(16, 2 * np.pi)
    >>> u = free_propagate(g.mode(3), 0.5)
    >>> bool(np.allclose(u.values, np.exp(-4.5j) * g.mode(3).values))
    True
    """
    _check_finite(f.values)
    if not np.isfinite(t):
        raise ValueError("propagation time must be finite")
    if t == 0:
        return f
    return SpatialField(f.grid, apply_multiplier(f.values, propagator_symbol(f.grid, t)))


def twist(f, t):
    """Twisted variable ``exp(-i t d_xx) f``; undoes :func:`free_propagate` over time ``t``."""
    return free_propagate(f, -t)


def bessel_potential(f, s):
    """``<D>^s f``: multiplier ``(1 + xi^2)^(s/2)``."""
    _check_finite(f.values)
    if s == 0:
        return f
    return SpatialField(f.grid, apply_multiplier(f.values, bessel_symbol(f.grid, s)))


def riesz_potential(f, s):
    """``|D|^s f`` with the zero mode mapped to zero for ``s > 0``.

    Negative ``s`` is only defined on fields whose zero mode vanishes.
    """
    _check_finite(f.values)
    s = float(s)
    if s == 0:
        return f
    fh = np.fft.fft(f.values)
    if s < 0:
        scale = max(np.max(np.abs(fh)), 1e-300)
        if abs(fh[0]) > 1e-13 * scale:
            raise ValueError("negative Riesz order needs a zero-mean field")
        fh[0] = 0.0
    return SpatialField(f.grid, np.fft.ifft(fh * riesz_symbol(f.grid, s)))
