"""Uniform periodic grid on [0, 1) with Fourier differentiation and quadrature."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import MeanNotZero

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PeriodicGrid:
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise ValueError("n must be an integer")
        if self.n % 2:
            raise ValueError("n must be even")
        if self.n < 8:
            raise ValueError("n must be at least 8")

    @cached_property
    def points(self) -> np.ndarray:
        x = np.arange(self.n) / self.n
        x.setflags(write=False)
        return x

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        k = np.arange(self.n // 2 + 1, dtype=float)
        k.setflags(write=False)
        return k


def make_grid(n: int) -> PeriodicGrid:
    return PeriodicGrid(int(n) if isinstance(n, (int, np.integer)) else n)


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """Real samples of a periodic function at the points of `grid`."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _other(self, other):
        if isinstance(other, PeriodicField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return PeriodicField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return PeriodicField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return PeriodicField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return PeriodicField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return PeriodicField(self.grid, self.values / self._other(other))

    def __rtruediv__(self, other):
        return PeriodicField(self.grid, self._other(other) / self.values)

    def __neg__(self):
        return PeriodicField(self.grid, -self.values)

    def __pow__(self, p):
        return PeriodicField(self.grid, self.values ** self._other(p))

    def __abs__(self):
        return PeriodicField(self.grid, np.abs(self.values))

    def __len__(self):
        return self.grid.n


def sample(grid: PeriodicGrid, func) -> PeriodicField:
    """Sample a vectorized callable on the grid."""
    return PeriodicField(grid, np.broadcast_to(func(grid.points), (grid.n,)))


# ---- array-level kernels (operate along the last axis) ----

def derivative_multiplier(n: int, order: int) -> np.ndarray:
    k = np.arange(n // 2 + 1, dtype=float)
    mult = (2j * np.pi * k) ** order
    if order % 2:
        mult[-1] = 0.0
    return mult


def inverse_multiplier(n: int, order: int) -> np.ndarray:
    """Inverse of the derivative symbol, zero on the mean (and on Nyquist for odd order)."""
    mult = derivative_multiplier(n, order)
    inv = np.zeros_like(mult)
    nonzero = mult != 0
    inv[nonzero] = 1.0 / mult[nonzero]
    return inv


def spectral_deriv(values: np.ndarray, order: int, chop: float | None = None) -> np.ndarray:
    """Derivative by Fourier multiplier; `chop` drops modes below that relative size first."""
    if order == 0 and chop is None:
        return np.array(values, dtype=float)
    n = values.shape[-1]
    c = np.fft.rfft(values, axis=-1)
    if chop is not None:
        c = chop_coefficients(c, chop)
    return np.fft.irfft(c * derivative_multiplier(n, order), n, axis=-1)


def spectral_antideriv(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Zero-mean order-fold antiderivative; the mean of `values` is ignored."""
    n = values.shape[-1]
    return np.fft.irfft(np.fft.rfft(values, axis=-1) * inverse_multiplier(n, order), n, axis=-1)


def chop_coefficients(c: np.ndarray, rel_tol: float) -> np.ndarray:
    """Zero the Fourier modes whose magnitude is below rel_tol times the largest one.

    High-order spectral derivatives amplify round-off in the top modes by
    (pi*n)**order.  Chopping must happen on the coefficients that are then
    differentiated: a round trip through grid values puts the noise back.
    """
    mag = np.abs(c)
    return np.where(mag < rel_tol * mag.max(axis=-1, keepdims=True), 0.0, c)


def dealias_mask(n: int) -> np.ndarray:
    """Two-thirds rule: keep wavenumbers k with k <= n/3."""
    return np.arange(n // 2 + 1) <= n // 3


def truncate(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    n = values.shape[-1]
    return np.fft.irfft(np.fft.rfft(values, axis=-1) * mask, n, axis=-1)


def trig_interp(values: np.ndarray, points: np.ndarray, order: int = 0) -> np.ndarray:
    """Evaluate the trigonometric interpolant (or its derivative) at arbitrary points."""
    n = values.shape[-1]
    c = np.fft.rfft(values) / n
    c = c * derivative_multiplier(n, order)
    c[1:-1] *= 2.0
    k = np.arange(n // 2 + 1)
    phase = TWO_PI * np.multiply.outer(np.asarray(points, dtype=float), k)
    return np.cos(phase) @ c.real - np.sin(phase) @ c.imag


# ---- field-level operations ----

def mean(f: PeriodicField) -> float:
    return float(np.mean(f.values))


def deriv(f: PeriodicField, order: int = 1, chop: float | None = None) -> PeriodicField:
    if order < 1:
        raise ValueError("order must be a positive integer")
    return PeriodicField(f.grid, spectral_deriv(f.values, order, chop))


def antideriv_zero_mean(f: PeriodicField, tol_mean: float | None = None) -> PeriodicField:
    mu = mean(f)
    if tol_mean is None:
        tol_mean = 1e-10 * f.sup()
    if abs(mu) > tol_mean:
        raise MeanNotZero(f"mean {mu:.3e} exceeds tolerance {tol_mean:.3e}")
    return PeriodicField(f.grid, spectral_antideriv(f.values, 1))


def interpolate(f: PeriodicField, points, order: int = 0) -> np.ndarray:
    return trig_interp(f.values, points, order)


def parse_initial(expr: str, grid: PeriodicGrid) -> PeriodicField:
    from .expression import evaluate

    values = evaluate(expr, grid.points)
    return PeriodicField(grid, np.broadcast_to(values, (grid.n,)))
