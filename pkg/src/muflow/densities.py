"""Inertia operators, Green's functions, and the circle-diffeomorphism action on densities."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotADiffeo, NotInMLambda
from .grid import (
    PeriodicField,
    PeriodicGrid,
    inverse_multiplier,
    mean,
    spectral_antideriv,
    spectral_deriv,
    trig_interp,
)

G0 = 13.0 / 12.0  # g(0) for A = mu - d^2


class InertiaOperator(enum.Enum):
    MU_MINUS_DXX = "mu-dxx"
    ONE_MINUS_DXX = "1-dxx"
    MINUS_DXX = "-dxx"


class GreensFamily(enum.Enum):
    MU = "mu"
    CLASSICAL = "classical"


class InversionMethod(enum.Enum):
    CLOSED_FORM = "closed-form"
    SPECTRAL = "spectral"


# ---- inertia operators ----

def apply_A_values(op: InertiaOperator, u: np.ndarray) -> np.ndarray:
    uxx = spectral_deriv(u, 2)
    if op is InertiaOperator.MU_MINUS_DXX:
        return np.mean(u, axis=-1, keepdims=True) - uxx
    if op is InertiaOperator.ONE_MINUS_DXX:
        return u - uxx
    return -uxx


def apply_A(op: InertiaOperator, u: PeriodicField) -> PeriodicField:
    return PeriodicField(u.grid, apply_A_values(op, u.values))


def inverse_mu_values(m: np.ndarray) -> np.ndarray:
    """Spectral inverse of mu - d^2 along the last axis."""
    n = m.shape[-1]
    k = np.arange(n // 2 + 1)
    symbol = (2 * np.pi * k) ** 2
    symbol[0] = 1.0
    return np.fft.irfft(np.fft.rfft(m, axis=-1) / symbol, n, axis=-1)


def invert_A_values(op: InertiaOperator, m: np.ndarray) -> np.ndarray:
    if op is InertiaOperator.MU_MINUS_DXX:
        return inverse_mu_values(m)
    if op is InertiaOperator.ONE_MINUS_DXX:
        n = m.shape[-1]
        symbol = 1.0 + (2 * np.pi * np.arange(n // 2 + 1)) ** 2
        return np.fft.irfft(np.fft.rfft(m, axis=-1) / symbol, n, axis=-1)
    raise DomainError("-d^2 annihilates constants and has no inverse")


def _closed_form_inverse(m: np.ndarray) -> np.ndarray:
    # Explicit formula built from iterated integrals of v starting at 0:
    #   (x^2/2 - x/2 + 13/12) int v + (x - 1/2) int_0^1 V1 - V2(x) + int_0^1 V2
    # with V1 = int_0^x v and V2 = int_0^x V1.  The trig interpolant of v is
    # integrated exactly: v = a + w, w periodic with zero mean.
    n = m.shape[-1]
    x = np.arange(n) / n
    a = np.mean(m)
    w = m - a
    p1 = spectral_antideriv(w, 1)
    p2 = np.fft.irfft(np.fft.rfft(w) * inverse_multiplier(n, 2), n)
    v1 = a * x + p1 - p1[0]
    v2 = a * x**2 / 2 + p2 - p2[0] - p1[0] * x
    int_v1 = a / 2 - p1[0]
    int_v2 = a / 6 - p2[0] - p1[0] / 2
    return (x**2 / 2 - x / 2 + G0) * a + (x - 0.5) * int_v1 - v2 + int_v2


def invert_A_mu(m: PeriodicField, method: InversionMethod = InversionMethod.SPECTRAL) -> PeriodicField:
    if method is InversionMethod.CLOSED_FORM:
        return PeriodicField(m.grid, _closed_form_inverse(m.values))
    return PeriodicField(m.grid, inverse_mu_values(m.values))


# ---- Green's functions ----

_SINH_HALF = np.sinh(0.5)


def greens_eval(family: GreensFamily, x):
    y = np.mod(np.asarray(x, dtype=float), 1.0)
    if family is GreensFamily.MU:
        out = 0.5 * y * (y - 1.0) + G0
    else:
        out = np.cosh(y - 0.5) / (2 * _SINH_HALF)
    return out if out.ndim else float(out)


def greens_deriv(family: GreensFamily, x):
    """g' with the convention g'(0) = 0 at the kink."""
    y = np.mod(np.asarray(x, dtype=float), 1.0)
    if family is GreensFamily.MU:
        out = y - 0.5
    else:
        out = np.sinh(y - 0.5) / (2 * _SINH_HALF)
    out = np.where(y == 0.0, 0.0, out)
    return out if out.ndim else float(out)


def greens_antideriv(family: GreensFamily, x):
    """G(x) = int_0^x g on [-1, 1], odd in x."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise DomainError("G is defined on the representative interval (-1, 1)")
    y = np.abs(x)
    if family is GreensFamily.MU:
        out = y**3 / 6 - y**2 / 4 + G0 * y
    else:
        out = (np.sinh(y - 0.5) + _SINH_HALF) / (2 * _SINH_HALF)
    out = np.sign(x) * out
    return out if out.ndim else float(out)


def greens_selfconv(x):
    """(g * g)(x) for the mu family."""
    y = np.mod(np.asarray(x, dtype=float), 1.0)
    out = -(y**4) / 24 + y**3 / 12 - y**2 / 24 + 721.0 / 720.0
    return out if out.ndim else float(out)


def greens_conv_deriv(x):
    """(g * g')(x) = (g' * g)(x) for the mu family."""
    g = greens_eval(GreensFamily.MU, x)
    return -(g - G0) * greens_deriv(GreensFamily.MU, x) / 3.0


# ---- convolution identities ----

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(6)


def _piecewise_conv(f1, f2, x: np.ndarray, qj: float) -> np.ndarray:
    """int_0^1 f1(x - y) f2(y - qj) dy, split at the kinks y = x and y = qj."""
    xr = np.mod(x, 1.0)
    cuts = np.sort(np.stack([np.zeros_like(xr), xr, np.full_like(xr, qj % 1.0), np.ones_like(xr)], axis=1), axis=1)
    lo, hi = cuts[:, :-1], cuts[:, 1:]
    half = (hi - lo) / 2
    y = (lo + hi)[..., None] / 2 + half[..., None] * _GL_NODES
    vals = f1(x[:, None, None] - y) * f2(y - qj)
    return np.sum(vals * _GL_WEIGHTS * half[..., None], axis=(1, 2))


@dataclass(frozen=True)
class IdentityResiduals:
    """Pointwise residuals of the four identities; excluded points of the last are NaN."""

    conv_g_prime_g: np.ndarray
    conv_g_prime_g_prime: np.ndarray
    difference_product: np.ndarray
    derivative_product: np.ndarray

    def max_abs(self) -> float:
        return float(max(np.nanmax(np.abs(r)) for r in self.as_tuple()))

    def as_tuple(self):
        return (self.conv_g_prime_g, self.conv_g_prime_g_prime, self.difference_product, self.derivative_product)


def identity_suite(q_i: float, q_j: float, grid: PeriodicGrid, x=None) -> IdentityResiduals:
    mu = GreensFamily.MU

    def g(y):
        return greens_eval(mu, y)

    def gp(y):
        return greens_deriv(mu, y)

    x = grid.points if x is None else np.asarray(x, dtype=float)
    gi, gj = g(x - q_i), g(x - q_j)
    gpi, gpj = gp(x - q_i), gp(x - q_j)
    dij, dji = q_i - q_j, q_j - q_i

    r1 = _piecewise_conv(gp, g, x, q_j) - (-(gj - G0) * gpj / 3.0)
    r2 = _piecewise_conv(gp, gp, x, q_j) - (1.0 - gj)
    lhs3 = -(gi - gj) * (gpi - gpj)
    rhs3 = (2 * gp(dij) * gi + 2 * gp(dji) * gj
            + (g(dij) - G0) * gpi + (g(dji) - G0) * gpj)
    r3 = lhs3 - rhs3
    lhs4 = gpi * gpj
    rhs4 = gi + gj + gp(dij) * (gpi - gpj) + g(dij) - 3.0
    r4 = lhs4 - rhs4
    coincide = (np.abs(np.mod(x - q_i + 0.5, 1.0) - 0.5) < 1e-12) & (np.abs(np.mod(dij + 0.5, 1.0) - 0.5) < 1e-12)
    r4 = np.where(coincide, np.nan, r4)
    return IdentityResiduals(r1, r2, r3, r4)


# ---- circle diffeomorphisms acting on densities ----

@dataclass(frozen=True)
class CircleMap:
    """Lift xi of an orientation-preserving circle map, stored as the periodic part xi(x) - x."""

    displacement: PeriodicField

    @property
    def grid(self) -> PeriodicGrid:
        return self.displacement.grid

    @property
    def values(self) -> np.ndarray:
        return self.grid.points + self.displacement.values

    @property
    def derivative(self) -> np.ndarray:
        return 1.0 + spectral_deriv(self.displacement.values, 1)

    @classmethod
    def identity(cls, grid: PeriodicGrid) -> "CircleMap":
        return cls(PeriodicField(grid, np.zeros(grid.n)))

    @classmethod
    def from_function(cls, grid: PeriodicGrid, xi) -> "CircleMap":
        x = grid.points
        return cls(PeriodicField(grid, xi(x) - x))

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points + trig_interp(self.displacement.values, points)

    def check(self):
        if np.any(self.derivative <= 0.0):
            raise NotADiffeo("circle map is not monotone on the grid")


def compose(outer: CircleMap, inner: CircleMap) -> CircleMap:
    """outer o inner."""
    xi_inner = inner.values
    d = inner.displacement.values + trig_interp(outer.displacement.values, xi_inner)
    return CircleMap(PeriodicField(inner.grid, d))


def act_density(xi: CircleMap, m: PeriodicField, lam: float, interpolation: str = "trig") -> PeriodicField:
    """Pull back the weight-lam density m by xi: m o xi * (xi')^lam."""
    if xi.grid != m.grid:
        raise ValueError("map and density live on different grids")
    xi.check()
    points = xi.values
    if interpolation == "trig":
        m_xi = trig_interp(m.values, points)
    elif interpolation == "linear":
        x = m.grid.points
        m_xi = np.interp(np.mod(points, 1.0), np.append(x, 1.0), np.append(m.values, m.values[0]))
    else:
        raise ValueError(f"unknown interpolation {interpolation!r}")
    return PeriodicField(m.grid, m_xi * xi.derivative**lam)


def h_minus1(m: PeriodicField, lam: float) -> float:
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    return float(np.mean(np.abs(m.values) ** (1.0 / lam)))


def canonical_diffeo(m: PeriodicField, lam: float) -> CircleMap:
    """The map xi with act_density(xi, sgn(m) * H^lam, lam) = m, where H = h_minus1(m)."""
    v = m.values
    scale = np.max(np.abs(v))
    if scale == 0.0 or np.min(np.abs(v)) <= 1e-8 * scale or (np.any(v > 0) and np.any(v < 0)):
        raise NotInMLambda("density vanishes or changes sign")
    w = np.abs(v) ** (1.0 / lam)
    h = float(np.mean(w))
    p = spectral_antideriv(w - h, 1)
    return CircleMap(PeriodicField(m.grid, (p - p[0]) / h))
