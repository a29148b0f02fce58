"""Conserved functionals, the Hamiltonian operators J0 and J2, and a variational-derivative oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import InertiaOperator, apply_A_values, inverse_mu_values
from .errors import MeanNotZero, NonPositiveDensity, UndefinedFunctional
from .grid import PeriodicField, chop_coefficients, derivative_multiplier, spectral_antideriv, spectral_deriv
from .pde import FamilyConfig

FUNCTIONAL_NAMES = ("H-1", "H0", "H1", "H2", "MuB")


@dataclass(frozen=True)
class Functional:
    name: str
    lam: float = 3.0
    p: int | None = None  # exponent of the muBurgers invariant

    def __post_init__(self):
        if self.name not in FUNCTIONAL_NAMES:
            raise ValueError(f"unknown functional {self.name!r}")
        if self.name == "MuB" and (self.p is None or self.p < 1):
            raise ValueError("MuB invariant needs a positive integer exponent p")


def _check_defined(f: Functional, config: FamilyConfig):
    if f.name == "H0" and f.lam == 1:
        raise UndefinedFunctional("lambda=1 not admissible for H0 normalization")
    if f.name == "H-1" and f.lam == 0:
        raise UndefinedFunctional("H-1 needs lambda != 0")
    if f.name == "H2":
        ok_op = config.operator in (InertiaOperator.MU_MINUS_DXX, InertiaOperator.MINUS_DXX)
        if config.lam != 3 or not ok_op:
            raise UndefinedFunctional("H2 is defined for muDP and muBurgers only")
    if f.name == "MuB" and not config.is_muburgers:
        raise UndefinedFunctional("the (u - mean)^p invariants belong to muBurgers")


def _values(f: Functional, u: np.ndarray, m: np.ndarray, config: FamilyConfig) -> np.ndarray:
    """Evaluate f on each row of (u, m)."""
    if f.name == "H-1":
        return np.mean(np.abs(m) ** (1.0 / f.lam), axis=-1)
    if f.name == "H0":
        return -(f.lam**2 / (f.lam - 1)) * np.mean(m, axis=-1)
    if f.name == "H1":
        return 0.5 * np.mean(u * u, axis=-1)
    if f.name == "H2":
        if config.is_muburgers:
            return -np.mean(u**3, axis=-1) / 6.0
        w = inverse_mu_values(spectral_deriv(u, 1))
        mu = np.mean(u, axis=-1, keepdims=True)
        return -np.mean(1.5 * mu * w * w + u**3 / 6.0, axis=-1)
    centred = u - np.mean(u, axis=-1, keepdims=True)
    return np.mean(centred**f.p, axis=-1)


def eval_functional(f: Functional, u: PeriodicField, config: FamilyConfig) -> float:
    _check_defined(f, config)
    m = apply_A_values(config.operator, u.values)
    return float(_values(f, u.values, m, config))


def velocity_from_momentum(m: np.ndarray, config: FamilyConfig, velocity_mean: float = 0.0) -> np.ndarray:
    """u = A^{-1} m.  For -d^2 the mean of u is not determined by m and is supplied."""
    if config.is_muburgers:
        return -spectral_antideriv(m, 2) + velocity_mean
    if config.operator is InertiaOperator.ONE_MINUS_DXX:
        n = m.shape[-1]
        symbol = 1.0 + (2 * np.pi * np.arange(n // 2 + 1)) ** 2
        return np.fft.irfft(np.fft.rfft(m, axis=-1) / symbol, n, axis=-1)
    return inverse_mu_values(m)


def variational_derivative(f: Functional, m: PeriodicField, config: FamilyConfig,
                           eps: float | None = None, velocity_mean: float = 0.0) -> PeriodicField:
    """Central-difference oracle for dH/dm at the grid points.

    Sample j is perturbed by +-eps*n, i.e. by a bump of unit mass times eps.
    All 2n perturbed states are evaluated as one batch.
    """
    _check_defined(f, config)
    n = m.grid.n
    if eps is None:
        eps = 1e-6 * m.sup()
    if not eps > 0:
        raise ValueError("eps must be positive")
    bump = eps * n * np.eye(n)
    rows = np.concatenate([m.values + bump, m.values - bump])
    u = velocity_from_momentum(rows, config, velocity_mean)
    h = _values(f, u, rows, config)
    return PeriodicField(m.grid, (h[:n] - h[n:]) / (2 * eps))


def quadrature_invariants(u: np.ndarray, config: FamilyConfig) -> dict[str, float]:
    """Monitored quantities of one snapshot; undefined ones are NaN."""
    m = apply_A_values(config.operator, u)
    out = {"mean": float(np.mean(u))}
    out["H0"] = np.nan if config.lam == 1 else float(_values(Functional("H0", config.lam), u, m, config))
    out["H1"] = float(_values(Functional("H1"), u, m, config))
    try:
        _check_defined(Functional("H2"), config)
        out["H2"] = float(_values(Functional("H2"), u, m, config))
    except UndefinedFunctional:
        out["H2"] = np.nan
    ux = spectral_deriv(u, 1)
    out["ux_inf"] = float(np.max(np.abs(ux)))
    return out


# ---- Hamiltonian operators ----

def _antideriv_checked(values: np.ndarray, scale: float, tol: float) -> np.ndarray:
    mu = float(np.mean(values))
    if abs(mu) > tol * scale:
        raise MeanNotZero(f"mean {mu:.3e} of an intermediate field is not zero")
    return spectral_antideriv(values, 1)


def apply_J0(m: PeriodicField, phi: PeriodicField, lam: float = 3.0,
             mean_velocity: float | None = None, tol: float = 1e-8) -> PeriodicField:
    """J0 phi = -(1/lam^2)(m_x + lam m d)(d^-3)((lam-1) m_x + lam m d) phi.

    The triple antiderivative uses zero-mean antiderivatives.  That choice
    fixes a constant of integration which amounts to a Galilean frame: left
    alone it yields the flow seen from a frame moving with the mean velocity
    of u.  `mean_velocity` restores the lab frame; it defaults to mean(m),
    which is mean(u) for the operator mu - d^2.  Pass 0 for the plain
    zero-mean convention.
    """
    if m.grid != phi.grid:
        raise ValueError("fields live on different grids")
    mv, pv = m.values, phi.values
    mx = spectral_deriv(mv, 1)
    a = (lam - 1) * mx * pv
    b = lam * mv * spectral_deriv(pv, 1)
    f = a + b
    # the two terms may cancel, so the mean is judged against their size
    scale = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    for _ in range(3):
        f = _antideriv_checked(f, scale, tol)
        scale = float(np.max(np.abs(f)))
    c = float(np.mean(mv)) if mean_velocity is None else mean_velocity
    f = f - (lam - 1) * float(np.mean(pv)) * c
    out = -(mx * f + lam * mv * spectral_deriv(f, 1)) / lam**2
    return PeriodicField(m.grid, out)


def apply_J2(phi: PeriodicField, chop: float | None = None) -> PeriodicField:
    """J2 = -d^3 (mu - d^2) = d^5."""
    return PeriodicField(phi.grid, spectral_deriv(phi.values, 5, chop))


def momentum_rhs(m: PeriodicField, config: FamilyConfig, velocity_mean: float = 0.0) -> PeriodicField:
    """-u m_x - lam u_x m with u = A^{-1} m."""
    u = velocity_from_momentum(m.values, config, velocity_mean)
    mx = spectral_deriv(m.values, 1)
    ux = spectral_deriv(u, 1)
    return PeriodicField(m.grid, -u * mx - config.lam * ux * m.values)


def bihamiltonian_residual(m: PeriodicField, config: FamilyConfig | None = None,
                           eps: float | None = None, velocity_mean: float = 0.0,
                           chop_tol: float = 1e-9) -> tuple[float, float]:
    """Sup distances of J0 dH0/dm and J2 dH2/dm from the momentum equation.

    The oracle derivative of H2 carries round-off of order 1e-10 in every
    Fourier mode, which the fifth derivative would amplify by (pi n)^5; modes
    below `chop_tol` relative to the largest are dropped before J2 is applied.
    """
    config = FamilyConfig.mudp() if config is None else config
    target = momentum_rhs(m, config, velocity_mean)
    phi0 = variational_derivative(Functional("H0", 3.0), m, config, eps, velocity_mean)
    mean_u = velocity_mean if config.is_muburgers else None
    r0 = apply_J0(m, phi0, 3.0, mean_velocity=mean_u) - target
    phi2 = variational_derivative(Functional("H2", 3.0), m, config, eps, velocity_mean)
    r2 = apply_J2(phi2, chop=chop_tol) - target
    return r0.sup(), r2.sup()


def negative_flow_rhs(m: PeriodicField) -> PeriodicField:
    """First negative flow of the muDP hierarchy, evaluated term by term."""
    v = m.values
    if np.any(v <= 0):
        raise NonPositiveDensity("negative flow needs m > 0")
    n = m.grid.n
    c = chop_coefficients(np.fft.rfft(v), 1e-13)
    d = [np.fft.irfft(c * derivative_multiplier(n, k), n) for k in range(1, 6)]
    m1, m2, m3, m4, m5 = d
    poly = (6160 * m1**5 - 13200 * v * m2 * m1**3 + 3600 * v**2 * m1**2 * m3
            - 675 * v**2 * (v * m4 - 8 * m2**2) * m1
            + 27 * v**3 * (3 * v * m5 - 50 * m2 * m3))
    return PeriodicField(m.grid, -2.0 / (729.0 * v ** (17.0 / 3.0)) * poly)


@dataclass(frozen=True)
class NegativeFlowReport:
    """Relative sup errors of three comparisons against the printed negative flow.

    j0: J0 applied to the oracle derivative of H-1.
    j2_forward: J2 = d^5 applied to the chopped oracle derivative.
    j2_inverse: d^-5 of the printed flow against the zero-mean oracle derivative.
    """

    j0: float
    j2_forward: float
    j2_inverse: float


def negative_flow_check(m: PeriodicField, eps: float | None = None, chop_tol: float = 1e-9) -> NegativeFlowReport:
    config = FamilyConfig.mudp()
    flow = negative_flow_rhs(m)
    scale = flow.sup()
    phi = variational_derivative(Functional("H-1", 3.0), m, config, eps)
    j0 = apply_J0(m, phi, 3.0).values
    j2 = apply_J2(phi, chop=chop_tol).values
    phi0 = phi.values - np.mean(phi.values)
    inv = spectral_antideriv(flow.values, 5)
    return NegativeFlowReport(
        float(np.max(np.abs(j0 - flow.values)) / scale),
        float(np.max(np.abs(j2 - flow.values)) / scale),
        float(np.max(np.abs(inv - phi0)) / np.max(np.abs(phi0))),
    )
