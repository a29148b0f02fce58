"""Compatibility residual of the Lax pair for muDP and muBurgers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import InertiaOperator
from .grid import PeriodicField, chop_coefficients, derivative_multiplier
from .pde import FamilyConfig, mu_family_rates, muburgers_rates

JET_CHOP = 1e-15
RATE_CHOP = 1e-12


@dataclass(frozen=True)
class LaxProbe:
    spectral_parameter: float
    psi: PeriodicField

    def __post_init__(self):
        if self.spectral_parameter == 0:
            raise ValueError("spectral parameter must be nonzero")


def _jet(values: np.ndarray, order: int, chop: float) -> list[np.ndarray]:
    """Derivatives 0..order from one chopped spectrum."""
    n = values.shape[-1]
    c = chop_coefficients(np.fft.rfft(values), chop)
    return [np.fft.irfft(c * derivative_multiplier(n, k), n) for k in range(order + 1)]


def _check_config(config: FamilyConfig):
    mudp = config.lam == 3 and config.operator is InertiaOperator.MU_MINUS_DXX
    if not (mudp or config.is_muburgers):
        raise ValueError("a Lax pair is available for muDP and muBurgers only")


def momentum_rate(u: PeriodicField, config: FamilyConfig, chop: float = RATE_CHOP) -> PeriodicField:
    """m_t = A u_t with u_t from the solver's right-hand side.

    A is applied to the chopped spectrum of u_t: its round-off would
    otherwise be amplified by (pi n)^2.
    """
    _check_config(config)
    if config.is_muburgers:
        ut = muburgers_rates(u.values, config.gauge(0.0))[0]
    else:
        ut = mu_family_rates(u.values, 3.0)[0]
    n = u.grid.n
    c = chop_coefficients(np.fft.rfft(ut), chop)
    symbol = -derivative_multiplier(n, 2)
    if not config.is_muburgers:
        symbol[0] = 1.0
    return PeriodicField(u.grid, np.fft.irfft(c * symbol, n))


def pointwise_momentum_rate(u: PeriodicField, config: FamilyConfig, coefficient: float = 3.0) -> PeriodicField:
    """-u m_x - coefficient * u_x m evaluated from the jet of u."""
    _check_config(config)
    uj = _jet(u.values, 3, JET_CHOP)
    mu = float(np.mean(u.values)) if not config.is_muburgers else 0.0
    m0, m1 = mu - uj[2], -uj[3]
    return PeriodicField(u.grid, -uj[0] * m1 - coefficient * uj[1] * m0)


def lax_residual(u: PeriodicField, config: FamilyConfig, probe: LaxProbe,
                 m_t: PeriodicField | None = None) -> PeriodicField:
    """Defect of (psi_t)_xxx = (psi_xxx)_t for an arbitrary probe psi.

    With L psi = psi_xxx + s m psi and psi_t = M psi, M = -(1/s) d^2 - u d + u_x,
    the residual is d^3(M psi) + s(m_t psi + m M psi) - N(L psi) with
    N = -(1/s) d^2 - u d - 2 u_x.  The N term vanishes on eigenfunctions and
    makes the identity hold for every psi.  Products are formed pointwise
    from derivative jets, so the only source of error is m_t, which defaults
    to the solver's right-hand side.
    """
    _check_config(config)
    if u.grid != probe.psi.grid:
        raise ValueError("fields live on different grids")
    s = probe.spectral_parameter
    u_ = _jet(u.values, 4, JET_CHOP)
    p_ = _jet(probe.psi.values, 5, JET_CHOP)
    mu = 0.0 if config.is_muburgers else float(np.mean(u.values))
    m_ = [(mu if j == 0 else 0.0) - u_[j + 2] for j in range(3)]
    mt = (momentum_rate(u, config) if m_t is None else m_t).values

    binom = (1, 3, 3, 1)
    d3_mpsi = -p_[5] / s
    for k in range(4):
        d3_mpsi = d3_mpsi - binom[k] * u_[k] * p_[4 - k] + binom[k] * u_[k + 1] * p_[3 - k]
    m_psi = -p_[2] / s - u_[0] * p_[1] + u_[1] * p_[0]
    lhs = d3_mpsi + s * (mt * p_[0] + m_[0] * m_psi)

    # L psi and its first two derivatives
    l0 = p_[3] + s * m_[0] * p_[0]
    l1 = p_[4] + s * (m_[1] * p_[0] + m_[0] * p_[1])
    l2 = p_[5] + s * (m_[2] * p_[0] + 2 * m_[1] * p_[1] + m_[0] * p_[2])
    n_l = -l2 / s - u_[0] * l1 - 2 * u_[1] * l0
    return PeriodicField(u.grid, lhs - n_l)
