import numpy as np
import pytest

from muflow.densities import InertiaOperator, apply_A_values, h_minus1, invert_A_mu
from muflow.errors import MeanNotZero, NonPositiveDensity, UndefinedFunctional
from muflow.grid import PeriodicField, PeriodicGrid, sample, spectral_deriv
from muflow.hamiltonian import (
    Functional,
    apply_J0,
    apply_J2,
    bihamiltonian_residual,
    eval_functional,
    momentum_rhs,
    negative_flow_check,
    negative_flow_rhs,
    variational_derivative,
)
from muflow.pde import FamilyConfig, SolverParams, initial_from_momentum, integrate

TWO_PI = 2 * np.pi
MUDP = FamilyConfig.mudp()


def m_smooth(n):
    return sample(PeriodicGrid(n), lambda x: 2 + np.sin(TWO_PI * x))


def test_functional_values():
    g = PeriodicGrid(64)
    u = PeriodicField(g, np.full(64, 1.7))
    assert eval_functional(Functional("H0", 3.0), u, MUDP) == pytest.approx(-4.5 * 1.7, rel=1e-15)
    assert eval_functional(Functional("H0", 5.0), u, FamilyConfig(5)) == pytest.approx(-25 / 4 * 1.7)
    s = sample(g, lambda x: np.sin(TWO_PI * x))
    assert eval_functional(Functional("H1"), s, MUDP) == pytest.approx(0.25, abs=1e-15)
    assert eval_functional(Functional("H2"), s, FamilyConfig.muburgers()) == pytest.approx(0.0, abs=1e-15)
    assert eval_functional(Functional("MuB", p=2), s, FamilyConfig.muburgers()) == pytest.approx(0.5)


def test_undefined_functionals():
    u = PeriodicField(PeriodicGrid(16), np.ones(16))
    with pytest.raises(UndefinedFunctional):
        eval_functional(Functional("H0", 1.0), u, FamilyConfig(1))
    with pytest.raises(UndefinedFunctional):
        eval_functional(Functional("H2"), u, FamilyConfig.much())
    with pytest.raises(UndefinedFunctional):
        eval_functional(Functional("MuB", p=2), u, MUDP)
    with pytest.raises(ValueError):
        Functional("H7")


def test_h2_conserved_on_mudp_run():
    u0 = initial_from_momentum(m_smooth(128))
    rec = integrate(MUDP, u0, SolverParams(128, 1e-3, 5.0, record_every=100))
    assert rec.termination.kind == "Completed"
    assert rec.drift("H2", relative=True) < 1e-6


def _m(u):
    return apply_A_values(InertiaOperator.MU_MINUS_DXX, u)


def test_h_minus1_conserved_on_mudp_run():
    u0 = initial_from_momentum(m_smooth(128))
    rec = integrate(MUDP, u0, SolverParams(128, 1e-3, 2.0, record_every=500))
    first = h_minus1(PeriodicField(rec.grid, _m(rec.snapshots[0])), 3)
    last = h_minus1(PeriodicField(rec.grid, _m(rec.snapshots[-1])), 3)
    assert abs(last - first) < 1e-6


def test_oracle_h0_is_constant():
    phi = variational_derivative(Functional("H0", 3.0), m_smooth(64), MUDP)
    assert np.max(np.abs(phi.values + 4.5)) < 1e-8


def test_oracle_h1_matches_analytic():
    m = m_smooth(64)
    phi = variational_derivative(Functional("H1"), m, MUDP)
    expected = invert_A_mu(invert_A_mu(m))
    assert (phi - expected).sup() < 1e-5


def test_oracle_h_minus1_matches_chain_rule():
    m = m_smooth(64)
    phi = variational_derivative(Functional("H-1", 3.0), m, MUDP)
    assert np.max(np.abs(phi.values - m.values ** (-2 / 3) / 3)) < 1e-5
    with pytest.raises(ValueError):
        variational_derivative(Functional("H1"), m, MUDP, eps=0.0)


def test_j0_examples():
    m = m_smooth(128)
    out = apply_J0(m, PeriodicField(m.grid, np.full(128, -4.5)), 3.0)
    assert (out - momentum_rhs(m, MUDP)).sup() < 1e-6
    one = PeriodicField(m.grid, np.ones(128))
    cos = sample(m.grid, lambda x: np.cos(TWO_PI * x))
    expected = -np.sin(TWO_PI * m.grid.points) / TWO_PI
    assert np.max(np.abs(apply_J0(one, cos, 3.0).values - expected)) < 1e-14
    assert apply_J0(m, PeriodicField(m.grid, np.zeros(128))).sup() == 0.0


def test_j0_rejects_non_gradient():
    g = PeriodicGrid(64)
    m = sample(g, lambda x: 2 + np.sin(TWO_PI * x))
    phi = sample(g, lambda x: np.cos(TWO_PI * x))
    with pytest.raises(MeanNotZero):
        apply_J0(m, phi, 3.0)


def test_j2_harmonics():
    g = PeriodicGrid(32)
    x = g.points
    s = sample(g, lambda x: np.sin(TWO_PI * x))
    assert np.max(np.abs(apply_J2(s).values - TWO_PI**5 * np.cos(TWO_PI * x))) < 1e-8 * TWO_PI**5
    c = sample(g, lambda x: np.cos(4 * np.pi * x))
    assert np.max(np.abs(apply_J2(c).values + (4 * np.pi) ** 5 * np.sin(4 * np.pi * x))) < 1e-8 * (4 * np.pi) ** 5
    assert apply_J2(PeriodicField(g, np.full(32, 3.0))).sup() == 0.0


def test_bihamiltonian_mudp():
    r0, r2 = bihamiltonian_residual(m_smooth(128))
    assert r0 < 1e-4 and r2 < 1e-4


def test_bihamiltonian_constant():
    m = PeriodicField(PeriodicGrid(32), np.full(32, 1.5))
    assert momentum_rhs(m, MUDP).sup() == 0.0
    r0, r2 = bihamiltonian_residual(m)
    assert r0 < 1e-12 and r2 < 1e-12


def test_bihamiltonian_muburgers():
    g = PeriodicGrid(128)
    u = sample(g, lambda x: np.sin(TWO_PI * x) + np.cos(4 * np.pi * x) / 2)
    m = PeriodicField(g, _minus_uxx(u.values))
    r0, r2 = bihamiltonian_residual(m, FamilyConfig.muburgers())
    assert r0 < 1e-4 and r2 < 1e-4


def _minus_uxx(u):
    return -spectral_deriv(u, 2)


def test_bihamiltonian_stays_small_across_resolutions():
    # H0 is linear and H2 cubic in m, so central differences carry no
    # truncation error; what is left is round-off
    for n in (64, 128):
        for eps in (1e-3, 1e-5):
            r0, r2 = bihamiltonian_residual(m_smooth(n), eps=eps)
            assert r0 < 1e-8 and r2 < 1e-5


def test_negative_flow_constant_and_positivity():
    g = PeriodicGrid(32)
    assert negative_flow_rhs(PeriodicField(g, np.full(32, 2.0))).sup() == 0.0
    with pytest.raises(NonPositiveDensity):
        negative_flow_rhs(sample(g, lambda x: np.sin(TWO_PI * x)))


def test_negative_flow_homogeneity():
    m = m_smooth(128)
    base = negative_flow_rhs(m).values
    scaled = negative_flow_rhs(PeriodicField(m.grid, 8 * m.values)).values
    assert np.max(np.abs(scaled - base / 4)) < 1e-12 * np.max(np.abs(base))


def test_negative_flow_is_a_j2_flow():
    # The printed expression inverts under d^5 to the zero-mean part of dH-1/dm
    report = negative_flow_check(m_smooth(128))
    assert report.j2_inverse < 1e-6
    assert report.j2_forward < 1e-3
