import math

import numpy as np
import pytest

from muflow.densities import InertiaOperator, invert_A_mu, inverse_mu_values
from muflow.errors import HypothesisViolated, MeanNotZero, PreconditionError
from muflow.grid import PeriodicField, PeriodicGrid, sample, spectral_deriv
from muflow.pde import (
    FamilyConfig,
    SolverParams,
    detect_blowup,
    flow_map,
    global_bound_monitor,
    initial_from_momentum,
    integrate,
    pointwise_law_deviation,
    predict_blowup_time,
    rhs_mu_family,
    rhs_muburgers,
)

from conftest import band_limited

TWO_PI = 2 * np.pi


def smooth_u0(n):
    return initial_from_momentum(sample(PeriodicGrid(n), lambda x: 2 + np.sin(TWO_PI * x)))


def test_config_validation():
    with pytest.raises(ValueError):
        FamilyConfig(2.0, InertiaOperator.MINUS_DXX)
    assert FamilyConfig.muburgers(lambda t: t).gauge(0.5) == 0.5
    with pytest.raises(ValueError):
        SolverParams(64, 0.0, 1.0)
    with pytest.raises(ValueError):
        SolverParams(63, 0.1, 1.0)
    with pytest.raises(ValueError):
        SolverParams(64, 0.1, 1.0, record_every=0)


def test_rhs_examples():
    g = PeriodicGrid(64)
    c = sample(g, lambda x: 0 * x + 1.3)
    for lam in (2, 3, 5):
        assert rhs_mu_family(c, lam).sup() < 1e-13
    cos = sample(g, lambda x: np.cos(TWO_PI * x))
    assert (rhs_mu_family(cos, 3) - np.pi * np.sin(4 * np.pi * g.points)).sup() < 1e-12
    sin = sample(g, lambda x: np.sin(TWO_PI * x))
    assert (rhs_muburgers(sin) + np.pi * np.sin(4 * np.pi * g.points)).sup() < 1e-12
    assert (rhs_muburgers(sin, 1.0) - rhs_muburgers(sin) - 1.0).sup() < 1e-15
    assert rhs_muburgers(c).sup() == 0.0


def test_much_rhs_matches_strong_form(rng):
    g = PeriodicGrid(128)
    u = band_limited(g, rng, modes=5, mean=1.0) * 0.3
    v = u.values
    d = [spectral_deriv(v, k) for k in range(4)]
    strong = -2 * np.mean(v) * d[1] + 2 * d[1] * d[2] + v * d[3]
    ut = inverse_mu_values(strong)
    assert np.max(np.abs(rhs_mu_family(u, 2).values - ut)) < 1e-9


def test_constant_data_is_steady():
    g = PeriodicGrid(32)
    rec = integrate(FamilyConfig.mudp(), PeriodicField(g, np.full(32, 2.0)), SolverParams(32, 0.1, 1.0))
    assert rec.termination.kind == "Completed"
    assert np.max(np.abs(rec.snapshots - 2.0)) == 0.0
    for k in ("mean", "H0", "H1", "H2"):
        assert rec.drift(k) == 0.0


def test_record_every_and_times():
    rec = integrate(FamilyConfig.mudp(), smooth_u0(32), SolverParams(32, 0.01, 0.1, record_every=3))
    assert np.all(np.diff(rec.times) > 0)
    assert rec.times[-1] == pytest.approx(0.1)
    assert len(rec.times) == 5


def test_smooth_mudp_run_conserves():
    rec = integrate(FamilyConfig.mudp(), smooth_u0(128), SolverParams(128, 1e-3, 1.0))
    assert rec.termination.kind == "Completed"
    assert rec.drift("mean") < 1e-10
    for k in ("H0", "H1", "H2"):
        assert rec.drift(k, relative=True) < 1e-6


def test_temporal_convergence_fourth_order():
    u0 = smooth_u0(16)
    ref = integrate(FamilyConfig.mudp(), u0, SolverParams(16, 0.02 / 8, 1.0)).snapshots[-1]
    errs = [np.max(np.abs(integrate(FamilyConfig.mudp(), u0, SolverParams(16, dt, 1.0)).snapshots[-1] - ref))
            for dt in (0.02, 0.01)]
    assert 12 < errs[0] / errs[1] < 20


def test_spatial_convergence():
    def final(n):
        return integrate(FamilyConfig.much(), smooth_u0(n), SolverParams(n, 1e-3, 0.5)).snapshots[-1]

    ref = final(128)
    e16 = np.max(np.abs(final(16) - ref[::8]))
    e32 = np.max(np.abs(final(32) - ref[::4]))
    assert e16 > 100 * e32


def test_nonfinite_termination():
    g = PeriodicGrid(32)
    u0 = sample(g, lambda x: 50 * np.sin(TWO_PI * x))
    rec = integrate(FamilyConfig.muburgers(), u0, SolverParams(32, 0.5, 10.0, blowup_slope_threshold=1e300))
    assert rec.termination.kind == "NonFinite"


def test_flow_map_translation_and_rest():
    g = PeriodicGrid(32)
    rec = integrate(FamilyConfig.mudp(), PeriodicField(g, np.full(32, 0.7)), SolverParams(32, 0.1, 1.0))
    flow = flow_map(rec)
    assert np.max(np.abs(flow.xi[-1] - (g.points + 0.7))) < 1e-14
    rest = integrate(FamilyConfig.mudp(), PeriodicField(g, np.zeros(32)), SolverParams(32, 0.1, 1.0))
    assert np.max(np.abs(flow_map(rest).xi[-1] - g.points)) == 0.0


def test_muburgers_flow_formula():
    g = PeriodicGrid(256)
    u0 = sample(g, lambda x: np.sin(TWO_PI * x))
    rec = integrate(FamilyConfig.muburgers(), u0, SolverParams(256, 1e-3, 0.1))
    xi = flow_map(rec).xi[-1]
    expected = g.points + 0.1 * (u0.values - u0.values[0])
    assert np.max(np.abs((xi - xi[0]) - expected)) < 1e-8


def test_muburgers_characteristics():
    g = PeriodicGrid(256)
    u0 = sample(g, lambda x: 0.5 * np.sin(TWO_PI * x))
    rec = integrate(FamilyConfig.muburgers(), u0, SolverParams(256, 1e-3, 0.2))
    from muflow.grid import trig_interp

    u_t = trig_interp(rec.snapshots[-1], g.points + 0.2 * u0.values)
    assert np.max(np.abs(u_t - u0.values)) < 1e-8


def test_pointwise_law():
    g = PeriodicGrid(32)
    rec = integrate(FamilyConfig.mudp(), PeriodicField(g, np.full(32, 1.0)), SolverParams(32, 0.1, 0.5))
    assert np.max(pointwise_law_deviation(rec, flow_map(rec), 3)) < 1e-14
    rec = integrate(FamilyConfig.mudp(), smooth_u0(128), SolverParams(128, 1e-3, 1.0, track_flow=True))
    dev = rec.invariants["pointwise_dev"]
    assert np.max(dev) < 1e-5
    wrong = pointwise_law_deviation(rec, flow_map(rec), 2)
    assert np.max(wrong) > 1e-2


@pytest.mark.parametrize("lam", [2, 5, -1])
def test_pointwise_law_refines(lam):
    devs = []
    for dt in (1e-2, 5e-3):
        rec = integrate(FamilyConfig(lam), smooth_u0(32), SolverParams(32, dt, 0.5))
        devs.append(np.max(pointwise_law_deviation(rec, flow_map(rec), lam)))
    assert devs[1] < devs[0] / 8


def test_predict_blowup_time():
    g = PeriodicGrid(64)
    assert predict_blowup_time(sample(g, lambda x: np.sin(TWO_PI * x) / TWO_PI)) == pytest.approx(1.0)
    a = 0.3
    assert predict_blowup_time(sample(g, lambda x: a * np.sin(TWO_PI * x))) == pytest.approx(1 / (TWO_PI * a))
    assert predict_blowup_time(PeriodicField(g, np.zeros(64))) == math.inf
    with pytest.raises(MeanNotZero):
        predict_blowup_time(sample(g, lambda x: 1 + np.sin(TWO_PI * x)))


def test_detect_blowup_on_coarse_run():
    g = PeriodicGrid(256)
    u0 = sample(g, lambda x: np.sin(TWO_PI * x) / TWO_PI)
    rec = integrate(FamilyConfig.mudp(), u0, SolverParams(256, 1e-3, 3.0, adaptive=True))
    assert rec.termination.kind == "BlowupDetected"
    assert abs(rec.termination.t_est - 1.0) < 0.02
    assert abs(detect_blowup(rec) - 1.0) < 0.02


def test_detect_blowup_needs_blowup():
    rec = integrate(FamilyConfig.mudp(), smooth_u0(32), SolverParams(32, 0.1, 0.2))
    with pytest.raises(PreconditionError):
        detect_blowup(rec)


def test_global_bound():
    rec = integrate(FamilyConfig.mudp(), smooth_u0(64), SolverParams(64, 5e-3, 10.0, record_every=10))
    ok, margin = global_bound_monitor(rec)
    assert ok and margin > 0
    g = PeriodicGrid(32)
    const = integrate(FamilyConfig.mudp(), PeriodicField(g, np.ones(32)), SolverParams(32, 0.1, 0.5))
    assert global_bound_monitor(const) == (True, 2.0)
    bad = integrate(FamilyConfig.mudp(), invert_A_mu(sample(g, lambda x: np.sin(TWO_PI * x))),
                    SolverParams(32, 0.1, 0.2))
    with pytest.raises(HypothesisViolated):
        global_bound_monitor(bad)


def test_global_bound_constant_is_sharp_enough():
    # |u_x| <= (3/2)||m||_1 for m >= 0, so C = 2 leaves room
    g = PeriodicGrid(512)
    for q in (0.0, 0.3):
        m = PeriodicField(g, np.where(np.arange(512) == int(q * 512), 512.0, 0.0)) + 1e-3
        u = invert_A_mu(m)
        assert np.max(np.abs(spectral_deriv(u.values, 1))) <= 1.5 * np.mean(m.values)
