import numpy as np
import pytest

from muflow.errors import EvalError, MeanNotZero, ParseError
from muflow.grid import (
    PeriodicField,
    PeriodicGrid,
    antideriv_zero_mean,
    chop_coefficients,
    dealias_mask,
    deriv,
    interpolate,
    make_grid,
    mean,
    parse_initial,
    sample,
    spectral_deriv,
)

from conftest import band_limited

TWO_PI = 2 * np.pi


@pytest.mark.parametrize("n", [7, 6, 0, -8])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        PeriodicGrid(n)


def test_grid_points_and_spacing():
    g = make_grid(16)
    assert g.spacing == 1 / 16
    assert np.array_equal(g.points, np.arange(16) / 16)
    with pytest.raises(ValueError):
        g.points[0] = 1.0


def test_field_checks_shape_grid_and_finiteness():
    g = PeriodicGrid(8)
    with pytest.raises(ValueError):
        PeriodicField(g, np.zeros(7))
    with pytest.raises(ValueError):
        PeriodicField(g, np.full(8, np.nan))
    f = PeriodicField(g, np.ones(8))
    with pytest.raises(ValueError):
        f + PeriodicField(PeriodicGrid(16), np.ones(16))
    assert (2 * f - f).sup() == 1.0


def test_mean_is_trapezoid():
    g = PeriodicGrid(64)
    assert mean(sample(g, lambda x: 2 + np.cos(TWO_PI * x))) == pytest.approx(2.0, abs=1e-15)


def test_derivatives_of_harmonics():
    g = PeriodicGrid(64)
    s = sample(g, lambda x: np.sin(TWO_PI * 3 * x))
    assert np.max(np.abs(deriv(s).values - 6 * np.pi * np.cos(6 * np.pi * g.points))) < 1e-11
    assert np.max(np.abs(deriv(s, 2).values + (6 * np.pi) ** 2 * s.values)) < 1e-9


def test_nyquist_zeroed_for_odd_orders():
    g = PeriodicGrid(16)
    nyq = PeriodicField(g, (-1.0) ** np.arange(16))
    assert deriv(nyq).sup() < 1e-12
    assert deriv(nyq, 2).sup() > 1.0


def test_antiderivative_roundtrip(rng):
    g = PeriodicGrid(128)
    f = band_limited(g, rng)
    f = f - mean(f)
    assert (deriv(antideriv_zero_mean(f)) - f).sup() < 1e-10
    assert abs(mean(antideriv_zero_mean(f))) < 1e-14


def test_antiderivative_rejects_mean():
    g = PeriodicGrid(16)
    with pytest.raises(MeanNotZero):
        antideriv_zero_mean(PeriodicField(g, np.ones(16)))


def test_derivative_is_linear_and_mean_free(rng):
    g = PeriodicGrid(128)
    f, h = band_limited(g, rng), band_limited(g, rng)
    lhs = deriv(2.5 * f - 3 * h)
    rhs = 2.5 * deriv(f) - 3 * deriv(h)
    assert (lhs - rhs).sup() < 1e-12
    assert abs(mean(deriv(f))) < 1e-13


def test_chop_before_high_derivative():
    g = PeriodicGrid(256)
    f = sample(g, lambda x: np.sin(TWO_PI * x))
    exact = TWO_PI**5 * np.cos(TWO_PI * g.points)
    chopped = spectral_deriv(f.values, 5, chop=1e-12)
    assert np.max(np.abs(chopped - exact)) < 1e-9 * TWO_PI**5
    c = chop_coefficients(np.array([1.0, 1e-14, 0.5]), 1e-12)
    assert list(c) == [1.0, 0.0, 0.5]


def test_dealias_mask_two_thirds():
    mask = dealias_mask(12)
    assert list(np.flatnonzero(mask)) == [0, 1, 2, 3, 4]


def test_interpolate_matches_function():
    g = PeriodicGrid(32)
    f = sample(g, lambda x: np.cos(TWO_PI * x) + 0.5 * np.sin(TWO_PI * 2 * x))
    pts = np.array([0.123, 0.5, 0.987])
    exact = np.cos(TWO_PI * pts) + 0.5 * np.sin(TWO_PI * 2 * pts)
    assert np.max(np.abs(interpolate(f, pts) - exact)) < 1e-13


def test_parse_initial_examples():
    g = PeriodicGrid(64)
    f = parse_initial("sin(2*pi*x)", g)
    assert np.max(np.abs(f.values - np.sin(TWO_PI * g.points))) < 1e-15
    h = parse_initial("2 + 0.5*cos(2*pi*x)", g)
    assert np.min(h.values) > 0 and mean(h) == pytest.approx(2.0, abs=1e-14)
    with pytest.raises(ParseError) as err:
        parse_initial("sin(2*pi*x", g)
    assert "expected ')'" in str(err.value)
    with pytest.raises(EvalError):
        parse_initial("1/(x-x)", g)
