import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rotornqs.bessel import (
    SERIES_CUTOFF,
    bessel_ratio,
    log_2pi_i0,
    log_i0,
    ratio_derivative,
    ratio_over_x,
)

mpmath.mp.dps = 40


def i0_series(x, terms=40, start=0):
    return math.fsum((x / 2) ** (2 * k) / math.factorial(k) ** 2 for k in range(start, terms))


def i1_series(x, terms=40):
    return math.fsum((x / 2) ** (2 * k + 1) / (math.factorial(k) * math.factorial(k + 1)) for k in range(terms))


GRID = np.geomspace(1e-8, 1e6, 400)


def test_log_i0_at_two_matches_power_series():
    assert log_2pi_i0(2.0) == pytest.approx(math.log(2 * math.pi * i0_series(2.0)), rel=1e-15)


@pytest.mark.parametrize("x", [0.0, 1e-3, 0.5, 3.0, 7.9, 8.1, 15.0, 19.99])
def test_small_argument_against_series(x):
    assert log_i0(x) == pytest.approx(math.log1p(i0_series(x, start=1)), rel=1e-14, abs=1e-300)
    if x > 0:
        assert bessel_ratio(x) == pytest.approx(i1_series(x) / i0_series(x), rel=1e-14)


def test_against_mpmath_on_log_grid():
    for x in GRID:
        i0 = mpmath.besseli(0, x)
        i1 = mpmath.besseli(1, x)
        g = i1 / i0
        assert log_i0(x) == pytest.approx(float(mpmath.log(i0)), rel=2e-15, abs=1e-30)
        assert bessel_ratio(x) == pytest.approx(float(g), rel=2e-15)
        assert ratio_over_x(x) == pytest.approx(float(g / x), rel=2e-15)
        gp = 1 - g / x - g * g
        assert ratio_derivative(x) == pytest.approx(float(gp), rel=1e-9, abs=1e-15)


def test_branches_agree_at_cutoff():
    lo, hi = np.nextafter(SERIES_CUTOFF, 0), SERIES_CUTOFF
    assert log_i0(lo) == pytest.approx(log_i0(hi), rel=1e-14)
    assert bessel_ratio(lo) == pytest.approx(bessel_ratio(hi), rel=1e-14)


def test_limits_at_zero():
    assert log_i0(0.0) == 0.0
    assert bessel_ratio(0.0) == 0.0
    assert ratio_over_x(0.0) == 0.5
    assert ratio_derivative(0.0) == 0.5


def test_ratio_is_bounded_increasing_and_saturates():
    g = bessel_ratio(GRID)
    assert np.all(g >= 0) and np.all(g < 1)
    assert np.all(np.diff(g) > 0)
    assert 1 - g[-1] < 1e-6


@pytest.mark.parametrize("r", [1e3, 1e4])
def test_large_argument_asymptote(r):
    leading = r + math.log(2 * math.pi) - 0.5 * math.log(2 * math.pi * r)
    assert abs(log_2pi_i0(r) - leading) < 1.0 / r


def test_finite_for_huge_arguments():
    x = np.array([1e4, 1e8, 1e12])
    assert np.all(np.isfinite(log_i0(x)))
    assert np.all(np.isfinite(ratio_derivative(x)))


@given(st.floats(min_value=-50, max_value=50, allow_nan=False))
def test_even_and_odd_symmetry(x):
    assert log_i0(-x) == log_i0(x)
    assert bessel_ratio(-x) == -bessel_ratio(x)


@given(st.floats(min_value=1e-3, max_value=200))
def test_derivative_matches_finite_difference(x):
    h = 1e-5 * max(1.0, x)
    fd = (bessel_ratio(x + h) - bessel_ratio(x - h)) / (2 * h)
    assert ratio_derivative(x) == pytest.approx(fd, rel=1e-5, abs=1e-10)
