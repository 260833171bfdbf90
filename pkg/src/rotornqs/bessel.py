r"""Modified Bessel kernels of integer order 0 and 1.

Only the combinations needed by the rotor RBM are exposed, all evaluated
without overflow for large arguments:

* ``log_i0(x)``          :math:`\log I_0(x)`
* ``bessel_ratio(x)``    :math:`g(x) = I_1(x) / I_0(x)`
* ``ratio_over_x(x)``    :math:`g(x) / x`, finite at ``x = 0`` (limit 1/2)
* ``ratio_derivative(x)`` :math:`g'(x) = 1 - g(x)/x - g(x)^2`

For ``x < SERIES_CUTOFF`` the ascending power series is summed directly
(all terms positive, so there is no cancellation). Above the cutoff the
Hankel large-argument expansion of the exponentially scaled functions is
used, truncated at its smallest term.

Every kernel exists twice: a scalar ``njit`` function (prefixed with an
underscore) for use inside compiled loops, and a numpy ufunc.
"""

import math

import numpy as np
from numba import njit, vectorize

SERIES_CUTOFF = 20.0
_LOG_2PI = math.log(2.0 * math.pi)


def _series(x):
    # returns (I0(x) - 1, I1(x)/x); the offset keeps log1p accurate near 0
    q = 0.25 * x * x
    t0 = 1.0
    t1 = 0.5
    s0 = 0.0
    s1 = t1
    k = 0
    while True:
        k += 1
        t0 *= q / (k * k)
        t1 *= q / (k * (k + 1))
        s0 += t0
        s1 += t1
        if t0 <= 1e-17 * (1.0 + s0) and t1 <= 1e-17 * s1:
            break
    return s0, s1


def _asymptotic(x):
    # returns (I0(x) e^-x sqrt(2 pi x), I1(x) e^-x sqrt(2 pi x))
    s0 = 1.0
    s1 = 1.0
    t0 = 1.0
    t1 = 1.0
    live0 = True
    live1 = True
    k = 0
    while live0 or live1:
        k += 1
        odd = (2 * k - 1) * (2 * k - 1)
        if live0:
            nxt = t0 * odd / (8.0 * k * x)
            if nxt >= abs(t0) or nxt < 1e-18:
                live0 = False
            else:
                t0 = nxt
                s0 += t0
        if live1:
            nxt = -t1 * (4.0 - odd) / (8.0 * k * x)
            if abs(nxt) >= abs(t1) or abs(nxt) < 1e-18:
                live1 = False
            else:
                t1 = nxt
                s1 += t1
    return s0, s1


_series_jit = njit(cache=True)(_series)
_asymptotic_jit = njit(cache=True)(_asymptotic)


def _log_i0_py(x):
    x = abs(x)
    if x < SERIES_CUTOFF:
        i0m1, _ = _series_jit(x)
        return math.log1p(i0m1)
    s0, _ = _asymptotic_jit(x)
    return x - 0.5 * math.log(2.0 * math.pi * x) + math.log(s0)


def _ratio_py(x):
    ax = abs(x)
    if ax < SERIES_CUTOFF:
        i0m1, i1x = _series_jit(ax)
        g = ax * i1x / (1.0 + i0m1)
    else:
        s0, s1 = _asymptotic_jit(ax)
        g = s1 / s0
    return g if x >= 0 else -g


def _ratio_over_x_py(x):
    ax = abs(x)
    if ax < SERIES_CUTOFF:
        i0m1, i1x = _series_jit(ax)
        return i1x / (1.0 + i0m1)
    s0, s1 = _asymptotic_jit(ax)
    return s1 / (s0 * ax)


def _ratio_derivative_py(x):
    ax = abs(x)
    if ax < 1e-8:
        return 0.5
    if ax < SERIES_CUTOFF:
        i0m1, i1x = _series_jit(ax)
        gx = i1x / (1.0 + i0m1)
        g = ax * gx
    else:
        s0, s1 = _asymptotic_jit(ax)
        g = s1 / s0
        gx = g / ax
    return 1.0 - gx - g * g


_log_i0 = njit(cache=True)(_log_i0_py)
_ratio = njit(cache=True)(_ratio_py)
_ratio_over_x = njit(cache=True)(_ratio_over_x_py)
_ratio_derivative = njit(cache=True)(_ratio_derivative_py)

log_i0 = vectorize(["float64(float64)"], cache=True)(_log_i0_py)
bessel_ratio = vectorize(["float64(float64)"], cache=True)(_ratio_py)
ratio_over_x = vectorize(["float64(float64)"], cache=True)(_ratio_over_x_py)
ratio_derivative = vectorize(["float64(float64)"], cache=True)(_ratio_derivative_py)


def log_2pi_i0(x):
    """``log(2 pi I_0(x))``, the per-hidden-unit term of the RBM amplitude."""
    return _LOG_2PI + log_i0(np.asarray(x, dtype=float))
