r"""Rotor restricted Boltzmann machine on the circle.

Visible rotors are embedded as unit vectors ``x_j = (cos theta_j, sin theta_j)``.
Integrating out ``m`` hidden rotors gives the log amplitude

.. math::
    \log\psi(\theta) = \sum_j \langle c_j, x_j\rangle + \sum_i \log[2\pi I_0(r_i)],
    \qquad y_i = \sum_j a_{ij} x_j + b_i,\quad r_i = \|y_i\|.

Parameters are flattened as ``a`` (row-major, ``m x n``), then ``b``
(``m x 2``), then ``c`` (``n x 2``); ``P = mn + 2m + 2n``.

The array helpers in this module accept arbitrary leading batch axes so the
same code evaluates one cached configuration or a whole block of samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bessel import log_i0, ratio_derivative, ratio_over_x
from .model import wrap_angle

LOG_2PI = math.log(2.0 * math.pi)
SMALL_R = 1e-8


@dataclass(frozen=True)
class RbmParams:
    """Variational parameters ``a`` (m, n), ``b`` (m, 2), ``c`` (n, 2)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float, ndmin=2)
        m, n = a.shape
        b = np.array(self.b, dtype=float).reshape(m, 2)
        c = np.array(self.c, dtype=float).reshape(n, 2)
        for name, arr in (("a", a), ("b", b), ("c", c)):
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"non-finite entries in RBM parameter {name}")
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return self.a.shape[0]

    @property
    def n(self) -> int:
        return self.a.shape[1]

    @property
    def size(self) -> int:
        return self.m * self.n + 2 * self.m + 2 * self.n

    @classmethod
    def zeros(cls, m: int, n: int) -> "RbmParams":
        return cls(np.zeros((m, n)), np.zeros((m, 2)), np.zeros((n, 2)))

    @classmethod
    def random(cls, m: int, n: int, seed=None, scale: float = 0.01) -> "RbmParams":
        """Independent Gaussian entries with standard deviation ``scale``."""
        rng = np.random.default_rng(seed)
        return cls.from_flat(rng.normal(0.0, scale, m * n + 2 * m + 2 * n), m, n)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.a.ravel(), self.b.ravel(), self.c.ravel()])

    @classmethod
    def from_flat(cls, vec, m: int, n: int) -> "RbmParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (m * n + 2 * m + 2 * n,):
            raise ValueError(f"expected {m * n + 2 * m + 2 * n} parameters, got {vec.shape}")
        k = m * n
        return cls(vec[:k].reshape(m, n), vec[k:k + 2 * m].reshape(m, 2), vec[k + 2 * m:].reshape(n, 2))

    def save(self, path) -> None:
        """JSON checkpoint; Python's float repr makes the round trip exact."""
        doc = {"m": self.m, "n": self.n, "params": self.flatten().tolist()}
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def load(cls, path) -> "RbmParams":
        doc = json.loads(Path(path).read_text())
        return cls.from_flat(doc["params"], int(doc["m"]), int(doc["n"]))


@dataclass
class RbmCache:
    """Per-configuration quantities: angles, embedded rotors, pre-activations.

    Owned by a single Markov chain; :func:`update_rotor` mutates it in place.
    """

    theta: np.ndarray
    x: np.ndarray
    y: np.ndarray
    r: np.ndarray

    @classmethod
    def build(cls, params: RbmParams, theta) -> "RbmCache":
        theta = np.array(theta, dtype=float)
        if theta.shape[-1] != params.n:
            raise ValueError(f"configuration has {theta.shape[-1]} angles, model has n={params.n}")
        x = embed(theta)
        y = preactivations(params, x)
        return cls(theta, x, y, np.linalg.norm(y, axis=-1))

    def copy(self) -> "RbmCache":
        return RbmCache(self.theta.copy(), self.x.copy(), self.y.copy(), self.r.copy())


def embed(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def preactivations(params: RbmParams, x: np.ndarray) -> np.ndarray:
    return np.einsum("ij,...jk->...ik", params.a, x) + params.b


def _log_psi_arrays(params, x, r):
    vis = np.einsum("jk,...jk->...", params.c, x)
    return vis + np.sum(LOG_2PI + log_i0(r), axis=-1)


def _param_gradient_arrays(params, x, y, r):
    q = ratio_over_x(r)  # g(r)/r, equal to 1/2 at r = 0
    o_b = q[..., None] * y
    o_a = q[..., None] * np.einsum("...ik,...jk->...ij", y, x)
    lead = x.shape[:-2]
    return np.concatenate(
        [o_a.reshape(lead + (-1,)), o_b.reshape(lead + (-1,)), x.reshape(lead + (-1,))], axis=-1
    )


def _angle_derivative_arrays(params, x, y, r):
    a = params.a
    t = np.stack([-x[..., 1], x[..., 0]], axis=-1)
    q = ratio_over_x(r)
    gp = ratio_derivative(r)
    safe = r >= SMALL_R
    inv_r = np.where(safe, 1.0 / np.where(safe, r, 1.0), 0.0)
    yt = np.einsum("...ik,...jk->...ij", y, t)
    yx = np.einsum("...ik,...jk->...ij", y, x)
    u = yt * inv_r[..., None]  # <y_hat_i, t_j>, zero where r_i vanishes

    first = np.einsum("jk,...jk->...j", params.c, t) + np.einsum("...i,ij,...ij->...j", q, a, yt)
    second = (
        -np.einsum("jk,...jk->...j", params.c, x)
        + np.einsum("...i,ij,...ij->...j", gp, a * a, u * u)
        + np.einsum("...i,ij,...ij->...j", q, a * a, 1.0 - u * u)
        - np.einsum("...i,ij,...ij->...j", q, a, yx)
    )
    return first, second


def log_psi(params: RbmParams, cache: RbmCache) -> float:
    """Log amplitude of the cached configuration."""
    val = _log_psi_arrays(params, cache.x, cache.r)
    if not np.all(np.isfinite(val)):
        raise FloatingPointError("log_psi is not finite")
    return float(val)


def param_gradient(params: RbmParams, cache: RbmCache) -> np.ndarray:
    """``d log psi / d p`` in the flattened parameter order."""
    return _param_gradient_arrays(params, cache.x, cache.y, cache.r)


def angle_derivatives(params: RbmParams, cache: RbmCache):
    """First and second derivatives of ``log psi`` with respect to each angle."""
    return _angle_derivative_arrays(params, cache.x, cache.y, cache.r)


def update_rotor(params: RbmParams, cache: RbmCache, j: int, theta_new: float) -> RbmCache:
    """Move rotor ``j`` to ``theta_new`` (wrapped) in O(m), updating the cache in place."""
    if not 0 <= j < params.n:
        raise IndexError(f"rotor index {j} out of range for n={params.n}")
    theta_new = wrap_angle(float(theta_new))
    x_new = embed(float(theta_new))
    cache.y += np.outer(params.a[:, j], x_new - cache.x[j])
    cache.r = np.sqrt(np.einsum("ik,ik->i", cache.y, cache.y))
    cache.x[j] = x_new
    cache.theta[j] = theta_new
    return cache


def log_psi_batch(params: RbmParams, theta) -> np.ndarray:
    """Log amplitude for configurations of shape ``(..., n)``."""
    x = embed(theta)
    y = preactivations(params, x)
    return _log_psi_arrays(params, x, np.linalg.norm(y, axis=-1))


def param_gradient_batch(params: RbmParams, theta) -> np.ndarray:
    """Per-sample log derivatives, shape ``(..., P)``."""
    x = embed(theta)
    y = preactivations(params, x)
    return _param_gradient_arrays(params, x, y, np.linalg.norm(y, axis=-1))


def angle_derivatives_batch(params: RbmParams, theta):
    x = embed(theta)
    y = preactivations(params, x)
    return _angle_derivative_arrays(params, x, y, np.linalg.norm(y, axis=-1))


def log_psi_callable(params: RbmParams):
    """Adapter for the quadrature oracle, which expects ``f(theta) -> log psi``."""
    return lambda theta: log_psi_batch(params, theta)

