"""Closed-form Jastrow energy on chain graphs.

For the pair-product state ``log psi = sum_i w_i cos(theta_i - theta_{i+1})``
on a path with uniform vertex weight ``h``, the Rayleigh quotient separates
into independent edge terms::

    E(w) = sum_i [2 beta_i + g(2 w_i) (h/2 w_i - 2 beta_i)],   g = I_1 / I_0
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bessel import bessel_ratio
from .model import RotorGraph

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class JastrowChain:
    n: int
    h: float
    beta: tuple
    w: tuple

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("a Jastrow chain needs at least two rotors")
        if self.h <= 0:
            raise ValueError("h must be positive")
        beta = tuple(float(b) for b in np.broadcast_to(self.beta, (self.n - 1,)))
        w = tuple(float(v) for v in np.broadcast_to(self.w, (self.n - 1,)))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "w", w)

    @classmethod
    def from_graph(cls, graph: RotorGraph, w) -> "JastrowChain":
        """Build from a path graph ``0 - 1 - ... - n-1`` with uniform ``h``."""
        expected = tuple((i, i + 1) for i in range(graph.n - 1))
        if graph.edges != expected:
            raise ValueError("Jastrow closed form applies to path graphs 0-1-...-(n-1) only")
        h = graph.uniform_h()
        if h is None:
            raise ValueError("Jastrow closed form needs a uniform vertex weight")
        return cls(graph.n, h, graph.beta, w)

    def log_psi(self, theta):
        theta = np.asarray(theta, dtype=float)
        d = theta[..., :-1] - theta[..., 1:]
        return np.sum(np.asarray(self.w) * np.cos(d), axis=-1)


def edge_energy(h: float, beta: float, w: float) -> float:
    return float(2.0 * beta + bessel_ratio(2.0 * w) * (0.5 * h * w - 2.0 * beta))


def jastrow_energy(jc: JastrowChain) -> float:
    """Exact ``<psi_J, H psi_J> / <psi_J, psi_J>``."""
    return float(sum(edge_energy(jc.h, b, w) for b, w in zip(jc.beta, jc.w)))


def golden_section(f, lo: float, hi: float, tol: float = 1e-10):
    """Minimise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
    x = 0.5 * (lo + hi)
    return x, f(x)


def optimize_uniform_weight(h: float, beta: float):
    """Best single-edge weight ``w* >= 0`` and its energy per edge."""
    if h <= 0:
        raise ValueError("h must be positive")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    w, e = golden_section(lambda w: edge_energy(h, beta, w), 0.0, 8.0 * beta / h + 4.0)
    if edge_energy(h, beta, 0.0) <= e:
        w, e = 0.0, edge_energy(h, beta, 0.0)
    return w, e
