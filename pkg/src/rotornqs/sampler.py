"""Metropolis sampling of ``|psi|^2`` for the rotor RBM.

Proposals move one rotor at a time, ``theta_j -> wrap(theta_j + delta)`` with
``delta ~ Uniform(-a, a)``, visiting rotors in index order. The acceptance
probability is ``min(1, exp(2 * (log psi' - log psi)))``; only the ``m``
hidden units touched by rotor ``j`` are re-evaluated per proposal.

All random numbers are drawn up front from a numpy ``Generator`` and handed
to the compiled kernel, so a chain is reproducible from its seed alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .bessel import _log_i0
from .model import _wrap_scalar
from .rbm import RbmCache, RbmParams

SWEEP = "sweep"
MOVE = "move"


@dataclass(frozen=True)
class SamplerSettings:
    """Markov chain schedule.

    ``total_samples``, ``burn_in`` and ``thin`` count sample units: full
    n-rotor sweeps when ``unit == "sweep"``, single-rotor proposals when
    ``unit == "move"``. Each of the ``chains`` independent chains runs the
    whole schedule, seeded with ``seed + chain_index``.
    """

    total_samples: int = 24000
    burn_in: int = 4000
    thin: int = 20
    proposal_width: float = 1.0
    seed: int = 0
    chains: int = 1
    unit: str = SWEEP

    def __post_init__(self):
        if self.burn_in < 0 or self.burn_in >= self.total_samples:
            raise ValueError("need 0 <= burn_in < total_samples")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if self.proposal_width <= 0:
            raise ValueError("proposal_width must be positive")
        if self.chains < 1:
            raise ValueError("chains must be at least 1")
        if self.unit not in (SWEEP, MOVE):
            raise ValueError(f"unit must be {SWEEP!r} or {MOVE!r}")
        if self.retained < 2:
            raise ValueError("schedule retains fewer than 2 samples")

    @property
    def retained_per_chain(self) -> int:
        return (self.total_samples - self.burn_in) // self.thin

    @property
    def retained(self) -> int:
        return self.chains * self.retained_per_chain


@njit(cache=True)
def _rebuild(a, b, theta, x, y, li):
    m, n = a.shape
    for j in range(n):
        x[j, 0] = math.cos(theta[j])
        x[j, 1] = math.sin(theta[j])
    for i in range(m):
        s0 = b[i, 0]
        s1 = b[i, 1]
        for j in range(n):
            s0 += a[i, j] * x[j, 0]
            s1 += a[i, j] * x[j, 1]
        y[i, 0] = s0
        y[i, 1] = s1
        li[i] = _log_i0(math.sqrt(s0 * s0 + s1 * s1))


@njit(cache=True)
def _run_chain(a, b, c, theta, deltas, uniforms, unit_len, burn_in, thin, out):
    """Advance one chain through ``len(deltas)`` proposals.

    ``theta`` is updated in place. Retained configurations go to ``out``;
    the cache is rebuilt from scratch at every retained sample so that
    incremental round-off cannot accumulate. Returns the accepted count.
    """
    m, n = a.shape
    x = np.empty((n, 2))
    y = np.empty((m, 2))
    li = np.empty(m)
    y_new = np.empty((m, 2))
    li_new = np.empty(m)

    _rebuild(a, b, theta, x, y, li)
    accepted = 0
    rec = 0
    for k in range(deltas.shape[0]):
        j = k % n
        t_new = _wrap_scalar(theta[j] + deltas[k])
        cx = math.cos(t_new)
        sx = math.sin(t_new)
        dx0 = cx - x[j, 0]
        dx1 = sx - x[j, 1]
        dlog = c[j, 0] * dx0 + c[j, 1] * dx1
        for i in range(m):
            v0 = y[i, 0] + a[i, j] * dx0
            v1 = y[i, 1] + a[i, j] * dx1
            y_new[i, 0] = v0
            y_new[i, 1] = v1
            li_new[i] = _log_i0(math.sqrt(v0 * v0 + v1 * v1))
            dlog += li_new[i] - li[i]
        if dlog >= 0.0 or uniforms[k] < math.exp(2.0 * dlog):
            accepted += 1
            theta[j] = t_new
            x[j, 0] = cx
            x[j, 1] = sx
            for i in range(m):
                y[i, 0] = y_new[i, 0]
                y[i, 1] = y_new[i, 1]
                li[i] = li_new[i]
        if (k + 1) % unit_len == 0:
            s = (k + 1) // unit_len
            if s > burn_in and (s - burn_in) % thin == 0 and rec < out.shape[0]:
                for jj in range(n):
                    out[rec, jj] = theta[jj]
                rec += 1
                _rebuild(a, b, theta, x, y, li)
    return accepted


class MarkovChains:
    """Persistent state of independent chains, carried across optimisation steps.

    Each chain owns its configuration and a private ``Generator`` seeded with
    ``seed + chain_index``; chains are advanced and concatenated in index
    order, so results do not depend on scheduling.
    """

    def __init__(self, n: int, settings: SamplerSettings):
        self.n = n
        self.settings = settings
        self.rngs = [np.random.default_rng(settings.seed + c) for c in range(settings.chains)]
        self.thetas = [rng.uniform(-np.pi, np.pi, n) for rng in self.rngs]

    def sample(self, params: RbmParams):
        """Run every chain through the full schedule.

        Returns ``(samples, acceptance_rate)`` with ``samples`` of shape
        ``(retained, n)``.
        """
        s = self.settings
        unit_len = self.n if s.unit == SWEEP else 1
        proposals = s.total_samples * unit_len
        per_chain = s.retained_per_chain
        out = np.empty((s.chains * per_chain, self.n))
        accepted = 0
        for c, (rng, theta) in enumerate(zip(self.rngs, self.thetas)):
            deltas = rng.uniform(-s.proposal_width, s.proposal_width, proposals)
            uniforms = rng.random(proposals)
            accepted += _run_chain(
                params.a, params.b, params.c, theta, deltas, uniforms,
                unit_len, s.burn_in, s.thin, out[c * per_chain:(c + 1) * per_chain],
            )
        return out, accepted / (proposals * s.chains)


def metropolis_sweep(params: RbmParams, cache: RbmCache, settings: SamplerSettings, rng):
    """One in-order sweep of single-rotor proposals on ``cache``.

    The cache is brought up to date with the final configuration. Returns
    ``(cache, acceptance_rate)``.
    """
    n = params.n
    theta = np.array(cache.theta, dtype=float)
    width = settings.proposal_width
    deltas = rng.uniform(-width, width, n)
    uniforms = rng.random(n)
    out = np.empty((0, n))
    accepted = _run_chain(params.a, params.b, params.c, theta, deltas, uniforms, n, 0, 1, out)
    fresh = RbmCache.build(params, theta)
    cache.theta, cache.x, cache.y, cache.r = fresh.theta, fresh.x, fresh.y, fresh.r
    return cache, accepted / n
