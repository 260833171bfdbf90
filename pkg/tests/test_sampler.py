import math

import numpy as np
import pytest

from rotornqs.model import pair_difference_marginal
from rotornqs.rbm import RbmCache, RbmParams, log_psi_batch
from rotornqs.sampler import MarkovChains, SamplerSettings, _run_chain, metropolis_sweep

from .helpers import random_params


@pytest.mark.parametrize(
    "kw",
    [
        dict(total_samples=10, burn_in=10),
        dict(total_samples=10, burn_in=-1),
        dict(thin=0),
        dict(proposal_width=0.0),
        dict(chains=0),
        dict(unit="block"),
        dict(total_samples=10, burn_in=8, thin=2),
    ],
)
def test_invalid_settings(kw):
    with pytest.raises(ValueError):
        SamplerSettings(**kw)


def test_retained_count():
    s = SamplerSettings(total_samples=24000, burn_in=4000, thin=20, chains=3)
    assert s.retained_per_chain == 1000
    assert s.retained == 3000


@pytest.mark.parametrize("unit", ["sweep", "move"])
def test_sample_shape_and_range(unit, rng):
    p = random_params(rng, 4, 3)
    s = SamplerSettings(total_samples=103, burn_in=10, thin=4, unit=unit, chains=2)
    out, acc = MarkovChains(3, s).sample(p)
    assert out.shape == (2 * 23, 3)
    assert np.all(out >= -math.pi) and np.all(out < math.pi)
    assert 0.0 <= acc <= 1.0


def test_uniform_model_accepts_everything(rng):
    p = RbmParams.zeros(5, 4)
    cache, rate = metropolis_sweep(p, RbmCache.build(p, np.zeros(4)), SamplerSettings(), rng)
    assert rate == 1.0
    _, acc = MarkovChains(4, SamplerSettings(total_samples=200, burn_in=10, thin=1)).sample(p)
    assert acc == 1.0


def test_vanishing_proposal_width_freezes_chain(rng):
    p = random_params(rng, 3, 2)
    chains = MarkovChains(2, SamplerSettings(total_samples=500, burn_in=10, thin=1, proposal_width=1e-300))
    start = chains.thetas[0].copy()
    out, _ = chains.sample(p)
    np.testing.assert_array_equal(out, np.broadcast_to(start, out.shape))


def test_sweep_keeps_cache_consistent(rng):
    p = random_params(rng, 6, 3)
    cache = RbmCache.build(p, rng.uniform(-np.pi, np.pi, 3))
    for _ in range(20):
        cache, _ = metropolis_sweep(p, cache, SamplerSettings(), rng)
    fresh = RbmCache.build(p, cache.theta)
    np.testing.assert_allclose(cache.y, fresh.y, atol=1e-14)


def test_chains_are_deterministic_and_seeded_per_chain(rng):
    p = random_params(rng, 4, 3)
    s = SamplerSettings(total_samples=300, burn_in=50, thin=5, seed=7, chains=3)
    a, acc_a = MarkovChains(3, s).sample(p)
    b, acc_b = MarkovChains(3, s).sample(p)
    assert a.tobytes() == b.tobytes() and acc_a == acc_b
    # chain 2 of seed 7 is chain 0 of seed 9
    single = SamplerSettings(total_samples=300, burn_in=50, thin=5, seed=9)
    c, _ = MarkovChains(3, single).sample(p)
    np.testing.assert_array_equal(a[2 * 50:], c)


def test_chains_persist_between_calls(rng):
    p = random_params(rng, 2, 2)
    s = SamplerSettings(total_samples=40, burn_in=0, thin=1)
    mc = MarkovChains(2, s)
    first, _ = mc.sample(p)
    np.testing.assert_array_equal(mc.thetas[0], first[-1])


def _accept_probability(p, theta, target, trials, rng):
    hits = 0
    for u in rng.random(trials):
        th = np.array([theta])
        hits += _run_chain(p.a, p.b, p.c, th, np.array([target - theta]), np.array([u]), 1, 0, 1, np.empty((0, 1)))
    return hits / trials


def test_detailed_balance_on_proposal_pairs(rng):
    p = RbmParams([[1.3]], [[0.4, -0.2]], [[0.7, 0.3]])
    density = lambda t: math.exp(2 * float(log_psi_batch(p, np.array([t]))))  # noqa: E731
    for t0, t1 in [(-2.0, -1.4), (0.3, 0.9), (2.8, -2.9)]:
        fwd = _accept_probability(p, t0, t1, 20000, rng)
        bwd = _accept_probability(p, t1, t0, 20000, rng)
        lhs, rhs = density(t0) * fwd, density(t1) * bwd
        assert lhs == pytest.approx(rhs, rel=0.05)


def test_single_rotor_stationary_distribution(rng):
    p = RbmParams([[0.8]], [[0.5, 0.0]], [[0.6, 0.0]])
    s = SamplerSettings(total_samples=42000, burn_in=2000, thin=2, seed=1)
    out, _ = MarkovChains(1, s).sample(p)
    grid = np.linspace(-np.pi, np.pi, 4001)
    w = np.exp(2 * log_psi_batch(p, grid[:, None]))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    emp = np.searchsorted(np.sort(out[:, 0]), grid, side="right") / out.shape[0]
    assert np.max(np.abs(emp - cdf)) < 0.02


@pytest.mark.slow
def test_pair_difference_marginal_small():
    p = RbmParams([[0.9, -0.9]], [[0.0, 0.0]], np.zeros((2, 2)))
    phi, dens = pair_difference_marginal(lambda t: log_psi_batch(p, t), 512)
    s = SamplerSettings(total_samples=42000, burn_in=2000, thin=2, seed=2)
    out, _ = MarkovChains(2, s).sample(p)
    d = np.mod(out[:, 0] - out[:, 1] + np.pi, 2 * np.pi) - np.pi
    dphi = phi[1] - phi[0]
    cdf = np.cumsum(dens) * dphi
    emp = np.searchsorted(np.sort(d), phi + dphi, side="right") / d.size
    assert np.max(np.abs(emp - cdf)) < 0.02
