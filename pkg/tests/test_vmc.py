import math

import numpy as np
import pytest
from scipy.sparse.linalg import LinearOperator

from rotornqs.model import RotorGraph, eigenvalue_lower_bound, potential_energy, rayleigh_quotient_quadrature
from rotornqs.rbm import RbmCache, RbmParams, log_psi_batch, param_gradient_batch
from rotornqs.report import rolling_average
from rotornqs.sampler import MarkovChains, SamplerSettings
from rotornqs.vmc import (
    SrSettings,
    SrSolveError,
    VmcDivergence,
    estimate_energy_and_gradient,
    local_energy,
    local_energy_batch,
    run_vmc,
    sr_statistics,
    sr_step,
)

from .helpers import chain, random_params


def fd_local_energy(graph, p, theta, step=1e-4):
    """``(H psi) / psi`` from central differences of ``exp(log psi)``."""
    base = log_psi_batch(p, theta)
    kin = 0.0
    for j in range(graph.n):
        e = np.zeros(graph.n)
        e[j] = step
        up = math.exp(log_psi_batch(p, theta + e) - base)
        dn = math.exp(log_psi_batch(p, theta - e) - base)
        kin += -0.5 * graph.h[j] * (up - 2.0 + dn) / step**2
    return kin + potential_energy(graph, theta)


def grid_expectations(graph, p, points):
    axis = -np.pi + 2 * np.pi * np.arange(points) / points
    pts = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    lp = log_psi_batch(p, pts)
    w = np.exp(2 * (lp - lp.max()))
    w /= w.sum()
    e = local_energy_batch(graph, p, pts)
    o = param_gradient_batch(p, pts)
    e_mean = w @ e
    o_mean = w @ o
    return e_mean, (w * (e - e_mean)) @ (o - o_mean)


# local energy

def test_uniform_state_local_energy_is_potential(rng):
    g = chain(3)
    p = RbmParams.zeros(4, 3)
    theta = rng.uniform(-np.pi, np.pi, 3)
    assert local_energy(g, p, RbmCache.build(p, theta)) == potential_energy(g, theta)


@pytest.mark.parametrize("seed", range(8))
def test_local_energy_matches_finite_difference_hamiltonian(seed):
    rng = np.random.default_rng(seed)
    g = chain(2)
    p = random_params(rng, 3, 2)
    theta = rng.uniform(-np.pi, np.pi, 2)
    e = local_energy(g, p, RbmCache.build(p, theta))
    assert e == pytest.approx(fd_local_energy(g, p, theta), rel=1e-5)


def test_free_rotor_with_visible_bias():
    g = RotorGraph(1, [], 5.0, [])
    p = RbmParams(np.zeros((1, 1)), np.zeros((1, 2)), [[1.0, 0.0]])
    theta = np.linspace(-np.pi, np.pi, 9, endpoint=False)
    expected = 2.5 * (np.cos(theta) - np.sin(theta) ** 2)
    np.testing.assert_allclose(local_energy_batch(g, p, theta[:, None]), expected, atol=1e-14)


def test_local_energy_mean_equals_rayleigh_quotient(rng):
    g = chain(2)
    p = random_params(rng, 2, 2, scale=0.5)
    e_mean, _ = grid_expectations(g, p, 128)
    quad = rayleigh_quotient_quadrature(g, lambda t: log_psi_batch(p, t), 512)
    assert e_mean == pytest.approx(quad, rel=1e-4)


# SR statistics and step

def test_statistics_of_constant_energy(rng):
    o = rng.standard_normal((50, 6))
    mean, std, force, metric = sr_statistics(np.full(50, 3.0), o)
    assert mean == 3.0 and std == 0.0
    np.testing.assert_array_equal(force, 0.0)
    np.testing.assert_allclose(metric, np.cov(o.T, bias=True), atol=1e-14)


def test_statistics_invariant_under_duplication(rng):
    e = rng.standard_normal(40)
    o = rng.standard_normal((40, 5))
    a = sr_statistics(e, o)
    b = sr_statistics(np.concatenate([e, e]), np.concatenate([o, o]))
    assert a[0] == pytest.approx(b[0], abs=1e-15)
    np.testing.assert_allclose(a[2], b[2], atol=1e-15)
    np.testing.assert_allclose(a[3], b[3], atol=1e-15)


def test_metric_is_symmetric_psd_and_operator_form_agrees(rng):
    e = rng.standard_normal(30)
    o = rng.standard_normal((30, 8))
    _, _, _, s = sr_statistics(e, o)
    np.testing.assert_array_equal(s, s.T)
    assert np.linalg.eigvalsh(s).min() > -1e-12
    _, _, _, op = sr_statistics(e, o, dense=False)
    v = rng.standard_normal(8)
    np.testing.assert_allclose(op @ v, s @ v, atol=1e-13)


def test_statistics_need_two_samples():
    with pytest.raises(ValueError):
        sr_statistics(np.ones(1), np.ones((1, 3)))


def test_sr_step_fixed_point_and_limits(rng):
    p = random_params(rng, 2, 2)
    sr = SrSettings(learning_rate=0.1, sr_shift=1e-6)
    size = p.size
    same = sr_step(p, np.zeros(size), np.eye(size), sr)
    np.testing.assert_array_equal(same.flatten(), p.flatten())

    f = rng.standard_normal(size)
    plain = sr_step(p, f, np.zeros((size, size)), sr)
    np.testing.assert_allclose(plain.flatten(), p.flatten() - 0.1 * f / 1e-6, rtol=1e-12)

    ident = sr_step(p, f, np.eye(size), SrSettings(learning_rate=1.0, sr_shift=0.0))
    np.testing.assert_allclose(ident.flatten(), p.flatten() - f, atol=1e-15)


def test_sr_step_iterative_path_matches_direct(rng):
    p = random_params(rng, 3, 2)
    o = rng.standard_normal((100, p.size))
    e = rng.standard_normal(100)
    _, _, f, s = sr_statistics(e, o)
    _, _, _, op = sr_statistics(e, o, dense=False)
    sr = SrSettings(learning_rate=0.01, sr_shift=1e-3)
    assert isinstance(op, LinearOperator)
    np.testing.assert_allclose(sr_step(p, f, op, sr).flatten(), sr_step(p, f, s, sr).flatten(), rtol=1e-8)


def test_sr_step_errors(rng):
    p = random_params(rng, 2, 2)
    with pytest.raises(ValueError):
        sr_step(p, np.zeros(3), np.eye(3), SrSettings())
    with pytest.raises(SrSolveError):
        sr_step(p, np.ones(p.size), -np.eye(p.size), SrSettings(sr_shift=0.0))


# gradient convention

def test_force_is_half_the_rayleigh_gradient():
    rng = np.random.default_rng(5)
    g = chain(2)
    p = random_params(rng, 1, 2, scale=0.5)
    _, force = grid_expectations(g, p, 256)
    flat = p.flatten()
    grad = np.empty_like(flat)
    step = 1e-4
    for k in range(flat.size):
        e = np.zeros_like(flat)
        e[k] = step
        r = [
            rayleigh_quotient_quadrature(g, lambda t, q=q: log_psi_batch(RbmParams.from_flat(q, 1, 2), t), 512)
            for q in (flat + e, flat - e)
        ]
        grad[k] = (r[0] - r[1]) / (2 * step)
    np.testing.assert_allclose(force, 0.5 * grad, atol=2e-4 * np.max(np.abs(grad)))


@pytest.mark.slow
def test_sampled_force_within_three_standard_errors():
    rng = np.random.default_rng(5)
    g = chain(2)
    p = random_params(rng, 1, 2, scale=0.5)
    _, exact = grid_expectations(g, p, 256)
    s = SamplerSettings(total_samples=102000, burn_in=2000, thin=2, seed=11)
    theta, _ = MarkovChains(2, s).sample(p)
    e = local_energy_batch(g, p, theta)
    o = param_gradient_batch(p, theta)
    prod = (e - e.mean())[:, None] * (o - o.mean(axis=0))
    # batch means absorb the residual autocorrelation
    batches = prod.reshape(100, -1, prod.shape[1]).mean(axis=1)
    se = batches.std(axis=0, ddof=1) / math.sqrt(100)
    assert np.all(np.abs(prod.mean(axis=0) - exact) < 3 * se)


def test_estimate_reports_sample_count(rng):
    g = chain(2)
    p = random_params(rng, 2, 2)
    s = SamplerSettings(total_samples=220, burn_in=20, thin=4, chains=2)
    est, f, metric = estimate_energy_and_gradient(g, p, s)
    assert est.samples == 100
    assert est.std >= 0
    assert est.grad_norm == pytest.approx(np.linalg.norm(f))
    assert metric.shape == (p.size, p.size)


# optimisation loop

SMALL = SamplerSettings(total_samples=1100, burn_in=100, thin=2, seed=3)


def test_free_rotor_converges_to_zero():
    g = RotorGraph(1, [], 5.0, [])
    init = RbmParams.random(3, 1, seed=0, scale=0.3)
    _, report = run_vmc(g, init, SMALL, SrSettings(learning_rate=0.05, steps=150), rolling_window=20)
    assert report.extra["last_energy"] < 1e-3
    assert report.extra["last_std"] < 1e-2
    assert report.records[-1]["energy_std"] < report.records[0]["energy_std"]


def test_run_is_deterministic():
    g = chain(3)
    init = RbmParams.random(4, 3, seed=1)
    sr = SrSettings(steps=15)
    _, r1 = run_vmc(g, init, SMALL, sr)
    _, r2 = run_vmc(g, init, SMALL, sr)
    assert r1.csv_text(include_timing=False) == r2.csv_text(include_timing=False)
    assert r1.final_energy == r2.final_energy


def test_report_contents():
    g = chain(2)
    _, report = run_vmc(g, RbmParams.random(2, 2, seed=0), SMALL, SrSettings(steps=12), 5, snapshot_steps=(3, 11))
    assert report.csv_text().splitlines()[0] == "step,energy_mean,energy_std,grad_norm,acceptance_rate,wall_ms"
    assert len(report.records) == 12
    energies = [r["energy_mean"] for r in report.records]
    assert report.final_energy == pytest.approx(np.mean(energies[-5:]))
    np.testing.assert_allclose(report.extra["rolling_energy"], rolling_average(energies, 5))
    assert set(report.extra["snapshots"]) == {3, 11}
    assert report.config["sampler"]["seed"] == 3


def test_energy_never_below_lower_bound():
    g = RotorGraph(3, [(0, 1), (1, 2), (0, 2)], 1.0, [1.0, -0.7, 0.4])
    _, report = run_vmc(g, RbmParams.random(3, 3, seed=2), SMALL, SrSettings(steps=30))
    mu = eigenvalue_lower_bound(g)
    for r in report.records:
        assert r["energy_mean"] >= mu - 5 * r["energy_std"] / math.sqrt(SMALL.retained)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    g = chain(2)
    with pytest.raises(VmcDivergence) as info:
        run_vmc(g, RbmParams.random(2, 2, seed=0), SMALL, SrSettings(learning_rate=1e300, sr_shift=1e-6, steps=5))
    assert info.value.report is not None


def test_model_graph_mismatch():
    with pytest.raises(ValueError):
        run_vmc(chain(3), RbmParams.zeros(2, 2), SMALL, SrSettings(steps=1))
