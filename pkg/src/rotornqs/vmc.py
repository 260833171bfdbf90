"""Variational Monte Carlo for the rotor RBM.

Each optimisation step samples ``|psi|^2`` with :class:`~rotornqs.sampler.MarkovChains`,
estimates the energy, the force ``F_k = <E_loc O_k> - <E_loc><O_k>`` and the
covariance ``S_kl = <O_k O_l> - <O_k><O_l>`` of the log derivatives, then
takes a stochastic reconfiguration step ``p <- p - lr * (S + eps I)^-1 F``.

For real parameters ``F`` is half the gradient of the Rayleigh quotient,
``dR/dp_k = 2 F_k``; the learning rate absorbs the factor.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, cg

from .model import RotorGraph, potential_energy
from .rbm import (
    RbmCache,
    RbmParams,
    angle_derivatives,
    angle_derivatives_batch,
    param_gradient_batch,
)
from .report import VMC_COLUMNS, RunReport, rolling_average
from .sampler import MarkovChains, SamplerSettings

log = logging.getLogger(__name__)

DENSE_SOLVE_LIMIT = 5000


class SrSolveError(RuntimeError):
    """The shifted metric ``S + eps I`` could not be inverted."""


class VmcDivergence(FloatingPointError):
    """Non-finite energy during optimisation; carries the partial report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SrSettings:
    learning_rate: float = 1e-2
    sr_shift: float = 1e-6
    steps: int = 10000

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.sr_shift < 0:
            raise ValueError("sr_shift must be nonnegative")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")


@dataclass(frozen=True)
class EnergyEstimate:
    mean: float
    std: float
    grad_norm: float
    step_index: int = 0
    acceptance_rate: float = float("nan")
    samples: int = 0


def _kinetic_and_potential(graph, first, second, theta):
    kin = -0.5 * np.sum(graph.h_array * (second + first * first), axis=-1)
    return kin + potential_energy(graph, theta)


def local_energy(graph: RotorGraph, params: RbmParams, cache: RbmCache) -> float:
    """``(H psi)(theta) / psi(theta)`` at the cached configuration."""
    first, second = angle_derivatives(params, cache)
    e = float(_kinetic_and_potential(graph, first, second, cache.theta))
    if not np.isfinite(e):
        raise FloatingPointError("non-finite local energy")
    return e


def local_energy_batch(graph: RotorGraph, params: RbmParams, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    first, second = angle_derivatives_batch(params, theta)
    e = _kinetic_and_potential(graph, first, second, theta)
    if not np.all(np.isfinite(e)):
        raise FloatingPointError("non-finite local energy")
    return e


def sr_statistics(e_loc, o, dense: bool = True):
    """Energy mean/std, force ``F`` and metric ``S`` from per-sample data.

    ``e_loc`` has shape ``(N,)`` and ``o`` shape ``(N, P)``. With
    ``dense=False`` the metric is returned as a matrix-free ``LinearOperator``
    built on the centred samples.
    """
    e_loc = np.asarray(e_loc, dtype=float)
    o = np.asarray(o, dtype=float)
    n_s = e_loc.shape[0]
    if n_s < 2:
        raise ValueError("need at least 2 samples")
    e_mean = e_loc.mean()
    de = e_loc - e_mean
    oc = o - o.mean(axis=0)
    force = oc.T @ de / n_s
    if dense:
        metric = oc.T @ oc / n_s
    else:
        p = o.shape[1]
        metric = LinearOperator((p, p), matvec=lambda v: oc.T @ (oc @ v) / n_s, dtype=float)
    return float(e_mean), float(np.sqrt(np.mean(de * de))), force, metric


def estimate_energy_and_gradient(
    graph: RotorGraph,
    params: RbmParams,
    settings: SamplerSettings,
    chains: MarkovChains | None = None,
    step_index: int = 0,
):
    """Sample, then return ``(EnergyEstimate, F, S)``.

    Pass a persistent ``chains`` object to continue existing Markov chains;
    otherwise fresh chains are started from ``settings.seed``.
    """
    if chains is None:
        chains = MarkovChains(params.n, settings)
    theta, acc = chains.sample(params)
    e_loc = local_energy_batch(graph, params, theta)
    o = param_gradient_batch(params, theta)
    mean, std, force, metric = sr_statistics(e_loc, o, dense=params.size <= DENSE_SOLVE_LIMIT)
    est = EnergyEstimate(mean, std, float(np.linalg.norm(force)), step_index, acc, theta.shape[0])
    return est, force, metric


def sr_step(params: RbmParams, force, metric, sr: SrSettings) -> RbmParams:
    """Solve ``(S + eps I) delta = F`` and return ``p - lr * delta``."""
    force = np.asarray(force, dtype=float)
    p = params.size
    if force.shape != (p,) or metric.shape != (p, p):
        raise ValueError("force/metric dimensions do not match the parameter count")
    if isinstance(metric, np.ndarray):
        shifted = metric + sr.sr_shift * np.eye(p)
        try:
            delta = scipy.linalg.cho_solve(scipy.linalg.cho_factor(shifted), force)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SrSolveError(f"S + eps I is not positive definite (eps={sr.sr_shift}): {exc}") from exc
    else:
        op = LinearOperator((p, p), matvec=lambda v: metric @ v + sr.sr_shift * v, dtype=float)
        delta, info = cg(op, force, rtol=1e-10, maxiter=10 * p)
        if info != 0:
            raise SrSolveError(f"iterative SR solve did not converge (info={info})")
    if not np.all(np.isfinite(delta)):
        raise SrSolveError("SR update is not finite")
    return RbmParams.from_flat(params.flatten() - sr.learning_rate * delta, params.m, params.n)


def run_vmc(
    graph: RotorGraph,
    init: RbmParams,
    settings: SamplerSettings,
    sr: SrSettings,
    rolling_window: int = 250,
    snapshot_steps=(),
    log_every: int = 0,
):
    """Optimise ``init`` for ``sr.steps`` steps.

    Returns ``(params, report)``. The report carries one record per step and
    ``extra["rolling_energy"]``, the trailing ``rolling_window``-point mean of
    the step energies. ``snapshot_steps`` selects steps whose estimates are
    copied into ``extra["snapshots"]``.
    """
    if init.n != graph.n:
        raise ValueError(f"model has n={init.n} visible rotors, graph has {graph.n}")
    chains = MarkovChains(graph.n, settings)
    report = RunReport(
        solver="vmc",
        config={
            "graph": graph.to_dict(),
            "hidden": init.m,
            "sampler": asdict(settings),
            "sr": asdict(sr),
            "rolling_window": rolling_window,
        },
        seed=settings.seed,
        columns=VMC_COLUMNS,
    )
    snapshot_steps = set(snapshot_steps)
    snapshots = {}
    params = init
    start = time.perf_counter()
    for step in range(sr.steps):
        t0 = time.perf_counter()
        try:
            est, force, metric = estimate_energy_and_gradient(graph, params, settings, chains, step)
            if not np.isfinite(est.mean):
                raise FloatingPointError("non-finite energy estimate")
            params = sr_step(params, force, metric, sr)
        except (FloatingPointError, SrSolveError) as exc:
            _finish(report, start, rolling_window)
            raise VmcDivergence(f"VMC aborted at step {step}: {exc}", report) from exc
        report.records.append({
            "step": step,
            "energy_mean": est.mean,
            "energy_std": est.std,
            "grad_norm": est.grad_norm,
            "acceptance_rate": est.acceptance_rate,
            "wall_ms": 1e3 * (time.perf_counter() - t0),
        })
        if step in snapshot_steps:
            snapshots[step] = {"energy_std": est.std, "grad_norm": est.grad_norm, "energy_mean": est.mean}
        if log_every and step % log_every == 0:
            log.info("step %d  E=%.6f  std=%.3e  |F|=%.3e  acc=%.2f",
                     step, est.mean, est.std, est.grad_norm, est.acceptance_rate)
    _finish(report, start, rolling_window)
    report.extra["snapshots"] = snapshots
    return params, report


def _finish(report: RunReport, start: float, window: int) -> None:
    report.wall_time = time.perf_counter() - start
    if not report.records:
        return
    energies = [r["energy_mean"] for r in report.records]
    stds = [r["energy_std"] for r in report.records]
    rolling = rolling_average(energies, window)
    report.extra["rolling_energy"] = rolling.tolist()
    report.final_energy = float(rolling[-1])
    report.final_std = float(rolling_average(stds, window)[-1])
    report.extra["last_energy"] = energies[-1]
    report.extra["last_std"] = stds[-1]
