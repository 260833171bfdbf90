"""Interaction graph, rotor Hamiltonian and circle geometry.

The Hamiltonian acting on functions of ``theta in [-pi, pi)^n`` is::

    H = -1/2 sum_i h_i d^2/dtheta_i^2 + sum_{ij in E} beta_ij (2 - 2 cos(theta_i - theta_j))

Everything a solver needs to know about a problem lives in :class:`RotorGraph`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi


class GraphError(ValueError):
    """Raised for malformed graph definitions."""


@dataclass(frozen=True)
class RotorGraph:
    """Finite simple undirected graph with vertex weights ``h`` and edge weights ``beta``.

    Edges are stored canonicalized (``i < j``) and sorted, so iteration order
    does not depend on how the graph was specified.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    h: tuple[float, ...]
    beta: tuple[float, ...]

    def __init__(self, n: int, edges: Sequence[Sequence[int]], h, beta):
        n = int(n)
        if n < 1:
            raise GraphError(f"vertex count must be positive, got {n}")
        h = np.broadcast_to(np.asarray(h, dtype=float), (n,))
        beta = np.broadcast_to(np.asarray(beta, dtype=float), (len(edges),))
        if not np.all(np.isfinite(h)) or np.any(h < 0):
            raise GraphError("vertex weights h must be finite and nonnegative")
        if not np.all(np.isfinite(beta)):
            raise GraphError("edge weights beta must be finite")

        canon = {}
        for (e, w) in zip(edges, beta):
            if len(e) != 2:
                raise GraphError(f"edge {e!r} must have two endpoints")
            i, j = int(e[0]), int(e[1])
            if i == j:
                raise GraphError(f"self-loop at vertex {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
            key = (min(i, j), max(i, j))
            if key in canon:
                raise GraphError(f"duplicate edge {key}")
            canon[key] = float(w)
        keys = sorted(canon)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", tuple(keys))
        object.__setattr__(self, "h", tuple(float(v) for v in h))
        object.__setattr__(self, "beta", tuple(canon[k] for k in keys))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def edge_array(self) -> np.ndarray:
        return np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)

    @property
    def beta_array(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)

    @property
    def h_array(self) -> np.ndarray:
        return np.asarray(self.h, dtype=float)

    def uniform_h(self) -> float | None:
        """The common vertex weight, or ``None`` if the weights differ."""
        h0 = self.h[0]
        return h0 if all(v == h0 for v in self.h) else None

    def is_connected(self) -> bool:
        parent = list(range(self.n))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, j in self.edges:
            parent[find(i)] = find(j)
        return len({find(i) for i in range(self.n)}) == 1

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "edges": [[i, j, b] for (i, j), b in zip(self.edges, self.beta)],
            "h": list(self.h),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RotorGraph":
        try:
            n = doc["n"]
            raw = doc.get("edges", [])
            h = doc["h"]
        except (KeyError, TypeError) as exc:
            raise GraphError(f"graph document is missing field {exc}") from None
        if np.ndim(h) == 1 and len(h) != n:
            raise GraphError(f"h has {len(h)} entries, expected {n}")
        for e in raw:
            if len(e) != 3:
                raise GraphError(f"edge entry {e!r} must be [i, j, beta]")
        return cls(n, [e[:2] for e in raw], h, [e[2] for e in raw])


def load_graph(path) -> RotorGraph:
    with open(path) as fh:
        return RotorGraph.from_dict(json.load(fh))


def save_graph(graph: RotorGraph, path) -> None:
    Path(path).write_text(json.dumps(graph.to_dict(), indent=2) + "\n")


@njit(cache=True)
def _wrap_scalar(t):
    w = (t + math.pi) % TWO_PI - math.pi
    if w >= math.pi:
        w -= TWO_PI
    return w


def wrap_angle(theta):
    """Map angles into the half-open interval ``[-pi, pi)``."""
    t = np.asarray(theta, dtype=float)
    w = np.mod(t + np.pi, TWO_PI) - np.pi
    w = np.where(w >= np.pi, w - TWO_PI, w)
    return w if w.ndim else float(w)


def circle_distance(a, b):
    """Geodesic distance on the unit circle, in ``[0, pi]``."""
    d = np.mod(np.abs(wrap_angle(a) - wrap_angle(b)), TWO_PI)
    out = np.minimum(d, TWO_PI - d)
    return out if np.ndim(out) else float(out)


def _check_config(graph: RotorGraph, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != graph.n:
        raise ValueError(f"configuration has {theta.shape[-1]} angles, graph has {graph.n} vertices")
    return theta


def potential_energy(graph: RotorGraph, theta):
    """``sum_ij beta_ij (2 - 2 cos(theta_i - theta_j))``; broadcasts over leading axes."""
    theta = _check_config(graph, theta)
    if graph.num_edges == 0:
        return np.zeros(theta.shape[:-1]) if theta.ndim > 1 else 0.0
    e = graph.edge_array
    diff = theta[..., e[:, 0]] - theta[..., e[:, 1]]
    v = np.sum(graph.beta_array * (2.0 - 2.0 * np.cos(diff)), axis=-1)
    return v if np.ndim(v) else float(v)


def eigenvalue_lower_bound(graph: RotorGraph) -> float:
    """``-4 sum |beta_ij|``: no state has energy below this value."""
    return -4.0 * float(np.sum(np.abs(graph.beta_array)))


def _periodic_grid(n: int, points: int):
    axis = -np.pi + TWO_PI * np.arange(points) / points
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return axis, np.stack(mesh, axis=-1)


def rayleigh_quotient_quadrature(
    graph: RotorGraph,
    logpsi: Callable[[np.ndarray], np.ndarray],
    grid_points_per_dim: int = 64,
) -> float:
    """Brute-force ``<psi, H psi> / <psi, psi>`` on a uniform periodic grid.

    ``logpsi`` receives an array of shape ``(..., n)`` and must return the log
    amplitude with the leading shape. The Laplacian is a second-order central
    difference and the integrals use the trapezoid rule, which on a periodic
    grid is a plain sum. Only meant as an oracle for ``n <= 3``.
    """
    if graph.n > 3:
        raise ValueError(f"quadrature oracle limited to n <= 3, got n={graph.n}")
    if grid_points_per_dim < 8:
        raise ValueError("need at least 8 grid points per dimension")
    _, pts = _periodic_grid(graph.n, grid_points_per_dim)
    lp = np.asarray(logpsi(pts), dtype=float)
    if lp.shape != pts.shape[:-1]:
        lp = np.broadcast_to(lp, pts.shape[:-1])
    if not np.all(np.isfinite(lp)):
        raise ValueError("logpsi is not finite on the quadrature grid")
    psi = np.exp(lp - lp.max())

    dx = TWO_PI / grid_points_per_dim
    h = graph.h_array
    hpsi = potential_energy(graph, pts) * psi
    for i in range(graph.n):
        lap = (np.roll(psi, -1, axis=i) - 2.0 * psi + np.roll(psi, 1, axis=i)) / dx**2
        hpsi = hpsi - 0.5 * h[i] * lap
    return float(np.sum(psi * hpsi) / np.sum(psi * psi))


def pair_difference_marginal(logpsi, points: int = 512):
    """Density of ``theta_0 - theta_1`` (wrapped) under ``|psi|^2`` for a two-rotor state.

    Returns ``(phi, density)`` on a uniform grid over ``[-pi, pi)``; the
    density integrates to one under the periodic trapezoid rule. Each value
    is a trapezoid integral over ``theta_0`` with ``theta_1 = theta_0 - phi``,
    evaluated one offset at a time so memory stays ``O(points)``.
    """
    axis = -np.pi + TWO_PI * np.arange(points) / points
    log_mass = np.empty(points)
    for k, phi in enumerate(axis):
        pts = np.stack([axis, axis - phi], axis=-1)
        two_lp = 2.0 * np.asarray(logpsi(pts), dtype=float)
        top = two_lp.max()
        log_mass[k] = top + np.log(np.sum(np.exp(two_lp - top)))
    dens = np.exp(log_mass - log_mass.max())
    dens /= dens.sum() * (TWO_PI / points)
    return axis, dens
