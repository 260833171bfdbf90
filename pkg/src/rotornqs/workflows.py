"""Run configuration, graph generators and multi-solver workflows."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import __version__
from .fourier import EigSettings, inverse_power_iteration
from .jastrow import JastrowChain, jastrow_energy, optimize_uniform_weight
from .model import GraphError, RotorGraph, load_graph
from .rbm import RbmParams
from .report import RunReport
from .sampler import SamplerSettings
from .vmc import SrSettings, run_vmc


SOLVERS = ("vmc", "fourier", "jastrow")


def generate_graph(spec: str, h: float = 5.0, beta: float = 1.0) -> RotorGraph:
    """Build a standard graph from ``"chain:n"``, ``"grid:RxC"`` or ``"complete:n"``.

    Grids use row-major vertex numbering with open boundaries, so ``grid:2x2``
    is the 4-cycle 0-1, 0-2, 1-3, 2-3.
    """
    kind, _, arg = spec.partition(":")
    try:
        if kind == "chain":
            n = int(arg)
            edges = [(i, i + 1) for i in range(n - 1)]
        elif kind == "grid":
            rows, cols = (int(v) for v in arg.lower().split("x"))
            if rows < 1 or cols < 1:
                raise ValueError
            n = rows * cols
            edges = []
            for r in range(rows):
                for c in range(cols):
                    v = r * cols + c
                    if c + 1 < cols:
                        edges.append((v, v + 1))
                    if r + 1 < rows:
                        edges.append((v, v + cols))
        elif kind == "complete":
            n = int(arg)
            edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
        else:
            raise GraphError(f"unknown graph kind {kind!r}; use chain, grid or complete")
    except ValueError as exc:
        if isinstance(exc, GraphError):
            raise
        raise GraphError(f"invalid graph spec {spec!r}") from None
    if n < 1:
        raise GraphError(f"invalid graph spec {spec!r}")
    return RotorGraph(n, edges, h, beta)


def resolve_graph(source) -> RotorGraph:
    """Graph from a ``RotorGraph``, a JSON-style dict, a file path or a generator spec."""
    if isinstance(source, RotorGraph):
        return source
    if isinstance(source, dict):
        if "generator" in source:
            return generate_graph(source["generator"], source.get("h", 5.0), source.get("beta", 1.0))
        if "file" in source:
            return load_graph(source["file"])
        return RotorGraph.from_dict(source)
    text = str(source)
    if Path(text).is_file():
        return load_graph(text)
    if ":" in text:
        return generate_graph(text)
    raise GraphError(f"cannot interpret graph source {text!r}")


@dataclass
class RunConfig:
    """One solver run on one graph, with solver settings and output paths."""

    solver: str
    graph: RotorGraph
    hidden: int = 20
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    sr: SrSettings = field(default_factory=SrSettings)
    eig: EigSettings = field(default_factory=EigSettings)
    init_scale: float = 0.01
    rolling_window: int = 250
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.hidden < 1:
            raise ValueError("hidden unit count must be positive")

    def to_dict(self) -> dict:
        doc = {"solver": self.solver, "graph": self.graph.to_dict(), "outputs": dict(self.outputs)}
        if self.solver == "vmc":
            doc["vmc"] = {
                "hidden": self.hidden,
                "init_scale": self.init_scale,
                "rolling_window": self.rolling_window,
                "sampler": asdict(self.sampler),
                "sr": asdict(self.sr),
            }
        elif self.solver == "fourier":
            doc["fourier"] = asdict(self.eig)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        solver = doc.get("solver")
        graph = resolve_graph(doc["graph"])
        kw = {}
        vmc = doc.get("vmc", {})
        if vmc:
            for key in ("hidden", "init_scale", "rolling_window"):
                if key in vmc:
                    kw[key] = vmc[key]
            if "sampler" in vmc:
                kw["sampler"] = SamplerSettings(**vmc["sampler"])
            if "sr" in vmc:
                kw["sr"] = SrSettings(**vmc["sr"])
        if doc.get("fourier"):
            kw["eig"] = EigSettings(**doc["fourier"])
        return cls(solver, graph, outputs=dict(doc.get("outputs", {})), **kw)


def load_config(path) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SolverResult:
    solver: str
    energy: float
    std: float | None
    samples: int | None
    wall_time: float
    report: RunReport
    artifact: object = None

    @property
    def stderr(self) -> float | None:
        if self.std is None or not self.samples:
            return None
        return self.std / math.sqrt(self.samples)


def run_solver(config: RunConfig) -> SolverResult:
    g = config.graph
    t0 = time.perf_counter()
    if config.solver == "vmc":
        init = RbmParams.random(config.hidden, g.n, seed=config.sampler.seed, scale=config.init_scale)
        params, report = run_vmc(g, init, config.sampler, config.sr, config.rolling_window)
        report.config = config.to_dict()
        return SolverResult("vmc", report.final_energy, report.final_std, config.sampler.retained,
                            report.wall_time, report, params)
    if config.solver == "fourier":
        res = inverse_power_iteration(g, config.eig)
        res.report.config = config.to_dict()
        return SolverResult("fourier", res.lambda_min, None, None, res.report.wall_time, res.report, res)
    doc = solve_jastrow(g)
    report = RunReport("jastrow", config.to_dict(), final_energy=doc["total_energy"],
                       wall_time=time.perf_counter() - t0, extra=doc)
    return SolverResult("jastrow", doc["total_energy"], None, None, report.wall_time, report, doc)


def solve_jastrow(graph: RotorGraph) -> dict:
    """Optimal Jastrow weights on a path graph, each edge optimised independently."""
    jc = JastrowChain.from_graph(graph, 0.0)
    ws, es = zip(*(optimize_uniform_weight(jc.h, b) for b in jc.beta))
    total = jastrow_energy(replace(jc, w=ws))
    uniform = len(set(ws)) == 1
    return {
        "w_star": ws[0] if uniform else list(ws),
        "energy_per_edge": es[0] if uniform else list(es),
        "total_energy": total,
    }


@dataclass
class Comparison:
    rows: list
    differences: list
    alarm: bool
    reference: float | None

    COLUMNS = ("solver", "energy", "std", "stderr", "diff_vs_fourier")

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS + ("alarm",))
        for r in self.rows:
            w.writerow([r["solver"]] + [_num(r[c]) for c in self.COLUMNS[1:]] + [int(r["alarm"])])
        w.writerow([])
        w.writerow(["solver_a", "solver_b", "difference"])
        for a, b, d in self.differences:
            w.writerow([a, b, _num(d)])
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{'solver':<9}{'energy':>14}{'std':>12}{'stderr':>12}{'wall [s]':>11}  alarm"]
        for r in self.rows:
            lines.append(
                f"{r['solver']:<9}{r['energy']:>14.6f}{_short(r['std']):>12}{_short(r['stderr']):>12}"
                f"{r['wall_time']:>11.2f}  {'YES' if r['alarm'] else ''}"
            )
        for a, b, d in self.differences:
            lines.append(f"  {a} - {b}: {d:+.6f}")
        if self.alarm:
            lines.append("ALARM: VMC energy below the Fourier ground energy beyond 3 standard errors")
        return "\n".join(lines)


def _num(v):
    return "" if v is None else repr(float(v))


def _short(v):
    return "-" if v is None else f"{v:.3e}"


def compare_solvers(configs, results=None) -> Comparison:
    """Run every config (all on the same graph) and tabulate the energies.

    A VMC energy below the Fourier ground energy by more than three standard
    errors is physically impossible and raises the ``alarm`` flag. Already
    computed ``results`` may be passed to skip running.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("no runs to compare")
    g0 = configs[0].graph
    for c in configs[1:]:
        if c.graph != g0:
            raise GraphError("all compared runs must share the same graph")
    if results is None:
        results = [run_solver(c) for c in configs]

    ref = next((r.energy for r in results if r.solver == "fourier"), None)
    rows = []
    alarm = False
    for r in results:
        flag = False
        if r.solver == "vmc" and ref is not None:
            tol = 3.0 * (r.stderr or 0.0)
            flag = r.energy < ref - tol
        alarm |= flag
        rows.append({
            "solver": r.solver, "energy": r.energy, "std": r.std, "stderr": r.stderr,
            "diff_vs_fourier": None if ref is None else r.energy - ref,
            "wall_time": r.wall_time, "alarm": flag,
        })
    diffs = [(a.solver, b.solver, a.energy - b.energy)
             for i, a in enumerate(results) for b in results[i + 1:]]
    return Comparison(rows, diffs, alarm, ref)


DEFAULT_SNAPSHOTS = (100, 500, 5000, 9999)


def _sweep_entry(args):
    graph, m, sampler, sr, snapshots, window, init_scale = args
    init = RbmParams.random(m, graph.n, seed=sampler.seed, scale=init_scale)
    _, report = run_vmc(graph, init, sampler, sr, window, snapshot_steps=snapshots)
    return {
        "hidden": m,
        "snapshots": report.extra["snapshots"],
        "energy": report.final_energy,
        "std": report.final_std,
        "wall_time": report.wall_time,
        "energies": [r["energy_mean"] for r in report.records],
        "stds": [r["energy_std"] for r in report.records],
    }


def hidden_unit_sweep(graph: RotorGraph, hidden, sampler: SamplerSettings, sr: SrSettings,
                      snapshot_steps=DEFAULT_SNAPSHOTS, rolling_window: int = 250,
                      init_scale: float = 0.01, parallel: bool = False) -> dict:
    """Train one RBM per hidden-unit count and record std / gradient-norm snapshots.

    Snapshot steps beyond the run length are clipped to the last step.
    """
    hidden = list(hidden)
    if any(m < 1 for m in hidden):
        raise ValueError("hidden unit counts must be positive")
    snaps = tuple(sorted({min(s, sr.steps - 1) for s in snapshot_steps}))
    jobs = [(graph, m, sampler, sr, snaps, rolling_window, init_scale) for m in hidden]
    if parallel and len(jobs) > 1:
        with ProcessPoolExecutor() as pool:
            entries = list(pool.map(_sweep_entry, jobs))
    else:
        entries = [_sweep_entry(j) for j in jobs]
    return {
        "graph": graph.to_dict(),
        "sampler": asdict(sampler),
        "sr": asdict(sr),
        "snapshot_steps": list(snaps),
        "entries": entries,
        "version": __version__,
    }


def sweep_csv_text(sweep: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hidden", "metric"] + [str(s) for s in sweep["snapshot_steps"]] + ["average_energy"])
    for e in sweep["entries"]:
        snaps = e["snapshots"]
        for metric in ("energy_std", "grad_norm"):
            w.writerow([e["hidden"], metric] + [repr(snaps[s][metric]) for s in sweep["snapshot_steps"]]
                       + [repr(e["energy"])])
    return buf.getvalue()
