"""Command line entry point: ``rotornqs <subcommand> ...``.

Subcommands: gen-graph, solve-vmc, solve-fourier, solve-jastrow, compare,
sweep-hidden. A JSON run config (``--config``) may supply any setting;
explicit flags override it.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import __version__
from .fourier import ConvergenceError, EigSettings, FourierError
from .model import GraphError, save_graph
from .report import RunReport
from .sampler import SamplerSettings
from .vmc import SrSettings, VmcDivergence
from .workflows import (
    RunConfig,
    compare_solvers,
    generate_graph,
    hidden_unit_sweep,
    load_config,
    resolve_graph,
    run_solver,
    solve_jastrow,
    sweep_csv_text,
)

log = logging.getLogger("rotornqs")


def _graph_args(p):
    g = p.add_argument_group("graph")
    g.add_argument("--graph", help="graph JSON file")
    g.add_argument("--generate", metavar="SPEC", help="chain:N, grid:RxC or complete:N")
    g.add_argument("--h", type=float, default=None, help="vertex weight for --generate (default 5)")
    g.add_argument("--beta", type=float, default=None, help="edge weight for --generate (default 1)")
    p.add_argument("--config", help="JSON run config; flags override its values")


def _vmc_args(p):
    v = p.add_argument_group("VMC")
    v.add_argument("--hidden", type=int)
    v.add_argument("--steps", type=int)
    v.add_argument("--lr", type=float)
    v.add_argument("--sr-shift", type=float)
    v.add_argument("--samples", type=int)
    v.add_argument("--burn-in", type=int)
    v.add_argument("--thin", type=int)
    v.add_argument("--proposal-width", type=float)
    v.add_argument("--chains", type=int)
    v.add_argument("--sample-unit", choices=("sweep", "move"))
    v.add_argument("--checkpoint", help="write final RBM parameters here")


def _fourier_args(p):
    f = p.add_argument_group("Fourier")
    f.add_argument("--omega-max", type=int)
    f.add_argument("--tau-cg", type=float)
    f.add_argument("--tau-inv", type=float)
    f.add_argument("--max-iters", type=int)
    f.add_argument("--start", choices=("random", "delta"), help="initial vector (default random)")
    f.add_argument("--state-out", help="write the ground-state coefficients here")


def _build_config(args, solver) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
        cfg = replace(cfg, solver=solver)
    else:
        cfg = None
    if args.graph or args.generate:
        if args.generate:
            graph = generate_graph(args.generate, 5.0 if args.h is None else args.h,
                                   1.0 if args.beta is None else args.beta)
        else:
            graph = resolve_graph(args.graph)
    elif cfg is not None:
        graph = cfg.graph
    else:
        raise GraphError("no graph given; use --graph FILE or --generate SPEC")
    cfg = cfg or RunConfig(solver, graph)
    cfg = replace(cfg, graph=graph)

    sampler = {k: v for k, v in {
        "total_samples": getattr(args, "samples", None),
        "burn_in": getattr(args, "burn_in", None),
        "thin": getattr(args, "thin", None),
        "proposal_width": getattr(args, "proposal_width", None),
        "seed": getattr(args, "seed", None),
        "chains": getattr(args, "chains", None),
        "unit": getattr(args, "sample_unit", None),
    }.items() if v is not None}
    sr = {k: v for k, v in {
        "learning_rate": getattr(args, "lr", None),
        "sr_shift": getattr(args, "sr_shift", None),
        "steps": getattr(args, "steps", None),
    }.items() if v is not None}
    eig = {k: v for k, v in {
        "omega_max": getattr(args, "omega_max", None),
        "tau_cg": getattr(args, "tau_cg", None),
        "tau_inv": getattr(args, "tau_inv", None),
        "max_inv_iters": getattr(args, "max_iters", None),
        "seed": getattr(args, "seed", None),
        "start": getattr(args, "start", None),
    }.items() if v is not None}
    outputs = dict(cfg.outputs)
    for key in ("report", "summary", "checkpoint", "state_out"):
        val = getattr(args, key, None)
        if val:
            outputs[key] = val
    hidden = getattr(args, "hidden", None)
    return replace(
        cfg,
        hidden=cfg.hidden if hidden is None else hidden,
        sampler=SamplerSettings(**{**asdict(cfg.sampler), **sampler}),
        sr=SrSettings(**{**asdict(cfg.sr), **sr}),
        eig=EigSettings(**{**asdict(cfg.eig), **eig}),
        outputs=outputs,
    )


def _write_outputs(cfg: RunConfig, result) -> None:
    out = cfg.outputs
    report: RunReport = result.report
    if out.get("report") and report.columns:
        report.write_csv(out["report"])
    if out.get("summary"):
        report.write_json(out["summary"])
    if out.get("checkpoint") and cfg.solver == "vmc":
        result.artifact.save(out["checkpoint"])
    if out.get("state_out") and cfg.solver == "fourier":
        result.artifact.ground_state.save(out["state_out"])


def cmd_gen_graph(args):
    graph = generate_graph(args.spec, args.h, args.beta)
    if args.out:
        save_graph(graph, args.out)
    else:
        print(json.dumps(graph.to_dict(), indent=2))


def cmd_solve(args, solver):
    cfg = _build_config(args, solver)
    result = run_solver(cfg)
    _write_outputs(cfg, result)
    doc = {"solver": solver, "energy": result.energy, "wall_time": result.wall_time,
           "seed": result.report.seed, "version": __version__}
    if result.std is not None:
        doc["std"] = result.std
    if solver == "fourier":
        doc["inv_iters"] = result.artifact.inv_iters
    if solver == "jastrow":
        doc.update(result.artifact)
    print(json.dumps(doc, indent=2))


def cmd_solve_jastrow(args):
    cfg = _build_config(args, "jastrow")
    doc = solve_jastrow(cfg.graph)
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)


def cmd_compare(args):
    base = _build_config(args, "fourier")
    configs = [replace(base, solver=s, outputs={}) for s in args.solvers.split(",")]
    comp = compare_solvers(configs)
    print(comp.table())
    if args.csv:
        Path(args.csv).write_text(comp.csv_text())
    if args.summary:
        Path(args.summary).write_text(json.dumps({
            "graph": base.graph.to_dict(),
            "configs": [c.to_dict() for c in configs],
            "rows": comp.rows,
            "alarm": comp.alarm,
            "version": __version__,
        }, indent=2) + "\n")
    return 3 if comp.alarm else 0


def cmd_sweep(args):
    cfg = _build_config(args, "vmc")
    hidden = [int(v) for v in args.hidden_list.split(",")]
    snaps = [int(v) for v in args.snapshots.split(",")]
    sweep = hidden_unit_sweep(cfg.graph, hidden, cfg.sampler, cfg.sr, snaps,
                              cfg.rolling_window, cfg.init_scale, parallel=args.parallel)
    text = sweep_csv_text(sweep)
    print(text, end="")
    if args.report:
        Path(args.report).write_text(text)
    if args.summary:
        Path(args.summary).write_text(json.dumps(sweep, indent=2) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rotornqs", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-graph", help="write a standard graph as JSON")
    g.add_argument("spec", help="chain:N, grid:RxC or complete:N")
    g.add_argument("--h", type=float, default=5.0)
    g.add_argument("--beta", type=float, default=1.0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_graph)

    v = sub.add_parser("solve-vmc", help="train a rotor RBM by VMC + SR")
    _graph_args(v)
    _vmc_args(v)
    v.add_argument("--seed", type=int)
    v.add_argument("--report", help="per-step CSV")
    v.add_argument("--summary", help="JSON summary incl. config echo")
    v.set_defaults(func=lambda a: cmd_solve(a, "vmc"))

    f = sub.add_parser("solve-fourier", help="Fourier spectral inverse iteration")
    _graph_args(f)
    _fourier_args(f)
    f.add_argument("--seed", type=int)
    f.add_argument("--report", help="per-iteration CSV")
    f.add_argument("--summary", help="JSON summary incl. config echo")
    f.set_defaults(func=lambda a: cmd_solve(a, "fourier"))

    j = sub.add_parser("solve-jastrow", help="optimal Jastrow energy on a chain")
    _graph_args(j)
    j.add_argument("--out", help="also write the JSON result here")
    j.set_defaults(func=cmd_solve_jastrow)

    c = sub.add_parser("compare", help="run several solvers on one graph")
    _graph_args(c)
    _vmc_args(c)
    _fourier_args(c)
    c.add_argument("--seed", type=int)
    c.add_argument("--solvers", default="fourier,vmc,jastrow")
    c.add_argument("--csv", help="comparison CSV")
    c.add_argument("--summary", help="JSON summary")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep-hidden", help="VMC over several hidden-unit counts")
    _graph_args(s)
    _vmc_args(s)
    s.add_argument("--seed", type=int)
    s.add_argument("--hidden-list", default="20,40,60,80,100")
    s.add_argument("--snapshots", default="100,500,5000,9999")
    s.add_argument("--parallel", action="store_true")
    s.add_argument("--report", help="sweep CSV")
    s.add_argument("--summary", help="JSON summary")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except (GraphError, FourierError, ConvergenceError, VmcDivergence, ValueError, OSError) as exc:
        print(f"rotornqs: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
