"""Command line front end.

One entry point wires configs to the library layers: system analysis,
graph export, coefficient tables, trajectory simulation, action
evaluation and minimization, tube-probability rate verification, and
the closed-form noise oracles.  Every artifact cites a manifest digest
computed from the resolved configuration, command, and seed, so reruns
of the same invocation write byte-identical files.

JSON outputs use sorted keys; non-finite floats are serialized as the
strings "inf", "-inf", "nan".  CSV floats carry 17 significant digits.
Exit codes: 0 success, 2 configuration errors, 1 other pipeline errors.
"""

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ConfigError, ReebLdpError
from .systems import (builtin_system, load_system, find_critical_points,
                      check_assumptions, positive_drift_margin)
from .reeb import build_reeb_graph, project_trajectory, GraphPath, GraphPoint
from .coeffs import tabulate_all, tabulate_edge
from .chart import (build_saddle_chart, transit_time, transit_time_identity,
                    flow_exit_time)
from .sde import SimulationConfig, simulate, default_threads
from .action import evaluate_action, minimize_action
from .verify import (TubeExperiment, estimate_tube, escape_extremum_probe,
                     brownian_saddle_oracle, tube_reference_action,
                     derive_start_point)

_CSV_FMT = "%.17g"
_BUILTIN_NAMES = ("harmonic", "doublewell", "canonical_saddle")


# -- serialization helpers ----------------------------------------------------

def _jsonable(obj):
    """Recursively convert to deterministic JSON-safe structures."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def _dump_json(payload):
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"


def _write_text(out, text):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _csv_cell(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return _CSV_FMT % float(x)


def _csv_text(digest, header, rows):
    lines = [f"# manifest {digest}", header]
    for row in rows:
        lines.append(",".join(_csv_cell(x) for x in row))
    return "\n".join(lines) + "\n"


# -- manifest -----------------------------------------------------------------

@dataclass
class RunManifest:
    """Provenance record; the digest excludes wall-clock and output paths."""

    command: str
    params: dict
    seed: int
    version: str = __version__
    outputs: list = field(default_factory=list)
    wallclock: float = None

    @property
    def digest(self):
        payload = json.dumps(
            {"command": self.command, "params": _jsonable(self.params),
             "seed": self.seed, "version": self.version},
            sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def stamp(self):
        return {"digest": self.digest, "command": self.command,
                "seed": self.seed, "version": self.version}

    def full(self):
        d = self.stamp()
        d["params"] = _jsonable(self.params)
        d["outputs"] = list(self.outputs)
        d["wallclock_s"] = self.wallclock
        return d


def _finish(args, manifest, payload, out_text=None):
    """Write the primary artifact and the optional full manifest."""
    if out_text is None:
        out_text = _dump_json(payload)
    _write_text(args.out, out_text)
    if args.out is not None:
        manifest.outputs.append(args.out)
    if getattr(args, "manifest_out", None):
        manifest.wallclock = round(time.monotonic() - args._t0, 3)
        _write_text(args.manifest_out, _dump_json(manifest.full()))
    return 0


# -- argument parsing helpers -------------------------------------------------

def _parse_floats(text):
    try:
        vals = tuple(float(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"bad float list {text!r}: {exc}") from exc
    if not vals:
        raise ConfigError(f"empty float list {text!r}")
    return vals


def _parse_xy(text):
    vals = _parse_floats(text)
    if len(vals) != 2:
        raise ConfigError(f"expected 'x,y', got {text!r}")
    return vals


def _parse_graph_point(text):
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ConfigError(f"expected 'EDGE:H', got {text!r}")
    try:
        return GraphPoint(int(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise ConfigError(f"bad graph point {text!r}: {exc}") from exc


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required")


def _load_cli_system(args):
    """Resolve --config: builtin name, JSON literal, or file path."""
    text = args.config
    if text in _BUILTIN_NAMES:
        return builtin_system(text)
    return load_system(text)


def _threads(args):
    return args.threads if args.threads is not None else default_threads()


def _build_graph(system, args):
    cps = find_critical_points(system)
    graph = build_reeb_graph(system, cps, grid_n=args.grid_n)
    return cps, graph


def _read_path_csv(path_file):
    """Parse a graph path CSV: t,edge_id,h, or any header naming them.

    Accepts both the minimizer format (t,edge_id,h) and the trajectory
    format (t,x,y,h,edge_id); a header row fixes the column mapping.
    """
    times, eids, hs = [], [], []
    cols = {"t": 0, "edge_id": 1, "h": 2}
    try:
        with open(path_file) as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                cells = [c.strip() for c in line.split(",")]
                if cells[0].lower() in ("t", "time"):
                    names = [c.lower() for c in cells]
                    if "edge_id" in names and "h" in names:
                        cols = {"t": 0, "edge_id": names.index("edge_id"),
                                "h": names.index("h")}
                    continue
                if len(cells) <= max(cols.values()):
                    raise ConfigError(
                        f"path row needs t,edge_id,h: {line!r}")
                times.append(float(cells[cols["t"]]))
                eids.append(int(float(cells[cols["edge_id"]])))
                hs.append(float(cells[cols["h"]]))
    except OSError as exc:
        raise ConfigError(f"cannot read path file: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"bad path row in {path_file}: {exc}") from exc
    if len(times) < 2:
        raise ConfigError(f"path file {path_file} has fewer than 2 samples")
    return GraphPath(np.array(times), np.array(eids), np.array(hs))


def _path_csv_rows(path):
    for k in range(len(path)):
        yield (path.times[k], int(path.edge_ids[k]), path.h_values[k])


# -- subcommand handlers ------------------------------------------------------

def _cmd_analyze(args):
    system = _load_cli_system(args)
    cps = find_critical_points(system, grid_n=args.crit_grid_n)
    report = check_assumptions(system, ring_radius=args.ring_radius,
                               critical_points=cps)
    manifest = RunManifest("analyze", {
        "system": system.to_config(), "crit_grid_n": args.crit_grid_n,
        "ring_radius": args.ring_radius}, args.seed)
    payload = {
        "manifest": manifest.stamp(),
        "critical_points": [
            {"x": p.location[0], "y": p.location[1], "h": p.h_value,
             "kind": p.kind, "hess_eigenvalues": list(p.hess_eigenvalues)}
            for p in cps],
        "assumptions": {"all_passed": report.all_passed,
                        "items": report.items},
    }
    return _finish(args, manifest, payload)


def _cmd_graph(args):
    if args.action != "export":
        raise ConfigError(f"unknown graph action {args.action!r}")
    system = _load_cli_system(args)
    _, graph = _build_graph(system, args)
    manifest = RunManifest("graph export", {
        "system": system.to_config(), "grid_n": args.grid_n}, args.seed)
    payload = {"manifest": manifest.stamp()}
    payload.update(graph.export_dict())
    return _finish(args, manifest, payload)


def _cmd_coeffs(args):
    system = _load_cli_system(args)
    _, graph = _build_graph(system, args)
    if args.edge is not None:
        if not (0 <= args.edge < len(graph.edges)):
            raise ConfigError(f"edge {args.edge} not in graph "
                              f"(has {len(graph.edges)} edges)")
        tables = {args.edge: tabulate_edge(system, graph,
                                           graph.edge(args.edge),
                                           guard=args.guard)}
    else:
        tables = tabulate_all(system, graph, guard=args.guard)
    manifest = RunManifest("coeffs", {
        "system": system.to_config(), "grid_n": args.grid_n,
        "edge": args.edge, "guard": args.guard}, args.seed)
    rows = []
    for eid in sorted(tables):
        tab = tables[eid]
        for h, t, b2 in zip(tab.h_grid, tab.t_vals, tab.b2_vals):
            rows.append((int(eid), h, t, b2))
    text = _csv_text(manifest.digest, "edge_id,h,T,B2", rows)
    return _finish(args, manifest, {}, out_text=text)


def _cmd_simulate(args):
    _require(args, "epsilon", "horizon", "x0")
    system = _load_cli_system(args)
    _, graph = _build_graph(system, args)
    x0 = _parse_xy(args.x0)
    cfg = SimulationConfig(
        epsilon=args.epsilon, beta=args.beta, t_final=args.horizon,
        x0=x0, n_traj=args.n_traj, dt=args.dt, method=args.method,
        seed=args.seed, record_every=args.record_stride)
    res = simulate(system, cfg, threads=_threads(args))
    manifest = RunManifest("simulate", {
        "system": system.to_config(), "grid_n": args.grid_n,
        "sim": cfg.to_dict()}, args.seed)

    proj = project_trajectory(system, graph, res.states[0], times=res.times)
    rows = [(res.times[k], res.states[0, k, 0], res.states[0, k, 1],
             res.h_values[0, k], int(proj.edge_ids[k]))
            for k in range(len(res.times))]
    csv_path = args.out if args.out is not None else "trajectory.csv"
    _write_text(csv_path, _csv_text(manifest.digest, "t,x,y,h,edge_id", rows))
    manifest.outputs.append(csv_path)

    summary = {
        "manifest": manifest.stamp(), "csv": csv_path,
        "dt": res.dt, "n_steps": res.n_steps, "n_traj": cfg.n_traj,
        "exited": res.exited.tolist(),
        "exit_times": res.exit_times.tolist(),
        "h0": res.h0.tolist(), "h_final": res.h_final.tolist(),
        "qv_sum": res.qv_sum.tolist(),
        "predicted_qv": res.predicted_qv.tolist(),
        "drift_term": res.drift_term.tolist(),
        "martingale_part": res.martingale_part.tolist(),
        "state_digest": res.state_digest(),
    }
    text = _dump_json(summary)
    if args.summary_out is not None:
        _write_text(args.summary_out, text)
        manifest.outputs.append(args.summary_out)
    else:
        sys.stdout.write(text)
    if args.manifest_out:
        manifest.wallclock = round(time.monotonic() - args._t0, 3)
        _write_text(args.manifest_out, _dump_json(manifest.full()))
    return 0


def _cmd_action(args):
    system = _load_cli_system(args)
    _, graph = _build_graph(system, args)
    tables = tabulate_all(system, graph)
    if args.action == "eval":
        _require(args, "path")
        gpath = _read_path_csv(args.path)
        manifest = RunManifest("action eval", {
            "system": system.to_config(), "grid_n": args.grid_n,
            "path": [list(r) for r in _path_csv_rows(gpath)]}, args.seed)
        val = evaluate_action(graph, tables, gpath)
        payload = {
            "manifest": manifest.stamp(), "action": val.value, "E": None,
            "path_csv": args.path, "t_final": gpath.times[-1],
            "vertex_dwell": val.vertex_dwell, "max_step": gpath.max_step(),
        }
        return _finish(args, manifest, payload)

    if args.action == "minimize":
        _require(args, "start", "target", "horizon")
        p_start = _parse_graph_point(args.start)
        p_target = _parse_graph_point(args.target)
        known = {e.id for e in graph.edges}
        for p in (p_start, p_target):
            if p.edge_id not in known:
                raise ConfigError(f"edge {p.edge_id} not in graph "
                                  f"(have {sorted(known)})")
        manifest = RunManifest("action minimize", {
            "system": system.to_config(), "grid_n": args.grid_n,
            "start": [p_start.edge_id, p_start.h],
            "target": [p_target.edge_id, p_target.h],
            "horizon": args.horizon, "slack": args.slack,
            "n_time": args.n_time}, args.seed)
        res = minimize_action(graph, tables, p_start, p_target,
                              args.horizon, slack=args.slack,
                              n_time=args.n_time)
        path_csv = args.path_out
        if path_csv is not None:
            _write_text(path_csv, _csv_text(
                manifest.digest, "t,edge_id,h", _path_csv_rows(res.path)))
            manifest.outputs.append(path_csv)
        payload = {
            "manifest": manifest.stamp(), "action": res.value,
            "dp_action": res.dp_value, "E": res.value / res.t_final,
            "arc_length": res.arc_length, "t_final": res.t_final,
            "slack": res.slack, "path_csv": path_csv,
        }
        return _finish(args, manifest, payload)

    raise ConfigError(f"unknown action subcommand {args.action!r}")


def _cmd_ldp(args):
    if args.action != "verify":
        raise ConfigError(f"unknown ldp action {args.action!r}")
    _require(args, "path", "delta", "epsilons")
    system = _load_cli_system(args)
    _, graph = _build_graph(system, args)
    tables = tabulate_all(system, graph)
    ref = _read_path_csv(args.path)
    epsilons = _parse_floats(args.epsilons)
    samples = tuple(int(s) for s in _parse_floats(args.samples))
    if len(samples) == 1:
        samples = int(samples[0])
    x0 = _parse_xy(args.x0) if args.x0 is not None else None
    exp = TubeExperiment(
        path=ref, delta=args.delta, epsilons=epsilons, beta=args.beta,
        n_samples=samples, seed=args.seed, x0=x0, method=args.method,
        audit_fraction=args.audit_fraction)
    s_ref = args.s_reference
    if s_ref is None:
        p0 = ref.point(0)
        p1 = ref.point(len(ref) - 1)
        s_ref = tube_reference_action(graph, tables, p0, p1,
                                      ref.times[-1] - ref.times[0],
                                      args.delta)
    manifest = RunManifest("ldp verify", {
        "system": system.to_config(), "grid_n": args.grid_n,
        "delta": args.delta, "epsilons": list(epsilons),
        "beta": args.beta, "samples": samples,
        "method": args.method, "rel_tol": args.rel_tol,
        "audit_fraction": args.audit_fraction,
        "x0": list(x0) if x0 is not None else None,
        "path": [list(r) for r in _path_csv_rows(ref)]}, args.seed)
    est = estimate_tube(system, graph, tables, exp, s_reference=s_ref,
                        rel_tol=args.rel_tol, threads=_threads(args))
    payload = {"manifest": manifest.stamp()}
    payload.update(est.to_dict())
    return _finish(args, manifest, payload)


def _cmd_oracle(args):
    system = _load_cli_system(args)
    if args.oracle == "brownian":
        manifest = RunManifest("oracle brownian", {
            "epsilon": args.epsilon, "beta": args.beta,
            "horizon": args.horizon, "paths": args.paths,
            "steps": args.steps,
            "case_i": list(_parse_floats(args.case_i)),
            "case_ii": list(_parse_floats(args.case_ii)),
            "case_iii": list(_parse_floats(args.case_iii)),
            "bridge": not args.no_bridge,
            "refl_barrier": args.refl_barrier}, args.seed)
        report = brownian_saddle_oracle(
            epsilon=args.epsilon, beta=args.beta, t_final=args.horizon,
            case_i=_parse_floats(args.case_i),
            case_ii=_parse_floats(args.case_ii),
            case_iii=_parse_floats(args.case_iii),
            n_paths=args.paths, n_steps=args.steps, seed=args.seed,
            bridge=not args.no_bridge, refl_barrier=args.refl_barrier,
            threads=_threads(args))
        payload = {"manifest": manifest.stamp()}
        payload.update(report)
        return _finish(args, manifest, payload)

    if args.oracle == "escape":
        _require(args, "epsilon")
        cps, graph = _build_graph(system, args)
        if args.x0 is not None:
            x0 = _parse_xy(args.x0)
        else:
            minima = [p for p in cps if p.kind == "minimum"]
            if not minima:
                raise ConfigError("system has no minimum; pass --x0")
            x0 = min(minima, key=lambda p: p.h_value).location
        cfg = SimulationConfig(
            epsilon=args.epsilon, beta=args.beta, t_final=args.horizon,
            x0=x0, n_traj=args.samples, dt=args.dt, seed=args.seed,
            stream="oracle/escape")
        manifest = RunManifest("oracle escape", {
            "system": system.to_config(), "grid_n": args.grid_n,
            "sim": cfg.to_dict(),
            "k_grid": list(_parse_floats(args.k_grid))}, args.seed)
        report = escape_extremum_probe(system, graph, cfg,
                                       _parse_floats(args.k_grid),
                                       threads=_threads(args))
        payload = {"manifest": manifest.stamp()}
        payload.update(report)
        return _finish(args, manifest, payload)

    if args.oracle == "drift":
        cps = find_critical_points(system)
        minima = [p for p in cps if p.kind == "minimum"]
        if not minima:
            raise ConfigError("system has no minima")
        manifest = RunManifest("oracle drift", {
            "system": system.to_config(), "radius": args.radius}, args.seed)
        entries = []
        for p in sorted(minima, key=lambda p: p.location):
            rep = positive_drift_margin(system, p, args.radius)
            rep["location"] = list(p.location)
            rep["h"] = p.h_value
            entries.append(rep)
        payload = {
            "manifest": manifest.stamp(), "minima": entries,
            "all_positive": all(e["margin"] > 0 for e in entries),
        }
        return _finish(args, manifest, payload)

    if args.oracle == "transit":
        _require(args, "mu")
        cps = find_critical_points(system)
        saddles = [p for p in cps if p.kind == "saddle"]
        if not saddles:
            raise ConfigError("system has no saddle")
        saddles.sort(key=lambda p: p.location)
        if not (0 <= args.saddle < len(saddles)):
            raise ConfigError(f"--saddle {args.saddle} out of range "
                              f"({len(saddles)} saddles)")
        chart = build_saddle_chart(system, saddles[args.saddle], l=args.l)
        manifest = RunManifest("oracle transit", {
            "system": system.to_config(), "saddle": args.saddle,
            "l": chart.l, "mu": args.mu, "nu": args.nu,
            "flow_check": args.flow_check}, args.seed)
        t_chart = transit_time(chart, args.mu, args.nu)
        g = args.mu ** 2 - args.nu ** 2
        bound = float(chart.log_transit_bound(g))
        payload = {
            "manifest": manifest.stamp(), "mu": args.mu, "nu": args.nu,
            "l": chart.l, "G": g, "transit_time": t_chart,
            "log_bound": bound, "within_bound": bool(t_chart <= bound),
            "identity_chart_value":
                transit_time_identity(chart.l, args.mu, args.nu),
        }
        if args.flow_check:
            t_flow = flow_exit_time(system, chart, args.mu, args.nu)
            payload["flow_exit_time"] = t_flow
            payload["flow_rel_err"] = abs(t_flow - t_chart) / t_flow
        return _finish(args, manifest, payload)

    raise ConfigError(f"unknown oracle {args.oracle!r}")


# -- schemas ------------------------------------------------------------------

_SCHEMAS = {
    "analyze": {
        "format": "json",
        "fields": {"manifest": "digest/command/seed/version",
                   "critical_points": "[{x,y,h,kind,hess_eigenvalues}]",
                   "assumptions": "{all_passed, items:[{id,passed,...}]}"},
    },
    "graph": {
        "format": "json",
        "fields": {"manifest": "provenance stamp",
                   "vertices": "[{id,x,y,h,kind}]",
                   "edges": "[{id,h_lo,h_hi,h_hi_table,v_lo,v_hi}]",
                   "h_max_box": "max H on the box boundary"},
    },
    "coeffs": {
        "format": "csv",
        "columns": ["edge_id", "h", "T", "B2"],
        "header_comment": "# manifest <digest>",
    },
    "simulate": {
        "format": "csv+json",
        "columns": ["t", "x", "y", "h", "edge_id"],
        "summary_fields": {"dt": 1, "n_steps": 1, "exited": "[bool]",
                           "qv_sum": "[float]", "predicted_qv": "[float]",
                           "drift_term": "[float]",
                           "martingale_part": "[float]",
                           "state_digest": "sha256 of final states"},
    },
    "action": {
        "format": "json",
        "fields": {"action": "S value ('inf' when not absolutely continuous)",
                   "E": "S/T for minimize, null for eval",
                   "dp_action": "dynamic-program confirmation (minimize)",
                   "path_csv": "written minimizer samples (minimize)"},
    },
    "ldp": {
        "format": "json",
        "fields": {"epsilons": "ladder", "p_hat": "tube hit rates",
                   "ci_lo/ci_hi": "Wilson 95% bounds",
                   "s_fit": "fitted LDP slope", "s_reference": "tube infimum",
                   "ratio": "s_fit/s_reference", "verdict": "pass|fail",
                   "monotone": "p_hat nonincreasing along the ladder",
                   "audit_checked/audit_agree": "projection audit"},
    },
    "oracle": {
        "format": "json",
        "fields": {"brownian": "{cases:{i,ii,iii}, reflection, all_pass}",
                   "escape": "{k_grid, p_hat, k_star, monotone}",
                   "drift": "{minima:[{margin,...}], all_positive}",
                   "transit": "{transit_time, log_bound, within_bound}"},
    },
}


# -- parser -------------------------------------------------------------------

def build_parser():
    top = argparse.ArgumentParser(
        prog="reeb-ldp",
        description="Energy-level graph diffusion toolkit: graphs, "
                    "coefficients, simulation, action, rate verification.")
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, graph_n=False):
        p.add_argument("--config", default="harmonic",
                       help="builtin name, JSON literal, or config path")
        p.add_argument("--seed", type=int, default=0,
                       help="base seed; module streams derive from it")
        p.add_argument("--threads", type=int, default=None,
                       help="worker count (default: env REEB_LDP_THREADS)")
        p.add_argument("-o", "--out", default=None,
                       help="output path (default: stdout)")
        p.add_argument("--manifest-out", default=None,
                       help="write the full manifest (with wall-clock) here")
        p.add_argument("--schema", action="store_true",
                       help="print the output schema and exit")
        if graph_n:
            p.add_argument("--grid-n", type=int, default=512,
                           help="level-census grid for graph construction")

    p = sub.add_parser("analyze", help="critical points + assumption report")
    common(p)
    p.add_argument("--crit-grid-n", type=int, default=64)
    p.add_argument("--ring-radius", type=float, default=None)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("graph", help="export the level-set graph as JSON")
    common(p, graph_n=True)
    p.add_argument("action", nargs="?", default="export",
                   choices=["export"])
    p.set_defaults(func=_cmd_graph)

    p = sub.add_parser("coeffs", help="tabulate T(h), B2(h) as CSV")
    common(p, graph_n=True)
    p.add_argument("--edge", type=int, default=None,
                   help="restrict to one edge id (default: all edges)")
    p.add_argument("--guard", type=float, default=1e-4)
    p.set_defaults(func=_cmd_coeffs)

    p = sub.add_parser("simulate", help="integrate the rescaled SDE")
    common(p, graph_n=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--horizon", type=float, default=None,
                   help="rescaled final time")
    p.add_argument("--x0", default=None, help="start point 'x,y'")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--record-stride", type=int, default=None)
    p.add_argument("--method", default="split_rk4",
                   choices=["split_rk4", "euler"])
    p.add_argument("--n-traj", type=int, default=1)
    p.add_argument("--summary-out", default=None,
                   help="summary JSON path (default: stdout)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("action", help="evaluate or minimize the path action")
    common(p, graph_n=True)
    p.add_argument("action", choices=["eval", "minimize"])
    p.add_argument("--path", default=None, help="path CSV (t,edge_id,h)")
    p.add_argument("--start", default=None, help="'EDGE:H' (minimize)")
    p.add_argument("--target", default=None, help="'EDGE:H' (minimize)")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--slack", type=float, default=0.0,
                   help="terminal tolerance radius (minimize)")
    p.add_argument("--n-time", type=int, default=400)
    p.add_argument("--path-out", default=None,
                   help="write the minimizer samples as CSV")
    p.set_defaults(func=_cmd_action)

    p = sub.add_parser("ldp", help="Monte Carlo tube-rate verification")
    common(p, graph_n=True)
    p.add_argument("action", nargs="?", default="verify",
                   choices=["verify"])
    p.add_argument("--path", default=None,
                   help="reference path CSV (t,edge_id,h)")
    p.add_argument("--delta", type=float, default=None, help="tube radius")
    p.add_argument("--epsilons", default=None,
                   help="comma list, strictly decreasing")
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--samples", default="1000",
                   help="per-epsilon sample count (int or comma list)")
    p.add_argument("--x0", default=None,
                   help="start point 'x,y' (default: derived from the path)")
    p.add_argument("--method", default="split_rk4",
                   choices=["split_rk4", "euler"])
    p.add_argument("--audit-fraction", type=float, default=0.01)
    p.add_argument("--rel-tol", type=float, default=0.35)
    p.add_argument("--s-reference", type=float, default=None,
                   help="override the tube-infimum reference action")
    p.set_defaults(func=_cmd_ldp)

    p = sub.add_parser("oracle", help="closed-form noise oracles")
    common(p, graph_n=True)
    p.add_argument("oracle",
                   choices=["brownian", "escape", "drift", "transit"])
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--paths", type=int, default=10 ** 6)
    p.add_argument("--steps", type=int, default=10 ** 4)
    p.add_argument("--case-i", default="0.4,0.1,0.05",
                   help="a,d,kappa for the endpoint+barrier event")
    p.add_argument("--case-ii", default="0.2,1.0",
                   help="d,kappa for the two-stage barrier event")
    p.add_argument("--case-iii", default="1.5,0.3",
                   help="A,d for the drifted endpoint event")
    p.add_argument("--no-bridge", action="store_true",
                   help="disable bridge-crossing barrier correction")
    p.add_argument("--refl-barrier", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=2000,
                   help="escape probe trajectories")
    p.add_argument("--k-grid", default="0.1,1,10",
                   help="escape thresholds in units of eps^beta")
    p.add_argument("--x0", default=None,
                   help="escape start 'x,y' (default: lowest minimum)")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--radius", type=float, default=0.5,
                   help="drift-margin ball radius")
    p.add_argument("--mu", type=float, default=None,
                   help="chart entry coordinate (transit)")
    p.add_argument("--nu", type=float, default=0.0)
    p.add_argument("--l", type=float, default=None, help="chart half-width")
    p.add_argument("--saddle", type=int, default=0)
    p.add_argument("--flow-check", action="store_true",
                   help="cross-check transit against the integrated flow")
    p.set_defaults(func=_cmd_oracle)

    return top


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args._t0 = time.monotonic()
    if getattr(args, "schema", False):
        sys.stdout.write(_dump_json(_SCHEMAS[args.command]))
        return 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ReebLdpError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
