"""Command-line front end: ``cellsil phi | tw | simulate | sweep``.

Every invocation writes one JSON manifest next to its outputs.  Exit codes:
0 success, 2 usage error, 3 numerical failure.  Relative output paths are
resolved against ``$CELLSIL_OUTPUT_ROOT`` when that variable is set.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._csv import fmt, read_columns, write_columns
from .errors import CellSILError
from .geometry import DiscreteCurve, centroid
from .nonlinearity import ToyPhi, estimate_beta_crit, make_phi
from .potential import PotentialWell, solve_standing_wave
from .simulator import (
    CsvSink,
    SimConfig,
    classify_regime,
    hysteresis_trace,
    init_state,
    q_oscillation,
    run,
    series_arrays,
)
from .travelwave import find_traveling_waves

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
OUTPUT_ROOT_ENV = "CELLSIL_OUTPUT_ROOT"

log = logging.getLogger("cellsil")


class UsageError(Exception):
    pass


def resolve_output(path) -> Path:
    p = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not p.is_absolute():
        p = Path(root) / p
    return p


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, Path):
        return str(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def write_manifest(path, command, config, inputs, outputs, started, status, extra=None) -> Path:
    """Manifest with the resolved config; ``read_manifest`` restores it."""
    doc = {
        "command": command,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
        "version": __version__,
        "duration_s": time.perf_counter() - started,
        "exit_status": status,
    }
    if extra:
        doc.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())


# ------------------------------------------------------------------ phi

def _phi_source(args) -> str:
    if args.toy:
        return "toy"
    if args.table:
        return f"table:{args.table}"
    return args.well


def cmd_phi(args) -> int:
    started = time.perf_counter()
    lo, hi = args.v_range
    if not hi > lo or not args.dv > 0:
        raise UsageError("--v-range needs lo < hi and --dv > 0")
    out = resolve_output(args.out)
    source = _phi_source(args)
    phi = make_phi(source, args.beta, L=args.L, M=args.M, v_max=max(abs(lo), abs(hi)), dv=args.dv)
    n = int(round((hi - lo) / args.dv)) + 1
    Vs = lo + args.dv * np.arange(n)
    write_columns(out, ["V", "phi", "phi_prime"], [Vs, phi(Vs), phi.prime(Vs)])
    extra = {"phi": phi.describe()}
    if args.beta_crit:
        if source == "toy":
            family = ToyPhi
        elif source.startswith("table:"):
            raise UsageError("--beta-crit needs a well or --toy")
        else:
            family = solve_standing_wave(PotentialWell.from_name(source), args.L, args.M)
        vmax = args.crit_v_max or max(abs(lo), abs(hi))
        bc = estimate_beta_crit(family, vmax, args.beta_hi)
        print(f"beta_crit ~= {bc:.6f} (|V| <= {vmax:g})")
        extra["beta_crit"] = {"estimate": bc, "v_max": vmax, "beta_hi": args.beta_hi}
    write_manifest(out.with_suffix(".manifest.json"), "phi", vars_config(args), {"source": source},
                   {"table": out}, started, EXIT_OK, extra)
    return EXIT_OK


# ------------------------------------------------------------------- tw

def cmd_tw(args) -> int:
    started = time.perf_counter()
    vr, lr = tuple(args.v_range), tuple(args.lambda_range)
    if not vr[1] > vr[0] or not lr[1] > lr[0]:
        raise UsageError("--v-range and --lambda-range need lo < hi")
    if min(args.grid) < 8:
        raise UsageError("--grid needs at least 8 x 8")
    outdir = resolve_output(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    source = _phi_source(args)
    phi = make_phi(source, args.beta, L=args.L, M=args.M)
    roots, land = find_traveling_waves(phi, vr, lr, tuple(args.grid), n_points=args.n_points, tol=args.tol)
    land.to_csv(outdir / "landscape.csv")
    outputs = {"landscape": outdir / "landscape.csv", "roots": outdir / "roots.csv", "profiles": []}
    for k, (V, lam, prof) in enumerate(roots):
        csv_path, json_path = prof.to_files(outdir / f"root_{k}.csv")
        meta = read_manifest(json_path)
        meta.update({"phi_source": source, "L": args.L, "M": args.M, "profile_csv": csv_path.name})
        json_path.write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")
        outputs["profiles"].append(json_path)
    write_columns(outdir / "roots.csv", ["V", "lambda", "I2", "length", "area"],
                  [[r[0] for r in roots], [r[1] for r in roots], [r[2].closure_residual for r in roots],
                   [r[2].length() for r in roots], [r[2].area() for r in roots]])
    for V, lam, prof in roots:
        print(f"root V={V:.8f} lambda={lam:.8f} |I2|={prof.closure_residual:.2e}")
    if not roots:
        print("no traveling-wave roots in the box")
    write_manifest(outdir / "manifest.json", "tw", vars_config(args), {"source": source}, outputs, started,
                   EXIT_OK, {"tolerances": {"I2": args.tol, "bisection_xtol_rel": 1e-13},
                             "phi": phi.describe(), "n_roots": len(roots)})
    return EXIT_OK


# ------------------------------------------------------------- simulate

def load_config(path=None, overrides=None) -> SimConfig:
    d = {} if path is None else json.loads(Path(path).read_text())
    d.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return SimConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from exc


def initial_curve(spec: str, n: int):
    """``(DiscreteCurve, tw_velocity)`` from ``circle:R``, ``ellipse:A:B``, ``file:PATH`` or ``tw:ROOT.json``."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "circle":
            return DiscreteCurve.circle(float(rest), n), None
        if kind == "ellipse":
            a, b = (float(v) for v in rest.split(":"))
            return DiscreteCurve.ellipse(a, b, n), None
        if kind == "file":
            return DiscreteCurve.from_csv(rest).resample(n, preserve_area=False), None
        if kind == "tw":
            meta = read_manifest(rest)
            csv_path = Path(rest).with_name(meta.get("profile_csv", Path(rest).with_suffix(".csv").name))
            cols = read_columns(csv_path, ["x", "y"])
            pts = np.column_stack((cols["x"], cols["y"]))
            if np.allclose(pts[0], pts[-1]):
                pts = pts[:-1]
            return DiscreteCurve(pts).resample(n, preserve_area=False), float(meta["V"])
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot build initial curve from {spec!r}: {exc}") from exc
    raise UsageError(f"unknown curve source {spec!r}")


def simulate_one(config: SimConfig, curve_spec: str, outdir) -> dict:
    """Run one simulation into ``outdir``; returns a summary dict (never raises numerical errors)."""
    outdir = Path(outdir)
    curve, tw_v = initial_curve(curve_spec, config.N)
    profile = solve_standing_wave(PotentialWell.from_name(config.well), config.L, config.M)
    state = init_state(curve, profile, config, tw_velocity=tw_v)
    diameter = curve.diameter()
    sink = CsvSink(outdir, config.trace_nodes)
    summary = {"curve": curve_spec, "tw_velocity": tw_v, "diameter": diameter,
               "resampling": {"every": config.resample_every,
                              "note": "actin columns carried by cubic interpolation in arc length"}}
    try:
        state, records = run(state, config, profile, sinks=[sink])
    except CellSILError as exc:
        last = getattr(exc, "last_state", state)
        write_columns(outdir / "last_state.csv", ["x", "y"], [last.points[:, 0], last.points[:, 1]])
        summary.update(status="failed", error=f"{type(exc).__name__}: {exc}", t_fail=last.t)
        return summary
    finally:
        sink.close()
    t, Q, c = series_arrays(records)
    period, amp = q_oscillation(t, Q)
    regime = classify_regime(records, diameter)
    jumps = {}
    for i in config.trace_nodes:
        jumps[str(i)] = int(len(hysteresis_trace(records, i, config.jump_threshold)[3]))
    write_columns(outdir / "trajectory.csv", ["t", "cx", "cy"], [t, c[:, 0], c[:, 1]])
    end = centroid(state.points)
    summary.update(status="ok", regime=regime.value, q_period=period, q_amplitude=amp,
                   net_displacement=float(np.hypot(*(c[-1] - c[0]))) / diameter,
                   final_centroid=[float(end[0]), float(end[1])], steps=state.step, jumps=jumps,
                   self_intersection=bool(state.flags.get("self_intersection", False)))
    return summary


def _sim_overrides(args) -> dict:
    return {"epsilon": args.epsilon, "beta": args.beta, "t_end": args.t_end, "dt": args.dt,
            "N": args.N, "M": args.M, "well": args.well}


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    config = load_config(args.config, _sim_overrides(args))
    outdir = resolve_output(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = simulate_one(config, args.curve, outdir)
    status = EXIT_OK if summary["status"] == "ok" else EXIT_NUMERIC
    write_manifest(outdir / "manifest.json", "simulate", config.to_dict(),
                   {"config": args.config, "curve": args.curve}, {"dir": outdir}, started, status,
                   {"result": summary})
    if status == EXIT_OK:
        print(f"regime: {summary['regime']}")
    else:
        print(f"simulation failed: {summary['error']}", file=sys.stderr)
    return status


# ---------------------------------------------------------------- sweep

def _sweep_job(job):
    cfg_dict, curve_spec, outdir = job
    try:
        return simulate_one(SimConfig.from_dict(cfg_dict), curve_spec, outdir)
    except (CellSILError, UsageError) as exc:
        return {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    if not args.epsilons:
        raise UsageError("--epsilons needs at least one value")
    base = load_config(args.config, _sim_overrides(args) | {"epsilon": None})
    outdir = resolve_output(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for eps in args.epsilons:
        d = base.to_dict() | {"epsilon": eps}
        load_config(None, d)  # validate before spawning workers
        jobs.append((d, args.curve, outdir / f"eps_{fmt(eps)}"))
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    eps_col, t_col, q_col = [], [], []
    rows = []
    for eps, (_, _, run_dir), res in zip(args.epsilons, jobs, results):
        if res["status"] == "ok":
            diag = read_columns(run_dir / "diag.csv", ["t", "Q"])
            eps_col += [eps] * len(diag["t"])
            t_col += list(diag["t"])
            q_col += list(diag["Q"])
        rows.append((eps, res))
    write_columns(outdir / "q_series.csv", ["epsilon", "t", "Q"], [eps_col, t_col, q_col])
    with open(outdir / "summary.csv", "w", newline="") as fh:
        fh.write("epsilon,status,regime,q_period,q_amplitude,net_displacement\n")
        for eps, res in rows:
            per = res.get("q_period")
            fh.write(",".join([fmt(eps), res["status"], res.get("regime", ""),
                               "" if per is None else fmt(per),
                               fmt(res["q_amplitude"]) if "q_amplitude" in res else "",
                               fmt(res["net_displacement"]) if "net_displacement" in res else ""]) + "\n")
    for eps, res in rows:
        print(f"eps={eps:g}: {res['status']} {res.get('regime', res.get('error', ''))}")
    n_ok = sum(r["status"] == "ok" for _, r in rows)
    status = EXIT_OK if n_ok else EXIT_NUMERIC
    write_manifest(outdir / "manifest.json", "sweep", base.to_dict() | {"epsilons": args.epsilons},
                   {"config": args.config, "curve": args.curve},
                   {"q_series": outdir / "q_series.csv", "summary": outdir / "summary.csv"}, started, status,
                   {"runs": {fmt(e): r for e, r in rows}})
    return status


# --------------------------------------------------------------- parser

def vars_config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _add_phi_source(p, default_well="asym150"):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--well", default=default_well, help="allen-cahn, asym150, asym<a> or poly:c0,c1,...")
    g.add_argument("--toy", action="store_true", help="closed-form toy nonlinearity")
    g.add_argument("--table", help="CSV with columns V, phi")
    p.add_argument("--beta", type=float, default=100.0)
    p.add_argument("--L", type=float, default=20.0, help="z half-width")
    p.add_argument("--M", type=int, default=2000, help="z intervals")


def _add_sim_args(p):
    p.add_argument("--config", help="JSON file with SimConfig keys")
    p.add_argument("--curve", default="circle:1.0",
                   help="circle:R | ellipse:A:B | file:PATH | tw:ROOT.json (from 'cellsil tw')")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--well")
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--M", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cellsil", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"cellsil {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phi", help="tabulate Phi_beta(V)")
    _add_phi_source(p)
    p.add_argument("--v-range", nargs=2, type=float, default=(-10.0, 10.0), metavar=("LO", "HI"))
    p.add_argument("--dv", type=float, default=0.01)
    p.add_argument("--beta-crit", action="store_true", help="also estimate beta_crit")
    p.add_argument("--beta-hi", type=float, default=1000.0)
    p.add_argument("--crit-v-max", type=float, default=None)
    p.add_argument("--out", default="phi.csv")
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("tw", help="scan I2 and assemble traveling-wave profiles")
    _add_phi_source(p)
    p.add_argument("--v-range", nargs=2, type=float, default=(1.5, 3.0), metavar=("LO", "HI"))
    p.add_argument("--lambda-range", nargs=2, type=float, default=(8.0, 12.0), metavar=("LO", "HI"))
    p.add_argument("--grid", nargs=2, type=int, default=(16, 16), metavar=("NV", "NL"))
    p.add_argument("--n-points", type=int, default=256)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", default="tw")
    p.set_defaults(func=cmd_tw)

    p = sub.add_parser("simulate", help="run the curve/actin simulation")
    _add_sim_args(p)
    p.add_argument("--out", default="run")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="one simulation per epsilon")
    _add_sim_args(p)
    p.add_argument("--epsilons", nargs="*", type=float, default=None)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", default="sweep")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"cellsil: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CellSILError as exc:
        print(f"cellsil: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
