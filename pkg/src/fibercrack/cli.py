"""Command-line front end.

Subcommands::

    analyze            characteristic roots (roots.csv) and root curves (curves.csv)
    trace              trivial branch and both pitchfork sides, summary.csv
    snapshot           H(y) and f(x) of one stored branch point
    stability-report   recomputed inertia of every stored branch point

Exit codes: 0 success, 2 non-generic parameters, 3 continuation failure,
4 invalid configuration or arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np
from scipy import interpolate

from . import config as cfgmod
from . import persistence
from .continuation import (
    HEALING,
    STEP_FAILURE,
    USER_STOP,
    WINDOW_END,
    Branch,
    StepPolicy,
    start_pitchfork,
    trace_branch,
    trace_trivial,
)
from .fem import Mesh
from .linearized import BifurcationRoot, NonGenericParameterError, critical_root, curves, find_roots
from .postprocess import (
    crack_census,
    energy_crossover,
    fixed_load_refiner,
    reconstruct_fields,
    stress_along_branch,
    write_branch_csv,
    write_csv,
    write_fields_csv,
)
from .solver import SolverOptions
from .stability import classify_state

log = logging.getLogger("fibercrack")

EXIT_OK = 0
EXIT_NONGENERIC = 2
EXIT_CONTINUATION = 3
EXIT_CONFIG = 4

ROOT_COLUMNS = ("n", "lambda", "simple", "critical", "simplicity_value")
CURVE_COLUMNS = ("n", "lambda", "k")
SUMMARY_COLUMNS = (
    "branch",
    "n_c",
    "lambda_c",
    "lambda_E",
    "termination",
    "points",
    "final_lambda",
    "crack_count",
    "crack_positions",
    "end_cracks",
)
REPORT_COLUMNS = (
    "branch",
    "index",
    "lam",
    "n_plus",
    "n_minus",
    "n_zero",
    "active_count",
    "stability",
    "stored_stability",
)
MANIFEST = "branches.json"
RUN_CONFIG = "run.ini"


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ setup


def _objects(cfg: cfgmod.RunConfig):
    c = cfg.continuation
    mesh = Mesh(cfg.mesh.n_elements, cfg.mesh.n_gauss)
    options = SolverOptions(tol=cfg.solver.tol, max_iter=cfg.solver.max_iter, max_outer=cfg.solver.max_outer or None)
    policy = StepPolicy(
        initial=c.initial_step,
        min_step=c.min_step,
        max_step=c.max_step,
        grow_after=c.grow_after,
        max_points=c.max_points,
        lambda_window=(c.lambda_min, c.lambda_max),
    )
    return cfg.model, mesh, options, policy


def _roots(cfg):
    return find_roots(cfg.model, cfg.analysis.n_max, (1.01, cfg.analysis.lambda_max))


def branch_name(n: int, side: str) -> str:
    return f"pitchfork_n{n}_{'plus' if side == '+' else 'minus'}"


def _fmt(v):
    return repr(float(v))


# ---------------------------------------------------------------- analyze


def cmd_analyze(cfg, out):
    os.makedirs(out, exist_ok=True)
    p = cfg.model
    write_csv(
        os.path.join(out, "curves.csv"),
        CURVE_COLUMNS,
        curves(p, cfg.analysis.n_curves, (1.01, cfg.analysis.lambda_max)),
    )
    try:
        roots = _roots(cfg)
    except NonGenericParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONGENERIC
    write_csv(
        os.path.join(out, "roots.csv"),
        ROOT_COLUMNS,
        [(r.n, r.lambda_n, r.simple, r.is_critical, r.simplicity_value) for r in roots],
    )
    crit = critical_root(roots)
    if crit is None:
        print("no characteristic roots in the window")
    else:
        print(f"critical root: n={crit.n} lambda={crit.lambda_n:.10f}")
    return EXIT_OK


# ------------------------------------------------------------------ trace


def _finished(branch: Branch, policy: StepPolicy):
    last = branch.points[-1]
    lo, hi = policy.lambda_window
    if last.healing:
        return HEALING
    if len(branch.points) > 2 and not lo <= last.lam <= hi:
        return WINDOW_END
    if len(branch.points) >= policy.max_points:
        return USER_STOP
    return None


def _run_job(job):
    """Trace one branch into ``<out>/<name>.jsonl``; runs in a worker process."""
    cfg = cfgmod.parse(job["config"])
    p, mesh, options, policy = _objects(cfg)
    path = os.path.join(job["out"], job["name"] + ".jsonl")
    store = "jsonl" in cfg.output.formats
    try:
        if job["side"] is None:
            c = cfg.continuation
            window = (c.lambda_min, c.lambda_max)
            expected = int(np.floor((window[1] - window[0]) / c.trivial_step + 1e-9)) + 1
            if job["resume"] and os.path.exists(path):
                old = persistence.load_branch(path, mesh, WINDOW_END)
                if len(old.points) == expected:
                    return {"name": job["name"], "termination": WINDOW_END, "points": expected}
            branch = trace_trivial(p, mesh, window, c.trivial_step, cfg.analysis.n_max, options)
            if store:
                persistence.rewrite(path, branch, mesh)
            return {"name": job["name"], "termination": branch.termination, "points": len(branch.points)}

        root = BifurcationRoot(**job["root"])
        side = 1 if job["side"] == "+" else -1
        branch = None
        if job["resume"] and os.path.exists(path):
            old = persistence.load_branch(path, mesh)
            if len(old.points) >= 2:
                branch = old
                persistence.rewrite(path, branch, mesh)
        if branch is None:
            branch = start_pitchfork(root, side, p, mesh, cfg.continuation.tau0, options)
            if store:
                persistence.rewrite(path, branch, mesh)
        done = _finished(branch, policy)
        if done is not None:
            return {"name": job["name"], "termination": done, "points": len(branch.points)}
        if store:
            with persistence.BranchWriter(path, mesh, branch.origin, len(branch.points), mode="a") as sink:
                branch = trace_branch(branch, p, mesh, policy, options, sink=sink)
        else:
            branch = trace_branch(branch, p, mesh, policy, options)
        return {"name": job["name"], "termination": branch.termination, "points": len(branch.points)}
    except Exception as exc:  # reported per branch, other branches go on
        log.exception("branch %s failed", job["name"])
        return {"name": job["name"], "termination": "error", "error": f"{type(exc).__name__}: {exc}"}


def _dispatch(jobs, workers):
    if workers <= 1 or len(jobs) == 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_job, jobs))


def _final_stable(branch):
    pts = [pt for pt in branch.visible() if pt.stable]
    return pts[-1] if pts else None


def cmd_trace(cfg, out, resume=False):
    os.makedirs(out, exist_ok=True)
    text = cfgmod.serialize(cfg)
    with open(os.path.join(out, RUN_CONFIG), "w") as fh:
        fh.write(text)
    try:
        roots = _roots(cfg)
    except NonGenericParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONGENERIC
    crit = critical_root(roots)
    if crit is not None and not crit.simple:
        print(f"error: critical root n={crit.n} is not simple", file=sys.stderr)
        return EXIT_NONGENERIC

    manifest_path = os.path.join(out, MANIFEST)
    if not resume and os.path.exists(manifest_path):
        os.remove(manifest_path)
    jobs = [{"config": text, "out": out, "name": "trivial", "side": None, "resume": resume}]
    if crit is not None:
        root = {"n": crit.n, "lambda_n": crit.lambda_n, "simple": crit.simple, "is_critical": True}
        for side in cfg.continuation.sides:
            jobs.append({"config": text, "out": out, "name": branch_name(crit.n, side), "side": side, "root": root, "resume": resume})
    results = _dispatch(jobs, cfg.output.workers)

    # join barrier passed: post-process and summarize
    p, mesh, options, policy = _objects(cfg)
    status = {r["name"]: r for r in results}
    failed = False
    branches = {}
    for r in results:
        if r["termination"] in ("error", STEP_FAILURE):
            failed = True
            print(f"branch {r['name']}: {r['termination']} {r.get('error', '')}".rstrip(), file=sys.stderr)
        path = os.path.join(out, r["name"] + ".jsonl")
        if r["termination"] != "error" and os.path.exists(path):
            b = persistence.load_branch(path, mesh, r["termination"])
            if len(b.points) >= 3:
                stress_along_branch(b)
            branches[r["name"]] = b
            if "csv" in cfg.output.formats:
                write_branch_csv(os.path.join(out, f"branch_{r['name']}.csv"), b, mesh)

    trivial = branches.get("trivial")
    rows = []
    if crit is not None:
        refine = None
        if trivial is not None:
            tl = trivial.lams
            spline = interpolate.CubicSpline(tl, trivial.energies)
            refine = fixed_load_refiner(p, mesh, spline, options)
        for side in cfg.continuation.sides:
            name = branch_name(crit.n, side)
            b = branches.get(name)
            lam_e = float("nan")
            final = None
            if b is not None:
                if trivial is not None:
                    try:
                        cross = energy_crossover(trivial, b, refine=refine)
                    except Exception as exc:  # refinement failure falls back to interpolation
                        log.warning("crossover refinement on %s failed: %s", name, exc)
                        cross = energy_crossover(trivial, b)
                    lam_e = cross.lam
                final = _final_stable(b)
            cen = crack_census(final.state, mesh) if final is not None else []
            rows.append(
                (
                    name,
                    crit.n,
                    _fmt(crit.lambda_n),
                    _fmt(lam_e),
                    status[name]["termination"],
                    len(b.points) if b is not None else 0,
                    _fmt(final.lam) if final is not None else _fmt(float("nan")),
                    len(cen),
                    ";".join(_fmt(c.position + 0.0) for c in cen),
                    sum(c.end for c in cen),
                )
            )
    write_csv(os.path.join(out, "summary.csv"), SUMMARY_COLUMNS, rows)
    with open(manifest_path, "w") as fh:
        json.dump({k: status[k] for k in sorted(status)}, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for row in rows:
        print(f"{row[0]}: lambda_E={row[3]} final cracks={row[7]} ({row[4]})")
    return EXIT_CONTINUATION if failed else EXIT_OK


# --------------------------------------------------------------- snapshot


def _stored_config(args, out):
    if args.config:
        return cfgmod.load(args.config)
    path = os.path.join(out, RUN_CONFIG)
    if os.path.exists(path):
        return cfgmod.load(path)
    return cfgmod.RunConfig()


def select_point(branch: Branch, selector: str, mesh: Mesh):
    """Index of the point picked by ``index:I``, ``lambda:L`` or ``tag:first-crack|final``."""
    kind, _, value = selector.partition(":")
    pts = branch.points
    lams = branch.lams
    span = f"available: index 0..{len(pts) - 1}, lambda {lams.min():.6g}..{lams.max():.6g}"
    if kind == "index":
        try:
            i = int(value)
        except ValueError:
            raise UsageError(f"bad index {value!r}; {span}") from None
        if not 0 <= i < len(pts):
            raise UsageError(f"index {i} outside branch; {span}")
        return i
    if kind == "lambda":
        try:
            lam = float(value)
        except ValueError:
            raise UsageError(f"bad lambda {value!r}; {span}") from None
        if not lams.min() <= lam <= lams.max():
            raise UsageError(f"lambda {lam} outside branch window; {span}")
        cand = [i for i, pt in enumerate(pts) if not pt.healing] or list(range(len(pts)))
        return min(cand, key=lambda i: abs(lams[i] - lam))
    if kind == "tag":
        if value == "first-crack":
            for i, pt in enumerate(pts):
                if pt.active:
                    return i
            raise UsageError(f"branch has no cracked point; {span}")
        if value == "final":
            for i in range(len(pts) - 1, -1, -1):
                if pts[i].stable and not pts[i].healing:
                    return i
            raise UsageError(f"branch has no stable point; {span}")
        raise UsageError(f"unknown tag {value!r} (first-crack, final)")
    raise UsageError(f"selector must be index:I, lambda:L or tag:NAME, got {selector!r}")


def cmd_snapshot(cfg, out, branch_id, selector, samples=10):
    _, mesh, _, _ = _objects(cfg)
    path = os.path.join(out, branch_id + ".jsonl")
    if not os.path.exists(path):
        have = sorted(f[:-6] for f in os.listdir(out) if f.endswith(".jsonl")) if os.path.isdir(out) else []
        raise UsageError(f"no branch {branch_id!r} in {out}; available: {', '.join(have) or 'none'}")
    branch = persistence.load_branch(path, mesh)
    if not branch.points:
        raise UsageError(f"branch {branch_id!r} is empty")
    i = select_point(branch, selector, mesh)
    pt = branch.points[i]
    fields = reconstruct_fields(pt.state, mesh, samples)
    tag = selector.replace(":", "-")
    written = write_fields_csv(os.path.join(out, f"fields_{branch_id}_{tag}"), fields)
    cen = crack_census(pt.state, mesh)
    print(f"point {i}: lambda={pt.lam:.6f} {pt.stability}, {len(cen)} crack(s)")
    for w in written:
        print(w)
    return EXIT_OK


# -------------------------------------------------------- stability report


def cmd_stability_report(cfg, out):
    p, mesh, _, _ = _objects(cfg)
    names = sorted(f[:-6] for f in os.listdir(out) if f.endswith(".jsonl")) if os.path.isdir(out) else []
    if not names:
        raise UsageError(f"no branch files in {out}")
    rows = []
    mismatches = 0
    for name in names:
        b = persistence.load_branch(os.path.join(out, name + ".jsonl"), mesh)
        prev = None
        for i, pt in enumerate(b.points):
            label, inert = classify_state(pt.state, p, mesh)
            rows.append((name, i, pt.lam, *inert, len(pt.active), label, pt.stability))
            mismatches += label != pt.stability
            if prev is not None and label != prev:
                print(f"{name}: {prev} -> {label} at lambda={pt.lam:.6f} (index {i})")
            prev = label
    write_csv(os.path.join(out, "stability_report.csv"), REPORT_COLUMNS, rows)
    if mismatches:
        print(f"warning: {mismatches} point(s) disagree with the stored classification")
    return EXIT_OK


# ------------------------------------------------------------------- main


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [output] directory)")
    common.add_argument("--k", type=float, help="interface stiffness")
    common.add_argument("--epsilon", type=float, help="gradient coefficient")
    common.add_argument("--beta", type=float, help="layer modulus")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="fibercrack", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="characteristic roots")
    tr = sub.add_parser("trace", parents=[common], help="trace branches")
    tr.add_argument("--resume", action="store_true", help="continue from existing branch files")
    tr.add_argument("--workers", type=int, help="worker processes (overrides [output] workers)")
    sn = sub.add_parser("snapshot", parents=[common], help="export fields of one point")
    sn.add_argument("--branch", required=True, help="branch id, e.g. trivial or pitchfork_n3_plus")
    sn.add_argument("--select", default="tag:final", help="index:I, lambda:L, tag:first-crack or tag:final")
    sn.add_argument("--samples", type=int, default=10, help="samples per element")
    sub.add_parser("stability-report", parents=[common], help="recompute inertia of stored points")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("snapshot", "stability-report") and not args.config and args.out:
            cfg = _stored_config(args, args.out)
        else:
            cfg = cfgmod.load(args.config) if args.config else cfgmod.RunConfig()
        cfg = cfg.with_overrides(k=args.k, epsilon=args.epsilon, beta=args.beta)
        if getattr(args, "workers", None) is not None:
            cfg = replace(cfg, output=replace(cfg.output, workers=args.workers))
        out = args.out or cfg.output.directory
        if args.command == "analyze":
            return cmd_analyze(cfg, out)
        if args.command == "trace":
            return cmd_trace(cfg, out, args.resume)
        if args.command == "snapshot":
            return cmd_snapshot(cfg, out, args.branch, args.select, args.samples)
        return cmd_stability_report(cfg, out)
    except (cfgmod.ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
