"""Command line entry point: ``cyclesync <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import io
from .evaluation import align_rotations, apply_rotation_alignment, exact_recovery, pose_errors
from .harness import check_separation, emit_aggregates, emit_csv, planted_separation_instance, run_sweep, theorem_check
from .location import SolverError, cycle_sync
from .rotation import mpls_cycle, spanning_tree_rotations, gauge_fix, _angle_batch
from .synthetic import SyntheticScenario, sample_rotation_scenario, sample_scenario

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ASSERTION = 2


def _settings(args) -> dict:
    flat = cfgmod.load_config(args.config) if getattr(args, "config", None) else {}
    for item in getattr(args, "set", None) or []:
        key, value = cfgmod.parse_override(item)
        flat[key] = value
    cfgmod.check_keys(flat)
    return flat


def _write_json(path, doc) -> None:
    text = json.dumps(doc, indent=2, default=lambda x: x.tolist() if isinstance(x, np.ndarray) else str(x))
    if path in (None, "-"):
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def cmd_generate(args) -> int:
    manifest = {"kind": args.kind, "n": args.n, "p": args.p, "q": args.q, "seed": args.seed}
    if args.kind == "location":
        scn = SyntheticScenario(n=args.n, p=args.p, q=args.q, sigma=args.sigma, model=args.model, seed=args.seed)
        graph, gt, dirs = sample_scenario(scn)
        manifest.update(sigma=args.sigma, model=args.model)
        io.write_scenario(args.out, graph, gt, manifest, dirs=dirs)
        if gt.alternate_locations is not None:
            io.write_locations(Path(args.out) / "alternate_locations.txt", gt.alternate_locations)
    else:
        graph, gt, rots = sample_rotation_scenario(args.n, args.p, args.q, args.sigma, args.seed)
        manifest.update(sigma_rot=args.sigma, model="uniform")
        io.write_scenario(args.out, graph, gt, manifest, rots=rots)
    if not gt.connected:
        logging.warning("generated view graph is disconnected")
    print(f"wrote {args.out}: n={graph.n} m={graph.m} corrupted={int(gt.corrupted.sum())}")
    return EXIT_OK


def cmd_solve_location(args) -> int:
    flat = _settings(args)
    if args.loss:
        flat["solver.loss"] = args.loss
    if args.schedule:
        flat["solver.schedule"] = args.schedule
    cfg = cfgmod.solver_config(flat)
    graph = io.read_graph(args.graph)
    dirs = io.read_directions(args.dirs, graph)
    est = cycle_sync(graph, dirs, cfg)
    e = est.edges
    io.write_estimate(args.out, "locations", graph, locations=est.locations,
                      edges={"w": e.w, "r": e.r, "s": e.s, "h": e.h, "alpha": e.alpha},
                      log=est.log, config=cfgmod.to_dict(cfg))
    return EXIT_OK


def cmd_solve_rotation(args) -> int:
    cfg = cfgmod.rotation_config(_settings(args))
    graph = io.read_graph(args.graph)
    rots = io.read_rotations(args.rots, graph)
    edges = {}
    if args.baseline:
        R = gauge_fix(spanning_tree_rotations(graph, rots))
    else:
        R, s = mpls_cycle(graph, rots, cfg, return_scores=True)
        edges["s"] = s
    io.write_estimate(args.out, "rotations", graph, rotations=R, edges=edges,
                      config={"baseline": args.baseline, **cfgmod.to_dict(cfg)})
    return EXIT_OK


def cmd_evaluate(args) -> int:
    est = io.read_estimate(args.est)
    n = est["n"]
    report: dict = {"kind": est["kind"], "n": n}
    if est["kind"] == "locations":
        gt = io.read_locations(Path(args.gt) / io.LOCATIONS_FILE, n)
        res = pose_errors(est["locations"], gt)
        report.update(scale=res.scale, translation=res.translation, errors=res.errors,
                      median=res.median, mean=res.mean, exact_recovery=exact_recovery(res))
    else:
        gt = io.read_absolute_rotations(Path(args.gt) / io.ABS_ROTATIONS_FILE, n)
        R = align_rotations(est["rotations"], gt, side="right")
        err = np.degrees(_angle_batch(gt, apply_rotation_alignment(est["rotations"], R, "right")))
        report.update(rotation_align=R, errors_deg=err, median_deg=float(np.median(err)),
                      mean_deg=float(np.mean(err)), max_deg=float(np.max(err)))
    _write_json(args.out, report)
    return EXIT_OK


def cmd_sweep(args) -> int:
    flat = _settings(args)
    if args.param:
        flat["sweep.param"] = args.param
    if args.values:
        flat["sweep.values"] = args.values
    if args.seeds:
        flat["sweep.seeds"] = args.seeds
    if args.out:
        flat["sweep.output"] = args.out
    if args.workers:
        flat["sweep.workers"] = args.workers
    spec = cfgmod.sweep_spec(flat)
    report = run_sweep(spec)
    if spec.output is None:
        emit_csv(report, sys.stdout)
    if args.aggregates:
        emit_aggregates(report, args.aggregates)
    failed = sum(r.error is not None for r in report.rows)
    if failed:
        logging.warning("%d of %d rows failed", failed, len(report.rows))
    return EXIT_OK


def cmd_theorem_check(args) -> int:
    if args.planted:
        graph, dirs = planted_separation_instance(args.n, args.alpha, args.seed)
        report = check_separation(graph, dirs, args.alpha, args.iters, seed=args.seed)
    else:
        report = theorem_check(args.alpha, args.n, args.p, args.q, args.seed, args.max_attempts, args.iters)
    _write_json(args.out, report.to_dict())
    if report.outcome == "failed":
        return EXIT_ASSERTION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cyclesync", description="Robust camera location and rotation estimation.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="YAML/JSON file with solver/taab/rotation/scenario/sweep keys")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")

    p = sub.add_parser("generate", help="write a synthetic scenario directory")
    p.add_argument("--kind", choices=("location", "rotation"), default="location")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.0, help="direction noise, or rotation noise in radians")
    p.add_argument("--model", choices=("uniform", "adversarial"), default="uniform")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve-location", help="estimate camera locations from directions")
    p.add_argument("--graph", required=True)
    p.add_argument("--dirs", required=True)
    p.add_argument("--loss", choices=("welsch", "l1", "l2"))
    p.add_argument("--lambda", dest="schedule", help="schedule name: t10, zero, one, inv10, t5")
    p.add_argument("--out", required=True)
    with_config(p)
    p.set_defaults(func=cmd_solve_location)

    p = sub.add_parser("solve-rotation", help="estimate absolute rotations from relative ones")
    p.add_argument("--graph", required=True)
    p.add_argument("--rots", required=True)
    p.add_argument("--baseline", action="store_true", help="plain spanning-tree chaining")
    p.add_argument("--out", required=True)
    with_config(p)
    p.set_defaults(func=cmd_solve_rotation)

    p = sub.add_parser("evaluate", help="compare an estimate with a scenario's ground truth")
    p.add_argument("--est", required=True)
    p.add_argument("--gt", required=True, help="scenario directory")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="multi-seed parameter sweep to CSV")
    p.add_argument("--param", choices=("q", "sigma", "p", "n"))
    p.add_argument("--values", help="'0,0.1,0.2' or 'start:stop:step'")
    p.add_argument("--seeds", type=int, help="use seeds 0..N-1")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--aggregates", help="also write per-(method, value) aggregates as JSON")
    with_config(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("theorem-check", help="check the T-AAB separation bounds on generated instances")
    p.add_argument("--alpha", type=float, default=float(np.arcsin(0.6)), help="well-shaped angle threshold")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--p", type=float, default=0.6)
    p.add_argument("--q", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-attempts", type=int, default=10)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--planted", action="store_true",
                   help="dense instance with one reversed edge instead of random corruption (uses --n, --alpha, --seed)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_theorem_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
