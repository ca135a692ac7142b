"""Seeded sweeps, CSV reports and the separation-bound check for T-AAB.

Row seeding: a row's scenario seed is the trial seed itself. Every method
and every swept value therefore sees the same locations, graph, noise and
corruption uniforms (the synthetic sub-streams keep those fixed when only
``q`` or ``sigma`` changes), so method comparisons are paired.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .directions import DirectionMeasurements, aab_table, angular_corruption, well_shaped_filter
from .evaluation import EXACT_RECOVERY_THRESHOLD, pose_errors
from .graph import ViewGraph
from .location import SolverConfig, cycle_sync
from .synthetic import SyntheticScenario, sample_scenario
from .taab import DEFAULT_ANGLE_THRESHOLD, TaabConfig, measure_theorem_instance, taab_scores

log = logging.getLogger(__name__)

CSV_HEADER = ("method", "param", "value", "seed", "median_err", "mean_err", "runtime_s", "exact")
SWEEP_PARAMS = ("q", "sigma", "p", "n")


@dataclass(frozen=True)
class MethodSpec:
    """A named solver variant: a loss and a lambda schedule on top of a base config."""

    name: str
    loss: str = "welsch"
    schedule: str | tuple[float, ...] = "t10"
    init: str | None = None

    def config(self, base: SolverConfig) -> SolverConfig:
        changes = {"loss": self.loss, "schedule": self.schedule}
        if self.init is not None:
            changes["init"] = self.init
        return dataclasses.replace(base, **changes)


DEFAULT_METHOD = MethodSpec("cycle-sync")
BASELINE_METHOD = MethodSpec("irls-l1", loss="l1", schedule="zero", init="uniform")


@dataclass(frozen=True)
class SweepSpec:
    scenario: SyntheticScenario = SyntheticScenario()
    param: str = "q"
    values: tuple[float, ...] = (0.0,)
    seeds: tuple[int, ...] = (0,)
    methods: tuple[MethodSpec, ...] = (DEFAULT_METHOD,)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ValueError(f"cannot sweep {self.param!r}; choose from {SWEEP_PARAMS}")
        if len(self.values) == 0 or len(self.seeds) == 0 or len(self.methods) == 0:
            raise ValueError("values, seeds and methods must be nonempty")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ValueError("method names must be unique")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "methods", tuple(self.methods))
        # fail early on invalid grid points rather than inside every row
        for v in self.values:
            self.scenario_for(v, self.seeds[0])

    def scenario_for(self, value: float, seed: int) -> SyntheticScenario:
        v = int(round(value)) if self.param == "n" else value
        return dataclasses.replace(self.scenario, **{self.param: v, "seed": seed})


@dataclass(frozen=True)
class SweepRow:
    method: str
    param: str
    value: float
    seed: int
    median_err: float
    mean_err: float
    runtime_s: float
    exact: bool
    error: str | None = None


@dataclass(frozen=True)
class AggregateRow:
    method: str
    value: float
    trials: int
    median_mean: float
    median_std: float
    mean_mean: float
    mean_std: float
    exact_fraction: float


def _std(x: np.ndarray) -> float:
    # sample standard deviation across trials; 0 for a single trial
    return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0


@dataclass
class SweepReport:
    rows: list[SweepRow]
    param: str = "q"

    def aggregates(self) -> list[AggregateRow]:
        """Across-seed mean and standard deviation per (method, value); failed rows excluded."""
        groups: dict[tuple[str, float], list[SweepRow]] = {}
        for row in self.rows:
            groups.setdefault((row.method, row.value), []).append(row)
        out = []
        for (method, value), rows in groups.items():
            ok = [r for r in rows if r.error is None]
            med = np.array([r.median_err for r in ok])
            mean = np.array([r.mean_err for r in ok])
            out.append(AggregateRow(
                method=method,
                value=value,
                trials=len(ok),
                median_mean=float(med.mean()) if len(ok) else math.nan,
                median_std=_std(med),
                mean_mean=float(mean.mean()) if len(ok) else math.nan,
                mean_std=_std(mean),
                exact_fraction=float(np.mean([r.exact for r in ok])) if len(ok) else math.nan,
            ))
        return out

    def aggregate(self, method: str, value: float) -> AggregateRow:
        for agg in self.aggregates():
            if agg.method == method and agg.value == value:
                return agg
        raise KeyError((method, value))


def _run_row(job) -> SweepRow:
    method, param, value, seed, scn, cfg = job
    t0 = time.perf_counter()
    try:
        graph, gt, dirs = sample_scenario(scn)
        est = cycle_sync(graph, dirs, cfg)
        res = pose_errors(est.locations, gt.locations)
        return SweepRow(method, param, value, seed, res.median, res.mean,
                        time.perf_counter() - t0, res.median < EXACT_RECOVERY_THRESHOLD)
    except Exception as exc:  # recorded per row, the sweep continues
        log.warning("row %s %s=%g seed=%d failed: %s", method, param, value, seed, exc)
        return SweepRow(method, param, value, seed, math.nan, math.nan,
                        time.perf_counter() - t0, False, f"{type(exc).__name__}: {exc}")


def _check_writable(path: str) -> None:
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise OSError(f"output path {path!r} is not writable")


def run_sweep(spec: SweepSpec) -> SweepReport:
    """Generate, solve and evaluate every (method, value, seed) combination.

    Rows come back in (method, value, seed) order regardless of
    ``spec.workers``. Failures are recorded in :attr:`SweepRow.error`.
    When ``spec.output`` is set the rows are written there as CSV.
    """
    if spec.output is not None:
        _check_writable(spec.output)
    jobs = [
        (m.name, spec.param, v, s, spec.scenario_for(v, s), m.config(spec.solver))
        for m in spec.methods
        for v in spec.values
        for s in spec.seeds
    ]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_run_row, jobs))
    else:
        rows = [_run_row(job) for job in jobs]
    report = SweepReport(rows=rows, param=spec.param)
    if spec.output is not None:
        emit_csv(report, spec.output)
    return report


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6g}"


def _write_rows(fh, report: SweepReport) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in report.rows:
        writer.writerow([r.method, r.param, _fmt(r.value), r.seed, _fmt(r.median_err),
                         _fmt(r.mean_err), _fmt(r.runtime_s), "true" if r.exact else "false"])


def emit_csv(report: SweepReport, path) -> None:
    """Write one line per row with 6 significant digits and LF line endings.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(path, report)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_rows(fh, report)


def read_csv(path) -> SweepReport:
    """Parse a file written by :func:`emit_csv`. Per-row error messages are not stored."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(CSV_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(rec)}")
            if rec[7] not in ("true", "false"):
                raise ValueError(f"{path}:{lineno}: exact flag must be true or false")
            rows.append(SweepRow(rec[0], rec[1], float(rec[2]), int(rec[3]), float(rec[4]),
                                 float(rec[5]), float(rec[6]), rec[7] == "true"))
    param = rows[0].param if rows else "q"
    return SweepReport(rows=rows, param=param)


def emit_aggregates(report: SweepReport, path) -> None:
    """Aggregates as JSON at full precision."""
    data = [dataclasses.asdict(a) for a in report.aggregates()]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"param": report.param, "aggregates": data}, fh, indent=2)
        fh.write("\n")


def emit_gnuplot(report: SweepReport, path) -> None:
    """Whitespace table ``value median_mean median_std`` with one block per method."""
    aggs = report.aggregates()
    with open(path, "w", encoding="utf-8") as fh:
        for method in dict.fromkeys(a.method for a in aggs):
            fh.write(f"# {method}\n")
            for a in sorted((a for a in aggs if a.method == method), key=lambda a: a.value):
                fh.write(f"{a.value:.6g} {a.median_mean:.6g} {a.median_std:.6g}\n")
            fh.write("\n\n")


# -- separation bound ----------------------------------------------------------


@dataclass
class TheoremReport:
    outcome: str  # "passed", "failed" or "hypotheses unmet"
    seed: int | None
    attempts: int
    alpha: float | None = None
    lam: float | None = None
    mu: float | None = None
    c_alpha: float | None = None
    lambda_limit: float | None = None
    beta0: float | None = None
    growth: float | None = None
    good_margins: list[float] = field(default_factory=list)
    bad_margins: list[float] = field(default_factory=list)
    violations: int = 0
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.outcome == "passed"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def derive_seed(*parts: int) -> int:
    """Deterministic 63-bit seed from a tuple of integers."""
    state = np.random.SeedSequence([int(p) & (2**64 - 1) for p in parts]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


def check_separation(
    graph: ViewGraph,
    dirs: DirectionMeasurements,
    angle_threshold: float = DEFAULT_ANGLE_THRESHOLD,
    iters: int = 10,
    seed: int | None = None,
    attempts: int = 1,
    tol: float = 1e-12,
) -> TheoremReport:
    """Measure the bound's constants on a labelled instance and test both bounds.

    For every ``t = 0..iters`` the good-edge margin is
    ``1 / (2 beta0 r^t) - max_good s_t`` and the bad-edge margin is
    ``min_bad (s_t - mu / e (1 - lambda) s~*)``; a margin below ``-tol``
    counts as a violation. ``tol`` absorbs floating point rounding only.
    """
    ws = well_shaped_filter(graph, graph.triangles, dirs, angle_threshold)
    table = aab_table(graph, ws, dirs)
    inst = measure_theorem_instance(graph, dirs, ws, table)
    report = TheoremReport(
        outcome="hypotheses unmet", seed=seed, attempts=attempts, alpha=inst.alpha, lam=inst.lam,
        mu=inst.mu, c_alpha=inst.c_alpha, lambda_limit=inst.lambda_limit,
    )
    if not inst.hypotheses_hold:
        why = []
        if not inst.all_edges_covered:
            why.append("some edge has no well-shaped triangle")
        if inst.lam >= inst.lambda_limit:
            why.append(f"lambda {inst.lam:.4g} >= limit {inst.lambda_limit:.4g}")
        report.reason = "; ".join(why) or "alpha out of range"
        return report

    cfg = inst.admissible_schedule(iters)
    cfg = dataclasses.replace(cfg, angle_threshold=angle_threshold)
    report.beta0, report.growth = cfg.beta0, cfg.growth
    history = taab_scores(graph, ws, table, cfg, history=True)
    bad = dirs.corrupted
    lower = inst.bad_bound(angular_corruption(dirs))
    for t, s in enumerate(history):
        good = float(inst.good_bound(cfg, t) - s[~bad].max()) if np.any(~bad) else math.inf
        worst = float(np.min(s[bad] - lower[bad])) if np.any(bad) else math.inf
        report.good_margins.append(good)
        report.bad_margins.append(worst)
        report.violations += int(good < -tol) + int(worst < -tol)
    report.outcome = "passed" if report.violations == 0 else "failed"
    return report


def theorem_check(
    angle_threshold: float = DEFAULT_ANGLE_THRESHOLD,
    n: int = 200,
    p: float = 0.6,
    q: float = 0.05,
    seed: int = 0,
    max_attempts: int = 10,
    iters: int = 10,
) -> TheoremReport:
    """Noise-free uniform-corruption instances until one meets the hypotheses.

    Attempt 0 uses ``seed``; attempt ``k`` uses ``derive_seed(seed, k)``.
    Returns the first checked instance, or the last unmet one.
    """
    report = None
    for k in range(max_attempts):
        s = seed if k == 0 else derive_seed(seed, k)
        graph, _, dirs = sample_scenario(SyntheticScenario(n=n, p=p, q=q, sigma=0.0, seed=s))
        report = check_separation(graph, dirs, angle_threshold, iters, seed=s, attempts=k + 1)
        log.info("theorem check attempt %d (seed %d): %s %s", k, s, report.outcome, report.reason)
        if report.outcome != "hypotheses unmet":
            return report
    return report


def planted_separation_instance(
    n: int = 100, angle_threshold: float = 1.0, seed: int = 0
) -> tuple[ViewGraph, DirectionMeasurements]:
    """Dense noise-free instance with one reversed edge, built to meet the bound's hypotheses.

    Random Gaussian cameras on a complete graph; edges without a
    well-shaped triangle are pruned until every edge has one. The single
    corrupted edge (its direction reversed) is the one whose neighbouring
    edges have the largest well-shaped support, which keeps the worst
    bad-cycle fraction small. Random corruption at useful rates gives
    bad-cycle fractions far above what the bound tolerates.
    """
    from .graph import build_view_graph

    locs = np.random.default_rng(seed).standard_normal((n, 3))
    edges = np.stack(np.triu_indices(n, 1), axis=1)
    while True:
        graph = build_view_graph(n, edges)
        diff = locs[graph.edges[:, 0]] - locs[graph.edges[:, 1]]
        truth = diff / np.linalg.norm(diff, axis=1, keepdims=True)
        ws = well_shaped_filter(graph, graph.triangles, DirectionMeasurements(truth), angle_threshold)
        counts = ws.index.counts()
        if graph.m == 0 or counts.min() >= 1:
            break
        edges = graph.edges[counts >= 1]
    if graph.m == 0:
        raise ValueError("no edge survives pruning; lower the angle threshold")
    idx = ws.index
    support = np.full(graph.m, np.inf)
    np.minimum.at(support, idx.edge_ik, counts[idx.owner])
    np.minimum.at(support, idx.edge_jk, counts[idx.owner])
    bad = np.zeros(graph.m, bool)
    bad[int(np.argmax(support))] = True
    vectors = np.where(bad[:, None], -truth, truth)
    return graph, DirectionMeasurements(vectors, truth=truth, corrupted=bad)


def parse_values(text: str | Sequence[float]) -> tuple[float, ...]:
    """``"0,0.1,0.2"`` or ``"0:0.9:0.1"`` (inclusive stop) into a tuple."""
    if not isinstance(text, str):
        return tuple(float(v) for v in text)
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ValueError("range step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(count))
    return tuple(float(v) for v in text.split(",") if v.strip())
