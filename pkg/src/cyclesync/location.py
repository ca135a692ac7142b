"""Cycle-Sync camera location solver and its plain-IRLS baselines.

The outer loop alternates a constrained weighted least squares solve

    min  sum_ij w_ij ||t_i - t_j - alpha_ij gamma_ij||^2
    s.t. alpha_ij >= 1, sum_i t_i = 0

with a reweighting step driven by a blend of edge residuals and
residual-weighted 3-cycle inconsistencies.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
import scipy.linalg

from ._segments import softmin_average
from .directions import DirectionMeasurements, location_cycle_inconsistency_batch, oriented_directions
from .graph import TriangleIndex, ViewGraph
from .taab import TaabConfig, compute_taab, initial_weights

log = logging.getLogger(__name__)

LOSSES = ("welsch", "l1", "l2")

SCHEDULES: dict[str, Callable[[int], float]] = {
    "t10": lambda t: t / (t + 10.0),
    "zero": lambda t: 0.0,
    "one": lambda t: 1.0,
    "inv10": lambda t: 10.0 / (10.0 + t),
    "t5": lambda t: t / (t + 5.0),
}


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of :func:`cycle_sync`.

    ``schedule`` is either a name from :data:`SCHEDULES` or an explicit
    sequence ``lambda_1, ..., lambda_tmax``.
    """

    loss: str = "welsch"
    a: float = 4.0
    beta: float = 20.0
    delta: float = 1e-8
    t_max: int = 20
    schedule: Union[str, Sequence[float]] = "t10"
    init: str = "taab"
    max_inner: int = 50
    solve_tol: float = 1e-10
    outer_tol: float = 0.0
    weight_floor: float = 1e-12
    wls_method: str = "active_set"
    taab: TaabConfig = field(default_factory=TaabConfig)

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")
        if not (self.a > 0 and self.beta > 0 and self.delta > 0):
            raise ValueError("a, beta and delta must be positive")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.wls_method not in ("alternating", "active_set"):
            raise ValueError(f"unknown WLS method {self.wls_method!r}")
        if self.init not in ("taab", "uniform"):
            raise ValueError(f"unknown init {self.init!r}")
        if isinstance(self.schedule, str):
            if self.schedule not in SCHEDULES:
                raise ValueError(f"unknown schedule {self.schedule!r}")
        else:
            seq = tuple(float(x) for x in self.schedule)
            if len(seq) < self.t_max:
                raise ValueError("custom schedule shorter than t_max")
            object.__setattr__(self, "schedule", seq)
        lams = [self.lam(t) for t in range(1, self.t_max + 1)]
        if any(not 0.0 <= v <= 1.0 for v in lams):
            raise ValueError("schedule values must lie in [0, 1]")

    def lam(self, t: int) -> float:
        """Blend weight ``lambda_t`` for outer iteration ``t >= 1``."""
        if isinstance(self.schedule, str):
            return SCHEDULES[self.schedule](t)
        return self.schedule[t - 1]


@dataclass
class EdgeState:
    w: np.ndarray
    r: np.ndarray
    s: np.ndarray
    h: np.ndarray
    alpha: np.ndarray


@dataclass
class LocationEstimate:
    locations: np.ndarray
    edges: EdgeState
    log: list[dict] = field(default_factory=list)


def robust_loss(x, cfg: SolverConfig = SolverConfig()):
    x = np.asarray(x, dtype=float)
    if cfg.loss == "welsch":
        return 1.0 - np.exp(-cfg.a * x)
    if cfg.loss == "l1":
        return x
    return x * x


def reweight(h, cfg: SolverConfig = SolverConfig()):
    """IRLS weight ``rho'(h) / (h + delta)``, scaled by 1/4 for the Welsch loss.

    For ``a = 4`` the Welsch weight is ``exp(-4h) / (h + delta)``. The L2
    weight is the constant 1 (its derivative ratio up to scale).
    """
    h = np.asarray(h, dtype=float)
    if cfg.loss == "welsch":
        return 0.25 * cfg.a * np.exp(-cfg.a * h) / (h + cfg.delta)
    if cfg.loss == "l1":
        return 1.0 / (h + cfg.delta)
    return np.ones_like(h)


def blend(r, s, lam: float):
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    return (1.0 - lam) * np.asarray(r, dtype=float) + lam * np.asarray(s, dtype=float)


def residuals(graph: ViewGraph, locations: np.ndarray, alpha: np.ndarray, dirs: DirectionMeasurements) -> np.ndarray:
    """``||t_i - t_j - alpha_ij gamma_ij||`` per edge."""
    diff = locations[graph.edges[:, 0]] - locations[graph.edges[:, 1]]
    return np.linalg.norm(diff - alpha[:, None] * dirs.vectors, axis=1)


def cycle_scores(
    graph: ViewGraph,
    tri: TriangleIndex,
    dirs: DirectionMeasurements,
    locations: np.ndarray,
    resid: np.ndarray,
    beta: float,
) -> np.ndarray:
    """Residual-weighted average of location cycle inconsistencies per edge.

    Edges that lie on no triangle fall back to their own residual.
    """
    i = graph.edges[tri.owner, 0]
    j = graph.edges[tri.owner, 1]
    g_ij, g_jk, g_ki = oriented_directions(graph, tri, dirs.vectors)
    d = location_cycle_inconsistency_batch(locations[i], locations[j], locations[tri.k], g_ij, g_jk, g_ki)
    cost = resid[tri.edge_ik] + resid[tri.edge_jk]
    avg, nonempty = softmin_average(cost, d, tri.owner, tri.offsets, beta)
    return np.where(nonempty, avg, resid)


# -- weighted least squares ----------------------------------------------------


def _laplacian(graph: ViewGraph, w: np.ndarray) -> np.ndarray:
    n = graph.n
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    L = np.zeros((n, n))
    np.add.at(L, (i, j), -w)
    np.add.at(L, (j, i), -w)
    L[np.diag_indices(n)] = np.bincount(i, w, n) + np.bincount(j, w, n)
    return L


class _LocationSystem:
    """Factorized normal equations of the location sub-problem for fixed weights.

    The mean-zero gauge is imposed by adding ``c * 11^T`` to the Laplacian;
    for a right-hand side orthogonal to ``1`` the solution of the shifted
    system is the unique mean-zero solution of the original one.
    """

    def __init__(self, graph: ViewGraph, w: np.ndarray):
        self.graph = graph
        self.w = w
        n = graph.n
        L = _laplacian(graph, w)
        shift = max(float(np.mean(np.diag(L))), np.finfo(float).tiny)
        self.matrix = L + shift / n * np.ones((n, n))
        self.L = L
        try:
            self.factor = scipy.linalg.cho_factor(self.matrix, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"location system is not positive definite: {exc}") from None

    def rhs(self, alpha: np.ndarray, vectors: np.ndarray) -> np.ndarray:
        g = (self.w * alpha)[:, None] * vectors
        b = np.zeros((self.graph.n, 3))
        np.add.at(b, self.graph.edges[:, 0], g)
        np.add.at(b, self.graph.edges[:, 1], -g)
        return b

    def solve(self, b: np.ndarray, tol: float) -> np.ndarray:
        b = b - b.mean(axis=0)
        t = scipy.linalg.cho_solve(self.factor, b, check_finite=False)
        t -= t.mean(axis=0)
        if not np.all(np.isfinite(t)):
            raise SolverError("linear solve produced non-finite values")
        res = np.linalg.norm(self.L @ t - b)
        # backward-error test; tol only sets the floor of the acceptance band
        scale = max(np.linalg.norm(b), np.linalg.norm(self.L) * np.linalg.norm(t), np.finfo(float).tiny)
        if res > max(tol, 1e-8) * scale:
            raise SolverError(f"linear solve failed, residual norm {res:.3e}")
        return t


def _wls_objective(graph, w, locations, alpha, vectors) -> float:
    diff = locations[graph.edges[:, 0]] - locations[graph.edges[:, 1]] - alpha[:, None] * vectors
    return float(np.sum(w * np.sum(diff * diff, axis=1)))


def solve_locations(graph: ViewGraph, dirs: DirectionMeasurements, weights: np.ndarray, alpha: np.ndarray,
                    tol: float = 1e-10) -> np.ndarray:
    """Exact mean-zero minimizer over locations with ``alpha`` held fixed."""
    system = _LocationSystem(graph, _checked_weights(graph, weights, 0.0))
    return system.solve(system.rhs(np.asarray(alpha, float), dirs.vectors), tol)


def _checked_weights(graph: ViewGraph, weights, floor: float) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (graph.m,):
        raise ValueError("one weight per edge required")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    if not graph.is_connected():
        raise SolverError("gauge not fixable: view graph is disconnected")
    if floor > 0 and w.max() > 0:
        w = np.maximum(w, floor * w.max())
    if not graph.is_connected(w):
        raise SolverError("gauge not fixable: positive-weight subgraph is disconnected")
    return w


def _active_set_solve(graph: ViewGraph, w: np.ndarray, g: np.ndarray, active: np.ndarray, max_iter: int,
                      tie_tol: float = 1e-9):
    """Primal-dual active set iteration on the bound constraints ``alpha >= 1``.

    For a fixed active set the problem is an unconstrained quadratic in the
    locations: active edges contribute ``w ||d - gamma||^2`` and free edges,
    with ``alpha`` eliminated, ``w ||(I - gamma gamma^T) d||^2``. The set is
    then updated to ``{<d, gamma> < 1}`` until it stops changing, at which
    point the KKT conditions hold. Edges with ``<d, gamma>`` within
    ``tie_tol`` of 1 keep their status; flipping them on rounding noise can
    empty the active set, whose problem is singular (any scaling fits).

    Returns ``(locations, alpha, converged)``; without convergence the
    iterate with the lowest objective is returned.
    """
    n = graph.n
    e0, e1 = graph.edges[:, 0], graph.edges[:, 1]
    outer = g[:, :, None] * g[:, None, :]
    eye = np.eye(3)
    rows = np.concatenate([e0, e1, e0, e1])
    cols = np.concatenate([e0, e1, e1, e0])
    trans = np.kron(np.ones((n, n)), eye) / n
    best = (np.inf, np.zeros((n, 3)), np.ones(graph.m))
    for _ in range(max_iter):
        blocks = w[:, None, None] * np.where(active[:, None, None], eye, eye - outer)
        H = np.zeros((n, n, 3, 3))
        np.add.at(H, (rows, cols), np.concatenate([blocks, blocks, -blocks, -blocks]))
        H = H.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)
        rhs = np.zeros((n, 3))
        ga = (w * active)[:, None] * g
        np.add.at(rhs, e0, ga)
        np.add.at(rhs, e1, -ga)
        A = H + max(float(np.mean(np.diag(H))), np.finfo(float).tiny) * trans
        try:
            sol = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A, check_finite=False), rhs.ravel(),
                                         check_finite=False)
        except np.linalg.LinAlgError:
            sol = scipy.linalg.lstsq(A, rhs.ravel(), check_finite=False)[0]
        t = sol.reshape(n, 3)
        t -= t.mean(axis=0)
        proj = np.sum((t[e0] - t[e1]) * g, axis=1)
        alpha = np.maximum(1.0, proj)
        obj = _wls_objective(graph, w, t, alpha, g)
        if obj < best[0]:
            best = (obj, t, alpha)
        new_active = np.where(active, proj <= 1.0 + tie_tol, proj < 1.0 - tie_tol)
        if np.array_equal(new_active, active):
            return t, alpha, True
        active = new_active
    return best[1], best[2], False


def solve_wls(
    graph: ViewGraph,
    dirs: DirectionMeasurements,
    weights: np.ndarray,
    warm_start: tuple[np.ndarray, np.ndarray] | None = None,
    max_inner: int = 50,
    tol: float = 1e-10,
    weight_floor: float = 0.0,
    return_trace: bool = False,
    method: str = "active_set",
):
    """Minimize the weighted least squares problem over locations and ``alpha``.

    ``method='alternating'`` runs block-coordinate descent: an exact
    location solve for fixed ``alpha`` alternated with the exact per-edge
    update ``alpha_ij = max(1, <t_i - t_j, gamma_ij>)`` until the largest
    location change falls below ``tol`` times the location scale.
    ``method='active_set'`` first solves the problem exactly by a
    primal-dual active set iteration, then polishes with the alternation.

    Args:
        weights: nonnegative weight per edge.
        warm_start: previous ``(locations, alpha)``; cold start uses
            ``alpha = 1`` everywhere.
        weight_floor: weights are clipped from below at this fraction of
            the largest weight so that underflowed edges cannot split the
            graph.

    Returns:
        ``(locations, alpha)``, plus the list of objective values after each
        alternation when ``return_trace`` is set.

    Raises:
        SolverError: the graph (or its positive-weight subgraph) is
            disconnected, or the linear solve fails.
    """
    if method not in ("alternating", "active_set"):
        raise ValueError(f"unknown WLS method {method!r}")
    w = _checked_weights(graph, weights, weight_floor)
    system = _LocationSystem(graph, w)
    g = dirs.vectors
    e0, e1 = graph.edges[:, 0], graph.edges[:, 1]
    if warm_start is None:
        alpha = np.ones(graph.m)
        t = None
    else:
        t = np.asarray(warm_start[0], dtype=float).copy()
        alpha = np.maximum(1.0, np.asarray(warm_start[1], dtype=float))
    if method == "active_set":
        start = alpha <= 1.0 if warm_start is not None else np.ones(graph.m, bool)
        t_as, alpha_as, _ = _active_set_solve(graph, w, g, start, max_iter=max(max_inner, 1))
        if t is None or _wls_objective(graph, w, t_as, alpha_as, g) <= _wls_objective(graph, w, t, alpha, g):
            t, alpha = t_as, alpha_as

    trace = []
    for _ in range(max_inner):
        t_new = system.solve(system.rhs(alpha, g), tol)
        alpha = np.maximum(1.0, np.sum((t_new[e0] - t_new[e1]) * g, axis=1))
        if return_trace:
            trace.append(_wls_objective(graph, w, t_new, alpha, g))
        if t is not None:
            change = np.max(np.abs(t_new - t))
            if change <= tol * max(1.0, np.max(np.abs(t_new))):
                t = t_new
                break
        t = t_new
    return (t, alpha, trace) if return_trace else (t, alpha)


# -- outer loop ----------------------------------------------------------------


def cycle_sync(
    graph: ViewGraph,
    dirs: DirectionMeasurements,
    cfg: SolverConfig = SolverConfig(),
    init_scores: np.ndarray | None = None,
) -> LocationEstimate:
    """Robust location estimation by cycle-weighted IRLS.

    Each outer iteration ``t = 1..t_max`` solves the weighted least squares
    problem warm-started from the previous iterate, computes residuals and
    cycle scores, blends them with ``lambda_t`` and reweights. With
    ``loss='l1'``, ``schedule='zero'`` and ``init='uniform'`` this is plain
    least-unsquared-deviation IRLS.
    """
    if not graph.is_connected():
        raise SolverError("gauge not fixable: view graph is disconnected")
    if init_scores is not None:
        w = initial_weights(init_scores)
    elif cfg.init == "taab":
        w = initial_weights(compute_taab(graph, dirs, cfg.taab))
    else:
        w = np.ones(graph.m)

    tri = graph.triangles
    state = None
    history = []
    t_prev = None
    for it in range(1, cfg.t_max + 1):
        t_loc, alpha = solve_wls(graph, dirs, w, state, cfg.max_inner, cfg.solve_tol, cfg.weight_floor,
                                 method=cfg.wls_method)
        r = residuals(graph, t_loc, alpha, dirs)
        s = cycle_scores(graph, tri, dirs, t_loc, r, cfg.beta)
        lam = cfg.lam(it)
        h = blend(r, s, lam)
        change = float(np.max(np.abs(t_loc - t_prev))) if t_prev is not None else float("inf")
        history.append({
            "iter": it,
            "lambda": lam,
            "wls_objective": float(np.sum(w * r * r)),
            "robust_objective": float(np.sum(robust_loss(r, cfg))),
            "max_change": change,
        })
        edges = EdgeState(w=w, r=r, s=s, h=h, alpha=alpha)
        state = (t_loc, alpha)
        t_prev = t_loc
        w = reweight(h, cfg)
        if cfg.outer_tol > 0 and change < cfg.outer_tol:
            break
    log.debug("cycle_sync finished after %d iterations", len(history))
    return LocationEstimate(locations=t_prev, edges=edges, log=history)


def corruption_levels(graph: ViewGraph, dirs: DirectionMeasurements, truth_locations: np.ndarray) -> np.ndarray:
    """Diagnostic ``||t*_i - t*_j|| * ||gamma_ij - gamma*_ij||`` from ground truth."""
    diff = truth_locations[graph.edges[:, 0]] - truth_locations[graph.edges[:, 1]]
    length = np.linalg.norm(diff, axis=1)
    return length * np.linalg.norm(dirs.vectors - diff / length[:, None], axis=1)
