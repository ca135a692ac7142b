"""Truncated AAB: cycle-based angular corruption estimates for initial weights."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._segments import segment_sum, softmin_average
from .directions import (
    DEFAULT_ANGLE_THRESHOLD,
    DirectionMeasurements,
    WellShapedIndex,
    _angle,
    aab_table,
    angular_corruption,
    oriented_directions,
    well_shaped_filter,
)
from .graph import ViewGraph


@dataclass(frozen=True)
class TaabConfig:
    beta0: float = 5.0
    growth: float = 1.2
    iters: int = 10
    neutral: float = 0.5
    angle_threshold: float = DEFAULT_ANGLE_THRESHOLD

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ValueError("taab.beta0 must be positive")
        if not self.growth > 1:
            raise ValueError("taab.growth must exceed 1")
        if self.iters < 1:
            raise ValueError("taab.iters must be >= 1")
        if not 0.0 <= self.neutral <= 1.0:
            raise ValueError("taab.neutral must lie in [0, 1]")

    def beta(self, t: int) -> float:
        return self.beta0 * self.growth**t


def theorem_constants(alpha: float) -> float:
    """``C_alpha = 2 (cos a + sqrt(5 - 4 cos^2 a)) / sin^2 a``."""
    s = math.sin(alpha)
    if abs(s) < 1e-15:
        raise ValueError("singular C_alpha: sin(alpha) = 0")
    c = math.cos(alpha)
    return 2.0 * (c + math.sqrt(5.0 - 4.0 * c * c)) / (s * s)


def taab_scores(
    graph: ViewGraph,
    well_shaped: WellShapedIndex,
    d_table: np.ndarray,
    cfg: TaabConfig = TaabConfig(),
    history: bool = False,
):
    """Iteratively reweighted average of AAB inconsistencies.

    ``s_0`` is the plain mean of ``d_table`` over each edge's well-shaped
    triangles; iteration ``t`` reweights triangle ``k`` of edge ``ij`` by
    ``exp(-beta_t * (s_ik + s_jk))`` with ``beta_t = beta0 * growth**t``.
    Edges without a well-shaped triangle keep ``cfg.neutral``.

    Returns:
        Final per-edge scores, or the list ``[s_0, ..., s_T]`` if ``history``.
    """
    idx = well_shaped.index
    d = np.asarray(d_table, dtype=float)
    if len(d) != len(idx.k):
        raise ValueError("d_table does not match the well-shaped index")
    m = graph.m
    counts = idx.counts()
    nonempty = counts > 0

    s = np.full(m, cfg.neutral)
    s[nonempty] = segment_sum(d, idx.owner, m)[nonempty] / counts[nonempty]
    out = [s.copy()]
    for t in range(cfg.iters):
        cost = s[idx.edge_ik] + s[idx.edge_jk]
        avg, _ = softmin_average(cost, d, idx.owner, idx.offsets, cfg.beta(t))
        s = np.where(nonempty, avg, cfg.neutral)
        out.append(s.copy())
    return out if history else s


def initial_weights(scores: np.ndarray) -> np.ndarray:
    """``exp(-20 s)`` per edge."""
    return np.exp(-20.0 * np.asarray(scores, dtype=float))


def compute_taab(graph: ViewGraph, dirs: DirectionMeasurements, cfg: TaabConfig = TaabConfig()) -> np.ndarray:
    """Filter, tabulate AAB inconsistencies and run T-AAB in one call."""
    ws = well_shaped_filter(graph, graph.triangles, dirs, cfg.angle_threshold)
    return taab_scores(graph, ws, aab_table(graph, ws, dirs), cfg)


# -- separation guarantee ------------------------------------------------------


@dataclass(frozen=True)
class TheoremInstance:
    """Constants of the clean/corrupt separation bound measured on a labelled instance."""

    alpha: float
    lam: float
    mu: float
    c_alpha: float
    all_edges_covered: bool

    @property
    def lambda_limit(self) -> float:
        """Largest bad-cycle fraction the bound tolerates for this ``mu`` and ``C_alpha``."""
        if self.mu == math.inf:
            return 1.0
        if self.mu <= 0:
            return 0.0
        ec = math.e * self.c_alpha
        return 1.0 + ec / self.mu - math.sqrt(ec * (2.0 * self.mu + ec)) / self.mu

    @property
    def hypotheses_hold(self) -> bool:
        return self.all_edges_covered and 0 < self.alpha < math.pi / 2 and self.lam < self.lambda_limit

    @property
    def growth_limit(self) -> float:
        """Upper end of the admissible ``beta`` growth interval."""
        if self.lam == 0:
            return math.inf
        return self.mu * (1.0 - self.lam) ** 2 / (2.0 * math.e * self.c_alpha * self.lam)

    def admissible_schedule(self, iters: int = 10, max_growth: float = 2.0) -> TaabConfig:
        """A schedule inside the admissible region, or ``ValueError`` if none exists."""
        if not self.hypotheses_hold:
            raise ValueError("hypotheses unmet")
        beta0 = 1.0 / (2.0 * self.lam) if self.lam > 0 else 5.0
        growth = min(1.0 + 0.5 * (self.growth_limit - 1.0), max_growth)
        return TaabConfig(beta0=beta0, growth=growth, iters=iters)

    def good_bound(self, cfg: TaabConfig, t: int) -> float:
        return 1.0 / (2.0 * cfg.beta0 * cfg.growth**t)

    def bad_bound(self, s_star: np.ndarray) -> np.ndarray:
        if self.mu == math.inf:
            return np.zeros_like(s_star)
        return self.mu / math.e * (1.0 - self.lam) * s_star


def measure_theorem_instance(
    graph: ViewGraph,
    dirs: DirectionMeasurements,
    well_shaped: WellShapedIndex,
    d_table: np.ndarray,
) -> TheoremInstance:
    """Measure ``alpha``, ``lambda`` and ``mu`` from labels and ground truth.

    ``N_ij`` is taken to be the well-shaped set, which is what T-AAB
    averages over. ``alpha`` is the smallest angle ``min(theta, pi - theta)``
    over clean edges' triangles.
    """
    if dirs.corrupted is None or dirs.truth is None:
        raise ValueError("labels and ground-truth directions are required")
    idx = well_shaped.index
    m = graph.m
    bad = dirs.corrupted
    counts = idx.counts()
    covered = bool(np.all(counts > 0))

    good_cycle = ~bad[idx.edge_ik] & ~bad[idx.edge_jk]
    n_good = np.bincount(idx.owner, weights=good_cycle.astype(float), minlength=m)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac_bad = np.where(counts > 0, 1.0 - n_good / np.maximum(counts, 1), 0.0)
    lam = float(frac_bad.max()) if m else 0.0

    s_star = angular_corruption(dirs)
    bad_edges = np.flatnonzero(bad)
    if len(bad_edges) == 0:
        mu = math.inf
    else:
        good_sum = segment_sum(np.where(good_cycle, d_table, 0.0), idx.owner, m)
        ratios = np.zeros(len(bad_edges))
        ok = (n_good[bad_edges] > 0) & (s_star[bad_edges] > 0)
        be = bad_edges[ok]
        ratios[ok] = good_sum[be] / (n_good[be] * s_star[be])
        mu = float(ratios.min())

    _, g_jk, g_ki = oriented_directions(graph, idx, dirs.vectors)
    theta = _angle(-g_ki, g_jk)
    on_good = ~bad[idx.owner]
    if np.any(on_good):
        alpha = float(np.min(np.minimum(theta[on_good], np.pi - theta[on_good])))
    else:
        alpha = well_shaped.threshold
    return TheoremInstance(
        alpha=alpha, lam=lam, mu=mu, c_alpha=theorem_constants(alpha), all_edges_covered=covered
    )
