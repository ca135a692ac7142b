"""Per-triangle geometry of pairwise direction measurements.

Directions are stored once per canonical edge ``(i, j)`` with ``i < j``;
``gamma_ji = -gamma_ij`` is implied. The helpers here orient the three
directions of a triangle ``(i, j, k)`` around the cycle
``i -> j -> k -> i`` before evaluating any formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import TriangleIndex, ViewGraph

DEFAULT_ANGLE_THRESHOLD = float(np.arcsin(0.6))


class IllConditionedTriangle(ValueError):
    pass


@dataclass(frozen=True)
class DirectionMeasurements:
    """Unit direction per canonical edge plus optional synthetic ground truth."""

    vectors: np.ndarray
    truth: np.ndarray | None = None
    corrupted: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"direction array must be (m, 3), got {v.shape}")
        norms = np.linalg.norm(v, axis=1)
        if len(v) and np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("direction vectors must have unit norm")
        object.__setattr__(self, "vectors", v)
        if self.truth is not None:
            object.__setattr__(self, "truth", np.asarray(self.truth, dtype=float).reshape(-1, 3))
            if len(self.truth) != len(v):
                raise ValueError("truth directions must have one entry per edge")
        if self.corrupted is not None:
            labels = np.asarray(self.corrupted, dtype=bool).ravel()
            if len(labels) != len(v):
                raise ValueError("corruption labels must have one entry per edge")
            object.__setattr__(self, "corrupted", labels)

    def __len__(self) -> int:
        return len(self.vectors)

    @classmethod
    def from_raw(cls, vectors, **kwargs) -> "DirectionMeasurements":
        """Normalize arbitrary nonzero vectors to unit length."""
        v = np.asarray(vectors, dtype=float).reshape(-1, 3)
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("zero direction vector")
        return cls(v / norms, **kwargs)


@dataclass(frozen=True)
class WellShapedIndex:
    """Triangle index restricted to triangles with a non-degenerate angle at ``k``."""

    index: TriangleIndex
    threshold: float
    mask: np.ndarray  # over the parent TriangleIndex entries

    def neighbors(self, e: int) -> np.ndarray:
        return self.index.neighbors(e)


def _unit_check(u: np.ndarray, tol: float = 1e-9) -> None:
    if abs(np.linalg.norm(u) - 1.0) > tol:
        raise ValueError(f"expected a unit vector, got norm {np.linalg.norm(u):.3g}")


def _angle(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Angle between (rows of) unit vectors, accurate near 0 and pi."""
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    dot = np.sum(u * v, axis=-1)
    return np.arctan2(cross, dot)


def triangle_angle(u, v) -> float:
    """Angle in ``[0, pi]`` between two unit vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _unit_check(u)
    _unit_check(v)
    return float(np.arccos(np.clip(u @ v, -1.0, 1.0)))


def oriented_directions(graph: ViewGraph, tri: TriangleIndex, vectors: np.ndarray):
    """Return ``(gamma_ij, gamma_jk, gamma_ki)`` for every triangle entry.

    Each array has one row per flat entry of ``tri``.
    """
    i = graph.edges[tri.owner, 0]
    j = graph.edges[tri.owner, 1]
    k = tri.k
    g_ij = vectors[tri.owner]
    # canonical storage is (min, max): gamma_jk is stored as-is iff j < k
    g_jk = vectors[tri.edge_jk] * np.where(j < k, 1.0, -1.0)[:, None]
    g_ki = vectors[tri.edge_ik] * np.where(k < i, 1.0, -1.0)[:, None]
    return g_ij, g_jk, g_ki


def location_cycle_inconsistency(t_i, t_j, t_k, g_ij, g_jk, g_ki) -> float:
    """Norm of the length-weighted direction sum around a triangle.

    Zero for clean directions at the true locations; translation
    invariant and positively homogeneous in the locations.
    """
    t_i, t_j, t_k = (np.asarray(a, dtype=float) for a in (t_i, t_j, t_k))
    v = (
        np.linalg.norm(t_i - t_j) * np.asarray(g_ij, dtype=float)
        + np.linalg.norm(t_j - t_k) * np.asarray(g_jk, dtype=float)
        + np.linalg.norm(t_k - t_i) * np.asarray(g_ki, dtype=float)
    )
    return float(np.linalg.norm(v))


def location_cycle_inconsistency_batch(t_i, t_j, t_k, g_ij, g_jk, g_ki) -> np.ndarray:
    v = (
        np.linalg.norm(t_i - t_j, axis=1)[:, None] * g_ij
        + np.linalg.norm(t_j - t_k, axis=1)[:, None] * g_jk
        + np.linalg.norm(t_k - t_i, axis=1)[:, None] * g_ki
    )
    return np.linalg.norm(v, axis=1)


def aab_inconsistency_batch(g_ij, g_jk, g_ki, degenerate_tol: float = 1e-9) -> np.ndarray:
    """Vectorized :func:`aab_inconsistency` over rows of ``(N, 3)`` arrays."""
    g_ij = np.atleast_2d(np.asarray(g_ij, dtype=float))
    g_jk = np.atleast_2d(np.asarray(g_jk, dtype=float))
    g_ki = np.atleast_2d(np.asarray(g_ki, dtype=float))
    if len(g_ij) == 0:
        return np.zeros(0)
    x = np.sum(g_ij * g_ki, axis=1)
    y = np.sum(g_ij * g_jk, axis=1)
    z = np.sum(g_jk * g_ki, axis=1)
    if np.any(np.abs(z) > 1.0 - degenerate_tol):
        raise IllConditionedTriangle("ill-conditioned triangle: gamma_jk and gamma_ki are parallel")
    den = 1.0 - z * z
    a = (x - y * z) / den
    b = (y - x * z) / den
    # projection a*g_ki + b*g_jk lies in cone(-g_jk, -g_ki) iff a, b <= 0
    in_cone = (a <= 0.0) & (b <= 0.0)

    normal = np.cross(g_jk, g_ki)
    normal /= np.linalg.norm(normal, axis=1, keepdims=True)
    off = np.abs(np.sum(g_ij * normal, axis=1))
    proj = g_ij - np.sum(g_ij * normal, axis=1)[:, None] * normal
    plane_angle = np.arctan2(off, np.linalg.norm(proj, axis=1))

    ray_angle = np.minimum(_angle(g_ij, -g_jk), _angle(g_ij, -g_ki))
    return np.where(in_cone, plane_angle, ray_angle) / np.pi


def aab_inconsistency(g_ij, g_jk, g_ki) -> float:
    """Angular distance (divided by pi) from ``g_ij`` to its cycle-compatible cone.

    The feasible set is every unit ``g`` with ``a*g + b*g_jk + c*g_ki = 0``
    for positive ``a, b, c``, i.e. the arc between ``-g_jk`` and ``-g_ki``.

    Raises:
        IllConditionedTriangle: if ``g_jk`` and ``g_ki`` are (anti)parallel.
    """
    for v in (g_ij, g_jk, g_ki):
        _unit_check(np.asarray(v, dtype=float))
    return float(aab_inconsistency_batch(g_ij, g_jk, g_ki)[0])


def well_shaped_filter(
    graph: ViewGraph,
    tri: TriangleIndex,
    dirs: DirectionMeasurements,
    threshold: float = DEFAULT_ANGLE_THRESHOLD,
) -> WellShapedIndex:
    """Keep ``k`` whose angle between ``gamma_ik`` and ``gamma_jk`` is in ``[thr, pi - thr]``."""
    _, g_jk, g_ki = oriented_directions(graph, tri, dirs.vectors)
    theta = _angle(-g_ki, g_jk)
    keep = (theta >= threshold) & (theta <= np.pi - threshold)
    return WellShapedIndex(index=tri.subset(keep), threshold=float(threshold), mask=keep)


def aab_table(graph: ViewGraph, well_shaped: WellShapedIndex, dirs: DirectionMeasurements) -> np.ndarray:
    """AAB inconsistency for every entry of a well-shaped index (flat, CSR order)."""
    g_ij, g_jk, g_ki = oriented_directions(graph, well_shaped.index, dirs.vectors)
    return aab_inconsistency_batch(g_ij, g_jk, g_ki)


def angular_corruption(dirs: DirectionMeasurements) -> np.ndarray:
    """Ground-truth angular corruption ``angle(gamma, gamma*) / pi`` per edge."""
    if dirs.truth is None:
        raise ValueError("ground-truth directions required")
    return _angle(dirs.vectors, dirs.truth) / np.pi
