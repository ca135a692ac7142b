"""SO(3) helpers and MPLS-cycle rotation synchronization.

Relative measurements follow ``R_ij = R_i R_j^T`` and are stored for the
canonical orientation ``i < j`` (``R_ji = R_ij^T``). The global ambiguity
is therefore ``R_i -> R_i G``; outputs are normalized so that node 0 is the
identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, minimum_spanning_tree
from scipy.spatial.transform import Rotation

from ._segments import softmin_average
from .graph import TriangleIndex, ViewGraph


def _check_rotations(R: np.ndarray, tol: float = 1e-9) -> None:
    R = np.asarray(R, dtype=float)
    eye = np.eye(3)
    gram = np.swapaxes(R, -1, -2) @ R
    if np.any(np.abs(gram - eye) > tol) or np.any(np.abs(np.linalg.det(R) - 1.0) > tol):
        raise ValueError("matrix is not a rotation (R^T R = I, det R = 1)")


@dataclass(frozen=True)
class RotationMeasurements:
    matrices: np.ndarray  # (m, 3, 3)
    corrupted: np.ndarray | None = None

    def __post_init__(self):
        R = np.asarray(self.matrices, dtype=float).reshape(-1, 3, 3)
        _check_rotations(R)
        object.__setattr__(self, "matrices", R)
        if self.corrupted is not None:
            lab = np.asarray(self.corrupted, dtype=bool).ravel()
            if len(lab) != len(R):
                raise ValueError("one label per edge required")
            object.__setattr__(self, "corrupted", lab)

    def __len__(self) -> int:
        return len(self.matrices)


def hat(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1], out[..., 0, 2] = -v[..., 2], v[..., 1]
    out[..., 1, 0], out[..., 1, 2] = v[..., 2], -v[..., 0]
    out[..., 2, 0], out[..., 2, 1] = -v[..., 1], v[..., 0]
    return out


def rotation_from_axis_angle(rotvec: np.ndarray) -> np.ndarray:
    """Exponential map from rotation vectors ``(..., 3)`` to matrices."""
    rotvec = np.asarray(rotvec, dtype=float)
    flat = rotvec.reshape(-1, 3)
    return Rotation.from_rotvec(flat).as_matrix().reshape(rotvec.shape[:-1] + (3, 3))


def log_map(R: np.ndarray) -> np.ndarray:
    """Rotation vectors of ``(..., 3, 3)`` rotation matrices."""
    R = np.asarray(R, dtype=float)
    flat = R.reshape(-1, 3, 3)
    return Rotation.from_matrix(flat).as_rotvec().reshape(R.shape[:-2] + (3,))


def project_to_so3(M: np.ndarray) -> np.ndarray:
    """Nearest rotation in Frobenius norm (polar factor with det = +1)."""
    U, _, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U @ Vt))
    D = np.ones(U.shape[:-2] + (3,))
    D[..., 2] = d
    return (U * D[..., None, :]) @ Vt


def random_rotations(count: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform rotations from normalized Gaussian quaternions."""
    quat = rng.standard_normal((count, 4))
    quat /= np.linalg.norm(quat, axis=1, keepdims=True)
    return Rotation.from_quat(quat).as_matrix()


def rot_z(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _angle_batch(R1: np.ndarray, R2: np.ndarray) -> np.ndarray:
    cos = (np.einsum("...ij,...ij->...", R1, R2) - 1.0) / 2.0
    cos = np.clip(cos, -1.0, 1.0)
    # chordal form is accurate for small angles where arccos loses digits
    chord = np.linalg.norm(R1 - R2, axis=(-2, -1)) / (2.0 * np.sqrt(2.0))
    small = 2.0 * np.arcsin(np.clip(chord, 0.0, 1.0))
    return np.where(cos > 0.5, small, np.arccos(cos))


def geodesic_angle(R1, R2) -> float:
    """Angle of ``R1^T R2`` in ``[0, pi]``."""
    R1 = np.asarray(R1, dtype=float)
    R2 = np.asarray(R2, dtype=float)
    _check_rotations(R1)
    _check_rotations(R2)
    return float(_angle_batch(R1, R2))


def rotation_cycle_inconsistency(R_ij, R_jk, R_ki) -> float:
    """Angle of ``R_ij R_jk R_ki`` divided by pi."""
    prod = np.asarray(R_ij) @ np.asarray(R_jk) @ np.asarray(R_ki)
    return float(_angle_batch(prod, np.eye(3)) / np.pi)


def _oriented(graph: ViewGraph, tri: TriangleIndex, mats: np.ndarray):
    i = graph.edges[tri.owner, 0]
    j = graph.edges[tri.owner, 1]
    k = tri.k
    R_ij = mats[tri.owner]
    R_jk = np.where((j < k)[:, None, None], mats[tri.edge_jk], np.swapaxes(mats[tri.edge_jk], 1, 2))
    R_ki = np.where((k < i)[:, None, None], mats[tri.edge_ik], np.swapaxes(mats[tri.edge_ik], 1, 2))
    return R_ij, R_jk, R_ki


def rotation_cycle_table(graph: ViewGraph, tri: TriangleIndex, rots: RotationMeasurements) -> np.ndarray:
    """Cycle inconsistency of every triangle entry of ``tri`` (flat, CSR order)."""
    R_ij, R_jk, R_ki = _oriented(graph, tri, rots.matrices)
    return _angle_batch(R_ij @ R_jk @ R_ki, np.eye(3)) / np.pi


def _cemp_step(graph, tri, d, s, beta, neutral):
    cost = s[tri.edge_ik] + s[tri.edge_jk]
    avg, nonempty = softmin_average(cost, d, tri.owner, tri.offsets, beta)
    return np.where(nonempty, avg, neutral)


def _cemp_init(graph, tri, d, neutral):
    counts = tri.counts()
    s = np.full(graph.m, neutral)
    ne = counts > 0
    s[ne] = np.bincount(tri.owner, weights=d, minlength=graph.m)[ne] / counts[ne]
    return s


def cemp_rotation_scores(
    graph: ViewGraph,
    tri: TriangleIndex,
    rots: RotationMeasurements,
    betas,
    neutral: float = 0.5,
    history: bool = False,
):
    """Cycle-edge message passing on rotation cycle inconsistencies.

    Starts from the plain mean over ``N_ij`` and applies one reweighted
    average per entry of ``betas``. Triangle-free edges keep ``neutral``.
    """
    betas = list(betas)
    if not betas:
        raise ValueError("beta schedule must be nonempty")
    d = rotation_cycle_table(graph, tri, rots)
    s = _cemp_init(graph, tri, d, neutral)
    out = [s.copy()]
    for beta in betas:
        s = _cemp_step(graph, tri, d, s, beta, neutral)
        out.append(s.copy())
    return out if history else s


@dataclass(frozen=True)
class RotationConfig:
    beta0: float = 1.0
    growth: float = 1.2
    cemp_iters: int = 10
    sweeps: int = 20
    a: float = 4.0
    delta: float = 1e-8
    tree_scale: float = 20.0
    neutral: float = 0.5
    freeze: bool = False

    def beta(self, t: int) -> float:
        return self.beta0 * self.growth**t


def spanning_tree_rotations(graph: ViewGraph, rots: RotationMeasurements, costs: np.ndarray | None = None) -> np.ndarray:
    """Chain relative rotations along a spanning tree rooted at node 0.

    With ``costs`` the tree is a minimum-cost spanning tree; without, it
    is the breadth-first tree of the unweighted graph.
    """
    n = graph.n
    e0, e1 = graph.edges[:, 0], graph.edges[:, 1]
    if costs is None:
        adj = coo_matrix((np.ones(graph.m), (e0, e1)), shape=(n, n)).tocsr()
        adj = adj + adj.T
    else:
        # shift keeps zero-cost edges present in the sparse structure
        c = np.asarray(costs, dtype=float) + 1.0
        tree = minimum_spanning_tree(coo_matrix((c, (e0, e1)), shape=(n, n)).tocsr())
        adj = tree + tree.T
    order, pred = breadth_first_order(adj, 0, directed=False, return_predecessors=True)
    if len(order) != n:
        raise ValueError("rotation graph is disconnected")
    R = np.zeros((n, 3, 3))
    R[0] = np.eye(3)
    mats = rots.matrices
    for v in order[1:]:
        u = pred[v]
        e = graph.edge_id(u, v)
        # R_uv = R_u R_v^T  =>  R_v = R_uv^T R_u
        R_uv = mats[e] if u < v else mats[e].T
        R[v] = R_uv.T @ R[u]
    return R


def gauge_fix(R: np.ndarray) -> np.ndarray:
    """Right-multiply so that node 0 becomes the identity."""
    out = R @ R[0].T
    out[0] = np.eye(3)
    return out


def mpls_cycle(graph: ViewGraph, rots: RotationMeasurements, cfg: RotationConfig = RotationConfig(), return_scores: bool = False):
    """Rotation synchronization weighted purely by cycle consistency.

    1. Cycle-edge message passing gives a corruption score per edge.
    2. Absolute rotations start from the maximum-weight spanning tree
       (weight ``exp(-tree_scale * score)``).
    3. Each sweep moves every node by the weighted tangent-space mean of
       its residual rotations ``log(R_ij R_j R_i^T)``, weights
       ``exp(-a s) / (s + delta)``; scores take one more message passing
       step per sweep unless ``cfg.freeze``.
    """
    if not graph.is_connected():
        raise ValueError("rotation graph is disconnected")
    tri = graph.triangles
    d = rotation_cycle_table(graph, tri, rots)
    s = _cemp_init(graph, tri, d, cfg.neutral)
    for t in range(cfg.cemp_iters):
        s = _cemp_step(graph, tri, d, s, cfg.beta(t), cfg.neutral)

    R = spanning_tree_rotations(graph, rots, costs=s)
    mats = rots.matrices
    e0, e1 = graph.edges[:, 0], graph.edges[:, 1]
    n = graph.n
    for sweep in range(cfg.sweeps):
        if not cfg.freeze:
            s = _cemp_step(graph, tri, d, s, cfg.beta(cfg.cemp_iters + sweep), cfg.neutral)
        w = 0.25 * cfg.a * np.exp(-cfg.a * s) / (s + cfg.delta)
        # node i wants R_i = R_ij R_j, node j wants R_j = R_ij^T R_i
        v_i = log_map(mats @ R[e1] @ np.swapaxes(R[e0], 1, 2))
        v_j = log_map(np.swapaxes(mats, 1, 2) @ R[e0] @ np.swapaxes(R[e1], 1, 2))
        num = np.zeros((n, 3))
        np.add.at(num, e0, w[:, None] * v_i)
        np.add.at(num, e1, w[:, None] * v_j)
        den = np.bincount(e0, w, n) + np.bincount(e1, w, n)
        step = num / den[:, None]
        R = project_to_so3(rotation_from_axis_angle(step) @ R)
    R = gauge_fix(R)
    return (R, s) if return_scores else R
