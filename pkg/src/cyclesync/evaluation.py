"""Gauge removal and error reporting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rotation import _angle_batch, project_to_so3

EXACT_RECOVERY_THRESHOLD = 1e-4


@dataclass
class AlignmentResult:
    scale: float
    translation: np.ndarray
    rotation: np.ndarray | None
    errors: np.ndarray
    rotation_errors_deg: np.ndarray | None = None

    @property
    def median(self) -> float:
        return float(np.median(self.errors))

    @property
    def mean(self) -> float:
        return float(np.mean(self.errors))

    @property
    def rotation_median(self) -> float | None:
        return None if self.rotation_errors_deg is None else float(np.median(self.rotation_errors_deg))

    @property
    def rotation_mean(self) -> float | None:
        return None if self.rotation_errors_deg is None else float(np.mean(self.rotation_errors_deg))


def _l1_objective(est, gt, c, t):
    return float(np.sum(np.linalg.norm(gt - (c * est + t), axis=1)))


def align_similarity(est, gt, max_iter: int = 200, rtol: float = 1e-12) -> tuple[float, np.ndarray]:
    """Scale and translation minimizing ``sum_i ||gt_i - (c est_i + t)||``.

    Solved by IRLS on the unsquared norms (weights ``1 / max(||res_i||, 1e-12)``),
    each step a closed-form weighted least squares fit of ``(c, t)``.

    Raises:
        ValueError: on mismatched inputs or an estimate with zero spread.
    """
    est = np.asarray(est, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if est.shape != gt.shape or est.ndim != 2 or len(est) < 2:
        raise ValueError("need two equally sized point sets with at least 2 points")
    if np.max(np.linalg.norm(est - est.mean(axis=0), axis=1)) == 0:
        raise ValueError("degenerate estimate: all points coincide")

    w = np.ones(len(est))
    best = (np.inf, 1.0, np.zeros(3))
    prev = np.inf
    for _ in range(max_iter):
        W = w / w.sum()
        e_bar = W @ est
        g_bar = W @ gt
        de = est - e_bar
        den = np.sum(w * np.sum(de * de, axis=1))
        if den <= 0:
            # all weight sits on coincident estimates; keep the best iterate
            break
        c = float(np.sum(w * np.sum(de * (gt - g_bar), axis=1)) / den)
        t = g_bar - c * e_bar
        res = np.linalg.norm(gt - (c * est + t), axis=1)
        obj = float(res.sum())
        if obj < best[0]:
            best = (obj, c, t)
        if abs(prev - obj) <= rtol * max(obj, 1e-300):
            break
        prev = obj
        w = 1.0 / np.maximum(res, 1e-12)
    return best[1], best[2]


def align_rotations(est, gt, side: str = "left") -> np.ndarray:
    """Rotation ``R`` minimizing ``sum_i ||gt_i - R est_i||_F^2`` (``side='left'``).

    ``side='right'`` instead minimizes ``sum_i ||gt_i - est_i R||_F^2``,
    the ambiguity of measurements of the form ``R_i R_j^T``.
    """
    est = np.asarray(est, dtype=float).reshape(-1, 3, 3)
    gt = np.asarray(gt, dtype=float).reshape(-1, 3, 3)
    if len(est) != len(gt) or len(est) < 1:
        raise ValueError("need equally sized, nonempty rotation sets")
    if side == "left":
        M = np.einsum("nij,nkj->ik", gt, est)  # sum gt_i est_i^T
    elif side == "right":
        M = np.einsum("nji,njk->ik", est, gt)  # sum est_i^T gt_i
    else:
        raise ValueError("side must be 'left' or 'right'")
    return project_to_so3(M)


def apply_rotation_alignment(est, R_align, side: str = "left") -> np.ndarray:
    est = np.asarray(est, dtype=float)
    return R_align @ est if side == "left" else est @ R_align


def pose_errors(
    est,
    gt,
    alignment: tuple[float, np.ndarray] | None = None,
    rotation_align: np.ndarray | None = None,
    est_rotations=None,
    gt_rotations=None,
    rotation_side: str = "left",
) -> AlignmentResult:
    """Per-camera errors after removing the gauge.

    Translation error is ``||gt_i - (c R_align est_i + t)||`` (``R_align = I``
    when not given). Rotation errors, when both rotation sets are supplied,
    are geodesic angles in degrees after applying ``rotation_align``.
    """
    est = np.asarray(est, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if alignment is None:
        alignment = align_similarity(est if rotation_align is None else est @ rotation_align.T, gt)
    c, t = alignment
    R = np.eye(3) if rotation_align is None else np.asarray(rotation_align, dtype=float)
    errors = np.linalg.norm(gt - (c * est @ R.T + t), axis=1)
    rot_err = None
    if est_rotations is not None and gt_rotations is not None:
        aligned = np.asarray(est_rotations, dtype=float)
        if rotation_align is not None:
            aligned = apply_rotation_alignment(aligned, R, rotation_side)
        rot_err = np.degrees(_angle_batch(np.asarray(gt_rotations, dtype=float), aligned))
    return AlignmentResult(scale=c, translation=np.asarray(t), rotation=rotation_align,
                           errors=errors, rotation_errors_deg=rot_err)


def rotation_errors(est, gt, side: str = "right") -> np.ndarray:
    """Geodesic errors in radians after optimal global rotation alignment."""
    R = align_rotations(est, gt, side)
    return _angle_batch(np.asarray(gt, float), apply_rotation_alignment(est, R, side))


def exact_recovery(result: AlignmentResult, threshold: float = EXACT_RECOVERY_THRESHOLD) -> bool:
    return result.median < threshold


def normalize_ground_truth(locations) -> np.ndarray:
    """Center at the geometric median and scale the median distance to the origin to 1."""
    x = np.asarray(locations, dtype=float)
    center = x.mean(axis=0)
    for _ in range(200):
        d = np.maximum(np.linalg.norm(x - center, axis=1), 1e-12)
        new = (x / d[:, None]).sum(axis=0) / (1.0 / d).sum()
        if np.linalg.norm(new - center) < 1e-14:
            center = new
            break
        center = new
    y = x - center
    return y / np.median(np.linalg.norm(y, axis=1))
