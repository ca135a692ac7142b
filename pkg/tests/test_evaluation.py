import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from cyclesync.evaluation import (
    AlignmentResult,
    align_rotations,
    align_similarity,
    exact_recovery,
    normalize_ground_truth,
    pose_errors,
    rotation_errors,
)
from cyclesync.rotation import random_rotations, rotation_from_axis_angle

from conftest import PROPERTY_CASES

seeds = st.integers(0, 2**32 - 1)


def l1_objective(est, gt, c, t):
    return float(np.sum(np.linalg.norm(gt - (c * est + t), axis=1)))


def test_identity_alignment(rng):
    gt = rng.standard_normal((10, 3))
    c, t = align_similarity(gt, gt)
    assert c == pytest.approx(1.0) and np.allclose(t, 0, atol=1e-12)
    assert l1_objective(gt, gt, c, t) == pytest.approx(0.0, abs=1e-12)


def test_affine_map_is_inverted(rng):
    gt = rng.standard_normal((10, 3))
    c, t = align_similarity(2 * gt + 1.0, gt)
    assert c == pytest.approx(0.5, abs=1e-9)
    assert t == pytest.approx(np.full(3, -0.5), abs=1e-9)


def test_alignment_matches_grid_search():
    rng = np.random.default_rng(21)
    gt = rng.standard_normal((5, 3))
    est = gt.copy()
    est[2] += np.array([3.0, -2.0, 5.0])
    c, t = align_similarity(est, gt)
    ours = l1_objective(est, gt, c, t)

    f = lambda x: l1_objective(est, gt, x[0], x[1:])
    grid_c = np.linspace(0.0, 2.0, 21)
    grid_t = np.linspace(-1.0, 1.0, 11)
    start = min((np.array([cc, *tt]) for cc in grid_c for tt in itertools.product(grid_t, repeat=3)), key=f)
    best = minimize(f, start, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
    assert ours == pytest.approx(best.fun, abs=1e-6)
    assert ours <= best.fun + 1e-6


def test_degenerate_estimate_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        align_similarity(np.ones((4, 3)), np.random.default_rng(0).standard_normal((4, 3)))
    with pytest.raises(ValueError):
        align_similarity(np.zeros((1, 3)), np.zeros((1, 3)))


def test_rotation_alignment_examples():
    R = random_rotations(8, np.random.default_rng(1))
    assert np.allclose(align_rotations(R, R), np.eye(3), atol=1e-12)
    Q = random_rotations(1, np.random.default_rng(2))[0]
    A = align_rotations(Q @ R, R)
    assert np.allclose(A, Q.T, atol=1e-12)
    assert np.allclose(A @ (Q @ R), R, atol=1e-12)
    # right-side gauge of relative measurements R_i R_j^T
    assert np.allclose(align_rotations(R @ Q, R, side="right"), Q.T, atol=1e-12)
    with pytest.raises(ValueError):
        align_rotations(R, R, side="up")


def test_rotation_alignment_beats_random_search():
    rng = np.random.default_rng(3)
    gt = random_rotations(6, rng)
    noise = rotation_from_axis_angle(0.3 * rng.standard_normal((6, 3)))
    est = noise @ random_rotations(1, rng)[0] @ gt
    A = align_rotations(est, gt)
    obj = lambda M: float(np.sum((gt - M @ est) ** 2))
    candidates = random_rotations(10_000, rng)
    assert obj(A) <= min(obj(M) for M in candidates) + 1e-12


def test_pose_error_examples(rng):
    gt = rng.standard_normal((6, 3))
    res = pose_errors(gt, gt)
    assert np.allclose(res.errors, 0, atol=1e-12) and res.median == pytest.approx(0.0, abs=1e-12)
    two = AlignmentResult(1.0, np.zeros(3), None, np.array([0.0, 0.4]))
    assert two.median == pytest.approx(0.2)
    assert two.mean == pytest.approx(0.2)


def test_rotation_errors_gauge_invariant():
    rng = np.random.default_rng(4)
    gt = random_rotations(10, rng)
    est = rotation_from_axis_angle(0.05 * rng.standard_normal((10, 3))) @ gt
    Q = random_rotations(1, rng)[0]
    a = pose_errors(gt[:, 0], gt[:, 0], est_rotations=est, gt_rotations=gt,
                    rotation_align=align_rotations(est, gt)).rotation_errors_deg
    b = pose_errors(gt[:, 0], gt[:, 0], est_rotations=Q @ est, gt_rotations=gt,
                    rotation_align=align_rotations(Q @ est, gt)).rotation_errors_deg
    assert np.allclose(a, b, atol=1e-9)
    assert np.all(a > 0)
    right = rotation_errors(gt @ Q, gt, side="right")
    assert np.max(right) < 1e-7


def test_pose_errors_with_rotation_alignment(rng):
    gt = rng.standard_normal((8, 3))
    Q = random_rotations(1, rng)[0]
    est = 3.0 * gt @ Q.T + 2.0  # est_i = 3 Q gt_i + 2
    res = pose_errors(est, gt, rotation_align=Q.T)
    assert res.median < 1e-9
    assert res.scale == pytest.approx(1 / 3)


def test_exact_recovery_threshold():
    mk = lambda med: AlignmentResult(1.0, np.zeros(3), None, np.array([med]))
    assert exact_recovery(mk(0.0))
    assert exact_recovery(mk(9.9e-5))
    assert not exact_recovery(mk(1e-4))


def test_normalize_ground_truth(rng):
    x = normalize_ground_truth(5 * rng.standard_normal((31, 3)) + 7)
    assert np.median(np.linalg.norm(x, axis=1)) == pytest.approx(1.0)
    unit_dirs = x / np.linalg.norm(x, axis=1, keepdims=True)
    assert np.linalg.norm(unit_dirs.sum(axis=0)) < 1e-6  # geometric median at the origin


points = st.integers(3, 12).flatmap(lambda n: st.tuples(st.just(n), seeds))


@settings(max_examples=PROPERTY_CASES, deadline=None)
@given(points, st.floats(0.2, 5.0), st.tuples(*[st.floats(-10, 10)] * 3))
def test_similarity_objective_invariant(ns, c0, t0):
    n, seed = ns
    rng = np.random.default_rng(seed)
    gt = rng.standard_normal((n, 3))
    est = gt + 0.3 * rng.standard_normal((n, 3))
    c, t = align_similarity(est, gt)
    base = l1_objective(est, gt, c, t)
    moved = c0 * est + np.array(t0)
    c2, t2 = align_similarity(moved, gt)
    assert l1_objective(moved, gt, c2, t2) == pytest.approx(base, rel=1e-6, abs=1e-8)
    # recovered parameters compose to undo the pre-applied map
    assert c2 * c0 == pytest.approx(c, rel=1e-4, abs=1e-6)


@settings(max_examples=PROPERTY_CASES, deadline=None)
@given(points, st.tuples(*[st.floats(-100, 100)] * 3))
def test_pose_errors_translation_invariant(ns, shift):
    n, seed = ns
    rng = np.random.default_rng(seed)
    gt = rng.standard_normal((n, 3))
    est = 2 * gt + 0.2 * rng.standard_normal((n, 3))
    a = pose_errors(est, gt)
    s = np.array(shift)
    b = pose_errors(est + s, gt + s)
    assert np.allclose(a.errors, b.errors, atol=1e-6)
    assert np.all(a.errors >= 0)
    assert a.median == pytest.approx(np.median(a.errors)) and a.mean == pytest.approx(np.mean(a.errors))


@settings(max_examples=PROPERTY_CASES, deadline=None)
@given(st.integers(1, 10), seeds, st.floats(0, 3))
def test_rotation_alignment_is_a_rotation(n, seed, spread):
    rng = np.random.default_rng(seed)
    gt = random_rotations(n, rng)
    est = rotation_from_axis_angle(spread * rng.standard_normal((n, 3))) @ gt
    for side in ("left", "right"):
        A = align_rotations(est, gt, side=side)
        assert np.abs(A.T @ A - np.eye(3)).max() < 1e-9
        assert np.linalg.det(A) == pytest.approx(1.0, abs=1e-9)
