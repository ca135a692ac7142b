import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from cyclesync.evaluation import rotation_errors
from cyclesync.graph import build_view_graph
from cyclesync.rotation import (
    RotationConfig,
    RotationMeasurements,
    cemp_rotation_scores,
    geodesic_angle,
    gauge_fix,
    log_map,
    mpls_cycle,
    project_to_so3,
    random_rotations,
    rot_z,
    rotation_cycle_inconsistency,
    rotation_cycle_table,
    rotation_from_axis_angle,
    spanning_tree_rotations,
)
from cyclesync.synthetic import sample_rotation_scenario

from conftest import PROPERTY_CASES

seeds = st.integers(0, 2**32 - 1)


def haar(seed, count=1):
    return random_rotations(count, np.random.default_rng(seed))


def clean_measurements(graph, R):
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    return RotationMeasurements(R[i] @ np.transpose(R[j], (0, 2, 1)))


def test_geodesic_angle_examples(rng):
    A = haar(1)[0]
    assert geodesic_angle(A, A) == pytest.approx(0.0, abs=1e-12)
    assert geodesic_angle(A, A @ rot_z(math.pi / 2)) == pytest.approx(math.pi / 2, abs=1e-12)
    assert geodesic_angle(np.eye(3), rot_z(math.pi)) == pytest.approx(math.pi, abs=1e-12)
    with pytest.raises(ValueError):
        geodesic_angle(np.eye(3), 2 * np.eye(3))


def test_small_angles_are_accurate():
    assert geodesic_angle(np.eye(3), rot_z(1e-9)) == pytest.approx(1e-9, rel=1e-6)


def test_cycle_inconsistency_examples():
    R = haar(2, 3)
    R_ij, R_jk, R_ki = R[0] @ R[1].T, R[1] @ R[2].T, R[2] @ R[0].T
    assert rotation_cycle_inconsistency(R_ij, R_jk, R_ki) == pytest.approx(0.0, abs=1e-12)
    assert rotation_cycle_inconsistency(rot_z(math.pi) @ R_ij, R_jk, R_ki) == pytest.approx(1.0, abs=1e-9)
    assert rotation_cycle_inconsistency(rot_z(0.3) @ R_ij, R_jk, R_ki) == pytest.approx(0.095493, abs=1e-6)


def test_measurement_validation():
    with pytest.raises(ValueError):
        RotationMeasurements(np.diag([1.0, 1.0, -1.0])[None])
    with pytest.raises(ValueError):
        RotationMeasurements(np.eye(3)[None], corrupted=[True, False])


def test_exp_log_and_projection_round_trip(rng):
    v = rng.normal(size=(20, 3))
    v *= (rng.uniform(0, 3, 20) / np.linalg.norm(v, axis=1))[:, None]
    assert np.allclose(log_map(rotation_from_axis_angle(v)), v, atol=1e-10)
    R = haar(3, 5)
    assert np.allclose(project_to_so3(R + 1e-3 * rng.normal(size=R.shape)), R, atol=2e-3)
    assert np.allclose(np.linalg.det(project_to_so3(rng.normal(size=(10, 3, 3)))), 1.0)


def test_cemp_clean_and_single_triangle():
    g = build_view_graph(6, [(i, j) for i in range(6) for j in range(i + 1, 6)])
    rots = clean_measurements(g, haar(4, 6))
    for s in cemp_rotation_scores(g, g.triangles, rots, [1.0, 2.0, 4.0], history=True):
        assert np.all(s < 1e-12)
    k3 = build_view_graph(3, [(0, 1), (0, 2), (1, 2)])
    mats = clean_measurements(k3, haar(5, 3)).matrices.copy()
    mats[0] = rot_z(0.7) @ mats[0]
    rots = RotationMeasurements(mats)
    d = rotation_cycle_table(k3, k3.triangles, rots)
    assert d == pytest.approx(np.full(3, 0.7 / math.pi))
    for s in cemp_rotation_scores(k3, k3.triangles, rots, [1.0, 10.0], history=True):
        assert s == pytest.approx(d)
    with pytest.raises(ValueError):
        cemp_rotation_scores(k3, k3.triangles, rots, [])


def test_cemp_separates_labels():
    for seed in range(10):
        g, gt, rots = sample_rotation_scenario(50, 0.5, 0.3, 0.0, seed)
        betas = [1.2**t for t in range(10)]
        s = cemp_rotation_scores(g, g.triangles, rots, betas)
        assert np.median(s[gt.corrupted]) > np.median(s[~gt.corrupted])


def test_clean_recovery_and_gauge():
    g, gt, rots = sample_rotation_scenario(30, 0.5, 0.0, 0.0, 3)
    R = mpls_cycle(g, rots)
    assert np.array_equal(R[0], np.eye(3))
    assert rotation_errors(R, gt.rotations).max() < 1e-6
    assert rotation_errors(spanning_tree_rotations(g, rots), gt.rotations).max() < 1e-6


def test_one_corrupted_edge_on_k6():
    g = build_view_graph(6, [(i, j) for i in range(6) for j in range(i + 1, 6)])
    truth = haar(6, 6)
    mats = clean_measurements(g, truth).matrices.copy()
    mats[4] = haar(7)[0]
    R, s = mpls_cycle(g, RotationMeasurements(mats), return_scores=True)
    assert np.argmax(s) == 4
    assert rotation_errors(R, truth).max() < 1e-6


def test_freeze_flag_keeps_cemp_scores():
    g, _, rots = sample_rotation_scenario(20, 0.6, 0.2, 0.0, 1)
    cfg = RotationConfig(freeze=True)
    _, s = mpls_cycle(g, rots, cfg, return_scores=True)
    expected = cemp_rotation_scores(g, g.triangles, rots, [cfg.beta(t) for t in range(cfg.cemp_iters)])
    assert np.array_equal(s, expected)


def test_disconnected_rejected():
    g = build_view_graph(4, [(0, 1), (2, 3)])
    with pytest.raises(ValueError, match="disconnected"):
        mpls_cycle(g, RotationMeasurements(np.stack([np.eye(3)] * 2)))


@settings(max_examples=PROPERTY_CASES, deadline=None)
@given(seeds, seeds)
def test_geodesic_angle_symmetric_and_invariant(a, b):
    A, B = haar(a)[0], haar(b)[0]
    G = haar(a ^ b)[0]
    ang = geodesic_angle(A, B)
    assert 0 <= ang <= math.pi
    assert geodesic_angle(B, A) == pytest.approx(ang, abs=1e-9)
    assert geodesic_angle(G @ A, G @ B) == pytest.approx(ang, abs=1e-9)


@settings(max_examples=PROPERTY_CASES, deadline=None)
@given(seeds, seeds, st.floats(0, 3))
def test_cycle_inconsistency_invariant_to_absolute_change(seed, gseed, noise):
    R = haar(seed, 3)
    E = rotation_from_axis_angle(np.array([noise, 0.0, 0.0]))
    G = haar(gseed)[0]
    d = rotation_cycle_inconsistency(E @ R[0] @ R[1].T, R[1] @ R[2].T, R[2] @ R[0].T)
    S = R @ G  # same relative rotations from a different absolute frame
    assert rotation_cycle_inconsistency(E @ S[0] @ S[1].T, S[1] @ S[2].T, S[2] @ S[0].T) == pytest.approx(d, abs=1e-9)
    assert 0 <= d <= 1
    assert d == pytest.approx(noise / math.pi, abs=1e-9)


@settings(max_examples=PROPERTY_CASES, deadline=None)
@given(st.integers(4, 9), st.floats(0, 0.5), seeds)
def test_mpls_outputs_are_rotations_and_gauge_fixed(n, q, seed):
    g, _, rots = sample_rotation_scenario(n, 1.0, q, 0.05, seed)
    R, s = mpls_cycle(g, rots, RotationConfig(sweeps=3, cemp_iters=3), return_scores=True)
    assert np.array_equal(R[0], np.eye(3))
    assert np.abs(np.swapaxes(R, 1, 2) @ R - np.eye(3)).max() < 1e-9
    assert np.abs(np.linalg.det(R) - 1).max() < 1e-9
    assert np.all((s >= 0) & (s <= 1))


def test_gauge_fix_is_right_multiplication():
    R = haar(9, 4)
    G = haar(10)[0]
    assert np.allclose(gauge_fix(R @ G), gauge_fix(R))
    # right-multiplying every absolute rotation leaves every R_i R_j^T unchanged
    assert np.allclose((R @ G)[1] @ (R @ G)[2].T, R[1] @ R[2].T)
    assert Rotation.from_matrix(gauge_fix(R)[0]).magnitude() == 0.0
