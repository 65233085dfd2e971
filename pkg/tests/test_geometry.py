import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_quaternion, scene_with_truth
from respose.geometry import (
    CalibratedCamera,
    ConstraintCoefficients,
    MatchPair,
    Pose,
    Quaternion,
    build_constraint,
    constraint_residual,
    essential_from_poses,
    hamilton_product,
    matrix_to_quaternion,
    quaternion_residual,
    quaternion_to_matrix,
    rotate_point,
    rotation_angle_deg,
    sampson_error,
    sampson_errors,
    skew,
    triangulate_midpoint,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
quat_arrays = arrays(float, 4, elements=finite).filter(lambda a: np.linalg.norm(a) > 1e-3)
vec3 = arrays(float, 3, elements=finite)


def test_identity_product():
    q = Quaternion(0.3, -0.1, 0.7, 0.2)
    assert hamilton_product(Quaternion.identity(), q) == q


def test_i_times_j_is_k():
    out = Quaternion(0, 1, 0, 0) * Quaternion(0, 0, 1, 0)
    np.testing.assert_allclose(out.as_array(), [0, 0, 0, 1])


@given(quat_arrays, quat_arrays)
def test_product_norm_is_multiplicative(a, b):
    qa, qb = Quaternion.from_array(a), Quaternion.from_array(b)
    assert np.isclose((qa * qb).norm(), qa.norm() * qb.norm(), rtol=1e-12)


@given(quat_arrays)
def test_quaternion_matrix_round_trip(a):
    q = Quaternion.from_array(a).canonical()
    R = quaternion_to_matrix(q)
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert np.isclose(np.linalg.det(R), 1.0)
    back = matrix_to_quaternion(R)
    assert back.w >= 0
    assert abs(abs(back.as_array() @ q.as_array()) - 1.0) < 1e-12


def test_round_trip_at_half_turn():
    for axis in np.eye(3):
        q = Quaternion.from_axis_angle(axis, np.pi)
        back = matrix_to_quaternion(q.to_matrix())
        assert abs(abs(back.as_array() @ q.as_array()) - 1.0) < 1e-12


def test_rotate_point_examples():
    np.testing.assert_allclose(rotate_point(Quaternion.identity(), [1, 2, 3]), [1, 2, 3])
    q = Quaternion.from_axis_angle([0, 0, 1], np.pi / 2)
    np.testing.assert_allclose(rotate_point(q, [1, 0, 0]), [0, 1, 0], atol=1e-15)


@given(quat_arrays, vec3)
def test_rotate_point_matches_matrix(a, p):
    q = Quaternion.from_array(a).normalized()
    np.testing.assert_allclose(rotate_point(q, p), q.to_matrix() @ p, atol=1e-12 * (1 + np.linalg.norm(p)))


def test_rotate_point_rejects_non_unit():
    with pytest.raises(ValueError):
        rotate_point(Quaternion(2, 0, 0, 0), [1, 0, 0])


def test_rotation_angle_small_and_large():
    q = Quaternion.from_axis_angle([1, 1, 0], 1e-9)
    assert np.isclose(rotation_angle_deg(np.eye(3), q.to_matrix()), np.degrees(1e-9), rtol=1e-6)
    q = Quaternion.from_axis_angle([0, 1, 0], np.pi)
    assert np.isclose(rotation_angle_deg(np.eye(3), q.to_matrix()), 180.0)


def test_build_constraint_two_view_case():
    ref = CalibratedCamera("a", Pose(Quaternion.identity(), np.zeros(3)))
    c = build_constraint(MatchPair([0.1, 0.2], "a", [0.3, -0.4]), ref, normalize=False)
    np.testing.assert_allclose(c.s, -np.array([0.3, -0.4, 1.0]))
    np.testing.assert_allclose(c.b, 0.0)


def test_build_constraint_offset_reference():
    ref = CalibratedCamera("a", Pose(Quaternion.identity(), [1.0, 0.0, 0.0]))
    c = build_constraint(MatchPair([0.0, 0.0], "a", [0.0, 0.0]), ref, normalize=False)
    np.testing.assert_allclose(c.s, [0, 0, -1])
    np.testing.assert_allclose(c.b, [0, 1, 0])


def test_build_constraint_id_mismatch():
    ref = CalibratedCamera("a", Pose(Quaternion.identity()))
    with pytest.raises(ValueError):
        build_constraint(MatchPair([0, 0], "b", [0, 0]), ref)


@pytest.mark.parametrize("seed", range(10))
def test_constraints_vanish_at_truth(seed):
    scene, truth = scene_with_truth(seed)
    for m in scene.matches:
        c = build_constraint(m, scene.camera(m.ref_camera))
        assert abs(constraint_residual(truth, c)) < 1e-10
        # the conjugation form is the same constraint
        assert abs(quaternion_residual(truth.rotation, truth.translation, c)) < 1e-10


@given(quat_arrays, vec3, vec3, vec3, vec3)
def test_matrix_and_conjugation_forms_agree(a, t, p, s, b):
    q = Quaternion.from_array(a).normalized()
    c = ConstraintCoefficients(p, s, b)
    scale = (1 + np.linalg.norm(p)) * (1 + np.linalg.norm(s) * np.linalg.norm(t) + np.linalg.norm(b))
    assert abs(constraint_residual(Pose(q, t), c) - quaternion_residual(q, t, c)) < 1e-12 * scale


def test_essential_special_cases(rng):
    pose = Pose(random_quaternion(rng), rng.normal(size=3))
    np.testing.assert_allclose(essential_from_poses(pose, pose), 0.0, atol=1e-15)
    E = essential_from_poses(Pose(Quaternion.identity(), [1, 0, 0]), Pose(Quaternion.identity()))
    np.testing.assert_allclose(E, skew([1, 0, 0]))


def test_essential_epipolar_and_rank(rng):
    a = Pose(random_quaternion(rng), rng.normal(size=3))
    b = Pose(random_quaternion(rng), rng.normal(size=3))
    E = essential_from_poses(a, b)
    X = rng.normal(size=(20, 3)) * 3
    for x in X:
        assert abs(a.project(x) @ E @ b.project(x)) < 1e-10 * np.abs(E).max() * (1 + np.abs(a.project(x)).max()) * (
            1 + np.abs(b.project(x)).max()
        )
    assert np.linalg.svd(E, compute_uv=False)[2] < 1e-12 * np.linalg.norm(E)
    assert np.linalg.matrix_rank(E, tol=1e-9 * np.linalg.norm(E)) == 2


def test_sampson_error_properties(rng):
    a = Pose(random_quaternion(rng), rng.normal(size=3))
    b = Pose(random_quaternion(rng), rng.normal(size=3))
    E = essential_from_poses(a, b)
    X = rng.normal(size=3)
    p, pp = a.project(X), b.project(X)
    assert sampson_error(E, p, pp) < 1e-20
    shifted = p + np.array([1e-3, 0, 0])
    assert sampson_error(E, shifted, pp) > 0
    assert sampson_error(np.zeros((3, 3)), p, pp) == float("inf")
    batch = sampson_errors(E, np.array([p, shifted]), np.array([pp, pp]))
    np.testing.assert_allclose(batch, [sampson_error(E, p, pp), sampson_error(E, shifted, pp)], rtol=1e-9, atol=1e-25)


def test_triangulate_midpoint_exact(rng):
    poses = [Pose(random_quaternion(rng), rng.normal(size=3) * 4) for _ in range(3)]
    X = rng.normal(size=3)
    np.testing.assert_allclose(triangulate_midpoint(poses, [p.project(X) for p in poses]), X, atol=1e-9)


def test_pose_transformed_commutes_with_projection(rng):
    pose = Pose(random_quaternion(rng), rng.normal(size=3))
    G = random_quaternion(rng).to_matrix()
    g = rng.normal(size=3)
    X = rng.normal(size=3)
    moved = pose.transformed(G, g, 2.5)
    np.testing.assert_allclose(moved.project(2.5 * (G @ X + g)), pose.project(X), atol=1e-12)
