import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from oculogen import eyeball as eb
from oculogen.errors import DegenerateFrame, EmptyEnumeration
from oculogen.eyeregion import eyelid_landmarks_3d, pose_eyelids
from oculogen.staging import (
    GAZE_GRID,
    GazeSpec,
    SceneConfig,
    build_identity,
    enumerate_poses,
    eyeball_angles,
    eyeball_rotation,
    gaze_direction,
    place_camera,
    point_in_polygon,
    pose_eye,
    pupil_visible,
    sample_scene_randomness,
    validate_pose,
)

# angle between g(10, 10) and eye contact, from an independent scipy rotation script
GAZE_ANGLE_10_10 = 14.106044260566337


@pytest.fixture(scope="module")
def identity():
    return build_identity("t")


def _scene(theta, phi, a, b):
    cam = place_camera(theta, phi)
    return SceneConfig(cam, GazeSpec(a, b, gaze_direction(cam, a, b)))


def test_frontal_camera():
    cam = place_camera(0, 0, 100, (120, 80), 0.5)
    assert np.allclose(cam.xyz, [0, 0, 100], atol=1e-12)
    assert (cam.ortho_width, cam.ortho_height) == (60.0, 40.0)


def test_oblique_camera_centres_eyeball():
    cam = place_camera(20, 10, 100)
    assert np.allclose(cam.project(np.zeros(3))[0], [60, 40], atol=1e-6)
    fwd = -cam.orientation.as_matrix()[:, 2]
    assert np.allclose(fwd, -cam.xyz / np.linalg.norm(cam.xyz), atol=1e-9)


def test_pole_camera_degenerate():
    with pytest.raises(DegenerateFrame):
        place_camera(0, 90)


@settings(max_examples=60, deadline=None)
@given(st.floats(-60, 60), st.floats(-60, 60))
def test_eye_contact_points_at_camera(theta, phi):
    cam = place_camera(theta, phi)
    assert np.allclose(gaze_direction(cam, 0, 0), cam.xyz / np.linalg.norm(cam.xyz), atol=1e-9)


def test_quarter_turn_gives_right_axis():
    cam = place_camera(0, 0)
    assert np.allclose(gaze_direction(cam, 0, 90), cam.orientation.as_matrix()[:, 0], atol=1e-9)


def test_gaze_angle_oracle():
    cam = place_camera(0, 0)
    g = gaze_direction(cam, 10, 10)
    assert math.degrees(math.acos(g @ gaze_direction(cam, 0, 0))) == pytest.approx(GAZE_ANGLE_10_10, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.floats(-30, 30), st.floats(-30, 30), st.floats(-60, 60), st.floats(-60, 60))
def test_gaze_composition_angle(theta, phi, a, b):
    cam = place_camera(theta, phi)
    c = float(np.clip(gaze_direction(cam, a, b) @ gaze_direction(cam, 0, 0), -1, 1))
    expected = math.degrees(math.acos(math.cos(math.radians(a)) * math.cos(math.radians(b))))
    assert math.degrees(math.acos(c)) == pytest.approx(expected, abs=1e-5)


def test_positive_alpha_looks_up():
    g = gaze_direction(place_camera(0, 0), 10, 0)
    assert g[1] > 0 and abs(g[0]) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(-80, 80), st.floats(-170, 170))
def test_eyeball_rotation_maps_rest_gaze(pitch, yaw):
    g = np.array([
        math.cos(math.radians(pitch)) * math.sin(math.radians(yaw)),
        math.sin(math.radians(pitch)),
        math.cos(math.radians(pitch)) * math.cos(math.radians(yaw)),
    ])
    assert np.allclose(eyeball_angles(g), (pitch, yaw), atol=1e-9)
    assert np.allclose(eyeball_rotation(g).apply([0, 0, 1]), g, atol=1e-9)


@pytest.mark.parametrize("pitch,yaw,ok", [(25, 35, True), (26, 0, False), (0, 0, True), (-25, -35, True), (0, 35.1, False)])
def test_validate_pose(pitch, yaw, ok):
    assert validate_pose(pitch, yaw) is ok


def test_enumeration_counts():
    grid = [(0.0, 0.0)]
    poses = enumerate_poses(grid)
    assert len(poses) == 48
    assert sorted({p.gaze.alpha for p in poses}) == [-25, -15, -5, 5, 15, 25]
    assert sorted({p.gaze.beta for p in poses}) == list(range(-35, 36, 10))
    assert len(enumerate_poses(grid, constraints=(math.inf, math.inf))) == 100
    with pytest.raises(EmptyEnumeration):
        enumerate_poses(grid, constraints=(0, 0))


def test_enumeration_order_is_row_major():
    poses = enumerate_poses([(0.0, 0.0), (10.0, 0.0)], constraints=(math.inf, math.inf))
    keys = [(p.camera.position.theta, p.gaze.alpha, p.gaze.beta) for p in poses]
    assert keys == sorted(keys)
    assert len(poses) == 2 * len(GAZE_GRID) ** 2


def test_randomness_is_seeded():
    base = _scene(0, 0, 0, 0)
    a = sample_scene_randomness(base, np.random.default_rng(4))
    b = sample_scene_randomness(base, np.random.default_rng(4))
    assert a == b


def test_randomness_statistics():
    base = _scene(0, 0, 0, 0)
    rng = np.random.default_rng(0)
    samples = [sample_scene_randomness(base, rng) for _ in range(10_000)]
    colors = [s.eye.iris_color for s in samples]
    for c in eb.IRIS_COLORS:
        assert abs(colors.count(c) / len(colors) - 1 / len(eb.IRIS_COLORS)) < 0.02
    rot = np.array([s.lighting.rotation for s in samples])
    assert rot.min() >= 0 and rot.max() < 360
    assert sps.kstest(rot / 360, "uniform").statistic < 0.02
    scales = np.array([s.eye.iris_scale for s in samples])
    assert scales.min() >= 0.95 and scales.max() <= 1.05


def test_pupil_visible_eye_contact(identity):
    scene = _scene(0, 0, 0, 0)
    ball, region = pose_eye(identity, scene, texture=False, lashes=False)
    lids = scene.camera.project(eyelid_landmarks_3d(region.face))
    assert pupil_visible(scene, ball.inner.vertices[ball.pupil_center_id], lids)


def test_pupil_hidden_behind_mismatched_lids(identity):
    # eye pitched up to the limit while the lids keep their looking-down blend
    scene = _scene(0, 0, 25, 0)
    ball, _ = pose_eye(identity, scene, texture=False, lashes=False)
    lids = scene.camera.project(eyelid_landmarks_3d(pose_eyelids(identity.region, 0.0)))
    pc = ball.inner.vertices[ball.pupil_center_id]
    assert not pupil_visible(scene, pc, lids)
    assert not point_in_polygon(scene.camera.project(pc)[0], lids)


def test_degenerate_polygon_is_not_visible():
    line = np.column_stack([np.linspace(0, 10, 12), np.linspace(0, 5, 12)])
    assert not point_in_polygon((5, 2.5), line)
    assert not point_in_polygon((0, 0), np.zeros((12, 2)))
    assert not point_in_polygon((0, 0), [[0, 0], [1, 1]])


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_point_in_square(x, y):
    sq = [[-1, -1], [1, -1], [1, 1], [-1, 1]]
    if max(abs(x), abs(y)) < 1 - 1e-9:
        assert point_in_polygon((x, y), sq)
    elif max(abs(x), abs(y)) > 1 + 1e-9:
        assert not point_in_polygon((x, y), sq)
