import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oculogen.annotate import (
    collect_landmarks_3d,
    gaze_in_camera,
    landmark_names,
    make_label_record,
    project,
    recheck_pupil_visible,
    record_to_json,
    unproject,
    validate_record,
)
from oculogen.errors import InconsistentPose
from oculogen.staging import EyeConfig, GazeSpec, SceneConfig, build_identity, gaze_direction, place_camera, pose_eye


@pytest.fixture(scope="module")
def identity():
    return build_identity("t")


def _scene(theta=0.0, phi=0.0, a=0.0, b=0.0, eye=None):
    cam = place_camera(theta, phi)
    return SceneConfig(cam, GazeSpec(a, b, gaze_direction(cam, a, b)), eye=eye, seed=11)


def _landmarks(identity, scene):
    ball, region = pose_eye(identity, scene, texture=False, lashes=False)
    return collect_landmarks_3d(ball, region)


def test_names_and_count(identity):
    lm = _landmarks(identity, _scene())
    assert lm.points.shape == (28, 3)
    names = landmark_names()
    assert list(lm.names) == names
    assert sum(n.startswith("eyelid_") for n in names) == 12
    assert sum(n.startswith("iris_") for n in names) == 8
    assert sum(n.startswith("pupil_") for n in names) == 8


def test_iris_ring_coplanar(identity):
    ring = _landmarks(identity, _scene(a=15, b=-20)).subset("iris_")
    c = ring - ring.mean(axis=0)
    normal = np.linalg.svd(c)[2][-1]
    assert np.abs(c @ normal).max() < 0.05


def test_dilation_moves_only_pupil(identity):
    small = _landmarks(identity, _scene(eye=EyeConfig(pupil_dilation=0.0)))
    large = _landmarks(identity, _scene(eye=EyeConfig(pupil_dilation=1.0)))
    assert np.allclose(small.subset("iris_"), large.subset("iris_"), atol=1e-9)

    def radius(ring, center):
        return np.linalg.norm(ring - center, axis=1).mean()

    assert radius(large.subset("pupil_"), large.pupil_center) > radius(small.subset("pupil_"), small.pupil_center) + 0.5


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([-25, -15, -5, 5, 15, 25]), st.sampled_from(range(-35, 36, 10)))
def test_names_stable_across_poses(identity, a, b):
    lm = _landmarks(identity, _scene(a=a, b=b))
    assert list(lm.names) == landmark_names()
    assert np.isfinite(lm.points).all()


@pytest.mark.parametrize("theta,phi", [(0, 0), (20, 10), (-20, -20), (35, 5)])
def test_eyeball_centre_projects_to_image_centre(theta, phi):
    cam = place_camera(theta, phi)
    assert np.allclose(project(cam, np.zeros(3))[0], [60, 40], atol=1e-9)


def test_projection_scale():
    cam = place_camera(0, 0)
    right = cam.orientation.as_matrix()[:, 0]
    assert np.allclose(project(cam, right)[0], [62, 40], atol=1e-9)
    up = cam.orientation.as_matrix()[:, 1]
    assert np.allclose(project(cam, up)[0], [60, 38], atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(-40, 40), st.floats(-40, 40), st.floats(0, 120), st.floats(0, 80), st.floats(0, 150))
def test_unproject_round_trip(theta, phi, x, y, depth):
    cam = place_camera(theta, phi)
    p = unproject(cam, [x, y], depth)
    assert np.allclose(project(cam, p)[0], [x, y], atol=1e-9)


def test_eye_contact_camera_gaze():
    for theta, phi in [(0, 0), (20, 10), (-15, 5)]:
        s = _scene(theta, phi)
        assert np.allclose(gaze_in_camera(s.camera, s.gaze.gaze_vec), [0, 0, 1], atol=1e-12)


def test_alpha_pitches_camera_gaze():
    s = _scene(20, 10, a=10, b=0)
    g = gaze_in_camera(s.camera, s.gaze.gaze_vec)
    assert math.degrees(math.acos(g[2])) == pytest.approx(10.0, abs=1e-6)
    assert g[1] > 0 and abs(g[0]) < 1e-12


def test_record_is_byte_identical(identity):
    s = replace(_scene(a=5, b=15), eye=EyeConfig())
    lm = _landmarks(identity, s)
    a = record_to_json(make_label_record(s, lm, "x.png"))
    b = record_to_json(make_label_record(s, lm, "x.png"))
    assert a == b and a.endswith("\n")
    assert validate_record(make_label_record(s, lm, "x.png")) == []


def test_pupil_centre_matches_ring_centroid(identity):
    for a, b in [(0, 0), (25, 35), (-25, -35), (15, -5)]:
        s = _scene(10, -10, a, b)
        lm = _landmarks(identity, s)
        xy = project(s.camera, lm.subset("pupil_"))
        assert np.linalg.norm(xy.mean(axis=0) - project(s.camera, lm.pupil_center)[0]) < 0.5


def test_beta_moves_iris_horizontally(identity):
    s0, s1 = _scene(a=5, b=5), _scene(a=5, b=15)
    c0 = project(s0.camera, _landmarks(identity, s0).subset("iris_")).mean(axis=0)
    c1 = project(s1.camera, _landmarks(identity, s1).subset("iris_")).mean(axis=0)
    d = c1 - c0
    assert abs(d[0]) > abs(d[1]) and d[0] > 0


def test_visibility_recheck_from_record(identity):
    s = _scene()
    lm = _landmarks(identity, s)
    assert recheck_pupil_visible(make_label_record(s, lm, "x.png"))


def test_inconsistent_lid_weight(identity):
    s = _scene(a=15)
    ball, region = pose_eye(identity, s, texture=False, lashes=False)
    with pytest.raises(InconsistentPose):
        collect_landmarks_3d(ball, replace(region, lid_weight=0.1))
