"""Ground-truth landmarks: collect them from posed meshes, project, serialise."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import List

import numpy as np

from .errors import InconsistentPose
from .eyeregion import eyelid_landmarks_3d, eyelid_weight_saturated, landmark_order
from .staging import CameraPose, PosedEyeball, PosedEyeRegion, SceneConfig, eyeball_angles, point_in_polygon

SCHEMA_VERSION = "1"
N_EYELID = 12
N_IRIS = 8
N_PUPIL = 8
WEIGHT_TOL = 1e-6


def landmark_names() -> List[str]:
    return landmark_order() + [f"iris_{i}" for i in range(N_IRIS)] + [f"pupil_{i}" for i in range(N_PUPIL)]


@dataclass(frozen=True)
class LandmarkSet:
    names: tuple
    points: np.ndarray  # (28, 3) head frame, mm
    pupil_center: np.ndarray
    gaze_vec: np.ndarray

    def subset(self, prefix: str) -> np.ndarray:
        idx = [i for i, n in enumerate(self.names) if n.startswith(prefix)]
        return self.points[idx]


def collect_landmarks_3d(ball: PosedEyeball, region: PosedEyeRegion) -> LandmarkSet:
    """Eyelid points from the posed lids, iris/pupil rings from the posed eyeball."""
    pitch, _ = eyeball_angles(ball.gaze_vec)
    expected = eyelid_weight_saturated(pitch)
    for w in (ball.lid_weight, region.lid_weight):
        if abs(w - expected) > WEIGHT_TOL:
            raise InconsistentPose(f"eyelid weight {w} does not match gaze pitch {pitch:.4f} (expected {expected})")
    lids = eyelid_landmarks_3d(region.face)
    iris = ball.inner.vertices[ball.iris_ids]
    pupil = ball.inner.vertices[ball.pupil_ids]
    pts = np.concatenate([lids, iris, pupil])
    if pts.shape != (N_EYELID + N_IRIS + N_PUPIL, 3):
        raise InconsistentPose(f"expected 28 landmarks, got {len(pts)}")
    return LandmarkSet(
        tuple(landmark_names()),
        pts,
        ball.inner.vertices[ball.pupil_center_id].copy(),
        np.asarray(ball.gaze_vec, dtype=np.float64),
    )


def project(camera: CameraPose, p) -> np.ndarray:
    """Orthographic projection to pixels: origin top-left, +x right, +y down."""
    return camera.project(p)


def unproject(camera: CameraPose, xy, depth: float = 0.0) -> np.ndarray:
    """Inverse of ``project`` on the plane ``depth`` mm in front of the camera."""
    cam = camera.camera()
    o, d = cam.pixel_rays(np.atleast_2d(xy)[:, 0], np.atleast_2d(xy)[:, 1], camera.image_width, camera.image_height)
    return o + depth * d


def gaze_in_camera(camera: CameraPose, gaze_vec) -> np.ndarray:
    """Gaze in the camera frame (x right, y up, z towards the camera)."""
    return camera.orientation.as_matrix().T @ np.asarray(gaze_vec, dtype=np.float64)


def _r(x) -> float:
    return float(x)


def make_label_record(scene: SceneConfig, lm: LandmarkSet, image_name: str, pupil_visible: bool = True) -> dict:
    cam = scene.camera
    xy = project(cam, lm.points)
    pc = project(cam, lm.pupil_center)[0]
    pitch, yaw = eyeball_angles(lm.gaze_vec)
    rec = {
        "schema_version": SCHEMA_VERSION,
        "image": image_name,
        "seed": int(scene.seed),
        "camera": {
            "theta": _r(cam.position.theta),
            "phi": _r(cam.position.phi),
            "radius_mm": _r(cam.position.radius),
            "mm_per_px": _r(cam.mm_per_px),
            "width": int(cam.image_width),
            "height": int(cam.image_height),
        },
        "gaze": {
            "alpha": _r(scene.gaze.alpha),
            "beta": _r(scene.gaze.beta),
            "vector_camera": [_r(v) for v in gaze_in_camera(cam, lm.gaze_vec)],
            "vector_head": [_r(v) for v in lm.gaze_vec],
            "eyeball_pitch": _r(pitch),
            "eyeball_yaw": _r(yaw),
        },
        "lighting": asdict(scene.lighting) if scene.lighting is not None else None,
        "eye": asdict(scene.eye) if scene.eye is not None else None,
        "landmarks_2d": [{"name": n, "x": _r(p[0]), "y": _r(p[1])} for n, p in zip(lm.names, xy)],
        "pupil_center_2d": [_r(pc[0]), _r(pc[1])],
        "validity": {"pose_valid": True, "pupil_visible": bool(pupil_visible)},
    }
    return rec


def record_to_json(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, indent=1) + "\n"


def landmarks_2d_from_record(rec: dict, prefix: str = "") -> np.ndarray:
    return np.array([[p["x"], p["y"]] for p in rec["landmarks_2d"] if p["name"].startswith(prefix)])


def recheck_pupil_visible(rec: dict) -> bool:
    """Visibility recomputed from nothing but the stored 2D landmarks."""
    return point_in_polygon(rec["pupil_center_2d"], landmarks_2d_from_record(rec, "eyelid_"))


def validate_record(rec: dict) -> List[str]:
    """Problems found in a label record; empty when it is well formed."""
    errs = []
    if rec.get("schema_version") != SCHEMA_VERSION:
        errs.append("schema_version")
    names = [p["name"] for p in rec.get("landmarks_2d", [])]
    if names != landmark_names():
        errs.append("landmark names/count")
    xy = landmarks_2d_from_record(rec) if names else np.zeros((0, 2))
    if not np.all(np.isfinite(xy)):
        errs.append("non-finite landmark")
    g = np.asarray(rec["gaze"]["vector_camera"])
    if abs(np.linalg.norm(g) - 1.0) > 1e-9:
        errs.append("gaze not unit")
    return errs
