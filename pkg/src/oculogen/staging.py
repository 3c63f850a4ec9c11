"""Scene staging: camera placement, gaze construction, pose filters and posing.

A rendered sample is fixed by a camera position on a sphere around the
eyeball centre, a gaze offset (alpha, beta) from eye contact, an environment
with rotation and intensity, and the eye appearance.  Angles are degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from . import eyeball as eb
from . import eyeregion as er
from .errors import EmptyEnumeration
from .geomcore import Rotation, SphericalCoord, TriMesh, look_at, spherical_to_cartesian
from .lighting import KINDS, EnvironmentMap, rotate_env, scale_intensity
from .tracer.materials import Dielectric, LashFiber, Skin, TexturedDiffuse
from .tracer.scene import OrthoCamera, Scene

DEFAULT_RADIUS = 100.0
DEFAULT_MM_PER_PX = 0.5
ALPHA_MAX = 25.0
BETA_MAX = 35.0
ANGLE_TOL = 1e-9  # absorbs rounding when grid values sit exactly on a limit
INTENSITY_RANGE = (0.5, 2.0)
GAZE_GRID = tuple(range(-45, 46, 10))
TEXTURE_RESOLUTION = 256


# ---------------------------------------------------------------------------
# Configuration records


@dataclass(frozen=True)
class CameraPose:
    position: SphericalCoord
    orientation: Rotation
    image_width: int = 120
    image_height: int = 80
    mm_per_px: float = DEFAULT_MM_PER_PX

    @property
    def ortho_width(self) -> float:
        return self.image_width * self.mm_per_px

    @property
    def ortho_height(self) -> float:
        return self.image_height * self.mm_per_px

    @property
    def xyz(self) -> np.ndarray:
        return spherical_to_cartesian(self.position)

    def camera(self) -> OrthoCamera:
        return OrthoCamera(self.xyz, self.orientation.as_matrix(), self.mm_per_px)

    def project(self, points) -> np.ndarray:
        return self.camera().project(points, self.image_width, self.image_height)


@dataclass(frozen=True)
class GazeSpec:
    alpha: float
    beta: float
    gaze_vec: np.ndarray = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gaze_vec", np.asarray(self.gaze_vec, dtype=np.float64))


@dataclass(frozen=True)
class EyeConfig:
    iris_color: str = "brown"
    sclera_tint: str = "white"
    vein_density: float = 0.0
    pupil_dilation: float = 0.2
    iris_scale: float = 1.0

    def eyeball_params(self, base: eb.EyeballParams = eb.EyeballParams()) -> eb.EyeballParams:
        p = replace(
            base,
            iris_color=self.iris_color,
            sclera_tint=self.sclera_tint,
            vein_density=self.vein_density,
            pupil_dilation=self.pupil_dilation,
            iris_scale=self.iris_scale,
        )
        p.validate()
        return p


@dataclass(frozen=True)
class LightingSpec:
    env_id: str = "bright_outdoor"
    rotation: float = 0.0
    intensity: float = 1.0


@dataclass(frozen=True)
class SceneConfig:
    camera: CameraPose
    gaze: GazeSpec
    lighting: Optional[LightingSpec] = None
    eye: Optional[EyeConfig] = None
    seed: int = 0

    @property
    def head_angles(self):
        return eyeball_angles(self.gaze.gaze_vec)


# ---------------------------------------------------------------------------
# Camera and gaze


def place_camera(
    theta: float,
    phi: float,
    radius: float = DEFAULT_RADIUS,
    image_dims=(120, 80),
    mm_per_px: float = DEFAULT_MM_PER_PX,
) -> CameraPose:
    """Orthographic camera on a sphere around the eyeball centre, looking at it."""
    pos = SphericalCoord(float(theta), float(phi), float(radius))
    rot = look_at(spherical_to_cartesian(pos), np.zeros(3))
    return CameraPose(pos, rot, int(image_dims[0]), int(image_dims[1]), float(mm_per_px))


def gaze_direction(camera: CameraPose, alpha: float, beta: float) -> np.ndarray:
    """Eye-contact direction pitched by ``alpha`` (up positive) about the camera's
    right axis, then yawed by ``beta`` about its up axis (towards camera right)."""
    m = camera.orientation.as_matrix()
    right, up = m[:, 0], m[:, 1]
    g0 = camera.xyz / np.linalg.norm(camera.xyz)
    g = Rotation.from_axis_angle(right, -alpha).apply(g0)
    g = Rotation.from_axis_angle(up, beta).apply(g)
    return g / np.linalg.norm(g)


def eyeball_angles(gaze_vec) -> tuple:
    """(pitch, yaw) of a head-frame gaze vector; rest gaze is +Z."""
    g = np.asarray(gaze_vec, dtype=np.float64)
    g = g / np.linalg.norm(g)
    return math.degrees(math.asin(max(-1.0, min(1.0, g[1])))), math.degrees(math.atan2(g[0], g[2]))


def eyeball_rotation(gaze_vec) -> Rotation:
    """Rotation taking the rest gaze +Z onto ``gaze_vec`` without roll."""
    pitch, yaw = eyeball_angles(gaze_vec)
    return Rotation.from_axis_angle([0, 1, 0], yaw) * Rotation.from_axis_angle([1, 0, 0], -pitch)


def validate_pose(pitch: float, yaw: float, alpha_max: float = ALPHA_MAX, beta_max: float = BETA_MAX) -> bool:
    return abs(pitch) <= alpha_max + ANGLE_TOL and abs(yaw) <= beta_max + ANGLE_TOL


def point_in_polygon(point, polygon) -> bool:
    """Even-odd rule; degenerate (zero-area) polygons contain nothing."""
    poly = np.asarray(polygon, dtype=np.float64)
    x, y = float(point[0]), float(point[1])
    if len(poly) < 3 or not np.all(np.isfinite(poly)) or not (math.isfinite(x) and math.isfinite(y)):
        return False
    xs, ys = poly[:, 0], poly[:, 1]
    area2 = np.sum(xs * np.roll(ys, -1) - np.roll(xs, -1) * ys)
    scale = max(np.ptp(xs), np.ptp(ys), 1e-300)
    if abs(area2) <= 1e-12 * scale * scale:
        return False
    inside = False
    n = len(poly)
    for i in range(n):
        x0, y0 = xs[i], ys[i]
        x1, y1 = xs[(i + 1) % n], ys[(i + 1) % n]
        if (y0 > y) != (y1 > y):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x < xc:
                inside = not inside
    return inside


def pupil_visible(scene: SceneConfig, pupil_center_3d, eyelid_landmarks_2d) -> bool:
    """Projected pupil centre strictly inside the projected eyelid polygon."""
    p = scene.camera.project(np.asarray(pupil_center_3d, dtype=np.float64))[0]
    return point_in_polygon(p, eyelid_landmarks_2d)


# ---------------------------------------------------------------------------
# Enumeration and random appearance


def enumerate_poses(
    camera_grid: Sequence,
    gaze_alphas: Sequence[float] = GAZE_GRID,
    gaze_betas: Sequence[float] = GAZE_GRID,
    constraints=(ALPHA_MAX, BETA_MAX),
    radius: float = DEFAULT_RADIUS,
    image_dims=(120, 80),
    mm_per_px: float = DEFAULT_MM_PER_PX,
) -> List[SceneConfig]:
    """Camera x gaze grid in (theta, phi, alpha, beta) row-major order, keeping
    only poses whose eyeball-in-head rotation is anatomically valid."""
    if not len(camera_grid) or not len(gaze_alphas) or not len(gaze_betas):
        raise EmptyEnumeration("empty camera or gaze grid")
    out = []
    for theta, phi in camera_grid:
        cam = place_camera(theta, phi, radius, image_dims, mm_per_px)
        for a in gaze_alphas:
            for b in gaze_betas:
                g = gaze_direction(cam, a, b)
                if validate_pose(*eyeball_angles(g), *constraints):
                    out.append(SceneConfig(cam, GazeSpec(float(a), float(b), g)))
    if not out:
        raise EmptyEnumeration("every pose violates the rotation constraints")
    return out


def sample_scene_randomness(base: SceneConfig, rng: np.random.Generator, env_ids: Sequence[str] = KINDS) -> SceneConfig:
    """Fill in eye appearance and lighting from ``rng``."""
    eye = EyeConfig(
        iris_color=eb.IRIS_COLORS[int(rng.integers(len(eb.IRIS_COLORS)))],
        sclera_tint=eb.SCLERA_TINTS[int(rng.integers(len(eb.SCLERA_TINTS)))],
        vein_density=float(rng.uniform(0.0, 1.0)),
        pupil_dilation=float(rng.uniform(0.0, 1.0)),
        iris_scale=float(rng.uniform(eb.IRIS_SCALE_MIN, eb.IRIS_SCALE_MAX)),
    )
    lo, hi = INTENSITY_RANGE
    light = LightingSpec(
        env_id=str(env_ids[int(rng.integers(len(env_ids)))]),
        rotation=float(rng.uniform(0.0, 360.0)),
        intensity=float(math.exp(rng.uniform(math.log(lo), math.log(hi)))),
    )
    return replace(base, eye=eye, lighting=light)


# ---------------------------------------------------------------------------
# Posing the models


@dataclass(frozen=True)
class Identity:
    """Per-subject geometry shared by every image of that subject."""

    name: str
    eyeball: eb.EyeballModel
    region: er.EyeRegionModel
    texture_seed: int = 0


@dataclass(frozen=True)
class PosedEyeball:
    outer: TriMesh
    inner: TriMesh
    rotation: Rotation
    gaze_vec: np.ndarray
    lid_weight: float
    iris_ids: np.ndarray
    pupil_ids: np.ndarray
    pupil_center_id: int
    texture: Optional[np.ndarray]


@dataclass(frozen=True)
class PosedEyeRegion:
    face: TriMesh
    lashes: Optional[TriMesh]
    lid_weight: float


def build_identity(
    name: str,
    eyeball_params: eb.EyeballParams = eb.EyeballParams(),
    region_params: er.EyeRegionParams = er.EyeRegionParams(),
    subdivisions: int = 6,
    bump_seed: int = 0,
    texture_seed: int = 0,
) -> Identity:
    ball = eb.build_eyeball(eyeball_params, subdivisions, bump_seed=bump_seed, texture_resolution=None)
    return Identity(name, ball, er.build_eye_region(region_params), texture_seed)


def pose_eye(identity: Identity, config: SceneConfig, texture: bool = True, lashes: bool = True):
    """Rotate the eyeball to the gaze, open the lids to match, snap and grow lashes."""
    eye = config.eye or EyeConfig()
    g = config.gaze.gaze_vec
    pitch, _ = eyeball_angles(g)
    w = er.eyelid_weight_saturated(pitch)
    rot = eyeball_rotation(g)
    ball = identity.eyeball
    inner = eb.apply_blend_shapes(ball, eye.pupil_dilation, eye.iris_scale).transformed(rot)
    outer = ball.outer.transformed(rot)
    tex = None
    if texture:
        tex = eb.composite_eye_texture(eye.eyeball_params(ball.params), TEXTURE_RESOLUTION, identity.texture_seed).albedo
    posed_ball = PosedEyeball(
        outer, inner, rot, np.asarray(g, dtype=np.float64), w,
        ball.iris_landmark_vertex_ids, ball.pupil_landmark_vertex_ids, ball.pupil_center_vertex_id, tex,
    )
    face = er.snap_eyelids(er.pose_eyelids(identity.region, w), outer)
    lash_mesh = None
    if lashes and identity.region.params.lash_count > 0:
        strands = er.grow_eyelashes(identity.region, -1, face) + er.grow_eyelashes(identity.region, 1, face)
        lash_mesh = er.lash_ribbons(strands)
    return posed_ball, PosedEyeRegion(face, lash_mesh, w)


def lit_environment(env: EnvironmentMap, spec: LightingSpec) -> EnvironmentMap:
    return scale_intensity(rotate_env(env, spec.rotation), spec.intensity)


def build_render_scene(ball: PosedEyeball, region: PosedEyeRegion, skin_albedo, env: EnvironmentMap) -> Scene:
    albedo = ball.texture if ball.texture is not None else (0.7, 0.7, 0.7)
    objects = [
        (ball.outer, Dielectric()),
        (ball.inner, TexturedDiffuse(albedo)),
        (region.face, Skin(tuple(skin_albedo))),
    ]
    if region.lashes is not None:
        objects.append((region.lashes, LashFiber()))
    return Scene.build(objects, env)
