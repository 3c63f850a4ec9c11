"""Procedural eye-region skin patch with animated eyelids, lashes and landmarks.

The patch is a ring-structured surface lofted from the palpebral fissure
ellipse (ring 0, the lid margin) out to a rectangular border.  Inner rings wrap
over the eyeball as the lids, outer rings follow a smooth brow/cheek height
field.  Eyelid motion is stored as two blend shapes (lids up, lids down) that
are mixed by a weight derived from the eyeball pitch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .errors import InvalidParams, OutOfRange, SnapFailed
from .eyeball import ScalarField2D, value_noise
from .geomcore import TriMesh, closest_points_on_triangles, compute_vertex_normals

N_AROUND = 72  # vertices per ring; divisible by 12 so landmarks fall on vertices
N_RINGS = 20
RING_EXPONENT = 1.6
PATCH_WIDTH = 72.0
PATCH_HEIGHT = 52.0
LID_CLEARANCE = 1.2  # mm between lid underside and eyeball surface
LID_THICKNESS = 1.0
UPPER_LID_SWING = 10.0  # degrees of rotation at full up / full down
LOWER_LID_SWING = 7.0
PITCH_LIMIT = 25.0
LASH_SEGMENTS = 6
LASH_G_STEP = 0.15


@dataclass(frozen=True)
class EyeRegionParams:
    fissure_width: float = 22.0
    fissure_height: float = 10.0
    skin_albedo: Tuple[float, float, float] = (0.55, 0.36, 0.29)
    wrinkle_amplitude: float = 0.18
    lash_length: float = 7.5
    lash_count: int = 50
    seed: int = 0
    eyeball_r1: float = 12.0
    eyeball_r2: float = 8.0
    cornea_offset: float = 5.0

    def validate(self) -> None:
        if not 0 < self.fissure_width < 2 * self.eyeball_r1:
            raise InvalidParams("fissure width must be in (0, 2*r1)")
        if not 0 < self.fissure_height < min(self.fissure_width, 2 * self.eyeball_r1):
            raise InvalidParams("fissure height must be positive and below the width")
        if self.lash_count < 0:
            raise InvalidParams("lash_count must be >= 0")
        if self.lash_length <= 0 or self.wrinkle_amplitude < 0:
            raise InvalidParams("lash length must be positive, wrinkle amplitude non-negative")
        if any(not 0.0 <= c <= 1.0 for c in self.skin_albedo):
            raise InvalidParams("skin albedo outside [0, 1]")


@dataclass(frozen=True)
class LashStrand:
    points: np.ndarray  # (segments + 1, 3)
    root_index: int
    thickness: float = 0.1

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())


@dataclass(frozen=True)
class EyeRegionModel:
    params: EyeRegionParams
    face: TriMesh  # neutral pose
    blend_up: np.ndarray
    blend_down: np.ndarray
    wrinkle_field_neutral: ScalarField2D
    wrinkle_field_down: ScalarField2D
    eyelid_landmark_vertex_ids: np.ndarray  # 12, see landmark_order()
    lash_roots: dict = field(default_factory=dict)  # lid -> root spec

    @property
    def margin_ids(self) -> np.ndarray:
        return self.face.meta["margin_ids"]


def landmark_order() -> List[str]:
    """eyelid_0 temporal corner (+X), counter-clockwise over the upper lid."""
    return [f"eyelid_{i}" for i in range(12)]


# ---------------------------------------------------------------------------
# Geometry helpers


def _outer_surface_z(p: EyeRegionParams, x, y):
    """Front z of the default two-sphere eyeball at (x, y); nan outside it."""
    s2 = x * x + y * y
    with np.errstate(invalid="ignore"):
        z1 = np.sqrt(p.eyeball_r1**2 - s2)
        z2 = p.cornea_offset + np.sqrt(p.eyeball_r2**2 - s2)
    return np.fmax(z1, z2)


def _face_height(x, y):
    """Smooth head surface around the orbit: brow ridge, cheek, nose side."""
    z = 11.0 - 0.0045 * x * x - 0.0015 * y * y
    z += 4.0 * np.exp(-(((y - 17.0) / 6.5) ** 2)) * (1.0 - 0.25 * np.tanh(x / 30.0))
    z += 1.5 * np.exp(-(((y + 19.0) / 7.0) ** 2))
    z += 7.0 / (1.0 + np.exp((x + 27.0) / 3.0))  # nose bridge on the nasal (-X) side
    return z


def _smooth_max(a, b, k):
    h = np.clip(0.5 + 0.5 * (a - b) / k, 0.0, 1.0)
    return b + (a - b) * h + k * h * (1.0 - h)


def _rect_point(dx, dy, half_w, half_h):
    s = 1.0 / np.maximum(np.abs(dx) / half_w, np.abs(dy) / half_h)
    return dx * s, dy * s


def _ring_taus(k_rings: int) -> np.ndarray:
    return (np.arange(k_rings + 1) / k_rings) ** RING_EXPONENT


def _build_neutral(p: EyeRegionParams):
    a, b = p.fissure_width / 2, p.fissure_height / 2
    t = 2 * np.pi * np.arange(N_AROUND) / N_AROUND
    ex, ey = a * np.cos(t), b * np.sin(t)
    rx, ry = _rect_point(np.cos(t) * a, np.sin(t) * b, PATCH_WIDTH / 2, PATCH_HEIGHT / 2)
    taus = _ring_taus(N_RINGS)
    verts = []
    for k, tau in enumerate(taus):
        x = (1 - tau) * ex + tau * rx
        y = (1 - tau) * ey + tau * ry
        if k == 0:
            z = _outer_surface_z(p, x, y)
        else:
            # lid surface: a sphere just outside the eyeball, merged into the face
            lift = LID_CLEARANCE + LID_THICKNESS * min(1.0, tau / 0.02)
            r = p.eyeball_r1 + lift
            with np.errstate(invalid="ignore"):
                z_lid = np.sqrt(r * r - x * x - y * y)
            z_cornea = _outer_surface_z(p, x, y) + lift
            z_lid = np.fmax(z_lid, z_cornea)
            z_lid = np.where(np.isnan(z_lid), -1e3, z_lid)
            z = _smooth_max(z_lid, _face_height(x, y), 1.5)
        verts.append(np.column_stack([x, y, z]))
    verts = np.vstack(verts)

    faces = []
    for k in range(N_RINGS):
        a0 = k * N_AROUND
        b0 = a0 + N_AROUND
        for i in range(N_AROUND):
            j = (i + 1) % N_AROUND
            # winding chosen so face normals point toward +Z (the viewer)
            faces.append((a0 + i, b0 + i, b0 + j))
            faces.append((a0 + i, b0 + j, a0 + j))
    faces = np.array(faces, dtype=np.int64)
    uv = np.column_stack([verts[:, 0] / PATCH_WIDTH + 0.5, verts[:, 1] / PATCH_HEIGHT + 0.5])
    ring = np.repeat(np.arange(N_RINGS + 1), N_AROUND)
    angle = np.tile(t, N_RINGS + 1)
    return verts, faces, np.clip(uv, 0.0, 1.0), ring, angle, taus


def _lid_support(angle, tau):
    """Fraction of the full lid swing a vertex takes (0 at the corners, far skin)."""
    ang = np.abs(np.sin(angle)) ** 0.5
    fall = np.clip((0.5 - tau) / 0.35, 0.0, 1.0)
    fall = fall * fall * (3 - 2 * fall)
    return ang * fall


def _rotate_x(v: np.ndarray, angle_rad: np.ndarray) -> np.ndarray:
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    y = v[:, 1] * c - v[:, 2] * s
    z = v[:, 1] * s + v[:, 2] * c
    return np.column_stack([v[:, 0], y, z])


def _lid_deltas(verts, angle, tau):
    upper = np.sin(angle) > 0
    lower = np.sin(angle) < 0
    support = _lid_support(angle, tau)
    swing = np.where(upper, UPPER_LID_SWING, np.where(lower, LOWER_LID_SWING, 0.0))
    amount = np.radians(swing * support)
    # rotation about +X by -angle moves +Z points toward +Y (lids up)
    up = _rotate_x(verts, -amount) - verts
    down = _rotate_x(verts, amount) - verts
    return up, down


def _wrinkle_fields(p: EyeRegionParams, res: int = 128):
    a, b = p.fissure_width / 2, p.fissure_height / 2
    u = (np.arange(res) + 0.5) / res
    x = (u - 0.5) * PATCH_WIDTH
    y = (u - 0.5) * PATCH_HEIGHT
    X, Y = np.meshgrid(x, y)  # rows follow v (y), columns follow u (x)
    e = np.hypot(X / a, Y / b)
    # crease above the upper lid, fine noise lines, crow's feet on the temporal side
    crease = -np.exp(-(((e - 1.55) / 0.12) ** 2)) * (Y > 0) * np.clip(np.sin(np.arctan2(Y / b, X / a)), 0, 1)
    noise = value_noise((res, res), 4, p.seed * 7 + 1, base_cells=8, smooth_sigma=0.8)
    crows = np.exp(-(((X - a - 4.0) / 5.0) ** 2) - (Y / 6.0) ** 2) * np.sin(Y * 1.6 + 0.4 * noise)
    field = 0.6 * crease + 0.25 * noise + 0.35 * crows
    ramp = np.clip((e - 1.2) / 0.3, 0.0, 1.0)  # keep the margin itself smooth
    field = field * ramp
    m = np.abs(field).max()
    neutral = p.wrinkle_amplitude * field / m if m > 0 else field
    # looking down stretches and smooths the upper lid skin
    upper_lid = np.exp(-(((e - 1.5) / 0.6) ** 2)) * (Y > -1.0)
    mask = 1.0 - 0.9 * np.clip(upper_lid, 0.0, 1.0)
    return ScalarField2D(neutral), ScalarField2D(neutral * mask)


def _lash_root_spec(p: EyeRegionParams, lid: str):
    """Roots interpolate between adjacent ring-1 vertices over the lid span."""
    if p.lash_count == 0:
        return {"a": np.zeros(0, np.int64), "b": np.zeros(0, np.int64), "f": np.zeros(0)}
    span = np.linspace(0.12, 0.88, p.lash_count) * np.pi
    if lid == "lower":
        span = 2 * np.pi - span
    pos = span / (2 * np.pi) * N_AROUND
    i0 = np.floor(pos).astype(np.int64) % N_AROUND
    f = pos - np.floor(pos)
    base = N_AROUND  # ring 1
    return {"a": base + i0, "b": base + (i0 + 1) % N_AROUND, "f": f, "angle": span}


def build_eye_region(p: EyeRegionParams = EyeRegionParams()) -> EyeRegionModel:
    p.validate()
    verts, faces, uv, ring, angle, taus = _build_neutral(p)
    tau_v = taus[ring]
    margin = np.arange(N_AROUND)
    step = N_AROUND // 12
    landmark_ids = margin[::step].copy()  # t = 0, 30, ..., 330 degrees: ccw from temporal corner
    face = compute_vertex_normals(
        TriMesh(
            verts,
            faces,
            uvs=uv,
            meta={"margin_ids": margin, "landmark_ids": landmark_ids, "ring": ring, "angle": angle},
        )
    )
    up, down = _lid_deltas(face.vertices, angle, tau_v)
    w_neutral, w_down = _wrinkle_fields(p)
    roots = {lid: _lash_root_spec(p, lid) for lid in ("upper", "lower")}
    return EyeRegionModel(p, face, up, down, w_neutral, w_down, landmark_ids, roots)


# ---------------------------------------------------------------------------
# Posing


def eyelid_weight(gaze_pitch_alpha: float) -> float:
    """Map eyeball pitch in [-25, 25] degrees linearly to a lid weight in [0, 1]."""
    a = float(gaze_pitch_alpha)
    if not -PITCH_LIMIT <= a <= PITCH_LIMIT:
        raise OutOfRange(f"pitch {a} outside [-25, 25]")
    return (a + PITCH_LIMIT) / (2 * PITCH_LIMIT)


def eyelid_weight_saturated(pitch: float) -> float:
    return eyelid_weight(min(max(float(pitch), -PITCH_LIMIT), PITCH_LIMIT))


def pose_eyelids(m: EyeRegionModel, w: float, wrinkles: bool = True) -> TriMesh:
    if not 0.0 <= w <= 1.0:
        raise OutOfRange(f"eyelid weight {w} outside [0, 1]")
    v = m.face.vertices + w * m.blend_up + (1.0 - w) * m.blend_down
    if wrinkles:
        # displacement along the neutral normals keeps the pose affine in w
        h = m.wrinkle_field_down.mix(m.wrinkle_field_neutral, w).sample(m.face.uvs)
        v = v + h[:, None] * m.face.normals
    return compute_vertex_normals(replace(m.face, vertices=v))


def snap_eyelids(face: TriMesh, eyeball_outer: TriMesh, max_snap: float = 1.5) -> TriMesh:
    """Move every lid-margin vertex onto its closest eyeball surface point."""
    ids = face.meta["margin_ids"]
    tris = eyeball_outer.triangles()
    v = face.vertices.copy()
    for i in ids:
        cps = closest_points_on_triangles(v[i], tris)
        d = np.linalg.norm(cps - v[i], axis=1)
        k = int(np.argmin(d))
        if d[k] > max_snap:
            raise SnapFailed(f"margin vertex {i} is {d[k]:.3f} mm from the eyeball (cap {max_snap})")
        v[i] = cps[k]
    return compute_vertex_normals(replace(face, vertices=v))


def eyelid_landmarks_3d(face: TriMesh) -> np.ndarray:
    return face.vertices[face.meta["landmark_ids"]].copy()


# ---------------------------------------------------------------------------
# Eyelashes


def lash_roots(m: EyeRegionModel, lid: str, face: Optional[TriMesh] = None) -> np.ndarray:
    spec = m.lash_roots[lid]
    v = (face or m.face).vertices
    f = spec["f"][:, None]
    return (1 - f) * v[spec["a"]] + f * v[spec["b"]]


def grow_eyelashes(
    m: EyeRegionModel,
    gravity_sign: int,
    face: Optional[TriMesh] = None,
    g_step: float = LASH_G_STEP,
    segments: int = LASH_SEGMENTS,
) -> List[LashStrand]:
    """Grow one lid's lashes; gravity_sign -1 for the upper lid (curls up), +1 lower."""
    if gravity_sign not in (-1, 1):
        raise ValueError("gravity_sign must be +1 or -1")
    lid = "upper" if gravity_sign < 0 else "lower"
    p = m.params
    if p.lash_count == 0:
        return []
    roots = lash_roots(m, lid, face)
    angle = m.lash_roots[lid]["angle"]
    rng = np.random.default_rng([p.seed, 11 if lid == "upper" else 13])
    strands = []
    for i, root in enumerate(roots):
        outward = np.array([math.cos(angle[i]) * 0.5, math.sin(angle[i]), 0.0])
        d = outward / np.linalg.norm(outward) * 0.45 + np.array([0.0, 0.0, 0.9])
        d += rng.normal(0.0, 0.08, 3)
        d /= np.linalg.norm(d)
        seg = p.lash_length * rng.uniform(0.8, 1.1) / segments
        if lid == "lower":
            seg *= 0.6
        pts = [root.copy()]
        for _ in range(segments):
            pts.append(pts[-1] + seg * d)
            # gravity acts along -Y; its sign flips for the upper lashes
            d = d + np.array([0.0, -gravity_sign * g_step, 0.0])
            d /= np.linalg.norm(d)
        strands.append(LashStrand(np.array(pts), i, 0.1 if lid == "upper" else 0.08))
    return strands


def lash_ribbons(strands: List[LashStrand]) -> TriMesh:
    """Two crossed quads per lash segment so the strands have area to render."""
    verts, faces = [], []
    for s in strands:
        for a, b in zip(s.points[:-1], s.points[1:]):
            d = b - a
            d = d / np.linalg.norm(d)
            for side in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
                n = np.cross(d, side)
                nn = np.linalg.norm(n)
                if nn < 1e-6:
                    n = np.cross(d, [0.0, 0.0, 1.0])
                    nn = np.linalg.norm(n)
                n = n / nn * (0.5 * s.thickness)
                base = len(verts)
                verts += [a - n, a + n, b + n, b - n]
                faces += [(base, base + 1, base + 2), (base, base + 2, base + 3)]
    if not verts:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), np.int64))
    return TriMesh(np.array(verts), np.array(faces, dtype=np.int64))
