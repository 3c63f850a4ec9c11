"""Two-part parametric eyeball: corneal shell, iris/sclera interior, textures.

The outer part is two spheres joined at their circle of intersection (the
limbus): the sclera sphere of radius ``r1`` at the origin and a corneal cap of
radius ``r2`` centred ``cornea_offset`` along +Z.  The inner part is a sphere
sitting ``corneal_gap`` inside the shell whose front cap is flattened into the
iris/pupil disc.  Both meshes are built as latitude rings around +Z so that
the limbus, iris and pupil boundaries are exact vertex rings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from .errors import InvalidParams, OutOfRange
from .geomcore import TriMesh, compute_vertex_normals, dihedral_angles

IRIS_COLORS = ("amber", "blue", "brown", "grey")
SCLERA_TINTS = ("white", "pink", "yellow")

PUPIL_BASE_RADIUS = 2.0
PUPIL_MIN_RADIUS = 1.5
PUPIL_MAX_RADIUS = 4.0
IRIS_SCALE_MIN = 0.95
IRIS_SCALE_MAX = 1.05
SEAM_MAX_DIHEDRAL = 15.0
SCLERA_BUMP_AMPLITUDE = 0.05
UV_WARP = 0.7


@dataclass(frozen=True)
class EyeballParams:
    r1: float = 12.0
    r2: float = 8.0
    cornea_offset: float = 5.0
    corneal_gap: float = 0.5
    pupil_dilation: float = 0.2  # 0.2 -> the 2 mm base pupil
    iris_scale: float = 1.0
    iris_color: str = "brown"
    sclera_tint: str = "white"
    vein_density: float = 0.0

    def validate(self, allow_zero_gap: bool = False) -> None:
        r1, r2, d = self.r1, self.r2, self.cornea_offset
        if not (r1 > 0 and r2 > 0 and r2 < r1):
            raise InvalidParams("need 0 < r2 < r1")
        if not 0 < d < r1:
            raise InvalidParams("corneal offset must satisfy 0 < d < r1")
        if not (r1 - r2 < d < r1 + r2):
            raise InvalidParams("sclera and corneal spheres do not intersect")
        if self.corneal_gap < 0 or (self.corneal_gap == 0 and not allow_zero_gap):
            raise InvalidParams("corneal gap must be positive")
        if not 0.0 <= self.pupil_dilation <= 1.0:
            raise InvalidParams("pupil_dilation outside [0, 1]")
        if not IRIS_SCALE_MIN <= self.iris_scale <= IRIS_SCALE_MAX:
            raise InvalidParams("iris_scale outside [0.95, 1.05]")
        if self.iris_color not in IRIS_COLORS:
            raise InvalidParams(f"unknown iris colour {self.iris_color!r}")
        if self.sclera_tint not in SCLERA_TINTS:
            raise InvalidParams(f"unknown sclera tint {self.sclera_tint!r}")
        if not 0.0 <= self.vein_density <= 1.0:
            raise InvalidParams("vein_density outside [0, 1]")

    @property
    def z_seam(self) -> float:
        d = self.cornea_offset
        return (d * d + self.r1**2 - self.r2**2) / (2 * d)

    @property
    def limbus_radius(self) -> float:
        return math.sqrt(max(self.r1**2 - self.z_seam**2, 0.0))

    @property
    def inner_radius(self) -> float:
        return self.r1 - self.corneal_gap

    @property
    def z_plane(self) -> float:
        return self.z_seam - self.corneal_gap

    @property
    def disc_rim_radius(self) -> float:
        return math.sqrt(max(self.inner_radius**2 - self.z_plane**2, 0.0))


def pupil_radius_for(dilation: float) -> float:
    return PUPIL_MIN_RADIUS + (PUPIL_MAX_RADIUS - PUPIL_MIN_RADIUS) * dilation


@dataclass(frozen=True)
class ScalarField2D:
    """Grid of displacement values (mm) sampled bilinearly over [0,1]^2 UV."""

    values: np.ndarray  # (H, W); row index follows v, column follows u

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError("displacement field must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, value: float, shape=(4, 4)) -> "ScalarField2D":
        return cls(np.full(shape, float(value)))

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def sample(self, uv) -> np.ndarray:
        uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
        h, w = self.values.shape
        x = np.clip(uv[:, 0] * w - 0.5, 0, w - 1)
        y = np.clip(uv[:, 1] * h - 0.5, 0, h - 1)
        x0 = np.minimum(np.floor(x).astype(int), w - 2) if w > 1 else np.zeros(len(x), int)
        y0 = np.minimum(np.floor(y).astype(int), h - 2) if h > 1 else np.zeros(len(y), int)
        fx = x - x0 if w > 1 else np.zeros(len(x))
        fy = y - y0 if h > 1 else np.zeros(len(y))
        x1 = np.minimum(x0 + 1, w - 1)
        y1 = np.minimum(y0 + 1, h - 1)
        g = self.values
        top = g[y0, x0] * (1 - fx) + g[y0, x1] * fx
        bot = g[y1, x0] * (1 - fx) + g[y1, x1] * fx
        return top * (1 - fy) + bot * fy

    def mix(self, other: "ScalarField2D", w: float) -> "ScalarField2D":
        """(1 - w) * self + w * other on a shared grid."""
        return ScalarField2D((1.0 - w) * self.values + w * other.values)


def value_noise(shape, octaves: int, seed: int, base_cells: int = 4, smooth_sigma: float = 1.0) -> np.ndarray:
    """Smoothed multi-octave value noise normalised to max |n| == 1."""
    rng = np.random.default_rng(seed)
    h, w = shape
    out = np.zeros(shape)
    amp = 1.0
    for o in range(octaves):
        cells = base_cells * 2**o
        lattice = rng.uniform(-1, 1, size=(cells + 1, cells + 1))
        out += amp * ndimage.zoom(lattice, (h / (cells + 1), w / (cells + 1)), order=3, mode="nearest")[:h, :w]
        amp *= 0.5
    if smooth_sigma > 0:
        out = ndimage.gaussian_filter(out, smooth_sigma, mode="nearest")
    out -= out.mean()
    m = np.abs(out).max()
    return out / m if m > 0 else out


def sclera_bump_field(seed: int, resolution: int = 128, amplitude: float = SCLERA_BUMP_AMPLITUDE) -> ScalarField2D:
    return ScalarField2D(amplitude * value_noise((resolution, resolution), 4, seed, smooth_sigma=1.5))


# ---------------------------------------------------------------------------
# Mesh construction


def _polar_uv(points: np.ndarray) -> np.ndarray:
    """Polar UV about +Z: front pole at (0.5, 0.5), back pole on the rim.

    The radial coordinate is warped so the visible front gets more texels.
    """
    psi = np.arctan2(np.hypot(points[:, 0], points[:, 1]), points[:, 2])
    lon = np.arctan2(points[:, 1], points[:, 0])
    q = 0.5 * (psi / np.pi) ** UV_WARP
    return np.column_stack([0.5 + q * np.cos(lon), 0.5 + q * np.sin(lon)])


def _ring_mesh(front_pole, rings, back_pole):
    """Stitch latitude rings (each (n_lon, 3)) between two pole vertices."""
    n_lon = len(rings[0])
    verts = [np.asarray(front_pole)[None]] + list(rings) + [np.asarray(back_pole)[None]]
    v = np.vstack(verts)
    faces = []
    first = 1
    for i in range(n_lon):
        faces.append((0, first + i, first + (i + 1) % n_lon))
    for r in range(len(rings) - 1):
        a = 1 + r * n_lon
        b = a + n_lon
        for i in range(n_lon):
            j = (i + 1) % n_lon
            faces.append((a + i, b + i, b + j))
            faces.append((a + i, b + j, a + j))
    last = 1 + (len(rings) - 1) * n_lon
    pole = len(v) - 1
    for i in range(n_lon):
        faces.append((pole, last + (i + 1) % n_lon, last + i))
    return v, np.array(faces, dtype=np.int64)


def _n_lon(subdivisions: int) -> int:
    return 8 * subdivisions


def _lon_angles(n_lon: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n_lon) / n_lon


def build_outer_mesh(p: EyeballParams, subdivisions: int = 6) -> TriMesh:
    """Closed corneal+scleral shell joined at the limbus ring."""
    if subdivisions < 3:
        raise InvalidParams("subdivisions must be >= 3")
    p.validate(allow_zero_gap=True)
    r1, r2, d = p.r1, p.r2, p.cornea_offset
    zs, rho = p.z_seam, p.limbus_radius
    n_lon = _n_lon(subdivisions)
    lon = _lon_angles(n_lon)
    cos_l, sin_l = np.cos(lon), np.sin(lon)

    theta_c = math.acos((zs - d) / r2)  # cornea half-angle about its own centre
    psi_s = math.acos(zs / r1)  # limbus polar angle about the origin
    n_c = 2 * subdivisions
    n_s = 5 * subdivisions

    # meridian profile as (cylindrical radius, z) pairs, apex excluded
    prof = []
    for k in range(1, n_c + 1):
        t = theta_c * k / n_c
        prof.append((r2 * math.sin(t), d + r2 * math.cos(t)))
    seam_idx = len(prof) - 1
    prof[seam_idx] = (rho, zs)
    for j in range(1, n_s):
        psi = psi_s + (math.pi - psi_s) * j / n_s
        prof.append((r1 * math.sin(psi), r1 * math.cos(psi)))
    prof = np.array(prof)
    apex = np.array([0.0, 0.0, d + r2])
    back = np.array([0.0, 0.0, -r1])

    def rings_from(profile):
        return [np.column_stack([s * cos_l, s * sin_l, np.full(n_lon, z)]) for s, z in profile]

    # profile-direction Laplacian on the rings around the seam until the
    # face-angle jump across the seam is below the threshold
    # the seam ring itself stays on the analytic limbus
    band = [k for k in (seam_idx - 2, seam_idx - 1, seam_idx + 1, seam_idx + 2) if 0 <= k < len(prof)]
    faces = None
    seam_ids = None
    for _ in range(51):
        verts, faces = _ring_mesh(apex, rings_from(prof), back)
        mesh = TriMesh(verts, faces)
        seam_ids = 1 + seam_idx * n_lon + np.arange(n_lon)
        seam_edges = [(seam_ids[i], seam_ids[(i + 1) % n_lon]) for i in range(n_lon)]
        worst = max(dihedral_angles(mesh, seam_edges).values())
        if worst < SEAM_MAX_DIHEDRAL:
            break
        full = np.vstack([[0.0, d + r2], prof, [0.0, -r1]])
        new = prof.copy()
        for k in band:
            new[k] = 0.5 * full[k + 1] + 0.25 * (full[k] + full[k + 2])
        prof = new

    uv = _polar_uv(verts)
    seam_uv_r = float(np.mean(np.hypot(uv[seam_ids, 0] - 0.5, uv[seam_ids, 1] - 0.5)))
    # sclera weight ramps from 0 at the seam to 1 three rings further back
    ring_of = np.concatenate([[-1], np.repeat(np.arange(len(prof)), n_lon), [len(prof)]])
    sclera_w = np.clip((ring_of - seam_idx) / 3.0, 0.0, 1.0)
    mesh = TriMesh(
        verts,
        faces,
        uvs=uv,
        meta={
            "seam_ids": seam_ids,
            "sclera_weight": sclera_w,
            "seam_uv_radius": seam_uv_r,
            "n_lon": n_lon,
        },
    )
    return compute_vertex_normals(mesh)


def _front_surface(p: EyeballParams, s: np.ndarray) -> np.ndarray:
    """z of the inner surface at cylindrical radius s (flat disc, then sphere)."""
    s = np.asarray(s, dtype=np.float64)
    r = p.inner_radius
    return np.where(s <= p.disc_rim_radius, p.z_plane, np.sqrt(np.maximum(r * r - s * s, 0.0)))


def _inner_layout(p: EyeballParams, subdivisions: int):
    rho = p.limbus_radius
    s_outer = IRIS_SCALE_MAX * rho + 0.6
    n_p = max(3, subdivisions - 2)
    n_i = subdivisions
    n_o = 2
    radii = list(np.linspace(0, PUPIL_BASE_RADIUS, n_p + 1)[1:])
    pupil_ring = len(radii) - 1
    radii += list(np.linspace(PUPIL_BASE_RADIUS, rho, n_i + 1)[1:])
    iris_ring = len(radii) - 1
    radii += list(np.linspace(rho, s_outer, n_o + 1)[1:])
    return np.array(radii), pupil_ring, iris_ring, s_outer


def build_inner_mesh(p: EyeballParams, subdivisions: int = 6) -> TriMesh:
    """Flattened sphere: iris/pupil disc in front, sclera elsewhere."""
    if subdivisions < 3:
        raise InvalidParams("subdivisions must be >= 3")
    p.validate(allow_zero_gap=True)
    r = p.inner_radius
    n_lon = _n_lon(subdivisions)
    lon = _lon_angles(n_lon)
    cos_l, sin_l = np.cos(lon), np.sin(lon)
    radii, pupil_ring, iris_ring, s_outer = _inner_layout(p, subdivisions)
    zs = _front_surface(p, radii)
    rings = [np.column_stack([s * cos_l, s * sin_l, np.full(n_lon, z)]) for s, z in zip(radii, zs)]
    psi0 = math.asin(s_outer / r)
    n_s = 5 * subdivisions
    for j in range(1, n_s):
        psi = psi0 + (math.pi - psi0) * j / n_s
        rings.append(np.column_stack([r * math.sin(psi) * cos_l, r * math.sin(psi) * sin_l, np.full(n_lon, r * math.cos(psi))]))
    verts, faces = _ring_mesh([0.0, 0.0, p.z_plane], rings, [0.0, 0.0, -r])
    ring_ids = lambda k: 1 + k * n_lon + np.arange(n_lon)  # noqa: E731
    step = n_lon // 8
    mesh = TriMesh(
        verts,
        faces,
        uvs=_polar_uv(verts),
        meta={
            "pupil_ring_ids": ring_ids(pupil_ring),
            "iris_ring_ids": ring_ids(iris_ring),
            "pupil_landmark_ids": ring_ids(pupil_ring)[::step],
            "iris_landmark_ids": ring_ids(iris_ring)[::step],
            "pupil_center_id": 0,
            "front_count": 1 + len(radii) * n_lon,
            "s_outer": s_outer,
            "n_lon": n_lon,
        },
    )
    return compute_vertex_normals(mesh)


def _radial_remap_delta(p: EyeballParams, mesh: TriMesh, knots_from, knots_to) -> np.ndarray:
    """Per-vertex displacement moving front-region vertices to remapped radii."""
    v = mesh.vertices
    n_front = mesh.meta["front_count"]
    delta = np.zeros_like(v)
    s = np.hypot(v[:n_front, 0], v[:n_front, 1])
    s_new = np.interp(s, knots_from, knots_to)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(s > 0, s_new / s, 1.0)
    target = np.column_stack([v[:n_front, 0] * scale, v[:n_front, 1] * scale, _front_surface(p, s_new)])
    delta[:n_front] = target - v[:n_front]
    return delta


def build_blend_deltas(p: EyeballParams, inner: TriMesh) -> dict:
    rho = p.limbus_radius
    s_out = inner.meta["s_outer"]
    base = [0.0, PUPIL_BASE_RADIUS, rho, s_out]
    return {
        "pupil_dilate": _radial_remap_delta(p, inner, base, [0.0, PUPIL_MAX_RADIUS, rho, s_out]),
        "pupil_constrict": _radial_remap_delta(p, inner, base, [0.0, PUPIL_MIN_RADIUS, rho, s_out]),
        "iris_large": _radial_remap_delta(p, inner, base, [0.0, PUPIL_BASE_RADIUS, IRIS_SCALE_MAX * rho, s_out]),
        "iris_small": _radial_remap_delta(p, inner, base, [0.0, PUPIL_BASE_RADIUS, IRIS_SCALE_MIN * rho, s_out]),
    }


def blend_weights(pupil_dilation: float, iris_scale: float) -> dict:
    if not 0.0 <= pupil_dilation <= 1.0:
        raise OutOfRange(f"pupil_dilation {pupil_dilation} outside [0, 1]")
    if not IRIS_SCALE_MIN - 1e-12 <= iris_scale <= IRIS_SCALE_MAX + 1e-12:
        raise OutOfRange(f"iris_scale {iris_scale} outside [0.95, 1.05]")
    r = pupil_radius_for(pupil_dilation)
    w = dict.fromkeys(("pupil_dilate", "pupil_constrict", "iris_large", "iris_small"), 0.0)
    if r >= PUPIL_BASE_RADIUS:
        w["pupil_dilate"] = (r - PUPIL_BASE_RADIUS) / (PUPIL_MAX_RADIUS - PUPIL_BASE_RADIUS)
    else:
        w["pupil_constrict"] = (PUPIL_BASE_RADIUS - r) / (PUPIL_BASE_RADIUS - PUPIL_MIN_RADIUS)
    if iris_scale >= 1.0:
        w["iris_large"] = (iris_scale - 1.0) / (IRIS_SCALE_MAX - 1.0)
    else:
        w["iris_small"] = (1.0 - iris_scale) / (1.0 - IRIS_SCALE_MIN)
    return w


def apply_sclera_displacement(mesh: TriMesh, field: ScalarField2D, mask: Optional[np.ndarray] = None) -> TriMesh:
    """Shift vertices along their normals by ``field(uv)`` (times ``mask``)."""
    if mesh.normals is None or mesh.uvs is None:
        raise ValueError("mesh needs normals and uvs")
    h = field.sample(mesh.uvs)
    if mask is not None:
        h = h * np.asarray(mask, dtype=np.float64)
    if not np.any(h):
        return mesh
    moved = mesh.vertices + h[:, None] * mesh.normals
    return compute_vertex_normals(replace(mesh, vertices=moved))


# ---------------------------------------------------------------------------
# Texture


def _texture_radii(p: EyeballParams) -> tuple:
    """UV-space radii of the pupil and iris rings of the undeformed inner mesh."""
    rho = p.limbus_radius
    pts = np.array([[PUPIL_BASE_RADIUS, 0.0, 0.0], [rho, 0.0, 0.0]])
    pts[:, 2] = _front_surface(p, pts[:, 0])
    uv = _polar_uv(pts)
    return float(uv[0, 0] - 0.5), float(uv[1, 0] - 0.5)


_IRIS_BASE = {
    "amber": ((0.42, 0.22, 0.05), (0.70, 0.45, 0.12)),
    "blue": ((0.12, 0.22, 0.40), (0.40, 0.55, 0.70)),
    "brown": ((0.12, 0.05, 0.02), (0.30, 0.15, 0.05)),
    "grey": ((0.22, 0.24, 0.25), (0.50, 0.52, 0.52)),
}
_SCLERA_TINT = {
    "white": (0.72, 0.72, 0.72),
    "pink": (0.76, 0.58, 0.56),
    "yellow": (0.74, 0.68, 0.48),
}
_VEIN_RGB = (0.45, 0.05, 0.04)


@dataclass(frozen=True)
class EyeTexture:
    resolution: int
    sclera: np.ndarray  # (R, R, 3)
    iris: np.ndarray  # (R, R, 4) premultiplied-free RGBA
    veins: np.ndarray  # (R, R, 4)
    albedo: np.ndarray  # (R, R, 3) composite, linear RGB in [0, 1]
    pupil_uv_radius: float
    iris_uv_radius: float
    meta: dict = field(default_factory=dict, compare=False)

    def region_masks(self):
        """Boolean (iris, sclera) masks over texels, by UV radius."""
        r = _uv_radius_grid(self.resolution)
        return r <= self.iris_uv_radius, r > self.iris_uv_radius * 1.05

    def save_png(self, path) -> Path:
        from .tracer.image import linear_to_srgb8

        path = Path(path)
        Image.fromarray(linear_to_srgb8(self.albedo)).save(path)
        return path


def _uv_radius_grid(res: int) -> np.ndarray:
    c = (np.arange(res) + 0.5) / res - 0.5
    return np.hypot(c[None, :], c[:, None])


def over(top_rgba: np.ndarray, bottom_rgb: np.ndarray) -> np.ndarray:
    a = top_rgba[..., 3:4]
    return top_rgba[..., :3] * a + bottom_rgb * (1.0 - a)


def _sclera_layer(p: EyeballParams, res: int, rng) -> np.ndarray:
    tint = np.array(_SCLERA_TINT[p.sclera_tint])
    n = value_noise((res, res), 3, int(rng.integers(2**31)), base_cells=6, smooth_sigma=2.0)
    return tint[None, None, :] * (1.0 + 0.04 * n)[..., None]


def _iris_layer(p: EyeballParams, res: int, rng, pupil_r: float, iris_r: float) -> np.ndarray:
    c = (np.arange(res) + 0.5) / res - 0.5
    x, y = np.meshgrid(c, c)
    r = np.hypot(x, y)
    ang = np.arctan2(y, x)
    t = np.clip((r - pupil_r) / (iris_r - pupil_r), 0.0, 1.0)

    # radial fibres: angular noise from random harmonics, slowly twisting with radius
    fib = np.zeros_like(r)
    for _ in range(24):
        f = rng.integers(12, 140)
        fib += rng.uniform(0.3, 1.0) * np.sin(f * ang + rng.uniform(0, 2 * np.pi) + rng.uniform(-2, 2) * t)
    fib /= np.abs(fib).max()
    crypts = value_noise((res, res), 3, int(rng.integers(2**31)), base_cells=10, smooth_sigma=1.0)

    dark, light = (np.array(c_) for c_ in _IRIS_BASE[p.iris_color])
    mix = np.clip(0.5 + 0.35 * fib + 0.15 * crypts, 0, 1)
    collarette = np.exp(-(((t - 0.3) / 0.08) ** 2))
    limbal = np.clip((t - 0.8) / 0.2, 0, 1)
    rgb = dark + (light - dark) * mix[..., None]
    rgb = rgb * (1.0 + 0.35 * collarette[..., None]) * (1.0 - 0.6 * limbal[..., None])

    px = 1.0 / res
    alpha = np.clip((iris_r - r) / (1.5 * px) + 0.5, 0, 1)
    pupil = np.clip((pupil_r - r) / px + 0.5, 0, 1)
    rgb = rgb * (1 - pupil[..., None]) + 0.01 * pupil[..., None]
    return np.concatenate([np.clip(rgb, 0, 1), alpha[..., None]], axis=-1)


def _vein_layer(p: EyeballParams, res: int, rng, iris_r: float) -> np.ndarray:
    layer = np.zeros((res, res, 4))
    n_veins = int(round(40 * p.vein_density))
    if n_veins == 0:
        return layer
    ss = 4
    canvas = Image.new("L", (res * ss, res * ss), 0)
    draw = ImageDraw.Draw(canvas)
    limit = iris_r * 1.15
    for _ in range(n_veins):
        a = rng.uniform(0, 2 * np.pi)
        r0 = rng.uniform(0.20, 0.32)
        pos = np.array([0.5 + r0 * np.cos(a), 0.5 + r0 * np.sin(a)])
        heading = a + np.pi + rng.normal(0, 0.3)
        width = rng.uniform(1.0, 2.2) * ss
        pts = [pos.copy()]
        for _ in range(40):
            heading += rng.normal(0, 0.35)
            pos = pos + 0.005 * np.array([np.cos(heading), np.sin(heading)])
            if np.hypot(*(pos - 0.5)) < limit:
                break
            pts.append(pos.copy())
        if len(pts) > 1:
            draw.line([tuple(q * res * ss) for q in pts], fill=255, width=max(1, int(width)))
    a = np.asarray(canvas.resize((res, res), Image.BOX), dtype=np.float64) / 255.0
    a = ndimage.gaussian_filter(a, 0.6)
    a *= (_uv_radius_grid(res) > limit).astype(float)
    layer[..., :3] = _VEIN_RGB
    layer[..., 3] = np.clip(0.85 * a * (0.5 + 0.5 * p.vein_density), 0, 1)
    return layer


def composite_eye_texture(p: EyeballParams, resolution: int = 512, seed: int = 0) -> EyeTexture:
    """albedo = veins over (iris over sclera tint), deterministic per seed."""
    if resolution < 256:
        raise InvalidParams("texture resolution must be >= 256")
    p.validate(allow_zero_gap=True)
    pupil_r, iris_r = _texture_radii(p)
    # independent streams so changing one layer's options leaves the others alone
    s_rng, i_rng, v_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
    sclera = _sclera_layer(p, resolution, s_rng)
    iris = _iris_layer(p, resolution, i_rng, pupil_r, iris_r)
    veins = _vein_layer(p, resolution, v_rng, iris_r)
    albedo = np.clip(over(veins, over(iris, sclera)), 0.0, 1.0).astype(np.float32)
    return EyeTexture(resolution, sclera, iris, veins, albedo, pupil_r, iris_r)


# ---------------------------------------------------------------------------
# Assembled model


@dataclass(frozen=True)
class EyeballModel:
    params: EyeballParams
    outer: TriMesh
    inner: TriMesh
    blend_deltas: dict
    texture: Optional[EyeTexture]
    iris_landmark_vertex_ids: np.ndarray
    pupil_landmark_vertex_ids: np.ndarray

    @property
    def pupil_center_vertex_id(self) -> int:
        return int(self.inner.meta["pupil_center_id"])


def build_eyeball(
    p: EyeballParams = EyeballParams(),
    subdivisions: int = 6,
    *,
    bump_seed: Optional[int] = 0,
    texture_resolution: Optional[int] = 512,
    texture_seed: int = 0,
) -> EyeballModel:
    p.validate()
    outer = build_outer_mesh(p, subdivisions)
    if bump_seed is not None:
        outer = apply_sclera_displacement(outer, sclera_bump_field(bump_seed), outer.meta["sclera_weight"])
    inner = build_inner_mesh(p, subdivisions)
    tex = composite_eye_texture(p, texture_resolution, texture_seed) if texture_resolution else None
    return EyeballModel(
        p,
        outer,
        inner,
        build_blend_deltas(p, inner),
        tex,
        inner.meta["iris_landmark_ids"].copy(),
        inner.meta["pupil_landmark_ids"].copy(),
    )


def apply_blend_shapes(m: EyeballModel, pupil_dilation: float, iris_scale: float) -> TriMesh:
    w = blend_weights(pupil_dilation, iris_scale)
    v = m.inner.vertices.copy()
    for name, weight in w.items():
        if weight:
            v += weight * m.blend_deltas[name]
    return compute_vertex_normals(replace(m.inner, vertices=v))


def with_texture(m: EyeballModel, p: EyeballParams, resolution: int = 512, seed: int = 0) -> EyeballModel:
    """Same geometry, new colour layers (iris colour, tint, veins)."""
    return replace(m, params=p, texture=composite_eye_texture(p, resolution, seed))
