"""Scene assembly: flattened triangles, materials, hierarchy and lighting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ..errors import BlackEnvironment, InvalidParams
from ..geomcore import TriMesh
from ..lighting.envmap import EnvironmentMap, EnvSampler, build_sampler
from .bvh import BVH, TriangleSoup, build_bvh, empty_bvh
from .materials import MaterialTable, pack_materials


class SceneArrays(NamedTuple):
    """Everything the kernels read, as a numba-friendly tuple of arrays."""

    v0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    ng: np.ndarray  # (F, 3) unit geometric normals
    ns: np.ndarray  # (F, 3, 3) per-corner shading normals
    uv: np.ndarray  # (F, 3, 2)
    mat: np.ndarray  # (F,) material index
    node_min: np.ndarray
    node_max: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    mtype: np.ndarray
    mparams: np.ndarray
    tex_id: np.ndarray
    tex_data: np.ndarray
    tex_offset: np.ndarray
    tex_shape: np.ndarray
    env_rad: np.ndarray
    env_rot: float
    env_intensity: float
    row_cdf: np.ndarray
    col_cdf: np.ndarray
    pdf_grid: np.ndarray
    has_light: bool


@dataclass(frozen=True)
class RenderSettings:
    image_width: int = 120
    image_height: int = 80
    samples_per_pixel: int = 150
    max_depth: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.image_width < 1 or self.image_height < 1:
            raise InvalidParams("image dimensions must be >= 1")
        if self.samples_per_pixel < 1:
            raise InvalidParams("samples_per_pixel must be >= 1")
        if self.max_depth < 1:
            raise InvalidParams("max_depth must be >= 1")


@dataclass(frozen=True)
class OrthoCamera:
    """Parallel projection; pixel (px, py) with origin top-left maps to
    position + (px - W/2) * s * right + (H/2 - py) * s * up, looking along forward."""

    position: np.ndarray
    rotation: np.ndarray  # (3, 3) columns: right, up, backward (camera looks along -column 2)
    mm_per_px: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=np.float64).reshape(3, 3))
        if not self.mm_per_px > 0:
            raise InvalidParams("mm_per_px must be > 0")

    @property
    def right(self) -> np.ndarray:
        return self.rotation[:, 0]

    @property
    def up(self) -> np.ndarray:
        return self.rotation[:, 1]

    @property
    def forward(self) -> np.ndarray:
        return -self.rotation[:, 2]

    def packed(self) -> np.ndarray:
        return np.concatenate([self.position, self.right, self.up, self.forward, [self.mm_per_px]])

    def project(self, points, width: int, height: int) -> np.ndarray:
        """Image coordinates (px, py) of 3D points, origin top-left, sub-pixel."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64)) - self.position
        x = p @ self.right / self.mm_per_px + width / 2.0
        y = height / 2.0 - p @ self.up / self.mm_per_px
        return np.stack([x, y], axis=-1)

    def pixel_rays(self, px, py, width: int, height: int):
        """Ray origins and directions through image positions (px, py)."""
        px = np.atleast_1d(np.asarray(px, dtype=np.float64))
        py = np.atleast_1d(np.asarray(py, dtype=np.float64))
        xc = (px - width / 2.0) * self.mm_per_px
        yc = (height / 2.0 - py) * self.mm_per_px
        o = self.position + xc[:, None] * self.right + yc[:, None] * self.up
        return o, np.broadcast_to(self.forward, o.shape).copy()


def frontal_camera(distance: float = 100.0, mm_per_px: float = 0.5) -> OrthoCamera:
    """Camera on +Z looking at the origin with +Y up."""
    return OrthoCamera(np.array([0.0, 0.0, distance]), np.eye(3), mm_per_px)


@dataclass(frozen=True)
class Scene:
    soup: TriangleSoup
    bvh: BVH
    arrays: SceneArrays
    environment: EnvironmentMap
    sampler: Optional[EnvSampler]
    materials: tuple

    @property
    def n_triangles(self) -> int:
        return len(self.soup.v0)

    @classmethod
    def build(cls, objects, environment: EnvironmentMap) -> "Scene":
        """``objects``: iterable of (TriMesh, Material).  An empty list is allowed."""
        objects = list(objects)
        materials = tuple(mat for _, mat in objects)
        tris, ns, uv, mat_ids = [], [], [], []
        for k, (mesh, _) in enumerate(objects):
            if not isinstance(mesh, TriMesh):
                raise TypeError("scene objects must be (TriMesh, material) pairs")
            t = mesh.triangles()
            fn = mesh.face_normals()
            tris.append(t)
            if mesh.normals is not None:
                ns.append(mesh.normals[mesh.faces])
            else:
                ns.append(np.repeat(fn[:, None, :], 3, axis=1))
            uv.append(mesh.uvs[mesh.faces] if mesh.uvs is not None else np.zeros((len(t), 3, 2)))
            mat_ids.append(np.full(len(t), k, np.int64))
        if tris:
            tris = np.concatenate(tris)
            ns = np.concatenate(ns)
            uv = np.concatenate(uv)
            mat_ids = np.concatenate(mat_ids)
        else:
            tris = np.zeros((0, 3, 3))
            ns = np.zeros((0, 3, 3))
            uv = np.zeros((0, 3, 2))
            mat_ids = np.zeros(0, np.int64)
        soup = TriangleSoup.from_triangles(tris)
        bvh = build_bvh(tris) if len(tris) else empty_bvh()
        cr = np.cross(soup.e1, soup.e2)
        ln = np.linalg.norm(cr, axis=1, keepdims=True)
        ng = np.divide(cr, ln, out=np.zeros_like(cr), where=ln > 0)
        table = pack_materials(materials) if materials else pack_materials([])
        try:
            sampler = build_sampler(environment)
        except BlackEnvironment:
            sampler = None
        arrays = _pack(soup, ng, ns, uv, mat_ids, bvh, table, environment, sampler)
        return cls(soup, bvh, arrays, environment, sampler, materials)


def _pack(soup, ng, ns, uv, mat_ids, bvh, table: MaterialTable, env, sampler) -> SceneArrays:
    c = np.ascontiguousarray
    if sampler is None:
        h, w = env.height, env.width
        row_cdf, col_cdf, pdf_grid, has_light = np.zeros(h + 1), np.zeros((h, w + 1)), np.zeros((h, w)), False
    else:
        row_cdf, col_cdf, pdf_grid, has_light = sampler.row_cdf, sampler.col_cdf, sampler.pdf_grid, True
    return SceneArrays(
        c(soup.v0), c(soup.e1), c(soup.e2), c(ng), c(ns, dtype=np.float64), c(uv, dtype=np.float64),
        c(mat_ids, dtype=np.int64),
        c(bvh.node_min), c(bvh.node_max), c(bvh.left), c(bvh.right), c(bvh.start), c(bvh.count), c(bvh.order),
        c(table.mtype), c(table.params), c(table.tex_id), c(table.tex_data), c(table.tex_offset), c(table.tex_shape),
        c(env.radiance), float(env.rotation_rad), float(env.intensity),
        c(row_cdf), c(col_cdf), c(pdf_grid), bool(has_light),
    )
