"""Surface materials and their packing into flat kernel tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..errors import InvalidParams
from .optics import CORNEA_IOR

MAT_DIELECTRIC = 0
MAT_DIFFUSE = 1
MAT_SKIN = 2

# column layout of the packed parameter table
P_R, P_G, P_B, P_IOR, P_WRAP, P_GLOSS, P_EXP = range(7)
N_PARAMS = 8


def _check_albedo(rgb) -> tuple:
    a = tuple(float(x) for x in np.broadcast_to(np.asarray(rgb, dtype=np.float64), (3,)))
    if not all(0.0 <= x <= 1.0 for x in a):
        raise InvalidParams(f"albedo must lie in [0, 1], got {a}")
    return a


@dataclass(frozen=True)
class Dielectric:
    ior: float = CORNEA_IOR

    def __post_init__(self):
        if not self.ior > 1.0:
            raise InvalidParams("ior must be > 1")


@dataclass(frozen=True, eq=False)
class TexturedDiffuse:
    """Lambertian surface; ``albedo`` is an RGB triple or an (H, W, 3) texture read at the mesh UVs."""

    albedo: Union[tuple, np.ndarray] = (0.5, 0.5, 0.5)

    def __post_init__(self):
        a = np.asarray(self.albedo, dtype=np.float64)
        if a.ndim == 3:
            if a.shape[2] != 3 or a.min() < 0 or a.max() > 1:
                raise InvalidParams("albedo texture must be (H, W, 3) in [0, 1]")
            a = np.ascontiguousarray(a)
            a.setflags(write=False)
            object.__setattr__(self, "albedo", a)
        else:
            object.__setattr__(self, "albedo", _check_albedo(a))

    @property
    def texture(self) -> Optional[np.ndarray]:
        return self.albedo if isinstance(self.albedo, np.ndarray) else None


@dataclass(frozen=True)
class Skin:
    """Wrapped diffuse lobe plus a folded Phong gloss lobe, mixed by ``gloss_strength``.

    The lobes are defined so that f * cos equals albedo times the sampling
    density, which keeps the surface exactly energy preserving.
    """

    diffuse: tuple = (0.55, 0.36, 0.29)
    wrap: float = 0.3
    gloss_strength: float = 0.06
    gloss_exponent: float = 40.0

    def __post_init__(self):
        object.__setattr__(self, "diffuse", _check_albedo(self.diffuse))
        if not 0.0 <= self.wrap <= 1.0:
            raise InvalidParams("wrap must lie in [0, 1]")
        if not 0.0 <= self.gloss_strength <= 1.0:
            raise InvalidParams("gloss_strength must lie in [0, 1]")
        if not self.gloss_exponent >= 0.0:
            raise InvalidParams("gloss_exponent must be >= 0")


@dataclass(frozen=True)
class LashFiber:
    """Strongly absorbing hair fibre, shaded as a dark diffuse surface."""

    albedo: tuple = (0.03, 0.02, 0.015)

    def __post_init__(self):
        object.__setattr__(self, "albedo", _check_albedo(self.albedo))


Material = Union[Dielectric, TexturedDiffuse, Skin, LashFiber]


@dataclass(frozen=True)
class MaterialTable:
    mtype: np.ndarray  # (M,) int64
    params: np.ndarray  # (M, N_PARAMS)
    tex_id: np.ndarray  # (M,) int64, -1 without texture
    tex_data: np.ndarray  # (sum of texels, 3)
    tex_offset: np.ndarray  # (T,) first texel of each texture
    tex_shape: np.ndarray  # (T, 2) height, width


def pack_materials(materials) -> MaterialTable:
    m = len(materials)
    mtype = np.zeros(m, np.int64)
    params = np.zeros((m, N_PARAMS))
    tex_id = np.full(m, -1, np.int64)
    textures = []
    for k, mat in enumerate(materials):
        if isinstance(mat, Dielectric):
            mtype[k] = MAT_DIELECTRIC
            params[k, P_IOR] = mat.ior
        elif isinstance(mat, TexturedDiffuse):
            mtype[k] = MAT_DIFFUSE
            if mat.texture is not None:
                tex_id[k] = len(textures)
                textures.append(mat.texture)
                params[k, :3] = 1.0
            else:
                params[k, :3] = mat.albedo
        elif isinstance(mat, LashFiber):
            mtype[k] = MAT_DIFFUSE
            params[k, :3] = mat.albedo
        elif isinstance(mat, Skin):
            mtype[k] = MAT_SKIN
            params[k, :3] = mat.diffuse
            params[k, P_WRAP] = mat.wrap
            params[k, P_GLOSS] = mat.gloss_strength
            params[k, P_EXP] = mat.gloss_exponent
        else:
            raise TypeError(f"unsupported material {type(mat).__name__}")
    if textures:
        shapes = np.array([t.shape[:2] for t in textures], np.int64)
        sizes = shapes[:, 0] * shapes[:, 1]
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        data = np.ascontiguousarray(np.concatenate([t.reshape(-1, 3) for t in textures]))
    else:
        shapes = np.zeros((0, 2), np.int64)
        offsets = np.zeros(0, np.int64)
        data = np.zeros((0, 3))
    return MaterialTable(mtype, params, tex_id, data, offsets, shapes)
