"""Equirectangular environment maps: lookup, rotation, scaling, importance sampling.

Direction convention (head frame, +Y up): azimuth = atan2(x, z) measured from
+Z towards +X, inclination = acos(y) measured from the zenith.  A map pixel
(row i, column j) covers u = azimuth / 2pi in [j/W, (j+1)/W) and
v = inclination / pi in [i/H, (i+1)/H); row 0 is the zenith.  Rotation is about
the vertical axis and only shifts the azimuth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba as nb
import numpy as np

from ..errors import BlackEnvironment, NonPositiveScale
from .rgbe import read_hdr_array, write_hdr

LUMA = np.array([0.2126, 0.7152, 0.0722])
PDF_FLOOR = 1e-3  # fraction of the mean luminance added to every pixel weight


@dataclass(frozen=True)
class EnvironmentMap:
    radiance: np.ndarray  # (H, W, 3) linear RGB
    rotation_z: float = 0.0  # degrees about the vertical axis
    intensity: float = 1.0
    id: str = "env"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        r = np.ascontiguousarray(self.radiance, dtype=np.float64)
        if r.ndim != 3 or r.shape[2] != 3:
            raise ValueError("radiance must be (H, W, 3)")
        if r.shape[1] != 2 * r.shape[0]:
            raise ValueError("equirectangular map needs width == 2 * height")
        if not np.all(np.isfinite(r)) or (r < 0).any():
            raise ValueError("radiance must be finite and >= 0")
        r.setflags(write=False)
        object.__setattr__(self, "radiance", r)
        if not (math.isfinite(self.intensity) and self.intensity > 0):
            raise NonPositiveScale("intensity must be positive")

    @property
    def height(self) -> int:
        return self.radiance.shape[0]

    @property
    def width(self) -> int:
        return self.radiance.shape[1]

    @property
    def rotation_rad(self) -> float:
        return math.radians(self.rotation_z)

    def luminance(self) -> np.ndarray:
        return self.radiance @ LUMA

    def is_black(self) -> bool:
        return not np.any(self.radiance > 0)


def rotate_env(env: EnvironmentMap, angle_deg: float) -> EnvironmentMap:
    return replace(env, rotation_z=(env.rotation_z + float(angle_deg)) % 360.0)


def scale_intensity(env: EnvironmentMap, k: float) -> EnvironmentMap:
    k = float(k)
    if not (math.isfinite(k) and k > 0):
        raise NonPositiveScale(f"intensity scale must be > 0, got {k}")
    return replace(env, intensity=env.intensity * k)


def pixel_solid_angles(height: int, width: int) -> np.ndarray:
    """Exact solid angle of each map row's pixels, shape (H,)."""
    edges = np.cos(np.pi * np.arange(height + 1) / height)
    return (2 * np.pi / width) * (edges[:-1] - edges[1:])


def total_power(env: EnvironmentMap) -> np.ndarray:
    """Integral of radiance over the sphere, per channel (pixel quadrature)."""
    om = pixel_solid_angles(env.height, env.width)
    return env.intensity * np.einsum("ijc,i->c", env.radiance, om)


# ---------------------------------------------------------------------------
# Jitted kernels shared with the tracer


@nb.njit(cache=True, nogil=True)
def dir_to_uv(dx, dy, dz, rot):
    az = math.atan2(dx, dz) - rot
    u = az / (2.0 * math.pi)
    u -= math.floor(u)
    v = math.acos(min(1.0, max(-1.0, dy))) / math.pi
    return u, v


@nb.njit(cache=True, nogil=True)
def env_eval(rad, rot, intensity, dx, dy, dz):
    """Bilinear radiance lookup; u wraps, v clamps."""
    h = rad.shape[0]
    w = rad.shape[1]
    u, v = dir_to_uv(dx, dy, dz, rot)
    x = u * w - 0.5
    y = min(max(v * h - 0.5, 0.0), h - 1.0)
    x0f = math.floor(x)
    fx = x - x0f
    x0 = int(x0f) % w
    x1 = (x0 + 1) % w
    y0 = min(int(math.floor(y)), h - 1)
    y1 = min(y0 + 1, h - 1)
    fy = y - y0
    w00 = (1.0 - fx) * (1.0 - fy) * intensity
    w01 = fx * (1.0 - fy) * intensity
    w10 = (1.0 - fx) * fy * intensity
    w11 = fx * fy * intensity
    r = w00 * rad[y0, x0, 0] + w01 * rad[y0, x1, 0] + w10 * rad[y1, x0, 0] + w11 * rad[y1, x1, 0]
    g = w00 * rad[y0, x0, 1] + w01 * rad[y0, x1, 1] + w10 * rad[y1, x0, 1] + w11 * rad[y1, x1, 1]
    b = w00 * rad[y0, x0, 2] + w01 * rad[y0, x1, 2] + w10 * rad[y1, x0, 2] + w11 * rad[y1, x1, 2]
    return r, g, b


@nb.njit(cache=True, nogil=True)
def _search(cdf, lo, hi, x):
    """Largest index k in [lo, hi) with cdf[k] <= x."""
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cdf[mid] <= x:
            lo = mid
        else:
            hi = mid
    return lo


@nb.njit(cache=True, nogil=True)
def env_sample(row_cdf, col_cdf, pdf_grid, rot, u1, u2):
    """Draw a direction by pixel importance; uniform in solid angle inside the pixel.

    Returns (dx, dy, dz, pdf) with pdf in 1/sr.
    """
    h = pdf_grid.shape[0]
    w = pdf_grid.shape[1]
    i = _search(row_cdf, 0, h, u1 * row_cdf[h])
    r0 = row_cdf[i]
    r1 = row_cdf[i + 1]
    fu = (u1 * row_cdf[h] - r0) / (r1 - r0) if r1 > r0 else 0.5
    fu = min(max(fu, 0.0), 1.0 - 1e-12)
    j = _search(col_cdf[i], 0, w, u2 * col_cdf[i, w])
    c0 = col_cdf[i, j]
    c1 = col_cdf[i, j + 1]
    fv = (u2 * col_cdf[i, w] - c0) / (c1 - c0) if c1 > c0 else 0.5
    fv = min(max(fv, 0.0), 1.0 - 1e-12)
    # reuse the leftover fractions for the position inside the pixel
    ct0 = math.cos(math.pi * i / h)
    ct1 = math.cos(math.pi * (i + 1) / h)
    cos_t = ct0 + (ct1 - ct0) * fu
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    az = 2.0 * math.pi * (j + fv) / w + rot
    return sin_t * math.sin(az), cos_t, sin_t * math.cos(az), pdf_grid[i, j]


@nb.njit(cache=True, nogil=True)
def env_pdf(pdf_grid, rot, dx, dy, dz):
    h = pdf_grid.shape[0]
    w = pdf_grid.shape[1]
    u, v = dir_to_uv(dx, dy, dz, rot)
    i = min(int(v * h), h - 1)
    j = min(int(u * w), w - 1)
    return pdf_grid[i, j]


# ---------------------------------------------------------------------------
# Sampler


@dataclass(frozen=True)
class EnvSampler:
    row_cdf: np.ndarray  # (H + 1,) normalised, last entry 1
    col_cdf: np.ndarray  # (H, W + 1) normalised per row
    pdf_grid: np.ndarray  # (H, W) solid-angle density of each pixel
    rotation: float  # radians

    def sample(self, u1, u2):
        """Vectorised draw: returns (dirs (N, 3), pdf (N,))."""
        u1 = np.atleast_1d(np.asarray(u1, dtype=np.float64))
        u2 = np.atleast_1d(np.asarray(u2, dtype=np.float64))
        return _sample_many(self.row_cdf, self.col_cdf, self.pdf_grid, self.rotation, u1, u2)

    def pdf(self, dirs) -> np.ndarray:
        d = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
        return np.array([env_pdf(self.pdf_grid, self.rotation, *x) for x in d])


@nb.njit(cache=True)
def _sample_many(row_cdf, col_cdf, pdf_grid, rot, u1, u2):
    n = len(u1)
    dirs = np.empty((n, 3))
    pdf = np.empty(n)
    for k in range(n):
        x, y, z, p = env_sample(row_cdf, col_cdf, pdf_grid, rot, u1[k], u2[k])
        dirs[k, 0] = x
        dirs[k, 1] = y
        dirs[k, 2] = z
        pdf[k] = p
    return dirs, pdf


def build_sampler(env: EnvironmentMap) -> EnvSampler:
    lum = env.luminance()
    if not np.any(lum > 0):
        raise BlackEnvironment("environment has zero total luminance")
    h, w = lum.shape
    om = pixel_solid_angles(h, w)
    weight = lum + PDF_FLOOR * lum.mean()
    mass = weight * om[:, None]
    total = mass.sum()
    col = np.zeros((h, w + 1))
    col[:, 1:] = np.cumsum(weight, axis=1)
    col /= col[:, -1:]
    row = np.zeros(h + 1)
    row[1:] = np.cumsum(mass.sum(axis=1))
    row /= row[-1]
    col[:, -1] = 1.0
    row[-1] = 1.0
    pdf = weight / total
    return EnvSampler(row, col, pdf, env.rotation_rad)


def sample_direction(env: EnvironmentMap, sampler: EnvSampler, u1: float, u2: float):
    """One importance-sampled direction and its solid-angle pdf."""
    x, y, z, p = env_sample(sampler.row_cdf, sampler.col_cdf, sampler.pdf_grid, env.rotation_rad, u1, u2)
    return np.array([x, y, z]), float(p)


def eval_radiance(env: EnvironmentMap, direction) -> np.ndarray:
    d = np.asarray(direction, dtype=np.float64)
    if d.ndim == 1:
        return np.array(env_eval(env.radiance, env.rotation_rad, env.intensity, d[0], d[1], d[2]))
    return _eval_many(env.radiance, env.rotation_rad, env.intensity, np.ascontiguousarray(d))


@nb.njit(cache=True)
def _eval_many(rad, rot, intensity, dirs):
    out = np.empty((len(dirs), 3))
    for k in range(len(dirs)):
        out[k, 0], out[k, 1], out[k, 2] = env_eval(rad, rot, intensity, dirs[k, 0], dirs[k, 1], dirs[k, 2])
    return out


def load_hdr(path, env_id=None) -> EnvironmentMap:
    from pathlib import Path

    rad = read_hdr_array(path)
    h, w, _ = rad.shape
    if w != 2 * h:
        # resample to 2:1 by nearest-column lookup so non-square panoramas still load
        cols = np.minimum((np.arange(2 * h) + 0.5) * w / (2 * h), w - 1).astype(int)
        rad = rad[:, cols]
    return EnvironmentMap(rad, id=env_id or Path(path).stem)


def save_hdr(env: EnvironmentMap, path, rle: bool = True):
    """Write the raw grid (rotation and intensity are metadata, not baked in)."""
    return write_hdr(path, env.radiance, rle=rle)
