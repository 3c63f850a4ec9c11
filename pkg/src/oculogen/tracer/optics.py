"""Smooth dielectric interface: Fresnel reflectance and Snell refraction."""

from __future__ import annotations

import math
from typing import Optional

import numba as nb
import numpy as np

CORNEA_IOR = 1.376


@nb.njit(cache=True, nogil=True)
def fresnel_dielectric(cos_theta_i, n):
    """Unpolarised reflectance for light arriving from the side with index 1.

    ``n`` is the index ratio n_t / n_i; pass 1/n for a ray leaving the denser
    medium.  Returns 1 under total internal reflection.
    """
    if n == 1.0:
        return 0.0
    c = min(max(cos_theta_i, 0.0), 1.0)
    sin2_t = (1.0 - c * c) / (n * n)
    if sin2_t >= 1.0:
        return 1.0
    cos_t = math.sqrt(1.0 - sin2_t)
    rs = (c - n * cos_t) / (c + n * cos_t)
    rp = (n * c - cos_t) / (n * c + cos_t)
    return 0.5 * (rs * rs + rp * rp)


@nb.njit(cache=True, nogil=True)
def fresnel_transmittance(cos_theta_i, n):
    """1 - R computed from the transmission amplitudes (independent of R)."""
    if n == 1.0:
        return 1.0
    c = min(max(cos_theta_i, 0.0), 1.0)
    sin2_t = (1.0 - c * c) / (n * n)
    if sin2_t >= 1.0:
        return 0.0
    cos_t = math.sqrt(1.0 - sin2_t)
    # |t|^2 times the beam-geometry factor n cos_t / cos_i, with cos_i cancelled
    a = c + n * cos_t
    b = n * c + cos_t
    return 2.0 * n * cos_t * c * (1.0 / (a * a) + 1.0 / (b * b))


@nb.njit(cache=True, nogil=True)
def refract_xyz(dx, dy, dz, nx, ny, nz, eta):
    """Refract unit ``d`` through a surface with unit normal ``n`` facing against ``d``.

    ``eta`` = n_i / n_t.  Returns (ok, tx, ty, tz); ok is False on total
    internal reflection.
    """
    cos_i = -(dx * nx + dy * ny + dz * nz)
    sin2_t = eta * eta * (1.0 - cos_i * cos_i)
    if sin2_t > 1.0:
        return False, 0.0, 0.0, 0.0
    cos_t = math.sqrt(1.0 - sin2_t)
    k = eta * cos_i - cos_t
    tx = eta * dx + k * nx
    ty = eta * dy + k * ny
    tz = eta * dz + k * nz
    inv = 1.0 / math.sqrt(tx * tx + ty * ty + tz * tz)
    return True, tx * inv, ty * inv, tz * inv


def refract(direction, normal, eta_ratio: float) -> Optional[np.ndarray]:
    """Snell refraction; ``eta_ratio`` = n_incident / n_transmitted.

    The normal may face either way; it is flipped to oppose ``direction``.
    """
    d = np.asarray(direction, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    if np.dot(d, n) > 0:
        n = -n
    ok, x, y, z = refract_xyz(d[0], d[1], d[2], n[0], n[1], n[2], float(eta_ratio))
    return np.array([x, y, z]) if ok else None


def reflect(direction, normal) -> np.ndarray:
    d = np.asarray(direction, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    return d - 2.0 * np.dot(d, n) * n


def critical_angle_deg(n: float) -> float:
    return math.degrees(math.asin(1.0 / n))
