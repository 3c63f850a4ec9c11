"""Synthetic stand-ins for the four lighting conditions: bright/cloudy outdoors, bright/dark indoors."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..eyeball import value_noise
from .envmap import EnvironmentMap

KINDS = ("bright_outdoor", "cloudy_outdoor", "bright_indoor", "dark_indoor")
ENV_HEIGHT = 128
SUPERSAMPLE = 4


def _directions(h: int, w: int, ss: int = 1):
    """Unit directions at (supersampled) pixel positions, shape (h*ss, w*ss, 3)."""
    v = (np.arange(h * ss) + 0.5) / (h * ss)
    u = (np.arange(w * ss) + 0.5) / (w * ss)
    incl = np.pi * v[:, None]
    az = 2 * np.pi * u[None, :]
    return np.stack(
        [np.sin(incl) * np.sin(az), np.cos(incl) * np.ones_like(az), np.sin(incl) * np.cos(az)], axis=-1
    )


def _box_down(a: np.ndarray, ss: int) -> np.ndarray:
    h, w = a.shape[0] // ss, a.shape[1] // ss
    return a.reshape(h, ss, w, ss, *a.shape[2:]).mean(axis=(1, 3))


def _dir(az_deg: float, elev_deg: float) -> np.ndarray:
    az, el = np.radians(az_deg), np.radians(elev_deg)
    return np.array([np.cos(el) * np.sin(az), np.sin(el), np.cos(el) * np.cos(az)])


def _disc_coverage(dirs_ss, centre, radius_deg, ss):
    cosang = dirs_ss @ centre
    return _box_down((cosang >= np.cos(np.radians(radius_deg))).astype(float), ss)


def _rect_coverage(dirs_ss, centre, half_w_deg, half_h_deg, ss):
    """Angular rectangle around ``centre`` in its local azimuth/elevation frame."""
    up = np.array([0.0, 1.0, 0.0])
    right = np.cross(up, centre)
    n = np.linalg.norm(right)
    right = np.array([1.0, 0.0, 0.0]) if n < 1e-9 else right / n
    vert = np.cross(centre, right)
    f = dirs_ss @ centre
    x = np.degrees(np.arctan2(dirs_ss @ right, f))
    y = np.degrees(np.arctan2(dirs_ss @ vert, f))
    inside = (f > 0) & (np.abs(x) <= half_w_deg) & (np.abs(y) <= half_h_deg)
    return _box_down(inside.astype(float), ss)


def _sky(dirs, zenith, horizon, ground):
    y = dirs[..., 1:2]
    t = np.clip(y, 0, 1) ** 0.5
    sky = horizon + (zenith - horizon) * t
    below = np.clip(-y * 8.0, 0.0, 1.0)
    return sky * (1 - below) + ground * below


def generate_procedural_env(kind: str, seed: int = 0, height: int = ENV_HEIGHT) -> EnvironmentMap:
    if kind not in KINDS:
        raise ValueError(f"unknown environment kind {kind!r}; expected one of {KINDS}")
    h, w = height, 2 * height
    rng = np.random.default_rng([seed, KINDS.index(kind)])
    dirs = _directions(h, w)
    ss = SUPERSAMPLE
    dirs_ss = _directions(h, w, ss)
    noise = value_noise((h, w), 4, int(rng.integers(2**31)), base_cells=4, smooth_sigma=1.0)

    if kind == "bright_outdoor":
        rad = _sky(
            dirs,
            np.array([0.22, 0.34, 0.60]),
            np.array([0.50, 0.55, 0.62]),
            np.array([0.16, 0.14, 0.11]),
        )
        rad = rad * (1.0 + 0.05 * noise[..., None])
        sun = _dir(rng.uniform(0, 360), rng.uniform(25, 60))
        cov = _disc_coverage(dirs_ss, sun, 2.5, ss)
        glow = np.exp(-np.degrees(np.arccos(np.clip(dirs @ sun, -1, 1))) / 12.0)
        rad = rad + 0.6 * glow[..., None] * np.array([1.0, 0.95, 0.85])
        rad = rad + cov[..., None] * np.array([120.0, 112.0, 100.0])
    elif kind == "cloudy_outdoor":
        grey = _sky(dirs, np.array([0.62, 0.64, 0.68]), np.array([0.52, 0.53, 0.55]), np.array([0.12, 0.12, 0.11]))
        clouds = ndimage.gaussian_filter(noise, 2.0, mode="wrap")
        clouds /= np.abs(clouds).max() + 1e-12
        up = np.clip(dirs[..., 1:2] * 4, 0, 1)
        rad = grey * (1.0 + 0.25 * clouds[..., None] * up)
    else:
        ambient_level = 0.1 if kind == "bright_indoor" else 0.008
        wall = np.array([0.95, 0.90, 0.82])
        floor = np.array([0.55, 0.45, 0.35])
        y = dirs[..., 1:2]
        rad = ambient_level * np.where(y < -0.2, floor, wall) * (1.0 + 0.1 * noise[..., None])
        if kind == "bright_indoor":
            n_lights = int(rng.integers(2, 5))
            for _ in range(n_lights):
                c = _dir(rng.uniform(0, 360), rng.uniform(20, 70))
                cov = _rect_coverage(dirs_ss, c, rng.uniform(8, 14), rng.uniform(4, 8), ss)
                rad = rad + cov[..., None] * rng.uniform(6, 12) * np.array([1.0, 0.96, 0.88])
            # a daylight window low on one wall
            c = _dir(rng.uniform(0, 360), rng.uniform(0, 15))
            cov = _rect_coverage(dirs_ss, c, 18, 12, ss)
            rad = rad + cov[..., None] * np.array([0.9, 1.0, 1.15])
        else:
            c = _dir(rng.uniform(0, 360), rng.uniform(-5, 30))
            cov = _rect_coverage(dirs_ss, c, 5, 5, ss)
            rad = rad + cov[..., None] * np.array([4.0, 3.0, 1.8])
    return EnvironmentMap(np.maximum(rad, 0.0), id=kind, meta={"seed": seed})
