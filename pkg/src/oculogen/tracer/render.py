"""Render driver: splits the image into row bands and runs them on threads."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from .image import Image
from .kernel import render_rows, trace_many
from .scene import OrthoCamera, RenderSettings, Scene, frontal_camera

BAND_ROWS = 4


def render(scene: Scene, settings: RenderSettings, camera: Optional[OrthoCamera] = None, workers: int = 1) -> Image:
    """Average of ``samples_per_pixel`` orthographic path samples per pixel.

    Each pixel draws from its own counter-based random stream keyed by the
    seed and pixel index, so the result does not depend on ``workers``.
    """
    cam = camera if camera is not None else frontal_camera()
    w, h = settings.image_width, settings.image_height
    out = np.zeros((h, w, 3))
    err = np.zeros((h, w, 3))
    packed = cam.packed()
    bands = [(r, min(r + BAND_ROWS, h)) for r in range(0, h, BAND_ROWS)]
    bad = np.zeros(len(bands), np.int64)

    def run(k):
        r0, r1 = bands[k]
        counter = np.zeros(1, np.int64)
        render_rows(
            scene.arrays, packed, w, h, settings.samples_per_pixel, settings.max_depth,
            settings.seed, r0, r1, out[r0:r1], err[r0:r1], counter,
        )
        bad[k] = counter[0]

    t0 = time.perf_counter()
    if workers <= 1:
        for k in range(len(bands)):
            run(k)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(len(bands))))
    meta = {
        "spp": settings.samples_per_pixel,
        "seed": settings.seed,
        "max_depth": settings.max_depth,
        "seconds": time.perf_counter() - t0,
        "stderr": err,  # per-pixel standard error of the mean (iid estimate)
    }
    return Image(out, nonfinite_samples=int(bad.sum()), meta=meta)


def trace_path(scene: Scene, origins, directions, seed: int = 0, max_depth: int = 8) -> np.ndarray:
    """One path-traced radiance sample per ray, shape (N, 3)."""
    o = np.ascontiguousarray(np.atleast_2d(origins), dtype=np.float64)
    d = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    d = np.ascontiguousarray(d / np.linalg.norm(d, axis=1, keepdims=True))
    out = np.empty((len(o), 3))
    trace_many(scene.arrays, o, d, int(max_depth), int(seed), out)
    return out
