"""Contact-sheet previews and pose-distribution statistics."""

from __future__ import annotations

import io
from collections import Counter
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image as PILImage

from ..errors import InvalidParams
from .config import DatasetSpec
from .engine import Job, _run_pool, find_pose, image_seed, pose_is_valid, resolve_jobs

PREVIEW_SPP = 16
GUTTER = 2
GUTTER_VALUE = 255
INVALID_TILE_VALUE = 40


def preview_values(lo: float, hi: float, n: int):
    if n == 1:
        return [round(0.5 * (lo + hi), 9)]
    return [round(lo + (hi - lo) * k / (n - 1), 9) for k in range(n)]


def sheet_size(tile_w: int, tile_h: int, rows: int, cols: int, gutter: int = GUTTER):
    """(width, height) of a contact sheet with gutters around every tile."""
    return cols * tile_w + (cols + 1) * gutter, rows * tile_h + (rows + 1) * gutter


def preview(
    spec: DatasetSpec,
    grid_dims=(7, 7),
    out_path=None,
    spp: int = PREVIEW_SPP,
    jobs: Optional[int] = None,
    identity: int = 0,
    camera=None,
) -> np.ndarray:
    """Gaze sweep at one camera: rows run from looking up to looking down,
    columns from looking left (negative beta) to right.  Poses that break
    the rotation constraints become dark placeholder tiles."""
    rows, cols = int(grid_dims[0]), int(grid_dims[1])
    if rows < 1 or cols < 1:
        raise InvalidParams("grid dimensions must be >= 1")
    if camera is None:
        camera = min(spec.camera_grid(), key=lambda c: (abs(c[0]) + abs(c[1]), c))
    lo, hi = spec.gaze_range
    alphas = preview_values(lo, hi, rows)[::-1]
    betas = preview_values(lo, hi, cols)
    w, h = spec.width, spec.height
    sheet_w, sheet_h = sheet_size(w, h, rows, cols)
    sheet = np.full((sheet_h, sheet_w, 3), GUTTER_VALUE, np.uint8)
    job_list, slots = [], []
    for r, a in enumerate(alphas):
        for c, b in enumerate(betas):
            pose = find_pose(spec, camera[0], camera[1], a, b)
            y0 = GUTTER + r * (h + GUTTER)
            x0 = GUTTER + c * (w + GUTTER)
            if not pose_is_valid(spec, pose):
                sheet[y0 : y0 + h, x0 : x0 + w] = INVALID_TILE_VALUE
                continue
            seed = image_seed(spec.master_seed, identity, pose.index, 0)
            job_list.append(Job(spec, identity, pose, 0, seed, spp, False))
            slots.append((y0, x0))
    for (y0, x0), res in zip(slots, _run_pool(job_list, resolve_jobs(jobs))):
        if res.status == "ok":
            sheet[y0 : y0 + h, x0 : x0 + w] = np.asarray(PILImage.open(io.BytesIO(res.png)).convert("RGB"))
        else:
            sheet[y0 : y0 + h, x0 : x0 + w] = INVALID_TILE_VALUE
    if out_path is not None:
        PILImage.fromarray(sheet).save(Path(out_path))
    return sheet


# ---------------------------------------------------------------------------
# Statistics


def _table(counter: Counter, rows, cols, row_name, col_name) -> str:
    head = f"{row_name}\\{col_name}".ljust(10) + "".join(f"{c:>8g}" for c in cols)
    lines = [head]
    for r in rows:
        lines.append(f"{r:<10g}" + "".join(f"{counter.get((r, c), 0):>8d}" for c in cols))
    return "\n".join(lines) + "\n"


def _heatmap(counter: Counter, rows, cols, path: Path, cell: int = 16) -> None:
    grid = np.array([[counter.get((r, c), 0) for c in cols] for r in rows], dtype=np.float64)
    if grid.size == 0:
        grid = np.zeros((1, 1))
    top = grid.max() if grid.max() > 0 else 1.0
    img = (255 * grid / top).astype(np.uint8)
    img = np.kron(img, np.ones((cell, cell), np.uint8))
    PILImage.fromarray(img).save(path)


def stats(manifest: dict, out_dir=None) -> dict:
    """Histograms of gaze offsets (alpha, beta) and camera positions (theta, phi)."""
    entries = manifest["entries"]
    gaze = Counter((e["alpha"], e["beta"]) for e in entries)
    head = Counter((e["theta"], e["phi"]) for e in entries)
    alphas = sorted({k[0] for k in gaze}, reverse=True)
    betas = sorted({k[1] for k in gaze})
    thetas = sorted({k[0] for k in head})
    phis = sorted({k[1] for k in head}, reverse=True)
    head_t = Counter({(p, t): n for (t, p), n in head.items()})
    report = {
        "total": len(entries),
        "gaze_hist": {f"{a:g},{b:g}": n for (a, b), n in sorted(gaze.items())},
        "head_hist": {f"{t:g},{p:g}": n for (t, p), n in sorted(head.items())},
        "gaze_text": _table(gaze, alphas, betas, "alpha", "beta"),
        "head_text": _table(head_t, phis, thetas, "phi", "theta"),
    }
    if out_dir is not None:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "gaze_hist.txt").write_text(report["gaze_text"])
        (d / "head_hist.txt").write_text(report["head_text"])
        _heatmap(gaze, alphas, betas, d / "gaze_hist.png")
        _heatmap(head_t, phis, thetas, d / "head_hist.png")
    return report
