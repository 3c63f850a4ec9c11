"""Batch generation: enumerate jobs, pose/render/annotate in workers, write outputs."""

from __future__ import annotations

import io
import json
import multiprocessing as mp
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np
from PIL import Image as PILImage

from .. import __version__
from ..annotate import collect_landmarks_3d, make_label_record, project, record_to_json
from ..errors import EmptyEnumeration, OculogenError
from ..lighting import EnvironmentMap, generate_procedural_env, load_hdr
from ..staging import (
    EyeConfig,
    GazeSpec,
    SceneConfig,
    build_render_scene,
    eyeball_angles,
    gaze_direction,
    lit_environment,
    place_camera,
    point_in_polygon,
    pose_eye,
    sample_scene_randomness,
    validate_pose,
)
from ..tracer.image import linear_to_srgb8
from ..tracer.render import render
from ..tracer.scene import RenderSettings
from .config import DatasetSpec
from .identities import derive_seed, image_seed, synthesize_identity

JOBS_ENV = "OCULOGEN_JOBS"
_NAME_RE = re.compile(r"^\d{6}\.(png|json)$")


@dataclass(frozen=True)
class Pose:
    index: int  # position in the full (theta, phi, alpha, beta) grid
    theta: float
    phi: float
    alpha: float
    beta: float


@dataclass(frozen=True)
class Job:
    spec: DatasetSpec
    identity: int
    pose: Pose
    replicate: int
    seed: int
    spp: int
    check_visibility: bool = True


@dataclass
class JobResult:
    job: Job
    status: str  # "ok", "pupil_not_visible" or "failed"
    reason: str = ""
    label: Optional[dict] = None
    png: Optional[bytes] = None
    linear: Optional[np.ndarray] = None


def resolve_jobs(jobs: Optional[int]) -> int:
    if jobs is None:
        jobs = int(os.environ.get(JOBS_ENV, "1") or 1)
    return max(1, int(jobs))


def pose_grid(spec: DatasetSpec) -> List[Pose]:
    """Full grid, row-major over (theta, phi, alpha, beta)."""
    g = spec.gaze_values()
    out = []
    for theta, phi in spec.camera_grid():
        for a in g:
            for b in g:
                out.append(Pose(len(out), theta, phi, a, b))
    return out


def pose_is_valid(spec: DatasetSpec, pose: Pose) -> bool:
    cam = place_camera(pose.theta, pose.phi, spec.radius_mm, (spec.width, spec.height), spec.mm_per_px)
    return validate_pose(*eyeball_angles(gaze_direction(cam, pose.alpha, pose.beta)), *spec.constraints)


def environment_ids(spec: DatasetSpec) -> List[str]:
    ids = list(spec.procedural)
    for k, p in enumerate(spec.hdr_paths):
        ids.append(f"hdr{k}:{Path(p).stem}")
    return ids


@lru_cache(maxsize=16)
def _environment(spec_key: tuple, env_id: str) -> EnvironmentMap:
    master_seed, hdr_paths = spec_key
    if env_id.startswith("hdr"):
        k = int(env_id[3:].split(":", 1)[0])
        return load_hdr(hdr_paths[k], env_id)
    return generate_procedural_env(env_id, derive_seed("env", master_seed, env_id) % (2**31))


def environment_for(spec: DatasetSpec, env_id: str) -> EnvironmentMap:
    return _environment((spec.master_seed, tuple(spec.hdr_paths)), env_id)


def scene_config(spec: DatasetSpec, pose: Pose, seed: int) -> SceneConfig:
    """Camera, gaze and sampled appearance/lighting for one image."""
    cam = place_camera(pose.theta, pose.phi, spec.radius_mm, (spec.width, spec.height), spec.mm_per_px)
    base = SceneConfig(cam, GazeSpec(pose.alpha, pose.beta, gaze_direction(cam, pose.alpha, pose.beta)), seed=seed)
    cfg = sample_scene_randomness(base, np.random.default_rng(seed), environment_ids(spec))
    d = EyeConfig()
    e = cfg.eye
    eye = EyeConfig(
        iris_color=e.iris_color if spec.randomize_iris_color else d.iris_color,
        sclera_tint=e.sclera_tint if spec.randomize_sclera_tint else d.sclera_tint,
        vein_density=e.vein_density if spec.randomize_veins else d.vein_density,
        pupil_dilation=e.pupil_dilation if spec.randomize_pupil else d.pupil_dilation,
        iris_scale=e.iris_scale if spec.randomize_iris_scale else d.iris_scale,
    )
    return replace(cfg, eye=eye)


def png_bytes(linear: np.ndarray) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(linear_to_srgb8(linear)).save(buf, format="PNG")
    return buf.getvalue()


def run_job(job: Job, keep_linear: bool = False) -> JobResult:
    spec = job.spec
    try:
        cfg = scene_config(spec, job.pose, job.seed)
        ident = synthesize_identity(spec.master_seed, job.identity)
        ball, region = pose_eye(ident, cfg)
        lm = collect_landmarks_3d(ball, region)
        xy = project(cfg.camera, lm.points)
        visible = point_in_polygon(project(cfg.camera, lm.pupil_center)[0], xy[:12])
        if job.check_visibility and not visible:
            return JobResult(job, "pupil_not_visible")
        env = lit_environment(environment_for(spec, cfg.lighting.env_id), cfg.lighting)
        scene = build_render_scene(ball, region, ident.region.params.skin_albedo, env)
        settings = RenderSettings(spec.width, spec.height, job.spp, spec.max_depth, job.seed)
        img = render(scene, settings, cfg.camera.camera())
        label = make_label_record(cfg, lm, "", visible)
        label["identity"] = job.identity
        label["pose_index"] = job.pose.index
        label["replicate"] = job.replicate
        label["render"] = {"spp": job.spp, "max_depth": spec.max_depth, "nonfinite_samples": img.nonfinite_samples}
        return JobResult(job, "ok", label=label, png=png_bytes(img.pixels), linear=img.pixels if keep_linear else None)
    except OculogenError as e:
        return JobResult(job, "failed", reason=f"{type(e).__name__}: {e}")


def _run_pool(jobs: List[Job], workers: int, progress: Optional[Callable] = None):
    if workers <= 1 or len(jobs) <= 1:
        for j in jobs:
            r = run_job(j)
            if progress:
                progress(r)
            yield r
        return
    ctx = mp.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        for r in pool.map(run_job, jobs, chunksize=1):
            if progress:
                progress(r)
            yield r


def _clear_outputs(out: Path) -> None:
    for sub in ("imgs", "labels"):
        d = out / sub
        if d.is_dir():
            for f in d.iterdir():
                if _NAME_RE.match(f.name):
                    f.unlink()


def plan_jobs(spec: DatasetSpec, spp: Optional[int] = None):
    """All (identity, valid pose, replicate) jobs plus the constraint-skipped records."""
    spp = spec.spp if spp is None else spp
    grid = pose_grid(spec)
    valid = {p.index for p in grid if pose_is_valid(spec, p)}
    if not valid:
        raise EmptyEnumeration("every pose violates the rotation constraints")
    jobs, skipped = [], []
    for i in range(spec.identities):
        for p in grid:
            ok = p.index in valid
            for r in range(spec.replicates):
                seed = image_seed(spec.master_seed, i, p.index, r)
                if ok:
                    jobs.append(Job(spec, i, p, r, seed, spp, spec.pupil_visibility))
                else:
                    skipped.append(_skip_entry(i, p, r, seed, "constraint"))
    return jobs, skipped


def _skip_entry(identity, pose: Pose, replicate, seed, reason):
    return {
        "identity": identity,
        "pose_index": pose.index,
        "replicate": replicate,
        "seed": seed,
        "theta": pose.theta,
        "phi": pose.phi,
        "alpha": pose.alpha,
        "beta": pose.beta,
        "reason": reason,
    }


def generate(
    spec: DatasetSpec,
    out_dir=None,
    jobs: Optional[int] = None,
    spp: Optional[int] = None,
    progress: Optional[Callable] = None,
) -> dict:
    """Render the dataset described by ``spec``; returns the manifest (also written to disk)."""
    out = Path(out_dir or spec.output_dir)
    job_list, skipped = plan_jobs(spec, spp)
    (out / "imgs").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    _clear_outputs(out)
    entries = []
    counts = {"enumerated": len(job_list) + len(skipped), "emitted": 0, "skipped_constraint": len(skipped),
              "skipped_visibility": 0, "failed": 0}
    started = datetime.now(timezone.utc).isoformat()
    for res in _run_pool(job_list, resolve_jobs(jobs), progress):
        j = res.job
        if res.status != "ok":
            key = "skipped_visibility" if res.status == "pupil_not_visible" else "failed"
            counts[key] += 1
            e = _skip_entry(j.identity, j.pose, j.replicate, j.seed, res.status)
            if res.reason:
                e["detail"] = res.reason
            skipped.append(e)
            continue
        n = len(entries)
        img_name = f"imgs/{n:06d}.png"
        label_name = f"labels/{n:06d}.json"
        res.label["image"] = img_name
        (out / img_name).write_bytes(res.png)
        (out / label_name).write_text(record_to_json(res.label))
        entries.append(
            {
                "index": n,
                "image": img_name,
                "label": label_name,
                "seed": j.seed,
                "identity": j.identity,
                "pose_index": j.pose.index,
                "replicate": j.replicate,
                "theta": j.pose.theta,
                "phi": j.pose.phi,
                "alpha": j.pose.alpha,
                "beta": j.pose.beta,
                "filters": {"constraint": True, "pupil_visible": bool(res.label["validity"]["pupil_visible"])},
            }
        )
    counts["emitted"] = len(entries)
    manifest = {
        "artifact_version": __version__,
        "started_utc": started,
        "finished_utc": datetime.now(timezone.utc).isoformat(),
        "spec": spec.to_dict(),
        "spp": job_list[0].spp if job_list else spec.spp,
        "counts": counts,
        "entries": entries,
        "skipped": sorted(skipped, key=lambda e: (e["identity"], e["pose_index"], e["replicate"])),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def load_manifest(path) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.json"
    m = json.loads(p.read_text())
    m["_root"] = str(p.parent)
    return m


def render_one(spec: DatasetSpec, identity: int, pose: Pose, replicate: int = 0, spp: Optional[int] = None,
               check_visibility: bool = False) -> JobResult:
    """Regenerate a single image exactly as ``generate`` would."""
    seed = image_seed(spec.master_seed, identity, pose.index, replicate)
    return run_job(Job(spec, identity, pose, replicate, seed, spec.spp if spp is None else spp, check_visibility),
                   keep_linear=True)


def find_pose(spec: DatasetSpec, theta: float, phi: float, alpha: float, beta: float) -> Pose:
    """Grid pose with these angles, or an off-grid pose with a distinct index."""
    for p in pose_grid(spec):
        if (p.theta, p.phi, p.alpha, p.beta) == (theta, phi, alpha, beta):
            return p
    # off-grid poses get indices past the end of the grid, keyed by their angles
    off = derive_seed("offgrid", theta, phi, alpha, beta) % (1 << 40)
    return Pose(len(pose_grid(spec)) + off, theta, phi, alpha, beta)
