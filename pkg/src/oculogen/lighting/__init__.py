"""Image-based lighting: HDR environment maps, procedural archetypes, sampling."""

from .envmap import (
    EnvironmentMap,
    EnvSampler,
    build_sampler,
    eval_radiance,
    load_hdr,
    rotate_env,
    sample_direction,
    save_hdr,
    scale_intensity,
    total_power,
)
from .procedural import KINDS, generate_procedural_env

__all__ = [
    "EnvironmentMap",
    "EnvSampler",
    "KINDS",
    "build_sampler",
    "eval_radiance",
    "generate_procedural_env",
    "load_hdr",
    "rotate_env",
    "sample_direction",
    "save_hdr",
    "scale_intensity",
    "total_power",
]
