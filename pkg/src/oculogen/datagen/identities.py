"""Seeds and procedural subject identities."""

from __future__ import annotations

import hashlib
from functools import lru_cache

import numpy as np

from ..eyeball import EyeballParams
from ..eyeregion import EyeRegionParams
from ..staging import Identity, build_identity

SEED_MASK = (1 << 63) - 1

# base skin albedos, light to dark; each identity jitters one of them
SKIN_TONES = (
    (0.62, 0.45, 0.38),
    (0.55, 0.36, 0.29),
    (0.45, 0.29, 0.21),
    (0.33, 0.21, 0.15),
    (0.22, 0.14, 0.10),
)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a tuple of ints/strings (blake2b, not Python's hash)."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little") & SEED_MASK


def image_seed(master_seed: int, identity: int, pose_index: int, replicate: int = 0) -> int:
    return derive_seed("image", int(master_seed), int(identity), int(pose_index), int(replicate))


def identity_params(master_seed: int, index: int):
    rng = np.random.default_rng(derive_seed("identity", int(master_seed), int(index)))
    tone = np.array(SKIN_TONES[int(rng.integers(len(SKIN_TONES)))])
    skin = tuple(float(x) for x in np.clip(tone * rng.uniform(0.9, 1.1), 0.0, 1.0))
    region = EyeRegionParams(
        fissure_width=float(rng.uniform(20.5, 23.5)),
        fissure_height=float(rng.uniform(9.0, 11.0)),
        skin_albedo=skin,
        wrinkle_amplitude=float(rng.uniform(0.10, 0.25)),
        lash_length=float(rng.uniform(6.5, 8.5)),
        lash_count=int(rng.integers(40, 61)),
        seed=int(rng.integers(2**31)),
    )
    return EyeballParams(), region, int(rng.integers(2**31)), int(rng.integers(2**31))


@lru_cache(maxsize=32)
def synthesize_identity(master_seed: int, index: int) -> Identity:
    ball, region, bump_seed, tex_seed = identity_params(master_seed, index)
    return build_identity(f"id{index:02d}", ball, region, bump_seed=bump_seed, texture_seed=tex_seed)
