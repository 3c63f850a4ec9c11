"""Linear radiance images, sRGB PNG export and a flat float dump."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

FLOAT_DUMP_MAGIC = b"OCLF"


def linear_to_srgb(x) -> np.ndarray:
    """Standard piecewise sRGB transfer on values clamped to [0, 1]."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    return np.where(x <= 0.0031308, 12.92 * x, 1.055 * np.power(x, 1.0 / 2.4) - 0.055)


def linear_to_srgb8(x) -> np.ndarray:
    x = np.nan_to_num(np.asarray(x, dtype=np.float64), nan=0.0, posinf=1.0, neginf=0.0)
    return np.round(255.0 * linear_to_srgb(x)).astype(np.uint8)


@dataclass(frozen=True)
class Image:
    """Linear RGB radiance, shape (height, width, 3)."""

    pixels: np.ndarray
    nonfinite_samples: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError("image pixels must have shape (H, W, 3)")
        if not np.all(np.isfinite(px)) or (px < 0).any():
            raise ValueError("linear image values must be finite and >= 0")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def to_srgb8(self) -> np.ndarray:
        return linear_to_srgb8(self.pixels)


def tone_map_export(img: Image, path) -> Path:
    path = Path(path)
    PILImage.fromarray(img.to_srgb8()).save(path)
    return path


def write_float_dump(img: Image, path) -> Path:
    """Header: magic ``OCLF``, uint32 width, height, channels; then row-major float32 RGB."""
    path = Path(path)
    h, w, c = img.pixels.shape
    with open(path, "wb") as f:
        f.write(FLOAT_DUMP_MAGIC + struct.pack("<III", w, h, c))
        f.write(img.pixels.astype("<f4").tobytes())
    return path


def read_float_dump(path) -> Image:
    data = Path(path).read_bytes()
    if data[:4] != FLOAT_DUMP_MAGIC or len(data) < 16:
        raise ValueError("not a float image dump")
    w, h, c = struct.unpack("<III", data[4:16])
    body = np.frombuffer(data, dtype="<f4", offset=16)
    if body.size != w * h * c:
        raise ValueError("float dump is truncated")
    return Image(body.reshape(h, w, c).astype(np.float64))
