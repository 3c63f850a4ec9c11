"""Dataset configuration: TOML text with flat dotted keys.

Example::

    master_seed = 7
    camera.theta_range = [-20, 20]
    camera.increment_deg = 10
    gaze.increment_deg = 10
    image.spp = 32
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ParseError, RangeError, UnknownKey
from ..lighting import KINDS

# dotted key -> (field name, default)
_KEYS = {
    "camera.theta_range": ("theta_range", (-20.0, 20.0)),
    "camera.phi_range": ("phi_range", (-20.0, 20.0)),
    "camera.increment_deg": ("camera_increment", 10.0),
    "camera.radius_mm": ("radius_mm", 100.0),
    "gaze.range_deg": ("gaze_range", (-45.0, 45.0)),
    "gaze.increment_deg": ("gaze_increment", 10.0),
    "constraints.alpha_max_deg": ("alpha_max", 25.0),
    "constraints.beta_max_deg": ("beta_max", 35.0),
    "image.width": ("width", 120),
    "image.height": ("height", 80),
    "image.spp": ("spp", 150),
    "image.mm_per_px": ("mm_per_px", 0.5),
    "image.max_depth": ("max_depth", 8),
    "lighting.procedural": ("procedural", tuple(KINDS)),
    "lighting.hdr_paths": ("hdr_paths", ()),
    "eye.randomize_iris_color": ("randomize_iris_color", True),
    "eye.randomize_sclera_tint": ("randomize_sclera_tint", True),
    "eye.randomize_veins": ("randomize_veins", True),
    "eye.randomize_pupil": ("randomize_pupil", True),
    "eye.randomize_iris_scale": ("randomize_iris_scale", True),
    "model.identities": ("identities", 10),
    "master_seed": ("master_seed", 0),
    "output.dir": ("output_dir", "out"),
    "sampling.replicates": ("replicates", 1),
    "filters.pupil_visibility": ("pupil_visibility", True),
}
KNOWN_KEYS = tuple(_KEYS)
_FIELD_TO_KEY = {f: k for k, (f, _) in _KEYS.items()}


@dataclass(frozen=True)
class DatasetSpec:
    theta_range: Tuple[float, float] = (-20.0, 20.0)
    phi_range: Tuple[float, float] = (-20.0, 20.0)
    camera_increment: float = 10.0
    radius_mm: float = 100.0
    gaze_range: Tuple[float, float] = (-45.0, 45.0)
    gaze_increment: float = 10.0
    alpha_max: float = 25.0
    beta_max: float = 35.0
    width: int = 120
    height: int = 80
    spp: int = 150
    mm_per_px: float = 0.5
    max_depth: int = 8
    procedural: Tuple[str, ...] = tuple(KINDS)
    hdr_paths: Tuple[str, ...] = ()
    randomize_iris_color: bool = True
    randomize_sclera_tint: bool = True
    randomize_veins: bool = True
    randomize_pupil: bool = True
    randomize_iris_scale: bool = True
    identities: int = 10
    master_seed: int = 0
    output_dir: str = "out"
    replicates: int = 1
    pupil_visibility: bool = True

    def __post_init__(self):
        _validate(self)

    # grids -----------------------------------------------------------------
    def theta_values(self):
        return grid_values(*self.theta_range, self.camera_increment)

    def phi_values(self):
        return grid_values(*self.phi_range, self.camera_increment)

    def camera_grid(self):
        return [(t, p) for t in self.theta_values() for p in self.phi_values()]

    def gaze_values(self):
        return grid_values(*self.gaze_range, self.gaze_increment)

    @property
    def constraints(self):
        return (self.alpha_max, self.beta_max)

    def to_dict(self) -> dict:
        """Flat dotted-key echo; ``parse_dict(spec.to_dict()) == spec``."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[_FIELD_TO_KEY[f.name]] = list(v) if isinstance(v, tuple) else v
        return out

    def replace(self, **kw) -> "DatasetSpec":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return DatasetSpec(**d)


def grid_values(lo: float, hi: float, step: float):
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + k * step, 9) for k in range(n + 1)]


def _validate(s: DatasetSpec) -> None:
    for name in ("theta_range", "phi_range", "gaze_range"):
        lo, hi = getattr(s, name)
        if lo > hi:
            raise RangeError(f"{_FIELD_TO_KEY[name]}: lower bound exceeds upper bound")
    for lo_hi in (s.phi_range,):
        if max(abs(lo_hi[0]), abs(lo_hi[1])) >= 90:
            raise RangeError("camera.phi_range must stay inside (-90, 90)")
    for name in ("camera_increment", "gaze_increment", "radius_mm", "mm_per_px"):
        v = getattr(s, name)
        if not (math.isfinite(v) and v > 0):
            raise RangeError(f"{_FIELD_TO_KEY[name]} must be > 0")
    for name in ("alpha_max", "beta_max"):
        if not getattr(s, name) >= 0:
            raise RangeError(f"{_FIELD_TO_KEY[name]} must be >= 0")
    for name in ("width", "height", "spp", "max_depth", "identities", "replicates"):
        if getattr(s, name) < 1:
            raise RangeError(f"{_FIELD_TO_KEY[name]} must be >= 1")
    if s.master_seed < 0:
        raise RangeError("master_seed must be >= 0")
    bad = [k for k in s.procedural if k not in KINDS]
    if bad:
        raise RangeError(f"unknown procedural environments {bad}; expected a subset of {list(KINDS)}")
    if not s.procedural and not s.hdr_paths:
        raise RangeError("at least one lighting source is required")


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(key: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise RangeError(f"{key} must be true or false")
        return value
    if isinstance(default, int):
        if not isinstance(value, int) or isinstance(value, bool):
            raise RangeError(f"{key} must be an integer")
        return value
    if isinstance(default, float):
        if not _is_num(value):
            raise RangeError(f"{key} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise RangeError(f"{key} must be a string")
        return value
    # tuples: numeric pairs or string lists
    if not isinstance(value, list):
        raise RangeError(f"{key} must be a list")
    if default and _is_num(default[0]):
        if len(value) != 2 or not all(_is_num(x) for x in value):
            raise RangeError(f"{key} must be a [low, high] pair of numbers")
        return (float(value[0]), float(value[1]))
    if not all(isinstance(x, str) for x in value):
        raise RangeError(f"{key} must be a list of strings")
    return tuple(value)


def parse_dict(flat: dict) -> DatasetSpec:
    kw = {}
    for key, value in flat.items():
        if key not in _KEYS:
            raise UnknownKey(f"unknown config key {key!r}")
        name, default = _KEYS[key]
        kw[name] = _coerce(key, value, default)
    return DatasetSpec(**kw)


def parse_config(text: str) -> DatasetSpec:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        line = getattr(e, "lineno", None)
        col = getattr(e, "colno", None)
        msg = str(e)
        m = re.search(r"\(at line (\d+), column (\d+)\)", msg)
        if m:
            line = line or int(m.group(1))
            col = col or int(m.group(2))
            msg = msg[: m.start()].strip()
        raise ParseError(msg, line, col) from None
    return parse_dict(_flatten(data))


def load_config(path) -> DatasetSpec:
    return parse_config(Path(path).read_text())
