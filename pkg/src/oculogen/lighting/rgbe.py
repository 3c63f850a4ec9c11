"""Radiance RGBE (.hdr) reading and writing.

Pixels use the shared-exponent encoding of Greg Ward's format as implemented
in Bruce Walter's reference ``rgbe.c``: mantissas are truncated on encode and
decoded without a half-step offset, so 1.0 round-trips exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import MalformedHdr

MAGICS = (b"#?RADIANCE", b"#?RGBE")


def float_to_rgbe(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    v = rgb.max(axis=-1)
    mant, exp = np.frexp(v)
    out = np.zeros(rgb.shape[:-1] + (4,), dtype=np.uint8)
    ok = v >= 1e-32
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(ok, mant * 256.0 / np.where(ok, v, 1.0), 0.0)
    out[..., :3] = np.clip(np.floor(rgb * scale[..., None]), 0, 255).astype(np.uint8)
    out[..., 3] = np.where(ok, exp + 128, 0).astype(np.uint8)
    out[~ok] = 0
    return out


def rgbe_to_float(rgbe: np.ndarray) -> np.ndarray:
    rgbe = np.asarray(rgbe, dtype=np.uint8)
    e = rgbe[..., 3].astype(np.int64)
    f = np.where(e > 0, np.ldexp(1.0, e - (128 + 8)), 0.0)
    return rgbe[..., :3].astype(np.float64) * f[..., None]


# ---------------------------------------------------------------------------
# Scanline run-length coding (the "new" per-channel scheme)


def _rle_channel(data: np.ndarray) -> bytes:
    out = bytearray()
    n = len(data)
    cur = 0
    while cur < n:
        # find the next run of at least 4 equal bytes
        beg = cur
        run = 0
        while beg < n:
            run = 1
            while run < 127 and beg + run < n and data[beg + run] == data[beg]:
                run += 1
            if run >= 4:
                break
            beg += run
        if run < 4:
            beg = n
        # literal bytes before the run
        while cur < beg:
            k = min(128, beg - cur)
            out.append(k)
            out += bytes(data[cur : cur + k])
            cur += k
        if beg < n:
            out.append(128 + run)
            out.append(int(data[beg]))
            cur = beg + run
    return bytes(out)


def _decode_rle_scanline(buf: memoryview, pos: int, width: int):
    line = np.empty((4, width), dtype=np.uint8)
    for c in range(4):
        i = 0
        while i < width:
            if pos >= len(buf):
                raise MalformedHdr("truncated RLE scanline")
            count = buf[pos]
            pos += 1
            if count > 128:
                count -= 128
                if count == 0 or i + count > width or pos >= len(buf):
                    raise MalformedHdr("bad run in RLE scanline")
                line[c, i : i + count] = buf[pos]
                pos += 1
            else:
                if count == 0 or i + count > width or pos + count > len(buf):
                    raise MalformedHdr("bad literal in RLE scanline")
                line[c, i : i + count] = np.frombuffer(buf[pos : pos + count], dtype=np.uint8)
                pos += count
            i += count
    return line.T, pos


# ---------------------------------------------------------------------------
# Files


def write_hdr(path, radiance: np.ndarray, rle: bool = True) -> Path:
    radiance = np.asarray(radiance, dtype=np.float64)
    if radiance.ndim != 3 or radiance.shape[2] != 3:
        raise ValueError("radiance must be (H, W, 3)")
    if not np.all(np.isfinite(radiance)) or (radiance < 0).any():
        raise ValueError("radiance must be finite and non-negative")
    h, w, _ = radiance.shape
    px = float_to_rgbe(radiance)
    out = bytearray(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n")
    out += f"-Y {h} +X {w}\n".encode("ascii")
    use_rle = rle and 8 <= w <= 0x7FFF
    for row in px:
        if use_rle:
            out += bytes([2, 2, w >> 8, w & 0xFF])
            for c in range(4):
                out += _rle_channel(row[:, c])
        else:
            out += row.tobytes()
    path = Path(path)
    path.write_bytes(bytes(out))
    return path


def _parse_header(data: bytes):
    if not any(data.startswith(m) for m in MAGICS):
        raise MalformedHdr("missing #?RADIANCE magic")
    pos = 0
    fmt = None
    while True:
        end = data.find(b"\n", pos)
        if end < 0:
            raise MalformedHdr("unterminated header")
        line = data[pos:end].strip()
        pos = end + 1
        if not line:
            break
        if line.startswith(b"FORMAT="):
            fmt = line[7:]
    if fmt not in (None, b"32-bit_rle_rgbe"):
        raise MalformedHdr(f"unsupported pixel format {fmt!r}")
    end = data.find(b"\n", pos)
    if end < 0:
        raise MalformedHdr("missing resolution line")
    parts = data[pos:end].split()
    pos = end + 1
    if len(parts) != 4 or parts[0] != b"-Y" or parts[2] != b"+X":
        raise MalformedHdr("only '-Y H +X W' orientation is supported")
    try:
        h, w = int(parts[1]), int(parts[3])
    except ValueError as exc:
        raise MalformedHdr("bad resolution line") from exc
    if h <= 0 or w <= 0:
        raise MalformedHdr("non-positive image size")
    return h, w, pos


def read_hdr_array(path) -> np.ndarray:
    data = Path(path).read_bytes()
    h, w, pos = _parse_header(data)
    buf = memoryview(data)
    px = np.empty((h, w, 4), dtype=np.uint8)
    for y in range(h):
        rle = (
            8 <= w <= 0x7FFF
            and pos + 4 <= len(data)
            and data[pos] == 2
            and data[pos + 1] == 2
            and not data[pos + 2] & 0x80
        )
        if not rle:
            need = (h - y) * w * 4
            if pos + need > len(data):
                raise MalformedHdr("truncated pixel data")
            px[y:] = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos).reshape(h - y, w, 4)
            break
        if (data[pos + 2] << 8 | data[pos + 3]) != w:
            raise MalformedHdr("scanline width mismatch")
        px[y], pos = _decode_rle_scanline(buf, pos + 4, w)
    return rgbe_to_float(px)
