"""Jitted path-tracing kernels.

Paths start in "specular" mode: dielectric hits pick reflection or refraction
with the Fresnel probability, and escapes collect the full environment
radiance.  After the first diffuse vertex a path switches to "transparent"
mode, where dielectric surfaces are crossed in a straight line with weight
1 - F (zero under total internal reflection).  Shadow rays follow the same
rule, so next-event estimation and BSDF sampling estimate the same integrand
and can be combined with the balance heuristic.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

from ..lighting.envmap import env_eval, env_pdf, env_sample
from .bvh import STACK_SIZE, closest_hit
from .materials import MAT_DIELECTRIC, MAT_SKIN, P_EXP, P_GLOSS, P_IOR, P_WRAP
from .optics import fresnel_dielectric, refract_xyz

RAY_EPS = 1e-4  # mm, origin offset along the geometric normal
RR_DEPTH = 4
RR_MAX_Q = 0.95
MAX_PASSES = 32  # dielectric crossings allowed in transparent mode
INV_PI = 1.0 / math.pi
GOLDEN = 0.6180339887498949

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TO_UNIT = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------------------
# Counter-based random numbers


@nb.njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True, nogil=True)
def pixel_stream(seed, pixel):
    """Initial state of the stream owned by one pixel of one render."""
    s = _mix64(np.uint64(seed) * _GAMMA + _M1)
    return _mix64(s ^ (np.uint64(pixel) * _M2 + _GAMMA))


@nb.njit(cache=True, nogil=True, inline="always")
def rnd(state):
    """Uniform double in [0, 1); advances ``state[0]``."""
    state[0] += _GAMMA
    return float(_mix64(state[0]) >> _S11) * _TO_UNIT


# ---------------------------------------------------------------------------
# Small vector helpers


@nb.njit(cache=True, nogil=True, inline="always")
def _basis(nx, ny, nz):
    """Two tangents completing a right-handed frame around a unit normal."""
    sign = 1.0 if nz >= 0.0 else -1.0
    a = -1.0 / (sign + nz)
    b = nx * ny * a
    return (1.0 + sign * nx * nx * a, sign * b, -sign * nx), (b, sign + ny * ny * a, -ny)


@nb.njit(cache=True, nogil=True, inline="always")
def _to_world(lx, ly, lz, nx, ny, nz):
    t, b = _basis(nx, ny, nz)
    return (
        lx * t[0] + ly * b[0] + lz * nx,
        lx * t[1] + ly * b[1] + lz * ny,
        lx * t[2] + ly * b[2] + lz * nz,
    )


@nb.njit(cache=True, nogil=True, inline="always")
def _normalize(x, y, z):
    n = math.sqrt(x * x + y * y + z * z)
    if n == 0.0:
        return 0.0, 0.0, 1.0
    return x / n, y / n, z / n


# ---------------------------------------------------------------------------
# Surface attributes


@nb.njit(cache=True, nogil=True)
def _shading(sc, tri, u, v, dx, dy, dz):
    """Geometric and shading normals facing the incoming ray, plus uv."""
    w = 1.0 - u - v
    gx = sc.ng[tri, 0]
    gy = sc.ng[tri, 1]
    gz = sc.ng[tri, 2]
    sx = w * sc.ns[tri, 0, 0] + u * sc.ns[tri, 1, 0] + v * sc.ns[tri, 2, 0]
    sy = w * sc.ns[tri, 0, 1] + u * sc.ns[tri, 1, 1] + v * sc.ns[tri, 2, 1]
    sz = w * sc.ns[tri, 0, 2] + u * sc.ns[tri, 1, 2] + v * sc.ns[tri, 2, 2]
    sx, sy, sz = _normalize(sx, sy, sz)
    entering = gx * dx + gy * dy + gz * dz < 0.0
    if not entering:
        gx, gy, gz = -gx, -gy, -gz
    if sx * gx + sy * gy + sz * gz < 0.0:
        sx, sy, sz = -sx, -sy, -sz
    tu = w * sc.uv[tri, 0, 0] + u * sc.uv[tri, 1, 0] + v * sc.uv[tri, 2, 0]
    tv = w * sc.uv[tri, 0, 1] + u * sc.uv[tri, 1, 1] + v * sc.uv[tri, 2, 1]
    return entering, gx, gy, gz, sx, sy, sz, tu, tv


@nb.njit(cache=True, nogil=True)
def _albedo(sc, m, tu, tv):
    k = sc.tex_id[m]
    if k < 0:
        return sc.mparams[m, 0], sc.mparams[m, 1], sc.mparams[m, 2]
    h = sc.tex_shape[k, 0]
    w = sc.tex_shape[k, 1]
    off = sc.tex_offset[k]
    x = min(max(tu * w - 0.5, 0.0), w - 1.0)
    y = min(max(tv * h - 0.5, 0.0), h - 1.0)
    x0 = min(int(x), w - 1)
    y0 = min(int(y), h - 1)
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    d = sc.tex_data
    a00 = off + y0 * w + x0
    a01 = off + y0 * w + x1
    a10 = off + y1 * w + x0
    a11 = off + y1 * w + x1
    out0 = (d[a00, 0] * (1 - fx) + d[a01, 0] * fx) * (1 - fy) + (d[a10, 0] * (1 - fx) + d[a11, 0] * fx) * fy
    out1 = (d[a00, 1] * (1 - fx) + d[a01, 1] * fx) * (1 - fy) + (d[a10, 1] * (1 - fx) + d[a11, 1] * fx) * fy
    out2 = (d[a00, 2] * (1 - fx) + d[a01, 2] * fx) * (1 - fy) + (d[a10, 2] * (1 - fx) + d[a11, 2] * fx) * fy
    return out0, out1, out2


# ---------------------------------------------------------------------------
# Scattering lobes.  For every non-dielectric material f * cos equals albedo
# times the density below, so the sampling weight is exactly the albedo.


@nb.njit(cache=True, nogil=True, inline="always")
def _phong(e, rx, ry, rz, wx, wy, wz):
    c = rx * wx + ry * wy + rz * wz
    if c <= 0.0:
        return 0.0
    return (e + 1.0) * 0.5 * INV_PI * c**e


@nb.njit(cache=True, nogil=True)
def bsdf_pdf(sc, m, nx, ny, nz, ox, oy, oz, wx, wy, wz):
    """Solid-angle density of scattering ``wo`` into ``wi`` (both pointing away)."""
    cos = nx * wx + ny * wy + nz * wz
    if cos <= 0.0:
        return 0.0
    if sc.mtype[m] != MAT_SKIN:
        return cos * INV_PI
    wrap = sc.mparams[m, P_WRAP]
    g = sc.mparams[m, P_GLOSS]
    e = sc.mparams[m, P_EXP]
    p = (1.0 - g) * (cos + wrap) * INV_PI / (1.0 + 2.0 * wrap)
    if g > 0.0:
        d = ox * nx + oy * ny + oz * nz
        rx, ry, rz = 2.0 * d * nx - ox, 2.0 * d * ny - oy, 2.0 * d * nz - oz
        fx, fy, fz = wx - 2.0 * cos * nx, wy - 2.0 * cos * ny, wz - 2.0 * cos * nz
        p += g * (_phong(e, rx, ry, rz, wx, wy, wz) + _phong(e, rx, ry, rz, fx, fy, fz))
    return p


@nb.njit(cache=True, nogil=True)
def bsdf_sample(sc, m, nx, ny, nz, ox, oy, oz, u0, u1, u2):
    """Draw an incident direction; returns (wx, wy, wz, pdf)."""
    skin = sc.mtype[m] == MAT_SKIN
    g = sc.mparams[m, P_GLOSS] if skin else 0.0
    if skin and u0 < g:
        e = sc.mparams[m, P_EXP]
        d = ox * nx + oy * ny + oz * nz
        rx, ry, rz = 2.0 * d * nx - ox, 2.0 * d * ny - oy, 2.0 * d * nz - oz
        ca = u1 ** (1.0 / (e + 1.0))
        sa = math.sqrt(max(0.0, 1.0 - ca * ca))
        phi = 2.0 * math.pi * u2
        wx, wy, wz = _to_world(sa * math.cos(phi), sa * math.sin(phi), ca, rx, ry, rz)
        c = wx * nx + wy * ny + wz * nz
        if c < 0.0:
            wx, wy, wz = wx - 2.0 * c * nx, wy - 2.0 * c * ny, wz - 2.0 * c * nz
    else:
        wrap = sc.mparams[m, P_WRAP] if skin else 0.0
        # reuse u0 inside the chosen branch
        t = (u0 - g) / (1.0 - g) if skin else u0
        phi = 2.0 * math.pi * u2
        if t * (1.0 + 2.0 * wrap) < 1.0:
            r = math.sqrt(u1)
            lz = math.sqrt(max(0.0, 1.0 - u1))
        else:
            lz = u1
            r = math.sqrt(max(0.0, 1.0 - lz * lz))
        wx, wy, wz = _to_world(r * math.cos(phi), r * math.sin(phi), lz, nx, ny, nz)
    return wx, wy, wz, bsdf_pdf(sc, m, nx, ny, nz, ox, oy, oz, wx, wy, wz)


# ---------------------------------------------------------------------------
# Transport


@nb.njit(cache=True, nogil=True)
def _offset(px, py, pz, gx, gy, gz, dx, dy, dz):
    s = RAY_EPS if gx * dx + gy * dy + gz * dz > 0.0 else -RAY_EPS
    return px + s * gx, py + s * gy, pz + s * gz


@nb.njit(cache=True, nogil=True)
def _hit(sc, ox, oy, oz, dx, dy, dz, stack):
    return closest_hit(
        ox, oy, oz, dx, dy, dz, 0.0, np.inf,
        sc.node_min, sc.node_max, sc.left, sc.right, sc.start, sc.count, sc.order,
        sc.v0, sc.e1, sc.e2, stack,
    )


@nb.njit(cache=True, nogil=True)
def _crossing_weight(sc, m, entering, sx, sy, sz, dx, dy, dz):
    """Straight-through transmittance of a dielectric interface."""
    ior = sc.mparams[m, P_IOR]
    n = ior if entering else 1.0 / ior
    cos = -(sx * dx + sy * dy + sz * dz)
    return 1.0 - fresnel_dielectric(cos, n)


@nb.njit(cache=True, nogil=True)
def transmittance(sc, ox, oy, oz, dx, dy, dz, stack):
    """Visibility of the environment along a ray in transparent mode."""
    w = 1.0
    for _ in range(MAX_PASSES):
        tri, t, u, v = _hit(sc, ox, oy, oz, dx, dy, dz, stack)
        if tri < 0:
            return w
        m = sc.mat[tri]
        if sc.mtype[m] != MAT_DIELECTRIC:
            return 0.0
        entering, gx, gy, gz, sx, sy, sz, _, _ = _shading(sc, tri, u, v, dx, dy, dz)
        w *= _crossing_weight(sc, m, entering, sx, sy, sz, dx, dy, dz)
        if w <= 0.0:
            return 0.0
        ox, oy, oz = _offset(ox + t * dx, oy + t * dy, oz + t * dz, gx, gy, gz, dx, dy, dz)
    return 0.0


@nb.njit(cache=True, nogil=True)
def trace(sc, ox, oy, oz, dx, dy, dz, max_depth, state, stack):
    """One path sample; returns (r, g, b)."""
    lr = 0.0
    lg = 0.0
    lb = 0.0
    br = 1.0
    bg = 1.0
    bb = 1.0
    depth = 0
    passes = 0
    transparent = False
    last_pdf = 0.0
    while True:
        tri, t, u, v = _hit(sc, ox, oy, oz, dx, dy, dz, stack)
        if tri < 0:
            e = env_eval(sc.env_rad, sc.env_rot, sc.env_intensity, dx, dy, dz)
            w = 1.0
            if transparent and sc.has_light:
                pl = env_pdf(sc.pdf_grid, sc.env_rot, dx, dy, dz)
                w = last_pdf / (last_pdf + pl)
            lr += br * e[0] * w
            lg += bg * e[1] * w
            lb += bb * e[2] * w
            break
        m = sc.mat[tri]
        px = ox + t * dx
        py = oy + t * dy
        pz = oz + t * dz
        entering, gx, gy, gz, sx, sy, sz, tu, tv = _shading(sc, tri, u, v, dx, dy, dz)

        if sc.mtype[m] == MAT_DIELECTRIC:
            if transparent:
                passes += 1
                if passes > MAX_PASSES:
                    break
                k = _crossing_weight(sc, m, entering, sx, sy, sz, dx, dy, dz)
                if k <= 0.0:
                    break
                br *= k
                bg *= k
                bb *= k
                ox, oy, oz = _offset(px, py, pz, gx, gy, gz, dx, dy, dz)
                continue
            depth += 1
            if depth > max_depth:
                break
            ior = sc.mparams[m, P_IOR]
            n = ior if entering else 1.0 / ior
            cos = -(sx * dx + sy * dy + sz * dz)
            f = fresnel_dielectric(cos, n)
            ok = False
            if rnd(state) >= f:
                ok, tx, ty, tz = refract_xyz(dx, dy, dz, sx, sy, sz, 1.0 / n)
                if ok:
                    dx, dy, dz = tx, ty, tz
            if not ok:
                dx, dy, dz = dx + 2.0 * cos * sx, dy + 2.0 * cos * sy, dz + 2.0 * cos * sz
            ox, oy, oz = _offset(px, py, pz, gx, gy, gz, dx, dy, dz)
            continue

        # diffuse or skin vertex
        depth += 1
        ar, ag, ab = _albedo(sc, m, tu, tv)
        wox, woy, woz = -dx, -dy, -dz
        if sc.has_light:
            wx, wy, wz, pl = env_sample(sc.row_cdf, sc.col_cdf, sc.pdf_grid, sc.env_rot, rnd(state), rnd(state))
            if wx * gx + wy * gy + wz * gz > 0.0 and pl > 0.0:
                pb = bsdf_pdf(sc, m, sx, sy, sz, wox, woy, woz, wx, wy, wz)
                if pb > 0.0:
                    qx, qy, qz = _offset(px, py, pz, gx, gy, gz, wx, wy, wz)
                    vis = transmittance(sc, qx, qy, qz, wx, wy, wz, stack)
                    if vis > 0.0:
                        e = env_eval(sc.env_rad, sc.env_rot, sc.env_intensity, wx, wy, wz)
                        k = vis * pb / (pl + pb)
                        lr += br * ar * e[0] * k
                        lg += bg * ag * e[1] * k
                        lb += bb * ab * e[2] * k
        if depth >= max_depth:
            break
        br *= ar
        bg *= ag
        bb *= ab
        if depth >= RR_DEPTH:
            q = min(max(br, max(bg, bb)), RR_MAX_Q)
            if q <= 0.0 or rnd(state) >= q:
                break
            br /= q
            bg /= q
            bb /= q
        elif br == 0.0 and bg == 0.0 and bb == 0.0:
            break
        wx, wy, wz, pb = bsdf_sample(sc, m, sx, sy, sz, wox, woy, woz, rnd(state), rnd(state), rnd(state))
        if pb <= 0.0 or wx * gx + wy * gy + wz * gz <= 0.0:
            break
        transparent = True
        passes = 0
        last_pdf = pb
        dx, dy, dz = wx, wy, wz
        ox, oy, oz = _offset(px, py, pz, gx, gy, gz, dx, dy, dz)
    return lr, lg, lb


@nb.njit(cache=True, nogil=True)
def render_rows(sc, cam, width, height, spp, max_depth, seed, row0, row1, out, err, bad):
    """Fill ``out[row0:row1]`` with pixel means and ``err`` with their standard errors.

    ``bad[0]`` counts non-finite samples, which are replaced by zero.
    """
    stack = np.empty(STACK_SIZE, np.int64)
    state = np.empty(1, np.uint64)
    inv = 1.0 / spp
    s = cam[12]
    for py in range(row0, row1):
        for px in range(width):
            state[0] = pixel_stream(seed, py * width + px)
            shift_x = rnd(state)
            shift_y = rnd(state)
            r = 0.0
            g = 0.0
            b = 0.0
            r2 = 0.0
            g2 = 0.0
            b2 = 0.0
            for k in range(spp):
                # randomly shifted Kronecker lattice over the pixel footprint
                fx = (k + 0.5) * inv + shift_x
                fx -= math.floor(fx)
                fy = k * GOLDEN + shift_y
                fy -= math.floor(fy)
                xc = (px + fx - 0.5 * width) * s
                yc = (0.5 * height - py - fy) * s
                ox = cam[0] + xc * cam[3] + yc * cam[6]
                oy = cam[1] + xc * cam[4] + yc * cam[7]
                oz = cam[2] + xc * cam[5] + yc * cam[8]
                cr, cg, cb = trace(sc, ox, oy, oz, cam[9], cam[10], cam[11], max_depth, state, stack)
                if math.isfinite(cr) and math.isfinite(cg) and math.isfinite(cb):
                    r += cr
                    g += cg
                    b += cb
                    r2 += cr * cr
                    g2 += cg * cg
                    b2 += cb * cb
                else:
                    bad[0] += 1
            i = py - row0
            out[i, px, 0] = r * inv
            out[i, px, 1] = g * inv
            out[i, px, 2] = b * inv
            if spp > 1:
                k = 1.0 / (spp * (spp - 1.0))
                err[i, px, 0] = math.sqrt(max(0.0, (r2 - r * r * inv) * k))
                err[i, px, 1] = math.sqrt(max(0.0, (g2 - g * g * inv) * k))
                err[i, px, 2] = math.sqrt(max(0.0, (b2 - b * b * inv) * k))


@nb.njit(cache=True, nogil=True)
def trace_many(sc, origins, dirs, max_depth, seed, out):
    """Independent single-sample paths for arbitrary rays (diagnostics, tests)."""
    stack = np.empty(STACK_SIZE, np.int64)
    state = np.empty(1, np.uint64)
    for k in range(origins.shape[0]):
        state[0] = pixel_stream(seed, k)
        r, g, b = trace(sc, origins[k, 0], origins[k, 1], origins[k, 2], dirs[k, 0], dirs[k, 1], dirs[k, 2], max_depth, state, stack)
        out[k, 0] = r
        out[k, 1] = g
        out[k, 2] = b
