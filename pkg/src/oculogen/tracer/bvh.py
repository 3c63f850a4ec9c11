"""Bounding-volume hierarchy over a triangle soup (binned SAH, flattened arrays)."""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from ..errors import EmptyScene

MAX_LEAF = 4
N_BINS = 16
STACK_SIZE = 128
TRI_EPS = 1e-14


@dataclass(frozen=True)
class BVH:
    node_min: np.ndarray  # (N, 3)
    node_max: np.ndarray  # (N, 3)
    left: np.ndarray  # (N,) child index, -1 for leaves
    right: np.ndarray
    start: np.ndarray  # (N,) first slot in ``order`` (leaves)
    count: np.ndarray  # (N,) number of triangles (leaves), 0 for interior
    order: np.ndarray  # (F,) triangle ids in leaf order

    @property
    def n_nodes(self) -> int:
        return len(self.left)

    def leaves(self) -> np.ndarray:
        return np.nonzero(self.count > 0)[0]

    def depth(self) -> int:
        best = 0
        stack = [(0, 1)] if self.n_nodes else []
        while stack:
            n, d = stack.pop()
            best = max(best, d)
            if self.count[n] == 0:
                stack.append((int(self.left[n]), d + 1))
                stack.append((int(self.right[n]), d + 1))
        return best


@dataclass(frozen=True)
class TriangleSoup:
    """Per-triangle arrays in the layout the kernels expect."""

    v0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    @classmethod
    def from_triangles(cls, tris: np.ndarray) -> "TriangleSoup":
        tris = np.asarray(tris, dtype=np.float64).reshape(-1, 3, 3)
        return cls(
            np.ascontiguousarray(tris[:, 0]),
            np.ascontiguousarray(tris[:, 1] - tris[:, 0]),
            np.ascontiguousarray(tris[:, 2] - tris[:, 0]),
        )


@nb.njit(cache=True, nogil=True)
def _area(lo, hi):
    dx = hi[0] - lo[0]
    dy = hi[1] - lo[1]
    dz = hi[2] - lo[2]
    if dx < 0 or dy < 0 or dz < 0:
        return 0.0
    return 2.0 * (dx * dy + dy * dz + dz * dx)


@nb.njit(cache=True)
def _build(tmin, tmax, cent, max_leaf, n_bins):
    n_tri = tmin.shape[0]
    cap = 2 * n_tri + 1
    node_min = np.empty((cap, 3))
    node_max = np.empty((cap, 3))
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    start = np.zeros(cap, np.int64)
    count = np.zeros(cap, np.int64)
    order = np.arange(n_tri)
    stack_node = np.empty(cap, np.int64)
    stack_s = np.empty(cap, np.int64)
    stack_e = np.empty(cap, np.int64)
    sp = 0
    stack_node[0] = 0
    stack_s[0] = 0
    stack_e[0] = n_tri
    sp = 1
    n_nodes = 1
    bin_min = np.empty((n_bins, 3))
    bin_max = np.empty((n_bins, 3))
    bin_cnt = np.zeros(n_bins, np.int64)
    lo = np.empty(3)
    hi = np.empty(3)
    clo = np.empty(3)
    chi = np.empty(3)
    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        s = stack_s[sp]
        e = stack_e[sp]
        for k in range(3):
            lo[k] = np.inf
            hi[k] = -np.inf
            clo[k] = np.inf
            chi[k] = -np.inf
        for i in range(s, e):
            t = order[i]
            for k in range(3):
                lo[k] = min(lo[k], tmin[t, k])
                hi[k] = max(hi[k], tmax[t, k])
                clo[k] = min(clo[k], cent[t, k])
                chi[k] = max(chi[k], cent[t, k])
        node_min[node] = lo
        node_max[node] = hi
        n = e - s
        if n <= max_leaf:
            start[node] = s
            count[node] = n
            continue

        best_cost = np.inf
        best_axis = -1
        best_split = -1
        for axis in range(3):
            extent = chi[axis] - clo[axis]
            if extent <= 1e-12:
                continue
            for b in range(n_bins):
                bin_cnt[b] = 0
                for k in range(3):
                    bin_min[b, k] = np.inf
                    bin_max[b, k] = -np.inf
            scale = n_bins / extent
            for i in range(s, e):
                t = order[i]
                b = min(int((cent[t, axis] - clo[axis]) * scale), n_bins - 1)
                bin_cnt[b] += 1
                for k in range(3):
                    bin_min[b, k] = min(bin_min[b, k], tmin[t, k])
                    bin_max[b, k] = max(bin_max[b, k], tmax[t, k])
            # sweep: cost of splitting after bin b
            for b in range(n_bins - 1):
                nl = 0
                nr = 0
                llo = np.full(3, np.inf)
                lhi = np.full(3, -np.inf)
                rlo = np.full(3, np.inf)
                rhi = np.full(3, -np.inf)
                for j in range(b + 1):
                    nl += bin_cnt[j]
                    for k in range(3):
                        llo[k] = min(llo[k], bin_min[j, k])
                        lhi[k] = max(lhi[k], bin_max[j, k])
                for j in range(b + 1, n_bins):
                    nr += bin_cnt[j]
                    for k in range(3):
                        rlo[k] = min(rlo[k], bin_min[j, k])
                        rhi[k] = max(rhi[k], bin_max[j, k])
                if nl == 0 or nr == 0:
                    continue
                cost = nl * _area(llo, lhi) + nr * _area(rlo, rhi)
                if cost < best_cost:
                    best_cost = cost
                    best_axis = axis
                    best_split = b

        mid = -1
        if best_axis >= 0:
            scale = n_bins / (chi[best_axis] - clo[best_axis])
            i = s
            j = e - 1
            while i <= j:
                t = order[i]
                b = min(int((cent[t, best_axis] - clo[best_axis]) * scale), n_bins - 1)
                if b <= best_split:
                    i += 1
                else:
                    order[i] = order[j]
                    order[j] = t
                    j -= 1
            mid = i
        if mid <= s or mid >= e:
            # coincident centroids: split by count so the depth stays logarithmic
            mid = s + n // 2

        l_node = n_nodes
        r_node = n_nodes + 1
        n_nodes += 2
        left[node] = l_node
        right[node] = r_node
        stack_node[sp] = r_node
        stack_s[sp] = mid
        stack_e[sp] = e
        sp += 1
        stack_node[sp] = l_node
        stack_s[sp] = s
        stack_e[sp] = mid
        sp += 1
    return node_min[:n_nodes], node_max[:n_nodes], left[:n_nodes], right[:n_nodes], start[:n_nodes], count[:n_nodes], order


def build_bvh(triangles, max_leaf: int = MAX_LEAF, n_bins: int = N_BINS) -> BVH:
    tris = np.asarray(triangles, dtype=np.float64).reshape(-1, 3, 3)
    if len(tris) == 0:
        raise EmptyScene("cannot build a hierarchy over zero triangles")
    tmin = np.ascontiguousarray(tris.min(axis=1))
    tmax = np.ascontiguousarray(tris.max(axis=1))
    cent = np.ascontiguousarray(tris.mean(axis=1))
    return BVH(*_build(tmin, tmax, cent, max_leaf, n_bins))


def empty_bvh() -> BVH:
    z3 = np.zeros((0, 3))
    zi = np.zeros(0, np.int64)
    return BVH(z3, z3, zi, zi, zi, zi, zi)


# ---------------------------------------------------------------------------
# Traversal kernels


@nb.njit(cache=True, nogil=True, inline="always")
def intersect_tri(ox, oy, oz, dx, dy, dz, v0, e1, e2, t):
    """Moller-Trumbore; returns (hit distance or -1, u, v)."""
    px = dy * e2[t, 2] - dz * e2[t, 1]
    py = dz * e2[t, 0] - dx * e2[t, 2]
    pz = dx * e2[t, 1] - dy * e2[t, 0]
    det = e1[t, 0] * px + e1[t, 1] * py + e1[t, 2] * pz
    if abs(det) < TRI_EPS:
        return -1.0, 0.0, 0.0
    inv = 1.0 / det
    sx = ox - v0[t, 0]
    sy = oy - v0[t, 1]
    sz = oz - v0[t, 2]
    u = (sx * px + sy * py + sz * pz) * inv
    if u < 0.0 or u > 1.0:
        return -1.0, 0.0, 0.0
    qx = sy * e1[t, 2] - sz * e1[t, 1]
    qy = sz * e1[t, 0] - sx * e1[t, 2]
    qz = sx * e1[t, 1] - sy * e1[t, 0]
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return -1.0, 0.0, 0.0
    return (e2[t, 0] * qx + e2[t, 1] * qy + e2[t, 2] * qz) * inv, u, v


@nb.njit(cache=True, nogil=True, inline="always")
def _slab(ox, oy, oz, ix, iy, iz, lo, hi, n, t_min, t_max):
    t0 = (lo[n, 0] - ox) * ix
    t1 = (hi[n, 0] - ox) * ix
    tn = min(t0, t1)
    tf = max(t0, t1)
    t0 = (lo[n, 1] - oy) * iy
    t1 = (hi[n, 1] - oy) * iy
    tn = max(tn, min(t0, t1))
    tf = min(tf, max(t0, t1))
    t0 = (lo[n, 2] - oz) * iz
    t1 = (hi[n, 2] - oz) * iz
    tn = max(tn, min(t0, t1))
    tf = min(tf, max(t0, t1))
    tf *= 1.0 + 1e-12  # conservative against rounding on flat boxes
    if tn <= tf and tf >= t_min and tn <= t_max:
        return max(tn, t_min)
    return -1.0


@nb.njit(cache=True, nogil=True, inline="always")
def _inv(d):
    if d == 0.0:
        return 1e300
    return 1.0 / d


@nb.njit(cache=True, nogil=True)
def closest_hit(ox, oy, oz, dx, dy, dz, t_min, t_max, node_min, node_max, left, right, start, count, order, v0, e1, e2, stack):
    """Nearest triangle with t in (t_min, t_max): (tri id or -1, t, u, v)."""
    best_t = t_max
    best = -1
    bu = 0.0
    bv = 0.0
    if left.shape[0] == 0:
        return best, best_t, bu, bv
    ix = _inv(dx)
    iy = _inv(dy)
    iz = _inv(dz)
    sp = 0
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        n = stack[sp]
        if _slab(ox, oy, oz, ix, iy, iz, node_min, node_max, n, t_min, best_t) < -0.5:
            continue
        c = count[n]
        if c > 0:
            s = start[n]
            for k in range(s, s + c):
                t = order[k]
                th, u, v = intersect_tri(ox, oy, oz, dx, dy, dz, v0, e1, e2, t)
                if th > t_min and th < best_t:
                    best_t = th
                    best = t
                    bu = u
                    bv = v
        else:
            a = left[n]
            b = right[n]
            ta = _slab(ox, oy, oz, ix, iy, iz, node_min, node_max, a, t_min, best_t)
            tb = _slab(ox, oy, oz, ix, iy, iz, node_min, node_max, b, t_min, best_t)
            # push the farther child first so the nearer one is visited next
            if ta >= 0 and tb >= 0:
                if ta <= tb:
                    stack[sp] = b
                    stack[sp + 1] = a
                else:
                    stack[sp] = a
                    stack[sp + 1] = b
                sp += 2
            elif ta >= 0:
                stack[sp] = a
                sp += 1
            elif tb >= 0:
                stack[sp] = b
                sp += 1
    return best, best_t, bu, bv


@nb.njit(cache=True)
def nearest_hits(origins, dirs, t_min, node_min, node_max, left, right, start, count, order, v0, e1, e2):
    n = origins.shape[0]
    ids = np.empty(n, np.int64)
    ts = np.empty(n)
    stack = np.empty(STACK_SIZE, np.int64)
    for k in range(n):
        i, t, _, _ = closest_hit(
            origins[k, 0], origins[k, 1], origins[k, 2], dirs[k, 0], dirs[k, 1], dirs[k, 2],
            t_min, np.inf, node_min, node_max, left, right, start, count, order, v0, e1, e2, stack,
        )
        ids[k] = i
        ts[k] = t if i >= 0 else np.inf
    return ids, ts


@nb.njit(cache=True)
def brute_force_hits(origins, dirs, t_min, v0, e1, e2):
    n = origins.shape[0]
    ids = np.full(n, -1, np.int64)
    ts = np.full(n, np.inf)
    for k in range(n):
        for t in range(v0.shape[0]):
            th, _, _ = intersect_tri(origins[k, 0], origins[k, 1], origins[k, 2], dirs[k, 0], dirs[k, 1], dirs[k, 2], v0, e1, e2, t)
            if th > t_min and th < ts[k]:
                ts[k] = th
                ids[k] = t
    return ids, ts


def intersect_nearest(bvh: BVH, soup: TriangleSoup, origins, dirs, t_min: float = 0.0):
    """Batch nearest-hit query; returns (triangle ids, -1 on miss; distances, inf on miss)."""
    o = np.ascontiguousarray(np.atleast_2d(origins), dtype=np.float64)
    d = np.ascontiguousarray(np.atleast_2d(dirs), dtype=np.float64)
    return nearest_hits(o, d, t_min, bvh.node_min, bvh.node_max, bvh.left, bvh.right, bvh.start, bvh.count, bvh.order, soup.v0, soup.e1, soup.e2)


def intersect_brute_force(soup: TriangleSoup, origins, dirs, t_min: float = 0.0):
    o = np.ascontiguousarray(np.atleast_2d(origins), dtype=np.float64)
    d = np.ascontiguousarray(np.atleast_2d(dirs), dtype=np.float64)
    return brute_force_hits(o, d, t_min, soup.v0, soup.e1, soup.e2)
