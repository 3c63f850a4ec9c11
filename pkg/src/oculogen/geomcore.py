"""Vectors, rotations, spherical coordinates, triangle meshes and ray queries.

Conventions shared by the whole package: millimetre units, eyeball centre at
the origin of the head frame, +Z pointing from the eye towards the eye-contact
camera, +Y up.  Angles cross module boundaries in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import DegenerateFrame, DegenerateMesh

UNIT_TOL = 1e-9


def vec3(x, y, z) -> np.ndarray:
    return np.array([x, y, z], dtype=np.float64)


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / n


def unit_vec3(v) -> np.ndarray:
    """Normalize ``v`` and check the result really is unit length."""
    u = normalize(v)
    if not np.all(np.isfinite(u)) or abs(np.linalg.norm(u) - 1.0) > UNIT_TOL:
        raise ValueError(f"cannot build a unit vector from {v!r}")
    return u


# ---------------------------------------------------------------------------
# Spherical coordinates


@dataclass(frozen=True)
class SphericalCoord:
    theta: float  # azimuth, degrees
    phi: float  # elevation, degrees
    radius: float  # mm

    def __post_init__(self):
        if not -90.0 <= self.phi <= 90.0:
            raise ValueError(f"elevation {self.phi} outside [-90, 90]")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")


def spherical_to_cartesian(s: SphericalCoord, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    th = math.radians(s.theta)
    ph = math.radians(s.phi)
    c = np.asarray(center, dtype=np.float64)
    return c + s.radius * np.array(
        [math.cos(ph) * math.sin(th), math.sin(ph), math.cos(ph) * math.cos(th)]
    )


def cartesian_to_spherical(p, center=(0.0, 0.0, 0.0)) -> SphericalCoord:
    d = np.asarray(p, dtype=np.float64) - np.asarray(center, dtype=np.float64)
    r = float(np.linalg.norm(d))
    phi = math.degrees(math.asin(max(-1.0, min(1.0, d[1] / r))))
    theta = math.degrees(math.atan2(d[0], d[2]))
    return SphericalCoord(theta, phi, r)


# ---------------------------------------------------------------------------
# Rotations


@dataclass(frozen=True)
class Rotation:
    """Unit quaternion ``w + xi + yj + zk``."""

    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if n == 0:
            raise ValueError("zero quaternion")
        if abs(n - 1.0) > 1e-12:
            object.__setattr__(self, "w", self.w / n)
            object.__setattr__(self, "x", self.x / n)
            object.__setattr__(self, "y", self.y / n)
            object.__setattr__(self, "z", self.z / n)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis, angle_deg: float) -> "Rotation":
        a = unit_vec3(axis)
        h = math.radians(angle_deg) / 2.0
        s = math.sin(h)
        return cls(math.cos(h), a[0] * s, a[1] * s, a[2] * s)

    @classmethod
    def from_matrix(cls, m) -> "Rotation":
        m = np.asarray(m, dtype=np.float64)
        tr = m[0, 0] + m[1, 1] + m[2, 2]
        if tr > 0:
            s = math.sqrt(tr + 1.0) * 2
            q = (0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s)
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
            q = ((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
        elif m[1, 1] > m[2, 2]:
            s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
            q = ((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s)
        else:
            s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
            q = ((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s)
        if q[0] < 0:
            q = tuple(-c for c in q)
        return cls(*q)

    def __mul__(self, other: "Rotation") -> "Rotation":
        """Composition: ``(a * b).apply(v) == a.apply(b.apply(v))``."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Rotation(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def inverse(self) -> "Rotation":
        return Rotation(self.w, -self.x, -self.y, -self.z)

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def apply(self, v) -> np.ndarray:
        """Rotate a single vector (3,) or a stack of vectors (N, 3)."""
        v = np.asarray(v, dtype=np.float64)
        return v @ self.as_matrix().T

    def angle_deg(self) -> float:
        return math.degrees(2.0 * math.acos(max(-1.0, min(1.0, abs(self.w)))))

    def as_tuple(self):
        return (self.w, self.x, self.y, self.z)


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> Rotation:
    """Rotation taking the local camera frame (looking down -Z, +Y up) to world.

    Local -Z maps to the view direction, local +Y stays in the plane spanned
    by ``up`` and the view direction, local +X is the camera's right.
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    view = target - eye
    dist = np.linalg.norm(view)
    if dist == 0:
        raise DegenerateFrame("eye and target coincide")
    fwd = view / dist
    up = normalize(up)
    right = np.cross(fwd, up)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        raise DegenerateFrame("up vector is parallel to the view direction")
    right /= rn
    true_up = np.cross(right, fwd)
    m = np.column_stack([right, true_up, -fwd])
    return Rotation.from_matrix(m)


# ---------------------------------------------------------------------------
# Rays and triangles


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        object.__setattr__(self, "direction", unit_vec3(self.direction))
        if self.t_min < 0 or not self.t_min < self.t_max:
            raise ValueError("ray interval must satisfy 0 <= t_min < t_max")

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


class Hit(NamedTuple):
    t: float
    barycentrics: tuple  # weights of (v0, v1, v2)
    normal: np.ndarray  # geometric, from the winding order


# slack keeps rays through shared edges from slipping between neighbours
BARY_EPS = 1e-12


def intersect_triangle(ray: Ray, v0, v1, v2) -> Optional[Hit]:
    """Moller-Trumbore ray/triangle test."""
    v0 = np.asarray(v0, dtype=np.float64)
    e1 = np.asarray(v1, dtype=np.float64) - v0
    e2 = np.asarray(v2, dtype=np.float64) - v0
    d = ray.direction
    p = np.cross(d, e2)
    det = float(np.dot(e1, p))
    if abs(det) < 1e-14:
        return None
    inv = 1.0 / det
    s = ray.origin - v0
    u = float(np.dot(s, p)) * inv
    if u < -BARY_EPS or u > 1.0 + BARY_EPS:
        return None
    q = np.cross(s, e1)
    v = float(np.dot(d, q)) * inv
    if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
        return None
    t = float(np.dot(e2, q)) * inv
    if t < ray.t_min or t > ray.t_max:
        return None
    n = np.cross(e1, e2)
    return Hit(t, (1.0 - u - v, u, v), n / np.linalg.norm(n))


# ---------------------------------------------------------------------------
# Triangle meshes


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray  # (N, 3) float64, mm
    faces: np.ndarray  # (F, 3) int64
    normals: Optional[np.ndarray] = None  # (N, 3) unit
    uvs: Optional[np.ndarray] = None  # (N, 2) in [0, 1]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        f = np.ascontiguousarray(self.faces, dtype=np.int64)
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        for name in ("normals", "uvs"):
            a = getattr(self, name)
            if a is not None:
                a = np.ascontiguousarray(a, dtype=np.float64)
                a.setflags(write=False)
                object.__setattr__(self, name, a)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        """(F, 3, 3) corner positions."""
        return self.vertices[self.faces]

    def face_cross(self) -> np.ndarray:
        t = self.triangles()
        return np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_cross(), axis=1)

    def face_normals(self) -> np.ndarray:
        c = self.face_cross()
        return c / np.linalg.norm(c, axis=1, keepdims=True)

    def with_vertices(self, vertices, normals=None) -> "TriMesh":
        return replace(self, vertices=vertices, normals=normals)

    def transformed(self, rot: Rotation, offset=(0.0, 0.0, 0.0)) -> "TriMesh":
        m = rot.as_matrix()
        v = self.vertices @ m.T + np.asarray(offset, dtype=np.float64)
        n = None if self.normals is None else self.normals @ m.T
        return replace(self, vertices=v, normals=n)

    def validate(self, min_area: float = 1e-12) -> None:
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= self.n_vertices):
            raise DegenerateMesh("face index out of range")
        areas = self.face_areas()
        if np.any(areas <= min_area):
            raise DegenerateMesh(f"{int(np.sum(areas <= min_area))} degenerate faces")
        if self.uvs is not None and (self.uvs.min() < 0 or self.uvs.max() > 1):
            raise DegenerateMesh("uv outside [0, 1]")

    def edge_face_counts(self) -> dict:
        counts: dict = {}
        for a, b, c in self.faces:
            for e in ((a, b), (b, c), (c, a)):
                key = (min(e), max(e))
                counts[key] = counts.get(key, 0) + 1
        return counts

    def is_closed(self) -> bool:
        return all(n == 2 for n in self.edge_face_counts().values())


def compute_vertex_normals(mesh: TriMesh) -> TriMesh:
    """Area-weighted average of incident face normals."""
    cross = mesh.face_cross()  # length = 2 * area, so this is area weighting
    acc = np.zeros_like(mesh.vertices)
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], cross)
    norm = np.linalg.norm(acc, axis=1)
    bad = norm <= 1e-300
    if np.any(bad):
        raise DegenerateMesh(f"{int(bad.sum())} vertices with zero incident area")
    return replace(mesh, normals=acc / norm[:, None])


def merge_meshes(meshes: Sequence[TriMesh]) -> TriMesh:
    verts, faces, norms, uvs = [], [], [], []
    base = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + base)
        norms.append(m.normals if m.normals is not None else np.zeros_like(m.vertices))
        uvs.append(m.uvs if m.uvs is not None else np.zeros((m.n_vertices, 2)))
        base += m.n_vertices
    return TriMesh(np.vstack(verts), np.vstack(faces), np.vstack(norms), np.vstack(uvs))


def icosphere(subdivisions: int = 3, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    unit = np.array(verts)
    v = unit * radius + np.asarray(center, dtype=np.float64)
    uv = np.column_stack(
        [
            (np.arctan2(unit[:, 0], unit[:, 2]) / (2 * np.pi)) % 1.0,
            np.arccos(np.clip(unit[:, 1], -1, 1)) / np.pi,
        ]
    )
    return TriMesh(v, np.array(faces), unit.copy(), uv)


# ---------------------------------------------------------------------------
# Proximity queries (vectorised over triangles)


def closest_points_on_triangles(p, tris) -> np.ndarray:
    """Closest point on each triangle of ``tris`` (F, 3, 3) to point ``p``."""
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v_in = vb / denom
        w_in = vc / denom
        res = a + ab * v_in[:, None] + ac * w_in[:, None]

        # edge regions
        v_ab = d1 / (d1 - d3)
        m = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
        res[m] = (a + ab * v_ab[:, None])[m]
        w_ac = d2 / (d2 - d6)
        m = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
        res[m] = (a + ac * w_ac[:, None])[m]
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        m = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
        res[m] = (b + (c - b) * w_bc[:, None])[m]

    # vertex regions last so they win ties
    m = (d1 <= 0) & (d2 <= 0)
    res[m] = a[m]
    m = (d3 >= 0) & (d4 <= d3)
    res[m] = b[m]
    m = (d6 >= 0) & (d5 <= d6)
    res[m] = c[m]
    return res


def closest_point_on_mesh(p, mesh: TriMesh):
    """Return (closest point, distance, face index) for a single query point."""
    p = np.asarray(p, dtype=np.float64)
    cps = closest_points_on_triangles(p, mesh.triangles())
    d = np.linalg.norm(cps - p, axis=1)
    i = int(np.argmin(d))
    return cps[i], float(d[i]), i


def _ray_mesh_crossings(origin, direction, tris) -> np.ndarray:
    """All positive ray parameters where the ray crosses ``tris`` (vectorised)."""
    v0 = tris[:, 0]
    e1 = tris[:, 1] - v0
    e2 = tris[:, 2] - v0
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-14
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = origin - v0
    u = np.einsum("ij,ij->i", s, pvec) * inv
    q = np.cross(s, e1)
    v = (q @ direction) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 1e-12)
    return t[hit]


def ray_mesh_hits(origin, direction, mesh: TriMesh) -> np.ndarray:
    """Sorted positive ray parameters of every crossing with ``mesh``."""
    return np.sort(
        _ray_mesh_crossings(
            np.asarray(origin, dtype=np.float64), normalize(direction), mesh.triangles()
        )
    )


# irrational-ish direction avoids grazing structured meshes along their axes
_PARITY_DIR = normalize(np.array([0.5773, 0.6011, 0.5527]))


def signed_distance(points, mesh: TriMesh) -> np.ndarray:
    """Distance to a closed mesh, negative inside (sign from ray parity)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    tris = mesh.triangles()
    out = np.empty(len(points))
    for i, p in enumerate(points):
        cps = closest_points_on_triangles(p, tris)
        d = float(np.min(np.linalg.norm(cps - p, axis=1)))
        inside = len(_ray_mesh_crossings(p, _PARITY_DIR, tris)) % 2 == 1
        out[i] = -d if inside else d
    return out


def dihedral_angles(mesh: TriMesh, edges=None) -> dict:
    """Angle (degrees) between the normals of the two faces sharing each edge."""
    fn = mesh.face_normals()
    owners: dict = {}
    for fi, (a, b, c) in enumerate(mesh.faces):
        for e in ((a, b), (b, c), (c, a)):
            owners.setdefault((min(e), max(e)), []).append(fi)
    wanted = owners.keys() if edges is None else [(min(e), max(e)) for e in edges]
    out = {}
    for e in wanted:
        fs = owners.get(e, [])
        if len(fs) == 2:
            c = float(np.clip(np.dot(fn[fs[0]], fn[fs[1]]), -1.0, 1.0))
            out[e] = math.degrees(math.acos(c))
    return out


# ---------------------------------------------------------------------------
# Debug export


def write_obj(path, mesh: Optional[TriMesh] = None, polylines: Sequence[np.ndarray] = ()) -> Path:
    """Wavefront OBJ with v/vn/vt/f records, plus ``l`` records for polylines."""
    path = Path(path)
    lines = ["# oculogen debug export"]
    base = 1
    if mesh is not None:
        lines += [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in mesh.vertices]
        if mesh.normals is not None:
            lines += [f"vn {x:.6f} {y:.6f} {z:.6f}" for x, y, z in mesh.normals]
        if mesh.uvs is not None:
            lines += [f"vt {u:.6f} {v:.6f}" for u, v in mesh.uvs]
        for f in mesh.faces + 1:
            if mesh.normals is not None and mesh.uvs is not None:
                lines.append("f " + " ".join(f"{i}/{i}/{i}" for i in f))
            elif mesh.normals is not None:
                lines.append("f " + " ".join(f"{i}//{i}" for i in f))
            else:
                lines.append("f " + " ".join(str(i) for i in f))
        base += mesh.n_vertices
    for pl in polylines:
        pl = np.asarray(pl)
        lines += [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in pl]
        lines.append("l " + " ".join(str(base + i) for i in range(len(pl))))
        base += len(pl)
    path.write_text("\n".join(lines) + "\n")
    return path
