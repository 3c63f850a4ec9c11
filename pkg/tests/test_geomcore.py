import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oculogen.errors import DegenerateFrame, DegenerateMesh
from oculogen.geomcore import (
    Ray,
    Rotation,
    SphericalCoord,
    TriMesh,
    cartesian_to_spherical,
    closest_point_on_mesh,
    compute_vertex_normals,
    icosphere,
    intersect_triangle,
    look_at,
    signed_distance,
    spherical_to_cartesian,
    write_obj,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_spherical_axis_cases():
    p = spherical_to_cartesian(SphericalCoord(0, 0, 100))
    assert np.allclose(p, [0, 0, 100], atol=1e-12)
    p = spherical_to_cartesian(SphericalCoord(90, 0, 100))
    assert np.allclose(p, [100, 0, 0], atol=1e-12)


def test_spherical_oblique_matches_scalar_script():
    # frozen from a standalone math-module evaluation of the formula
    p = spherical_to_cartesian(SphericalCoord(20, 10, 100))
    assert np.allclose(p, [33.68240888334651, 17.364817766693033, 92.54165783983234], atol=1e-12)


def test_spherical_center_offset():
    p = spherical_to_cartesian(SphericalCoord(0, 0, 5), center=(1, 2, 3))
    assert np.allclose(p, [1, 2, 8])


@given(st.floats(-179, 179), st.floats(-89.9, 89.9), st.floats(0.1, 500))
def test_spherical_round_trip(theta, phi, r):
    s = cartesian_to_spherical(spherical_to_cartesian(SphericalCoord(theta, phi, r)))
    assert abs(s.theta - theta) < 1e-6
    assert abs(s.phi - phi) < 1e-6
    assert abs(s.radius - r) < 1e-6


def test_spherical_invariants_enforced():
    with pytest.raises(ValueError):
        SphericalCoord(0, 95, 1)
    with pytest.raises(ValueError):
        SphericalCoord(0, 0, 0)


quats = st.tuples(finite, finite, finite, finite).filter(lambda q: sum(c * c for c in q) > 1e-6)
vecs = st.tuples(finite, finite, finite)


@given(quats, vecs)
def test_rotation_round_trip(q, v):
    r = Rotation(*q)
    back = r.apply(r.inverse().apply(np.array(v)))
    assert np.allclose(back, v, atol=1e-9 * max(1.0, np.abs(v).max()))


@given(quats, quats, quats)
def test_rotation_composition_associative(a, b, c):
    a, b, c = Rotation(*a), Rotation(*b), Rotation(*c)
    lhs = ((a * b) * c).as_matrix()
    rhs = (a * (b * c)).as_matrix()
    assert np.allclose(lhs, rhs, atol=1e-9)


@given(quats)
def test_rotation_unit_norm(q):
    r = Rotation(*q)
    assert abs(math.sqrt(sum(c * c for c in r.as_tuple())) - 1) < 1e-9


def test_rotation_composition_matches_matrix_product():
    a = Rotation.from_axis_angle((0, 1, 0), 30)
    b = Rotation.from_axis_angle((1, 0, 0), -15)
    v = np.array([0.3, -0.2, 0.9])
    assert np.allclose((a * b).apply(v), a.apply(b.apply(v)))
    assert np.allclose((a * b).as_matrix(), a.as_matrix() @ b.as_matrix())


def test_look_at_frontal_is_identity():
    r = look_at((0, 0, 100), (0, 0, 0), (0, 1, 0))
    assert np.allclose(r.as_matrix(), np.eye(3), atol=1e-12)


def test_look_at_side_is_quarter_turn_about_y():
    r = look_at((100, 0, 0), (0, 0, 0), (0, 1, 0))
    expected = Rotation.from_axis_angle((0, 1, 0), 90)
    assert np.allclose(r.as_matrix(), expected.as_matrix(), atol=1e-12)


def test_look_at_random_view_directions():
    rng = np.random.default_rng(4)
    for _ in range(200):
        eye = rng.normal(size=3) * 50
        target = rng.normal(size=3) * 5
        r = look_at(eye, target, (0, 1, 0))
        view = (target - eye) / np.linalg.norm(target - eye)
        assert np.allclose(r.apply([0, 0, -1]), view, atol=1e-9)
        # local +Y stays in the plane spanned by up and view
        y = r.apply([0, 1, 0])
        assert abs(np.dot(y, np.cross(view, [0, 1, 0]))) < 1e-9
        assert y[1] > 0


def test_look_at_degenerate():
    with pytest.raises(DegenerateFrame):
        look_at((0, 100, 0), (0, 0, 0), (0, 1, 0))
    with pytest.raises(DegenerateFrame):
        look_at((1, 1, 1), (1, 1, 1))


TRI = (np.array([0.0, 0, 0]), np.array([3.0, 0, 0]), np.array([0.0, 3, 0]))


def test_intersect_through_centroid():
    c = sum(TRI) / 3
    hit = intersect_triangle(Ray(c + [0, 0, 5], [0, 0, -1]), *TRI)
    assert hit is not None
    assert hit.t == pytest.approx(5.0)
    assert np.allclose(hit.barycentrics, (1 / 3, 1 / 3, 1 / 3))
    assert abs(sum(hit.barycentrics) - 1) < 1e-9
    assert np.allclose(hit.normal, [0, 0, 1])


def test_intersect_parallel_misses():
    assert intersect_triangle(Ray([0.5, 0.5, 1], [1, 0, 0]), *TRI) is None


def test_intersect_respects_interval():
    c = sum(TRI) / 3
    assert intersect_triangle(Ray(c + [0, 0, 5], [0, 0, -1], 0, 4.0), *TRI) is None


def _plane_then_inside(o, d, v0, v1, v2):
    """Independent oracle: plane hit, then same-side edge tests."""
    n = np.cross(v1 - v0, v2 - v0)
    denom = np.dot(n, d)
    if abs(denom) < 1e-14:
        return None
    t = np.dot(n, v0 - o) / denom
    if t < 0:
        return None
    p = o + t * d
    for a, b in ((v0, v1), (v1, v2), (v2, v0)):
        if np.dot(np.cross(b - a, p - a), n) < 0:
            return None
    return t


def test_intersect_against_brute_force_oracle():
    rng = np.random.default_rng(11)
    agree_hits = 0
    for _ in range(1000):
        v = rng.uniform(-1, 1, size=(3, 3))
        o = rng.uniform(-2, 2, size=3)
        target = v.mean(axis=0) + rng.normal(scale=0.6, size=3)
        d = (target - o) / np.linalg.norm(target - o)
        got = intersect_triangle(Ray(o, d), *v)
        want = _plane_then_inside(o, d, *v)
        if want is None or got is None:
            # only tolerate disagreement for points numerically on an edge
            if (want is None) != (got is None):
                p = o + (want if want is not None else got.t) * d
                b = np.linalg.lstsq(np.column_stack([v[1] - v[0], v[2] - v[0]]), p - v[0], rcond=None)[0]
                assert min(b[0], b[1], 1 - b.sum()) > -1e-9 and min(b[0], b[1], 1 - b.sum()) < 1e-9
            continue
        agree_hits += 1
        assert abs(got.t - want) < 1e-7
    assert agree_hits > 100


def test_icosphere_is_watertight_for_center_rays():
    mesh = icosphere(3)
    tris = mesh.triangles()
    rng = np.random.default_rng(2)
    leaks = 0
    for d in rng.normal(size=(10_000, 3)):
        d /= np.linalg.norm(d)
        # vectorised Moller-Trumbore with the same edge slack as intersect_triangle
        v0 = tris[:, 0]
        e1, e2 = tris[:, 1] - v0, tris[:, 2] - v0
        p = np.cross(d, e2)
        det = np.einsum("ij,ij->i", e1, p)
        s = -v0
        u = np.einsum("ij,ij->i", s, p) / det
        q = np.cross(s, e1)
        v = (q @ d) / det
        ok = (u >= -1e-12) & (v >= -1e-12) & (u + v <= 1 + 1e-12)
        leaks += not ok.any()
    assert leaks == 0


def test_icosphere_normals_match_position():
    mesh = compute_vertex_normals(icosphere(3))
    cosang = np.einsum("ij,ij->i", mesh.normals, mesh.vertices / np.linalg.norm(mesh.vertices, axis=1)[:, None])
    assert np.degrees(np.arccos(np.clip(cosang, -1, 1))).max() < 2.0


def test_flat_quad_normals():
    quad = TriMesh(
        np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float),
        np.array([[0, 1, 2], [0, 2, 3]]),
    )
    n = compute_vertex_normals(quad).normals
    assert np.allclose(n, [0, 0, 1])


def test_isolated_vertex_is_degenerate():
    m = TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], float), np.array([[0, 1, 2]]))
    with pytest.raises(DegenerateMesh):
        compute_vertex_normals(m)


def test_validate_rejects_bad_meshes():
    v = np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0]], float)
    with pytest.raises(DegenerateMesh):
        TriMesh(v, np.array([[0, 1, 2]])).validate()
    with pytest.raises(DegenerateMesh):
        TriMesh(v, np.array([[0, 1, 3]])).validate()


def test_closed_mesh_bookkeeping():
    assert icosphere(2).is_closed()
    open_mesh = TriMesh(np.eye(3), np.array([[0, 1, 2]]))
    assert not open_mesh.is_closed()


def test_closest_point_and_signed_distance():
    sphere = icosphere(4, radius=2.0)
    cp, d, _ = closest_point_on_mesh([0, 0, 5], sphere)
    assert d == pytest.approx(3.0, abs=0.01)
    sd = signed_distance([[0, 0, 0], [0, 0, 3], [0.3, 1.0, -0.2]], sphere)
    assert sd[0] == pytest.approx(-2.0, abs=0.01)
    assert sd[1] == pytest.approx(1.0, abs=0.01)
    assert sd[2] < 0


def test_closest_point_matches_dense_sampling():
    rng = np.random.default_rng(9)
    tri = rng.normal(size=(3, 3))
    mesh = TriMesh(tri, np.array([[0, 1, 2]]))
    # dense barycentric sampling as a crude oracle
    a, b = np.meshgrid(np.linspace(0, 1, 301), np.linspace(0, 1, 301))
    keep = a + b <= 1
    pts = tri[0] + a[keep, None] * (tri[1] - tri[0]) + b[keep, None] * (tri[2] - tri[0])
    for q in rng.normal(scale=2, size=(30, 3)):
        _, d, _ = closest_point_on_mesh(q, mesh)
        dense = np.linalg.norm(pts - q, axis=1).min()
        assert d <= dense + 1e-12
        assert d > dense - 0.02


def test_write_obj(tmp_path):
    mesh = icosphere(1)
    out = write_obj(tmp_path / "s.obj", mesh, polylines=[np.zeros((3, 3))])
    text = out.read_text().splitlines()
    assert sum(l.startswith("v ") for l in text) == mesh.n_vertices + 3
    assert sum(l.startswith("vn ") for l in text) == mesh.n_vertices
    assert sum(l.startswith("vt ") for l in text) == mesh.n_vertices
    assert sum(l.startswith("f ") for l in text) == mesh.n_faces
    assert text[-1].startswith("l ")
