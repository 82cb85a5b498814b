import math

import numpy as np
import pytest

from cvtremesh import shapes
from cvtremesh.mesh import (MeshError, TriangleMesh, compute_face_normals,
                            load_mesh, point_triangle_closest, sample_uniform,
                            save_mesh)

SQUARE_OBJ = """\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
f 1 2 3
f 1 3 4
"""


def ring_oracle(faces, t, depth):
    """Brute-force vertex-sharing scan, the reference for face_ring."""
    fs = [set(ft) for ft in faces.tolist()]
    r1 = {g for g in range(len(fs)) if g != t and fs[g] & fs[t]}
    if depth == 1:
        return r1
    r2 = set(r1)
    for g in r1:
        r2 |= {h for h in range(len(fs)) if fs[h] & fs[g]}
    r2.discard(t)
    return r2


class TestLoadSave:
    def test_square_obj(self, tmp_path):
        p = tmp_path / "sq.obj"
        p.write_text(SQUARE_OBJ)
        m = load_mesh(p)
        assert len(m.vertices) == 4
        assert len(m.faces) == 2
        np.testing.assert_array_equal(m.faces, [[0, 1, 2], [0, 2, 3]])

    def test_missing_file(self, tmp_path):
        with pytest.raises(MeshError, match="no such file"):
            load_mesh(tmp_path / "nope.obj")

    def test_out_of_range_index_names_face(self, tmp_path):
        p = tmp_path / "bad.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 9\n")
        with pytest.raises(MeshError, match="face 0"):
            load_mesh(p)

    def test_zero_area_face_names_face(self, tmp_path):
        p = tmp_path / "deg.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nf 1 2 4\nf 1 2 3\n")
        with pytest.raises(MeshError, match="face 1"):
            load_mesh(p)

    def test_quad_fan_triangulated(self, tmp_path):
        p = tmp_path / "quad.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        m = load_mesh(p)
        assert len(m.faces) == 2
        np.testing.assert_array_equal(m.faces, [[0, 1, 2], [0, 2, 3]])

    def test_slash_and_negative_indices(self, tmp_path):
        p = tmp_path / "mixed.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2/2 -1\n")
        m = load_mesh(p)
        np.testing.assert_array_equal(m.faces, [[0, 1, 2]])

    def test_roundtrip_exact_for_decimal_coordinates(self, tmp_path):
        p = tmp_path / "sq.obj"
        p.write_text(SQUARE_OBJ)
        m = load_mesh(p)
        q = tmp_path / "rt.obj"
        save_mesh(m, q)
        m2 = load_mesh(q)
        np.testing.assert_array_equal(m.vertices, m2.vertices)
        np.testing.assert_array_equal(m.faces, m2.faces)

    def test_roundtrip_text_reaches_fixed_point(self, tmp_path):
        # Arbitrary coordinates settle after one save/load cycle: the 9-digit
        # decimal text re-saves byte-identically.
        m = shapes.icosphere(1)
        p1 = tmp_path / "a.obj"
        p2 = tmp_path / "b.obj"
        save_mesh(m, p1)
        save_mesh(load_mesh(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
        m1, m2 = load_mesh(p1), load_mesh(p2)
        np.testing.assert_array_equal(m1.vertices, m2.vertices)
        np.testing.assert_array_equal(m1.faces, m2.faces)

    def test_save_empty_mesh_rejected(self, tmp_path):
        m = TriangleMesh(vertices=np.zeros((3, 3)), faces=np.empty((0, 3), dtype=np.int64))
        target = tmp_path / "never.obj"
        with pytest.raises(MeshError):
            save_mesh(m, target)
        assert not target.exists()

    def test_paper_scale_mesh_loads_and_validates(self, tmp_path):
        # Closed genus-0 triangulation at the bunny-class size: 35292
        # vertices forces 2V-4 = 70580 facets.  Built by splitting edges of
        # an icosphere until the counts match (each split: +1 vertex, +2
        # faces, manifold preserved).
        from collections import deque

        target_v = 35292
        base = shapes.icosphere(5)
        verts = [tuple(p) for p in base.vertices]
        faces = base.faces.tolist()
        edge_to_faces = {}

        def face_edges(fl):
            a, b, c = fl
            return (
                (a, b) if a < b else (b, a),
                (b, c) if b < c else (c, b),
                (c, a) if c < a else (a, c),
            )

        def register(fi):
            for e in face_edges(faces[fi]):
                edge_to_faces.setdefault(e, set()).add(fi)

        def unregister(fi):
            for e in face_edges(faces[fi]):
                edge_to_faces[e].discard(fi)

        for fi in range(len(faces)):
            register(fi)
        queue = deque(sorted(edge_to_faces))
        while len(verts) < target_v:
            e = queue.popleft()
            adj = edge_to_faces.get(e)
            if adj is None or len(adj) != 2:
                continue
            u, v = e
            mi = len(verts)
            verts.append(tuple((np.array(verts[u]) + np.array(verts[v])) / 2.0))
            for fi in sorted(adj):
                unregister(fi)
                new1 = [mi if x == v else x for x in faces[fi]]
                new2 = [mi if x == u else x for x in faces[fi]]
                faces[fi] = new1
                register(fi)
                faces.append(new2)
                register(len(faces) - 1)
            edge_to_faces.pop(e, None)
            queue.append((u, mi) if u < mi else (mi, u))
            queue.append((v, mi) if v < mi else (mi, v))
        mesh = TriangleMesh.from_arrays(np.array(verts), np.array(faces, dtype=np.int64))
        assert len(mesh.vertices) == 35292
        assert len(mesh.faces) == 70580
        p = tmp_path / "big.obj"
        save_mesh(mesh, p)
        again = load_mesh(p)
        assert len(again.vertices) == 35292
        assert len(again.faces) == 70580


class TestNormals:
    def test_right_hand_rule_example(self):
        m = TriangleMesh.from_arrays(
            np.array([(0, 0, 0), (1, 0, 0), (0, 1, 0)], float), np.array([[0, 1, 2]])
        )
        np.testing.assert_allclose(m.face_normals[0], [0, 0, -1], atol=1e-15)

    def test_unit_length_and_orthogonality(self, ico2_mesh):
        m = ico2_mesh
        norms = np.linalg.norm(m.face_normals, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-9)
        v, f = m.vertices, m.faces
        for edge in (v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]]):
            dots = np.abs(np.einsum("ij,ij->i", m.face_normals, edge))
            assert dots.max() < 1e-9

    def test_newell_oracle_up_to_sign(self):
        # Newell's formula gives the polygon normal independently; the two
        # must be parallel (sign conventions may differ).
        rng = np.random.default_rng(5)
        for _ in range(200):
            tri = rng.normal(size=(3, 3))
            area = 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0]))
            if area < 1e-3:
                continue
            m = TriangleMesh.from_arrays(tri, np.array([[0, 1, 2]]))
            newell = np.zeros(3)
            for i in range(3):
                p, q = tri[i], tri[(i + 1) % 3]
                newell[0] += (p[1] - q[1]) * (p[2] + q[2])
                newell[1] += (p[2] - q[2]) * (p[0] + q[0])
                newell[2] += (p[0] - q[0]) * (p[1] + q[1])
            newell /= np.linalg.norm(newell)
            cross = np.cross(m.face_normals[0], newell)
            assert np.linalg.norm(cross) < 1e-9

    def test_degenerate_face_rejected(self):
        v = np.array([(0, 0, 0), (1, 0, 0), (2, 0, 0), (0, 1, 0)], float)
        with pytest.raises(MeshError, match="face 0"):
            TriangleMesh.from_arrays(v, np.array([[0, 1, 2], [0, 1, 3]]))

    def test_outward_sign_cube(self, cube_mesh):
        m = cube_mesh
        for t in range(len(m.faces)):
            assert float(np.dot(m.outward_normal(t), m.face_centroids[t])) > 0


class TestFaceRing:
    def test_isolated_triangle_empty(self):
        m = TriangleMesh.from_arrays(
            np.array([(0, 0, 0), (1, 0, 0), (0, 1, 0)], float), np.array([[0, 1, 2]])
        )
        assert m.face_ring(0, 1) == set()
        assert m.face_ring(0, 2) == set()

    def test_icosahedron_ring_sizes(self):
        # Frozen from the brute-force oracle: every icosahedron face has 9
        # vertex-sharing neighbors and an 18-face two-ring.
        v, f = shapes.icosahedron()
        m = TriangleMesh.from_arrays(v, f)
        for t in range(len(f)):
            r1 = m.face_ring(t, 1)
            r2 = m.face_ring(t, 2)
            assert r1 == ring_oracle(m.faces, t, 1)
            assert r2 == ring_oracle(m.faces, t, 2)
            assert len(r1) == 9
            assert len(r2) == 18
            assert r2 >= r1

    def test_matches_oracle_on_icosphere(self, ico2_mesh):
        m = ico2_mesh
        assert len(m.faces) <= 500
        for t in range(0, len(m.faces), 17):
            assert m.face_ring(t, 1) == ring_oracle(m.faces, t, 1)
            assert m.face_ring(t, 2) == ring_oracle(m.faces, t, 2)

    def test_bad_index(self, square_mesh):
        with pytest.raises(MeshError):
            square_mesh.face_ring(99, 1)


def grid_search_closest(p, tri, rounds=4, res=120):
    """Zooming barycentric grid search; independent oracle for the closest
    point on a triangle."""
    a, b, c = (np.asarray(x, float) for x in tri)
    lo_u, hi_u, lo_v, hi_v = 0.0, 1.0, 0.0, 1.0
    best = None
    for _ in range(rounds):
        us = np.linspace(lo_u, hi_u, res)
        vs = np.linspace(lo_v, hi_v, res)
        uu, vv = np.meshgrid(us, vs)
        mask = uu + vv <= 1.0
        uu, vv = uu[mask], vv[mask]
        pts = a + uu[:, None] * (b - a) + vv[:, None] * (c - a)
        d = np.linalg.norm(pts - p, axis=1)
        i = int(np.argmin(d))
        best = d[i]
        cu, cv = uu[i], vv[i]
        span_u = (hi_u - lo_u) / res * 4
        span_v = (hi_v - lo_v) / res * 4
        lo_u, hi_u = max(0, cu - span_u), min(1, cu + span_u)
        lo_v, hi_v = max(0, cv - span_v), min(1, cv + span_v)
    return best


class TestPointTriangleClosest:
    TRI = (np.array([0.0, 0.0, 0.0]), np.array([2.0, 0.0, 0.0]), np.array([0.0, 2.0, 0.0]))

    def test_above_interior(self):
        q, d = point_triangle_closest(np.array([0.5, 0.5, 3.0]), self.TRI)
        np.testing.assert_allclose(q, [0.5, 0.5, 0.0], atol=1e-15)
        assert d == pytest.approx(3.0)

    def test_at_vertex(self):
        q, d = point_triangle_closest(self.TRI[1], self.TRI)
        np.testing.assert_allclose(q, self.TRI[1])
        assert d == 0.0

    def test_edge_and_vertex_regions(self):
        q, d = point_triangle_closest(np.array([1.0, -2.0, 0.0]), self.TRI)
        np.testing.assert_allclose(q, [1.0, 0.0, 0.0], atol=1e-15)
        assert d == pytest.approx(2.0)
        q, d = point_triangle_closest(np.array([-3.0, -3.0, 0.0]), self.TRI)
        np.testing.assert_allclose(q, [0.0, 0.0, 0.0], atol=1e-15)

    def test_grid_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            tri = rng.normal(size=(3, 3))
            if 0.5 * np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0])) < 0.05:
                continue
            p = rng.normal(size=3) * 2
            _, d = point_triangle_closest(p, tri)
            d_ref = grid_search_closest(p, tri)
            assert d <= d_ref + 1e-9
            assert abs(d - d_ref) < 1e-6


class TestSampling:
    def test_sites_inside_single_triangle(self):
        m = TriangleMesh.from_arrays(
            np.array([(0, 0, 0), (4, 0, 0), (0, 4, 0)], float), np.array([[0, 1, 2]])
        )
        s = sample_uniform(m, 4, seed=0)
        assert s.count == 4
        assert (s.host_facet == 0).all()
        s.validate(m)

    def test_too_few_sites_rejected(self, square_mesh):
        with pytest.raises(ValueError):
            sample_uniform(square_mesh, 3, seed=0)

    def test_area_weighting_binomial(self):
        # 9:1 area split; face-0 draw count is Binomial(10000, 0.9).
        v = np.array([(0, 0, 0), (9, 0, 0), (0, 2, 0), (-1, 0, 0), (0, -2, 0)], float)
        f = np.array([[0, 1, 2], [0, 3, 4]])
        m = TriangleMesh.from_arrays(v, f)
        assert m.face_areas[0] / m.face_areas[1] == pytest.approx(9.0)
        s = sample_uniform(m, 10000, seed=123)
        n0 = int((s.host_facet == 0).sum())
        sigma = math.sqrt(10000 * 0.9 * 0.1)
        assert abs(n0 - 9000) <= 3 * sigma

    def test_deterministic_for_seed(self, ico2_mesh):
        a = sample_uniform(ico2_mesh, 50, seed=9)
        b = sample_uniform(ico2_mesh, 50, seed=9)
        np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_array_equal(a.host_facet, b.host_facet)

    def test_chi_square_convergence(self):
        from scipy.stats import chisquare

        m = shapes.flat_grid(2, 2)  # 8 faces
        n = 100000
        s = sample_uniform(m, n, seed=4)
        counts = np.bincount(s.host_facet, minlength=len(m.faces))
        expected = m.face_areas / m.face_areas.sum() * n
        _, p = chisquare(counts, expected)
        assert p > 0.01

    def test_sites_on_surface(self, ico2_mesh):
        s = sample_uniform(ico2_mesh, 200, seed=1)
        s.validate(ico2_mesh)
