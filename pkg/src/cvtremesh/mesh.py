"""Triangle mesh container, OBJ I/O, adjacency queries and surface sampling."""

import os
from dataclasses import dataclass, field

import numpy as np


class MeshError(Exception):
    """Invalid mesh topology, geometry, or OBJ content."""


# Faces with area below DEGENERATE_AREA_FACTOR * bbox_diag^2 are rejected.
DEGENERATE_AREA_FACTOR = 1e-12


@dataclass
class TriangleMesh:
    """Indexed triangle surface with per-face normals and vertex adjacency.

    Immutable after construction; all derived fields are filled by
    :func:`TriangleMesh.from_arrays`.  ``face_normals`` follow the
    right-hand rule on the vertex order (v3-v1) x (v2-v1); ``outward_sign``
    converts them to outward-pointing normals for closed meshes.
    """

    vertices: np.ndarray          # (V, 3) float64
    faces: np.ndarray             # (F, 3) int64
    face_normals: np.ndarray = field(default=None, repr=False)
    vertex_to_faces: list = field(default=None, repr=False)
    bbox_diag: float = 0.0
    outward_sign: float = -1.0
    face_centroids: np.ndarray = field(default=None, repr=False)
    face_areas: np.ndarray = field(default=None, repr=False)

    @classmethod
    def from_arrays(cls, vertices, faces, validate=True):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError("vertices must be an (n, 3) array")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError("faces must be an (m, 3) array")
        mesh = cls(vertices=vertices, faces=faces)
        mesh.bbox_diag = _bbox_diag(vertices)
        if validate:
            mesh._validate_topology()
        mesh.face_normals, mesh.face_areas = compute_face_normals(mesh, return_areas=True)
        mesh.face_centroids = vertices[faces].mean(axis=1)
        mesh.vertex_to_faces = _build_vertex_to_faces(len(vertices), faces)
        mesh.outward_sign = _outward_sign(vertices, faces)
        return mesh

    def _validate_topology(self):
        nv = len(self.vertices)
        if nv < 3 or len(self.faces) < 1:
            raise MeshError("mesh needs at least 3 vertices and 1 face")
        if not np.isfinite(self.vertices).all():
            raise MeshError("non-finite vertex coordinate")
        bad = np.nonzero((self.faces < 0) | (self.faces >= nv))[0]
        if bad.size:
            t = int(bad[0])
            raise MeshError(f"face {t} references vertex index out of range: {self.faces[t].tolist()}")
        f = self.faces
        dup = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        if dup.any():
            t = int(np.nonzero(dup)[0][0])
            raise MeshError(f"face {t} has repeated vertex indices: {f[t].tolist()}")

    def face_points(self, t):
        return self.vertices[self.faces[t]]

    def outward_normal(self, t):
        return self.outward_sign * self.face_normals[t]

    def face_ring(self, facet, depth):
        """Faces sharing at least one vertex with ``facet`` (depth 1), or with
        any depth-1 face as well (depth 2).  ``facet`` itself is excluded."""
        if not 0 <= facet < len(self.faces):
            raise MeshError(f"face index {facet} out of range")
        if depth not in (1, 2):
            raise ValueError("depth must be 1 or 2")
        v2f = self.vertex_to_faces
        ring = set()
        for v in self.faces[facet]:
            ring.update(v2f[v])
        if depth == 2:
            for g in list(ring):
                for v in self.faces[g]:
                    ring.update(v2f[v])
        ring.discard(int(facet))
        return ring

    def signed_volume(self):
        v = self.vertices
        a, b, c = v[self.faces[:, 0]], v[self.faces[:, 1]], v[self.faces[:, 2]]
        return float(np.einsum("ij,ij->i", np.cross(a, b), c).sum() / 6.0)


@dataclass
class SiteSet:
    """Sample sites constrained to the mesh surface, one host facet each."""

    positions: np.ndarray    # (n, 3) float64
    host_facet: np.ndarray   # (n,) int64

    @property
    def count(self):
        return len(self.positions)

    def copy(self):
        return SiteSet(self.positions.copy(), self.host_facet.copy())

    def validate(self, mesh, tol_factor=1e-7):
        """Check every site sits on its host facet (plane + barycentric)."""
        tol = tol_factor * mesh.bbox_diag
        for i in range(self.count):
            t = int(self.host_facet[i])
            p = self.positions[i]
            n = mesh.face_normals[t]
            a = mesh.vertices[mesh.faces[t, 0]]
            if abs(float(np.dot(n, p - a))) > tol:
                raise MeshError(f"site {i} off the plane of facet {t}")
            u, v, w = _barycentric(p, mesh.face_points(t))
            if min(u, v, w) < -1e-6:
                raise MeshError(f"site {i} outside facet {t}: bary=({u:.3g},{v:.3g},{w:.3g})")


def _bbox_diag(vertices):
    return float(np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0)))


def _build_vertex_to_faces(nv, faces):
    v2f = [[] for _ in range(nv)]
    for t, (i, j, k) in enumerate(faces):
        v2f[i].append(t)
        v2f[j].append(t)
        v2f[k].append(t)
    return v2f


def _outward_sign(vertices, faces):
    # Sign that turns the stored right-hand-rule normals into outward ones,
    # decided by the signed volume of the (assumed closed) mesh.  Open meshes
    # fall back to -1, matching the common counter-clockwise convention.
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    vol = float(np.einsum("ij,ij->i", np.cross(a, b), c).sum() / 6.0)
    return 1.0 if vol < 0.0 else -1.0


def compute_face_normals(mesh, return_areas=False):
    """Unit normals per face from the right-hand rule (v3-v1) x (v2-v1).

    Raises :class:`MeshError`, naming the face, when a face area falls below
    ``DEGENERATE_AREA_FACTOR * bbox_diag**2``.
    """
    v, f = mesh.vertices, mesh.faces
    raw = np.cross(v[f[:, 2]] - v[f[:, 0]], v[f[:, 1]] - v[f[:, 0]])
    norms = np.linalg.norm(raw, axis=1)
    areas = 0.5 * norms
    limit = DEGENERATE_AREA_FACTOR * mesh.bbox_diag**2
    bad = np.nonzero(areas <= limit)[0]
    if bad.size:
        raise MeshError(f"degenerate face {int(bad[0])}: area {areas[bad[0]]:.3e}")
    normals = raw / norms[:, None]
    if return_areas:
        return normals, areas
    return normals


def _barycentric(p, tri):
    a, b, c = tri
    ab, ac, ap = b - a, c - a, p - a
    d00 = float(np.dot(ab, ab))
    d01 = float(np.dot(ab, ac))
    d11 = float(np.dot(ac, ac))
    d20 = float(np.dot(ap, ab))
    d21 = float(np.dot(ap, ac))
    den = d00 * d11 - d01 * d01
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    return 1.0 - v - w, v, w


def point_triangle_closest(p, tri):
    """Closest point on a (non-degenerate) triangle and its distance to ``p``.

    Exact case analysis over the vertex / edge / interior regions.
    """
    p = np.asarray(p, dtype=np.float64)
    a, b, c = (np.asarray(x, dtype=np.float64) for x in tri)
    ab, ac, ap = b - a, c - a, p - a
    d1, d2 = float(np.dot(ab, ap)), float(np.dot(ac, ap))
    if d1 <= 0.0 and d2 <= 0.0:
        return a, float(np.linalg.norm(p - a))
    bp = p - b
    d3, d4 = float(np.dot(ab, bp)), float(np.dot(ac, bp))
    if d3 >= 0.0 and d4 <= d3:
        return b, float(np.linalg.norm(p - b))
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        q = a + (d1 / (d1 - d3)) * ab
        return q, float(np.linalg.norm(p - q))
    cp = p - c
    d5, d6 = float(np.dot(ab, cp)), float(np.dot(ac, cp))
    if d6 >= 0.0 and d5 <= d6:
        return c, float(np.linalg.norm(p - c))
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        q = a + (d2 / (d2 - d6)) * ac
        return q, float(np.linalg.norm(p - q))
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        q = b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b)
        return q, float(np.linalg.norm(p - q))
    den = 1.0 / (va + vb + vc)
    q = a + ab * (vb * den) + ac * (vc * den)
    return q, float(np.linalg.norm(p - q))


def closest_points_on_triangles(p, tris):
    """Vectorized closest point from ``p`` to each triangle in ``tris``.

    ``tris`` has shape (m, 3, 3); returns (points (m, 3), distances (m,)).
    Same region logic as :func:`point_triangle_closest`.
    """
    p = np.asarray(p, dtype=np.float64)
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, ac = b - a, c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = np.where(d1 != d3, d1 / (d1 - d3), 0.0)
        t_ac = np.where(d2 != d6, d2 / (d2 - d6), 0.0)
        den_bc = (d4 - d3) + (d5 - d6)
        t_bc = np.where(den_bc != 0.0, (d4 - d3) / den_bc, 0.0)
        den = va + vb + vc
        den = np.where(den != 0.0, den, 1.0)
        v_in = vb / den
        w_in = vc / den

    out = a + ab * v_in[:, None] + ac * w_in[:, None]
    m_bc = (va <= 0.0) & (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0)
    out = np.where(m_bc[:, None], b + t_bc[:, None] * (c - b), out)
    m_ac = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    out = np.where(m_ac[:, None], a + t_ac[:, None] * ac, out)
    m_c = (d6 >= 0.0) & (d5 <= d6)
    out = np.where(m_c[:, None], c, out)
    m_ab = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    out = np.where(m_ab[:, None], a + t_ab[:, None] * ab, out)
    m_b = (d3 >= 0.0) & (d4 <= d3)
    out = np.where(m_b[:, None], b, out)
    m_a = (d1 <= 0.0) & (d2 <= 0.0)
    out = np.where(m_a[:, None], a, out)
    return out, np.linalg.norm(out - p, axis=1)


def sample_uniform(mesh, n, seed):
    """Draw ``n`` area-uniform sites on the surface; deterministic per seed."""
    if n < 4:
        raise ValueError(f"need at least 4 sites, got {n}")
    rng = np.random.default_rng(seed)
    prob = mesh.face_areas / mesh.face_areas.sum()
    hosts = rng.choice(len(mesh.faces), size=n, p=prob)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    tri = mesh.vertices[mesh.faces[hosts]]
    pos = tri[:, 0] + u[:, None] * (tri[:, 1] - tri[:, 0]) + v[:, None] * (tri[:, 2] - tri[:, 0])
    return SiteSet(positions=pos, host_facet=hosts.astype(np.int64))


def load_mesh(path):
    """Parse an ASCII OBJ file (``v``/``f`` records, 1-based indices).

    Faces with more than three vertices are fan-triangulated.  Vertex-index
    errors and degenerate faces are reported with the offending face id.
    """
    if not os.path.isfile(path):
        raise MeshError(f"no such file: {path}")
    verts = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshError(f"line {lineno}: malformed vertex record")
                verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    raw = tok.split("/")[0]
                    i = int(raw)
                    # OBJ indices are 1-based; negative values count from the end.
                    i = i - 1 if i > 0 else len(verts) + i
                    idx.append(i)
                if len(idx) < 3:
                    raise MeshError(f"line {lineno}: face {len(faces)} has fewer than 3 vertices")
                for j in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[j], idx[j + 1]))
    if not faces:
        raise MeshError(f"{path}: no faces found")
    return TriangleMesh.from_arrays(np.array(verts), np.array(faces))


def save_mesh(mesh, path):
    """Write the mesh as ASCII OBJ with 9-significant-digit coordinates.

    The decimal text is stable: one load/save round trip reaches a fixed
    point, so saved files re-save byte-identically.
    """
    if mesh.faces is None or len(mesh.faces) == 0:
        raise MeshError("refusing to save a mesh with no faces")
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {x:.9g} {y:.9g} {z:.9g}\n")
    for i, j, k in mesh.faces:
        lines.append(f"f {i + 1} {j + 1} {k + 1}\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(lines)
