"""Restricted Voronoi diagram over the surface and its dual triangulation.

Each original facet is partitioned (in its own plane basis) among the sites
by 2D bisector clipping; flooding over the sites whose bisectors actually cut
a piece discovers every region in the facet.  Piece vertices carry symbolic
labels of their generating constraints (facet edge or bisector-with-site), so
the corners where three or more regions meet, which dualize to output
triangles, are read off the labels instead of fragile coordinate matching.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .mesh import TriangleMesh
from .engine import PipelineError

logger = logging.getLogger("cvtremesh.extract")


@dataclass
class RvdPiece:
    site: int
    pts3: np.ndarray     # (m, 3) polygon in space
    pts2: np.ndarray     # (m, 2) same polygon in the facet basis
    labels: list         # per-vertex frozenset of generating constraints

    @property
    def area(self):
        x, y = self.pts2[:, 0], self.pts2[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


@dataclass
class RestrictedVoronoiDiagram:
    pieces: list             # per original facet: list of RvdPiece
    bbox_diag: float
    facet_normals: np.ndarray

    def facet_pieces(self, t):
        return self.pieces[t]

    def sites_with_regions(self):
        owned = set()
        for plist in self.pieces:
            for p in plist:
                owned.add(p.site)
        return owned


def _facet_basis(mesh, t):
    corners = mesh.face_points(t)
    o = corners[0]
    e1 = corners[1] - o
    e1 = e1 / np.linalg.norm(e1)
    n = mesh.face_normals[t]
    e2 = np.cross(n, e1)
    uv = np.array([
        (0.0, 0.0),
        (float(np.dot(corners[1] - o, e1)), float(np.dot(corners[1] - o, e2))),
        (float(np.dot(corners[2] - o, e1)), float(np.dot(corners[2] - o, e2))),
    ])
    return o, e1, e2, uv


def _clip_piece_2d(pts, labels, a, b, c, lab, eps):
    """Clip the labeled 2D polygon by the half-plane a*u + b*v <= c.

    Vertices within ``eps`` of the line stay and gain ``lab``; crossing edges
    get interpolated vertices labeled by the edge's shared generator plus
    ``lab``.  Returns (pts, labels, removed_count); an emptied polygon (no
    strictly interior vertex) returns (None, None, removed_count).
    """
    m = len(pts)
    d = pts[:, 0] * a + pts[:, 1] * b - c
    nrem = int((d > eps).sum())
    if nrem == 0:
        if (d >= -eps).any():
            labels = [ls | {lab} if d[i] >= -eps else ls for i, ls in enumerate(labels)]
        return pts, labels, 0
    if int((d < -eps).sum()) == 0:
        return None, None, nrem

    out_pts = []
    out_lab = []
    for i in range(m):
        j = (i + 1) % m
        di, dj = d[i], d[j]
        ki, kj = di <= eps, dj <= eps
        if ki:
            ls = labels[i] | {lab} if di >= -eps else labels[i]
            out_pts.append(pts[i])
            out_lab.append(ls)
            if not kj and di < -eps:
                t = di / (di - dj)
                out_pts.append(pts[i] + t * (pts[j] - pts[i]))
                out_lab.append((labels[i] & labels[j]) | {lab})
        elif kj and dj < -eps:
            t = di / (di - dj)
            out_pts.append(pts[i] + t * (pts[j] - pts[i]))
            out_lab.append((labels[i] & labels[j]) | {lab})
    if len(out_pts) < 3:
        return None, None, nrem
    return np.array(out_pts), out_lab, nrem


class _NeighborCache:
    """Grow-on-demand sorted neighbor lists per site."""

    def __init__(self, index, positions, k0):
        self.index = index
        self.positions = positions
        self.k0 = max(1, min(k0, len(positions) - 1))
        self._data = {}

    def get(self, site, need):
        need = min(need, len(self.positions) - 1)
        have = self._data.get(site)
        if have is None or len(have[0]) < need:
            k = self.k0
            while k < need:
                k *= 2
            k = min(k, len(self.positions) - 1)
            nbrs = self.index.knn(self.positions[site], k, exclude=site)
            ids = np.array([j for j, _ in nbrs], dtype=np.int64)
            dists = np.array([dd for _, dd in nbrs])
            self._data[site] = (ids, dists)
        return self._data[site]


def _piece_for_site(site, positions, cache, base_pts, base_labels, o, e1, e2, eps):
    """Clip the facet polygon to the region of ``site``; returns the piece
    (or None) and the ids of sites whose bisectors cut it."""
    n = len(positions)
    s = positions[site]
    pts = base_pts
    labels = base_labels
    cutters = []
    if n <= 1:
        return _finish_piece(site, pts, labels, o, e1, e2), cutters
    pts3 = o + pts[:, :1] * e1 + pts[:, 1:] * e2
    maxd2 = float(((pts3 - s) ** 2).sum(axis=1).max())
    k = cache.k0
    done = 0
    while True:
        ids, dists = cache.get(site, k)
        for idx in range(done, len(ids)):
            j, dj = int(ids[idx]), float(dists[idx])
            if dj <= 0.0:
                continue
            if dj * dj > 4.0 * maxd2:
                return _finish_piece(site, pts, labels, o, e1, e2), cutters
            q = positions[j]
            nvec = (q - s) / dj
            mid_off = float(np.dot(nvec, 0.5 * (q + s)))
            a = float(np.dot(nvec, e1))
            b = float(np.dot(nvec, e2))
            c = mid_off - float(np.dot(nvec, o))
            pts, labels, nrem = _clip_piece_2d(pts, labels, a, b, c, ("B", j), eps)
            if nrem:
                cutters.append(j)
            if pts is None:
                return None, cutters
            pts3 = o + pts[:, :1] * e1 + pts[:, 1:] * e2
            maxd2 = float(((pts3 - s) ** 2).sum(axis=1).max())
        done = len(ids)
        if done >= n - 1:
            return _finish_piece(site, pts, labels, o, e1, e2), cutters
        k = min(2 * max(k, 1), n - 1)


def _finish_piece(site, pts, labels, o, e1, e2):
    pts3 = o + pts[:, :1] * e1 + pts[:, 1:] * e2
    return RvdPiece(site=site, pts3=pts3, pts2=pts, labels=labels)


def compute_rvd(mesh, sites, index, k):
    """Partition every facet among the sites (restricted Voronoi diagram).

    ``index`` holds the site positions; ``k`` seeds the per-site neighbor
    query size (escalated internally until the security radius closes each
    piece).
    """
    positions = sites.positions
    eps = 1e-9 * mesh.bbox_diag
    cache = _NeighborCache(index, positions, k)
    all_pieces = []
    for t in range(len(mesh.faces)):
        o, e1, e2, uv = _facet_basis(mesh, t)
        base_labels = [
            frozenset({("E", 0), ("E", 2)}),
            frozenset({("E", 0), ("E", 1)}),
            frozenset({("E", 1), ("E", 2)}),
        ]
        centroid = mesh.face_centroids[t]
        seeds = index.knn(centroid, min(4, len(positions)))
        pieces = []
        seen = set()
        queue = []
        for s0, _ in seeds:
            piece, cutters = _piece_for_site(s0, positions, cache, uv, base_labels, o, e1, e2, eps)
            seen.add(s0)
            if piece is not None:
                pieces.append(piece)
                queue.extend(j for j in cutters if j not in seen)
                seen.update(cutters)
                break
        while queue:
            s = queue.pop(0)
            piece, cutters = _piece_for_site(s, positions, cache, uv, base_labels, o, e1, e2, eps)
            if piece is None:
                continue
            pieces.append(piece)
            fresh = [j for j in cutters if j not in seen]
            queue.extend(fresh)
            seen.update(fresh)
        if not pieces:
            raise PipelineError(f"facet {t} received no Voronoi piece")
        pieces.sort(key=lambda p: p.site)
        all_pieces.append(pieces)
    return RestrictedVoronoiDiagram(pieces=all_pieces, bbox_diag=mesh.bbox_diag,
                                    facet_normals=mesh.face_normals.copy())


def site_adjacency(rvd):
    """Site pairs whose regions share a piece edge (both edge endpoints on
    the same bisector)."""
    adj = set()
    for plist in rvd.pieces:
        for p in plist:
            m = len(p.labels)
            for i in range(m):
                shared = p.labels[i] & p.labels[(i + 1) % m]
                for kind, j in shared:
                    if kind == "B":
                        adj.add((min(p.site, j), max(p.site, j)))
    return adj


def _corner_clusters(pieces, tol):
    """Group piece corners with >= 3 owners by position; merge owner sets."""
    records = []
    for p in pieces:
        for v in range(len(p.labels)):
            owners = {p.site} | {j for kind, j in p.labels[v] if kind == "B"}
            if len(owners) >= 3:
                records.append((p.pts2[v], owners))
    clusters = []
    for xy, owners in records:
        for cxy, cowners in clusters:
            if abs(cxy[0] - xy[0]) <= tol and abs(cxy[1] - xy[1]) <= tol:
                cowners.update(owners)
                break
        else:
            clusters.append((xy, set(owners)))
    return clusters


def dual_triangulate(rvd, sites):
    """Output mesh whose vertices are the sites: one triangle per corner
    where exactly three regions meet; corners with four or more regions are
    fan-split over ascending site ids.  Triangles are oriented to agree with
    the underlying facet's stored normal; sites owning no region are dropped.
    """
    if not rvd.pieces:
        raise PipelineError("empty restricted Voronoi diagram")
    positions = sites.positions
    tol = 1e-7 * rvd.bbox_diag
    tri_set = {}
    for t, plist in enumerate(rvd.pieces):
        for xy, owners in _corner_clusters(plist, tol):
            ids = sorted(owners)
            for j in range(1, len(ids) - 1):
                tri = (ids[0], ids[j], ids[j + 1])
                tri_set.setdefault(tri, t)

    if not tri_set:
        raise PipelineError("dual triangulation is empty (too few sites?)")

    used = sorted({i for tri in tri_set for i in tri})
    remap = {s: i for i, s in enumerate(used)}
    verts = positions[used]

    from .mesh import DEGENERATE_AREA_FACTOR

    diag = float(np.linalg.norm(verts.max(axis=0) - verts.min(axis=0)))
    min_area = DEGENERATE_AREA_FACTOR * diag * diag
    faces = []
    dropped = 0
    for (i, j, k), t in sorted(tri_set.items()):
        pi, pj, pk = positions[i], positions[j], positions[k]
        nrm = np.cross(pk - pi, pj - pi)
        area = 0.5 * float(np.linalg.norm(nrm))
        if area < min_area:
            dropped += 1
            continue
        order = (i, j, k)
        if float(np.dot(nrm, rvd.facet_normals[t])) < 0.0:
            order = (i, k, j)
        faces.append(tuple(remap[s] for s in order))
    if dropped:
        logger.warning("dropped %d degenerate dual triangles", dropped)
    if not faces:
        raise PipelineError("all dual triangles were degenerate")
    return TriangleMesh.from_arrays(verts, np.array(faces, dtype=np.int64))


def edge_manifold_violations(mesh):
    """Edges used by more than two triangles, as (v_lo, v_hi, count)."""
    counts = {}
    for a, b, c in mesh.faces:
        for u, v in ((a, b), (b, c), (c, a)):
            e = (int(u), int(v)) if u < v else (int(v), int(u))
            counts[e] = counts.get(e, 0) + 1
    return [(u, v, c) for (u, v), c in sorted(counts.items()) if c > 2]
