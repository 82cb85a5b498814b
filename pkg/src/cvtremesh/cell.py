"""Bounded convex polyhedra with plane-tagged faces and clipping operations.

A cell starts as a padded axis-aligned box and shrinks under half-space
clipping: by site bisectors while building a Voronoi cell, and by original
mesh facet planes afterwards.  Faces are stored as cyclic vertex loops, each
carrying the tag of the half-space that generated it, so the cross-section
polygon of any applied plane can be read back directly.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _cellkern as _k
from ._cellkern import MAXF, MAXL, MAXV

__all__ = [
    "CellError", "HalfSpace", "ConvexCell", "CellWorkspace", "CellResult",
    "init_bounding_cell", "box_cell", "bisector", "clip_halfspace",
    "compute_voronoi_cell", "extract_face_on_plane",
]


class CellError(Exception):
    """A cell operation produced or received an invalid polyhedron."""


_TAG_KINDS = ("box", "site", "facet", "plane")
_TAG_CODE = {name: i for i, name in enumerate(_TAG_KINDS)}
_TAG_SHIFT = 40


def encode_tag(tag):
    kind, ident = tag
    return (_TAG_CODE[kind] << _TAG_SHIFT) | (int(ident) & ((1 << _TAG_SHIFT) - 1))


def decode_tag(code):
    return (_TAG_KINDS[int(code) >> _TAG_SHIFT], int(code) & ((1 << _TAG_SHIFT) - 1))


@dataclass(frozen=True)
class HalfSpace:
    """Half-space {x : normal . x <= offset} with a unit normal and a tag.

    The tag names the plane's origin: ("box", side), ("site", k) for the
    bisector with site k, ("facet", t) for an original facet plane, or
    ("plane", i) for ad-hoc planes in tests.
    """

    normal: tuple
    offset: float
    tag: tuple = ("plane", 0)

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        ln = float(np.linalg.norm(n))
        if ln <= 0.0 or not np.isfinite(ln):
            raise CellError("half-space normal must be nonzero and finite")
        object.__setattr__(self, "normal", tuple((n / ln).tolist()))
        object.__setattr__(self, "offset", float(self.offset) / ln)


class ConvexCell:
    """Immutable snapshot of a convex polyhedron.

    ``faces`` are cyclic vertex-index loops, ``tags`` the matching origin
    labels, ``provenance`` the ordered half-spaces applied so far (no-op
    clips included, so a tag can be known yet currently bound to no face).
    """

    __slots__ = ("vertices", "_loops", "_tag_codes", "provenance", "eps")

    def __init__(self, vertices, loops, tag_codes, provenance, eps):
        self.vertices = vertices
        self._loops = loops
        self._tag_codes = tag_codes
        self.provenance = provenance
        self.eps = eps

    @property
    def faces(self):
        return [loop.tolist() for loop in self._loops]

    @property
    def tags(self):
        return [decode_tag(c) for c in self._tag_codes]

    def __len__(self):
        return len(self.vertices)

    def face_polygon(self, tag):
        """Vertex loop of the face generated by ``tag`` or None if that plane
        no longer bounds the cell.  Unknown tags (never applied) raise."""
        code = encode_tag(tag)
        for loop, c in zip(self._loops, self._tag_codes):
            if c == code:
                return self.vertices[loop]
        if any(hs.tag == tag for hs in self.provenance):
            return None
        raise KeyError(f"half-space tag {tag!r} was never applied to this cell")

    def volume(self):
        """Cell volume as a sum of pyramids from the vertex mean (winding-free)."""
        c = self.vertices.mean(axis=0)
        total = 0.0
        for loop in self._loops:
            pts = self.vertices[loop]
            p0 = pts[0]
            cr = np.cross(pts[1:-1] - p0, pts[2:] - p0)
            face_vec = 0.5 * cr.sum(axis=0)
            area = float(np.linalg.norm(face_vec))
            if area == 0.0:
                continue
            n = face_vec / area
            total += area * abs(float(np.dot(n, c - p0))) / 3.0
        return total

    def max_vertex_distance(self, p):
        return float(np.sqrt(((self.vertices - np.asarray(p)) ** 2).sum(axis=1).max()))

    def contains(self, p, slack=0.0):
        p = np.asarray(p, dtype=np.float64)
        for hs in self.provenance:
            if float(np.dot(hs.normal, p)) - hs.offset > self.eps + slack:
                return False
        return True

    def validate(self):
        """Convexity, Euler formula, and combinatorial soundness checks."""
        nv = len(self.vertices)
        nf = len(self._loops)
        if nv < 4 or nf < 4:
            raise CellError(f"too few elements: V={nv} F={nf}")
        tol = self.eps * 1.0000001 + 1e-14
        for hs in self.provenance:
            d = self.vertices @ np.asarray(hs.normal) - hs.offset
            if d.max() > tol:
                raise CellError(f"vertex violates half-space {hs.tag}: excess {d.max():.3e}")
        edges = {}
        used = np.zeros(nv, dtype=np.int64)
        for loop in self._loops:
            if len(loop) < 3 or len(set(loop.tolist())) != len(loop):
                raise CellError(f"bad face loop {loop.tolist()}")
            if loop.min() < 0 or loop.max() >= nv:
                raise CellError("face references missing vertex")
            used[loop] += 1
            for s in range(len(loop)):
                a, b = int(loop[s]), int(loop[(s + 1) % len(loop)])
                e = (a, b) if a < b else (b, a)
                edges[e] = edges.get(e, 0) + 1
        if (used < 3).any():
            raise CellError("vertex on fewer than 3 faces")
        if any(c != 2 for c in edges.values()):
            raise CellError("edge not shared by exactly 2 faces")
        if nv - len(edges) + nf != 2:
            raise CellError(f"Euler check failed: V={nv} E={len(edges)} F={nf}")
        if self.volume() <= 0.0:
            raise CellError("non-positive volume")
        return True


class CellResult(NamedTuple):
    cell: "ConvexCell"
    secured: bool
    d_max: float
    processed: int


class CellWorkspace:
    """Reusable ping-pong buffers driving the compiled clip kernel."""

    def __init__(self):
        self._v = (np.empty((MAXV, 3)), np.empty((MAXV, 3)))
        self._fl = (np.empty((MAXF, MAXL), np.int32), np.empty((MAXF, MAXL), np.int32))
        self._fn = (np.empty(MAXF, np.int32), np.empty(MAXF, np.int32))
        self._tg = (np.empty(MAXF, np.int64), np.empty(MAXF, np.int64))
        self.cur = 0
        self.nv = 0
        self.nf = 0
        self.eps = 0.0
        self.provenance = []
        self.site = (0.0, 0.0, 0.0)
        self.maxd2 = 0.0

    def load_box(self, lo, hi, eps):
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if not (hi > lo).all():
            raise CellError("degenerate bounding box")
        v = self._v[0]
        k = 0
        for z in (lo[2], hi[2]):
            for y in (lo[1], hi[1]):
                for x in (lo[0], hi[0]):
                    v[k, 0], v[k, 1], v[k, 2] = x, y, z
                    k += 1
        fl, fn, tg = self._fl[0], self._fn[0], self._tg[0]
        quads = (
            (0, 2, 6, 4),  # x = lo
            (1, 5, 7, 3),  # x = hi
            (0, 4, 5, 1),  # y = lo
            (2, 3, 7, 6),  # y = hi
            (0, 1, 3, 2),  # z = lo
            (4, 6, 7, 5),  # z = hi
        )
        normals = ((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1))
        offsets = (-lo[0], hi[0], -lo[1], hi[1], -lo[2], hi[2])
        self.provenance = []
        for i, q in enumerate(quads):
            fl[i, :4] = q
            fn[i] = 4
            tg[i] = encode_tag(("box", i))
            self.provenance.append(HalfSpace(normals[i], float(offsets[i]), ("box", i)))
        self.cur = 0
        self.nv = 8
        self.nf = 6
        self.eps = float(eps)
        self.maxd2 = 0.0

    def load(self, cell):
        v = self._v[0]
        v[: len(cell.vertices)] = cell.vertices
        fl, fn, tg = self._fl[0], self._fn[0], self._tg[0]
        for i, loop in enumerate(cell._loops):
            fl[i, : len(loop)] = loop
            fn[i] = len(loop)
            tg[i] = cell._tag_codes[i]
        self.cur = 0
        self.nv = len(cell.vertices)
        self.nf = len(cell._loops)
        self.eps = cell.eps
        self.provenance = list(cell.provenance)
        self.maxd2 = 0.0

    def set_site(self, p):
        self.site = (float(p[0]), float(p[1]), float(p[2]))
        v = self._v[self.cur][: self.nv]
        self.maxd2 = float(((v - np.asarray(p)) ** 2).sum(axis=1).max())

    def clip(self, normal, offset, tag):
        """Apply one half-space.  Returns the kernel status; EMPTY leaves the
        workspace unusable until the next load."""
        a, b = self.cur, 1 - self.cur
        status, nv, nf, maxd2 = _k.clip_kernel(
            self._v[a], self.nv, self._fl[a], self._fn[a], self._tg[a], self.nf,
            float(normal[0]), float(normal[1]), float(normal[2]), float(offset),
            self.eps, encode_tag(tag),
            self.site[0], self.site[1], self.site[2],
            self._v[b], self._fl[b], self._fn[b], self._tg[b],
        )
        if status == _k.OVERFLOW:
            raise CellError("cell exceeded kernel capacity (MAXV/MAXF/MAXL)")
        if status == _k.CLIPPED:
            self.cur = b
            self.nv = nv
            self.nf = nf
            self.maxd2 = maxd2
        if status != _k.TANGENT:
            self.provenance.append(HalfSpace(tuple(normal), float(offset), tag))
        return status

    def snapshot(self):
        v = self._v[self.cur][: self.nv].copy()
        fl, fn, tg = self._fl[self.cur], self._fn[self.cur], self._tg[self.cur]
        loops = [fl[i, : fn[i]].astype(np.int32) for i in range(self.nf)]
        tags = [int(tg[i]) for i in range(self.nf)]
        return ConvexCell(v, loops, tags, tuple(self.provenance), self.eps)


def box_cell(lo, hi, eps=None):
    """Axis-aligned box cell; default tolerance scales with its diagonal."""
    ws = CellWorkspace()
    if eps is None:
        eps = 1e-9 * float(np.linalg.norm(np.asarray(hi, float) - np.asarray(lo, float)))
    ws.load_box(lo, hi, eps)
    return ws.snapshot()


def init_bounding_cell(mesh, padding=0.05):
    """Bounding box of the mesh, padded by ``padding * bbox_diag`` per side."""
    pad = padding * mesh.bbox_diag
    lo = mesh.vertices.min(axis=0) - pad
    hi = mesh.vertices.max(axis=0) + pad
    return box_cell(lo, hi, eps=1e-9 * mesh.bbox_diag)


def bisector(s_i, s_k, site_id=-1):
    """Half-space of points at least as close to ``s_i`` as to ``s_k``."""
    s_i = np.asarray(s_i, dtype=np.float64)
    s_k = np.asarray(s_k, dtype=np.float64)
    delta = s_k - s_i
    ln = float(np.linalg.norm(delta))
    if ln <= 0.0:
        raise CellError("bisector of coincident sites is undefined")
    n = delta / ln
    mid = 0.5 * (s_i + s_k)
    return HalfSpace(tuple(n.tolist()), float(np.dot(n, mid)), ("site", site_id))


def clip_halfspace(cell, hs):
    """Clip ``cell`` by ``hs``; returns the new cell, or None when emptied."""
    ws = CellWorkspace()
    ws.load(cell)
    status = ws.clip(hs.normal, hs.offset, hs.tag)
    if status == _k.EMPTY:
        return None
    return ws.snapshot()


def extract_face_on_plane(cell, tag):
    return cell.face_polygon(tag)


def clip_by_neighbors(ws, nbr_ids, nbr_dists, points):
    """Sequentially clip the workspace cell by neighbor bisectors, nearest
    first, stopping once the security radius guarantees no further cut.

    A neighbor at distance d can only cut the cell while d <= 2 * (max
    distance from the site to a cell vertex).  Returns (fired, d_max,
    processed): whether the early exit triggered, the distance of the
    farthest neighbor actually clipped against, and how many were applied.
    """
    sx, sy, sz = ws.site
    fired = False
    d_max = 0.0
    processed = 0
    for j, dj in zip(nbr_ids, nbr_dists):
        dj = float(dj)
        if dj <= 0.0:
            continue  # coincident site; its bisector is undefined
        if dj * dj > 4.0 * ws.maxd2:
            fired = True
            break
        q = points[j]
        nx = (q[0] - sx) / dj
        ny = (q[1] - sy) / dj
        nz = (q[2] - sz) / dj
        off = nx * (q[0] + sx) * 0.5 + ny * (q[1] + sy) * 0.5 + nz * (q[2] + sz) * 0.5
        status = ws.clip((nx, ny, nz), off, ("site", int(j)))
        if status == _k.EMPTY:
            raise CellError("bisector clipping emptied a cell containing its site")
        processed += 1
        d_max = dj
    return fired, d_max, processed


def compute_voronoi_cell(site, points, index, k, domain, workspace=None):
    """Voronoi cell of ``points[site]`` within ``domain``, from the k nearest
    neighbors with a security-radius early exit.

    Returns a :class:`CellResult`; ``secured`` is False when the queried
    neighbors could not certify the cell (the caller may escalate k).
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    k_eff = min(k, n - 1)
    ws = workspace if workspace is not None else CellWorkspace()
    ws.load(domain)
    ws.set_site(points[site])
    if k_eff <= 0:
        return CellResult(ws.snapshot(), True, 0.0, 0)
    nbrs = index.knn(points[site], k_eff, exclude=site)
    ids = [j for j, _ in nbrs]
    dists = [d for _, d in nbrs]
    fired, d_max, processed = clip_by_neighbors(ws, ids, dists, points)
    secured = fired or k_eff >= n - 1
    return CellResult(ws.snapshot(), secured, d_max, processed)
