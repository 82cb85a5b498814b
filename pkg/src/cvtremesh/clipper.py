"""Curvature-level decisions and facet-plane clipping of Voronoi cells.

Local curvature around a site is judged from the angles between the host
facet's normal and the normals of nearby facets: near-parallel normals mean
a flat neighborhood (one clip suffices), while low |cos| values trigger a
second and possibly third clip by the best-scoring facet planes.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._cellkern import EMPTY
from .cell import CellError, CellWorkspace

__all__ = [
    "NeighborFacetSet", "ClipDecision", "ClippedFacets",
    "build_fnear", "curvature_level", "select_second_facet",
    "select_third_facet", "clip_cell_by_facets", "polygon_area_centroid",
]

# Cross-section polygons below this fraction of bbox_diag^2 are discarded.
MIN_POLYGON_AREA_FACTOR = 1e-12


@dataclass
class NeighborFacetSet:
    """Facets of the two-ring around a host facet, distance-capped by twice
    the reach of the neighbor sites used for the cell."""

    facet_ids: np.ndarray   # sorted, host excluded
    d_max: float


@dataclass
class ClipDecision:
    """How many facet-plane clips a site gets and by which facets."""

    level: int              # 1, 2 or 3
    f_t: int                # host facet (always clipped)
    f_u: Optional[int] = None
    f_v: Optional[int] = None


@dataclass
class ClippedFacets:
    """Retained cross-section polygons of a clipped cell (one per facet)."""

    polygons: list          # 1-3 planar convex polygons, (m_i, 3) arrays
    facets: list            # generating facet id per polygon
    areas: np.ndarray
    centroids: np.ndarray   # (m, 3)
    fell_back: bool = False

    @property
    def m(self):
        return len(self.polygons)

    @property
    def total_area(self):
        return float(self.areas.sum())


def build_fnear(mesh, host, d_max):
    """F_near: two-ring facets whose centroid lies within 2*d_max of the
    host facet's centroid.  May be empty, which forces a level-1 decision."""
    ring = mesh.face_ring(host, 2)
    if not ring:
        return NeighborFacetSet(np.empty(0, dtype=np.int64), d_max)
    ids = np.fromiter(ring, dtype=np.int64)
    ids.sort()
    dist = np.linalg.norm(mesh.face_centroids[ids] - mesh.face_centroids[host], axis=1)
    return NeighborFacetSet(ids[dist <= 2.0 * d_max], d_max)


def _abs_cos(mesh, ids, ref_facet):
    return np.abs(mesh.face_normals[ids] @ mesh.face_normals[ref_facet])


def select_second_facet(mesh, fnear, host, alpha, d_max):
    """Lowest-scoring facet among those at a steep angle to the host:
    score = |cos(angle to host)| + centroid distance / d_max."""
    ids = fnear.facet_ids
    cos_t = _abs_cos(mesh, ids, host)
    eligible = cos_t < alpha
    if not eligible.any():
        raise ValueError("no facet is eligible for a second clip")
    ids = ids[eligible]
    dist = np.linalg.norm(mesh.face_centroids[ids] - mesh.face_centroids[host], axis=1)
    score = cos_t[eligible] + dist / d_max
    return int(ids[np.lexsort((ids, score))[0]])


def select_third_facet(mesh, fnear, host, second, beta, d_max):
    """Lowest-scoring facet steeply angled to both chosen facets.  Only the
    candidate-dependent terms are compared; the fixed terms of the second
    facet shift every score equally and cannot change the argmin."""
    ids = fnear.facet_ids
    ids = ids[ids != second]
    cos_t = _abs_cos(mesh, ids, host)
    cos_u = _abs_cos(mesh, ids, second)
    eligible = (cos_t < beta) & (cos_u < beta)
    if not eligible.any():
        raise ValueError("no facet is eligible for a third clip")
    ids = ids[eligible]
    dist_t = np.linalg.norm(mesh.face_centroids[ids] - mesh.face_centroids[host], axis=1)
    dist_u = np.linalg.norm(mesh.face_centroids[ids] - mesh.face_centroids[second], axis=1)
    score = cos_t[eligible] + dist_t / d_max + cos_u[eligible] + dist_u / d_max
    return int(ids[np.lexsort((ids, score))[0]])


def curvature_level(mesh, fnear, host, alpha, beta, max_level=3):
    """Decide the clip count from F_near normal angles.

    Level 1 when every neighbor normal stays within the alpha cosine band of
    the host (or F_near is empty); level 3 additionally needs some facet
    steeply angled (below beta) to both the host and the second facet.
    """
    ids = fnear.facet_ids
    if max_level <= 1 or len(ids) == 0:
        return ClipDecision(1, int(host))
    cos_t = _abs_cos(mesh, ids, host)
    if (cos_t >= alpha).all():
        return ClipDecision(1, int(host))
    f_u = select_second_facet(mesh, fnear, host, alpha, fnear.d_max)
    if max_level >= 3:
        others = ids[ids != f_u]
        if len(others):
            c_t = _abs_cos(mesh, others, host)
            c_u = _abs_cos(mesh, others, f_u)
            if ((c_t < beta) & (c_u < beta)).any():
                f_v = select_third_facet(mesh, fnear, host, f_u, beta, fnear.d_max)
                return ClipDecision(3, int(host), f_u, f_v)
    return ClipDecision(2, int(host), f_u)


def polygon_area_centroid(pts):
    """Area and centroid of a planar convex polygon by fan triangulation."""
    pts = np.asarray(pts, dtype=np.float64)
    if len(pts) < 3:
        return 0.0, pts.mean(axis=0) if len(pts) else np.zeros(3)
    p0 = pts[0]
    cr = np.cross(pts[1:-1] - p0, pts[2:] - p0)
    w = 0.5 * np.linalg.norm(cr, axis=1)
    total = float(w.sum())
    if total <= 0.0:
        return 0.0, pts.mean(axis=0)
    tri_c = (p0 + pts[1:-1] + pts[2:]) / 3.0
    return total, (w[:, None] * tri_c).sum(axis=0) / total


def facet_plane(mesh, t):
    """Outward-oriented supporting plane of facet ``t`` as (normal, offset);
    the kept side n.x <= offset is the mesh-interior side."""
    n = mesh.outward_sign * mesh.face_normals[t]
    v1 = mesh.vertices[mesh.faces[t, 0]]
    return n, float(np.dot(n, v1))


def _workspace_polygon(ws, tag_code):
    fl, fn, tg = ws._fl[ws.cur], ws._fn[ws.cur], ws._tg[ws.cur]
    for i in range(ws.nf):
        if tg[i] == tag_code:
            return ws._v[ws.cur][fl[i, : fn[i]]].copy()
    return None


def clip_cell_by_facets(ws, decision, mesh):
    """Clip the workspace cell by the decision's facet planes in order and
    collect the surviving cross-section polygons.

    The host facet's cross-section always exists right after its own clip
    (the site lies on that plane inside the cell); if later clips erase it,
    the decision degrades back to the single-clip result.  Returns None only
    when every polygon degenerates to (numerically) zero area.
    """
    from .cell import encode_tag

    min_area = MIN_POLYGON_AREA_FACTOR * mesh.bbox_diag**2
    facet_order = [decision.f_t]
    if decision.f_u is not None:
        facet_order.append(decision.f_u)
    if decision.f_v is not None:
        facet_order.append(decision.f_v)

    n, off = facet_plane(mesh, decision.f_t)
    status = ws.clip(tuple(n), off, ("facet", decision.f_t))
    if status == EMPTY:
        raise CellError(
            f"cell emptied by its host facet plane {decision.f_t}; inconsistent orientation"
        )
    host_only = _workspace_polygon(ws, encode_tag(("facet", decision.f_t)))

    for t in facet_order[1:]:
        n, off = facet_plane(mesh, t)
        status = ws.clip(tuple(n), off, ("facet", t))
        if status == EMPTY:
            break

    polygons, facets = [], []
    if status != EMPTY:
        for t in facet_order:
            poly = _workspace_polygon(ws, encode_tag(("facet", t)))
            if poly is None or len(poly) < 3:
                continue
            area, _ = polygon_area_centroid(poly)
            if area < min_area:
                continue
            polygons.append(poly)
            facets.append(t)

    fell_back = False
    if decision.f_t not in facets:
        # Multi-clip annihilated the host cross-section; use the single-clip
        # polygon captured before the extra planes were applied.
        polygons, facets, fell_back = [], [], True
        if host_only is not None and len(host_only) >= 3:
            area, _ = polygon_area_centroid(host_only)
            if area >= min_area:
                polygons = [host_only]
                facets = [decision.f_t]
    if not polygons:
        return None

    areas = np.empty(len(polygons))
    cents = np.empty((len(polygons), 3))
    for i, poly in enumerate(polygons):
        areas[i], cents[i] = polygon_area_centroid(poly)
    return ClippedFacets(polygons, facets, areas, cents, fell_back)


def clip_cell_by_facets_cell(cell, decision, mesh):
    """Convenience wrapper taking an immutable cell snapshot."""
    ws = CellWorkspace()
    ws.load(cell)
    ws.set_site(cell.vertices.mean(axis=0))
    return clip_cell_by_facets(ws, decision, mesh)
