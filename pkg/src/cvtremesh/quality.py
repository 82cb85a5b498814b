"""Mesh quality metrics: per-triangle shape quality, corner-angle statistics,
sampled surface distances, and the combined input/output report."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh import closest_points_on_triangles, sample_uniform

QUALITY_SCALE = 6.0 / math.sqrt(3.0)


def triangle_quality(tri):
    """Shape quality (6/sqrt(3)) * area / (semiperimeter * longest edge):
    1 for equilateral triangles, 0 for degenerate ones."""
    a, b, c = (np.asarray(p, dtype=np.float64) for p in tri)
    e1 = float(np.linalg.norm(b - a))
    e2 = float(np.linalg.norm(c - b))
    e3 = float(np.linalg.norm(a - c))
    s = 0.5 * (e1 + e2 + e3)
    e = max(e1, e2, e3)
    if s <= 0.0 or e <= 0.0:
        return 0.0
    area = 0.5 * float(np.linalg.norm(np.cross(b - a, c - a)))
    return QUALITY_SCALE * area / (s * e)


def triangle_qualities(vertices, faces):
    """Vectorized :func:`triangle_quality` over all faces of a mesh."""
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    e1 = np.linalg.norm(b - a, axis=1)
    e2 = np.linalg.norm(c - b, axis=1)
    e3 = np.linalg.norm(a - c, axis=1)
    s = 0.5 * (e1 + e2 + e3)
    e = np.maximum(np.maximum(e1, e2), e3)
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    den = s * e
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(den > 0.0, QUALITY_SCALE * area / den, 0.0)
    return q


def mesh_quality(mesh):
    q = triangle_qualities(mesh.vertices, mesh.faces)
    return float(q.min()), float(q.mean())


def corner_angles(mesh):
    """All 3F corner angles in degrees."""
    v, f = mesh.vertices, mesh.faces
    out = []
    for shift in range(3):
        p = v[f[:, shift]]
        q = v[f[:, (shift + 1) % 3]]
        r = v[f[:, (shift + 2) % 3]]
        u = q - p
        w = r - p
        cosang = np.einsum("ij,ij->i", u, w) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1)
        )
        out.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return np.concatenate(out)


def angle_stats(mesh):
    """(theta_min, theta_max, fraction < 30 deg, fraction > 90 deg)."""
    ang = corner_angles(mesh)
    return (
        float(ang.min()),
        float(ang.max()),
        float((ang < 30.0).mean()),
        float((ang > 90.0).mean()),
    )


class _SurfaceDistance:
    """Exact point-to-mesh distance with centroid-tree candidate pruning."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.vtree = cKDTree(mesh.vertices)
        self.ctree = cKDTree(mesh.face_centroids)
        tri = mesh.vertices[mesh.faces]
        self.r_face = np.linalg.norm(tri - mesh.face_centroids[:, None, :], axis=2).max(axis=1)
        self.r_max = float(self.r_face.max())

    def distances(self, pts):
        # Any face holding a closer point than the nearest-vertex bound d0
        # has its centroid within d0 + r_max of the query.
        d0, _ = self.vtree.query(pts)
        out = np.empty(len(pts))
        for i, p in enumerate(pts):
            cand = self.ctree.query_ball_point(p, d0[i] + self.r_max + 1e-12)
            tris = self.mesh.vertices[self.mesh.faces[cand]]
            _, dists = closest_points_on_triangles(p, tris)
            out[i] = dists.min()
        return out


def surface_distance(a, b, samples=100000, seed=0):
    """Symmetric sampled Hausdorff and RMS distance between two meshes.

    ``samples`` area-uniform points are drawn on each mesh and measured
    against the other exactly; both values are normalized by ``a``'s bounding
    box diagonal and reported scaled by 100 (in units of 1e-2).
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples per side")
    pa = sample_uniform(a, samples, seed).positions
    pb = sample_uniform(b, samples, seed + 1).positions
    d_ab = _SurfaceDistance(b).distances(pa)
    d_ba = _SurfaceDistance(a).distances(pb)
    scale = 100.0 / a.bbox_diag
    d_h = max(float(d_ab.max()), float(d_ba.max()))
    both = np.concatenate([d_ab, d_ba])
    rms = math.sqrt(float((both * both).mean()))
    return d_h * scale, rms * scale


def quality_improvement(q_in, q_out):
    """Relative gain of mean quality, in percent."""
    return (q_out - q_in) / q_in * 100.0


@dataclass
class QualityReport:
    """Everything the evaluation table needs for one input/output pair."""

    n_in: int
    n_out: int
    Q_min_in: float
    Q_avg_in: float
    theta_min_in: float
    theta_max_in: float
    theta_lt30_in: float
    theta_gt90_in: float
    Q_min: float
    Q_avg: float
    theta_min: float
    theta_max: float
    theta_lt30: float
    theta_gt90: float
    d_H: float            # x 1e-2 of the input-diagonal-normalized distance
    RMS: float            # same scaling
    T: float              # remeshing time, seconds
    Q_up: float           # percent
    Q_up_per_T: float     # percent per second

    def to_dict(self):
        return {
            "n_in": self.n_in,
            "n_out": self.n_out,
            "Q_min": self.Q_min,
            "Q_avg": self.Q_avg,
            "theta_min": self.theta_min,
            "theta_max": self.theta_max,
            "theta_lt30": self.theta_lt30,
            "theta_gt90": self.theta_gt90,
            "d_H": self.d_H,
            "RMS": self.RMS,
            "T": self.T,
            "Q_up": self.Q_up,
            "Q_up_per_T": self.Q_up_per_T,
        }


def quality_report(input_mesh, output_mesh, T, samples=100000, seed=0):
    """Assemble the full report for an (input, output) mesh pair."""
    if T <= 0.0:
        raise ValueError("T must be positive")
    qmin_i, qavg_i = mesh_quality(input_mesh)
    qmin_o, qavg_o = mesh_quality(output_mesh)
    ai = angle_stats(input_mesh)
    ao = angle_stats(output_mesh)
    d_h, rms = surface_distance(input_mesh, output_mesh, samples=samples, seed=seed)
    q_up = quality_improvement(qavg_i, qavg_o)
    return QualityReport(
        n_in=len(input_mesh.vertices),
        n_out=len(output_mesh.vertices),
        Q_min_in=qmin_i, Q_avg_in=qavg_i,
        theta_min_in=ai[0], theta_max_in=ai[1],
        theta_lt30_in=ai[2], theta_gt90_in=ai[3],
        Q_min=qmin_o, Q_avg=qavg_o,
        theta_min=ao[0], theta_max=ao[1],
        theta_lt30=ao[2], theta_gt90=ao[3],
        d_H=d_h, RMS=rms, T=T,
        Q_up=q_up, Q_up_per_T=q_up / T,
    )
