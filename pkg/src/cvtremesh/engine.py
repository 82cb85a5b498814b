"""Lloyd-style relaxation loop: per-site cell construction, adaptive facet
clipping, area-weighted centroid updates, projection back to the surface,
and displacement-driven convergence control."""

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cell import CellWorkspace, clip_by_neighbors, init_bounding_cell
from .clipper import ClipDecision, build_fnear, clip_cell_by_facets, curvature_level
from .knn import PointIndex
from .mesh import SiteSet, closest_points_on_triangles, sample_uniform

logger = logging.getLogger("cvtremesh.engine")


class ConfigError(Exception):
    """A configuration value is out of its allowed range."""


class PipelineError(Exception):
    """The optimization produced an invalid state (NaN, emptied cell, ...)."""


@dataclass
class Config:
    """Remeshing parameters; defaults follow the recommended thresholds."""

    n: int
    alpha: float = 0.8
    beta: float = 0.7
    max_clips: int = 3
    knn: int = 24
    epsilon: float = 1e-4       # stop when max displacement / bbox_diag drops below
    max_iters: int = 100
    k_proj: int = 8
    seed: int = 42
    padding: float = 0.05
    threads: int = 1            # 0 = one worker per CPU

    def validate(self):
        if self.n < 4:
            raise ConfigError(f"need at least 4 sites, got {self.n}")
        if not 0.0 < self.alpha <= 1.0 or not 0.0 < self.beta <= 1.0:
            raise ConfigError("alpha and beta must lie in (0, 1]")
        if self.max_clips not in (1, 2, 3):
            raise ConfigError("max_clips must be 1, 2 or 3")
        if self.knn < 1 or self.k_proj < 1:
            raise ConfigError("knn and k_proj must be positive")
        if self.epsilon < 0.0:
            raise ConfigError("epsilon must be non-negative")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be non-negative")
        if self.padding <= 0.0:
            raise ConfigError("padding must be positive")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")
        return self


@dataclass
class IterationStats:
    index: int
    delta: float
    level_counts: tuple         # sites at clip level 1 / 2 / 3
    seconds: float
    degenerate: int = 0         # sites left in place (zero-area cross-section)
    fallbacks: int = 0          # multi-clip results reverted to the single clip
    unsecured: int = 0          # cells not certified by the security radius

    def to_json(self):
        return json.dumps({
            "iteration": self.index,
            "delta": self.delta,
            "levels": list(self.level_counts),
            "seconds": round(self.seconds, 6),
            "degenerate": self.degenerate,
            "fallbacks": self.fallbacks,
            "unsecured": self.unsecured,
        })


@dataclass
class RemeshResult:
    sites: SiteSet
    iterations: list
    sampling_seconds: float
    total_seconds: float


def centroid_of_clipped(cf):
    """Area-weighted mean of the clipped polygons' centroids."""
    total = cf.areas.sum()
    if total <= 0.0:
        raise ValueError("clipped facets have zero total area")
    return (cf.areas[:, None] * cf.centroids).sum(axis=0) / total


def _candidate_faces(mesh, vertex_ids):
    v2f = mesh.vertex_to_faces
    faces = set()
    for v in vertex_ids:
        faces.update(v2f[v])
    return sorted(faces)


def project_points(mesh, vertex_index, pts, k_proj):
    """Project each point onto the mesh via its k nearest vertices' incident
    triangles.  Ties in distance resolve to the lowest face id."""
    pts = np.asarray(pts, dtype=np.float64)
    k = min(k_proj, len(vertex_index))
    ids, _ = vertex_index.neighbor_table(pts, k, exclude_self=False)
    out_p = np.empty_like(pts)
    out_f = np.empty(len(pts), dtype=np.int64)
    for i in range(len(pts)):
        cand = _candidate_faces(mesh, ids[i])
        tris = mesh.vertices[mesh.faces[cand]]
        cps, dists = closest_points_on_triangles(pts[i], tris)
        best = int(np.argmin(dists))
        out_p[i] = cps[best]
        out_f[i] = cand[best]
    return out_p, out_f


def project_to_surface(p, mesh, vertex_index, k_proj):
    """Single-point form of :func:`project_points`."""
    pts, fids = project_points(mesh, vertex_index, np.asarray(p, float)[None, :], k_proj)
    return pts[0], int(fids[0])


class _EngineContext:
    """Per-run immutable state shared by all iterations."""

    def __init__(self, mesh, cfg):
        self.mesh = mesh
        self.cfg = cfg
        self.domain = init_bounding_cell(mesh, cfg.padding)
        self.vertex_index = PointIndex(mesh.vertices)
        self.workers = cfg.threads if cfg.threads > 0 else (os.cpu_count() or 1)
        self.pool = ThreadPoolExecutor(max_workers=self.workers) if self.workers != 1 else None

    def close(self):
        if self.pool is not None:
            self.pool.shutdown(wait=True)


def _site_pass(ctx, positions, hosts, ids, dists, k1, i0, i1,
               bary, levels, degenerate, fallbacks, unsecured):
    """Compute clipped-cell centroids for sites [i0, i1); results land in
    per-site slots so the outcome is independent of work scheduling."""
    mesh, cfg = ctx.mesh, ctx.cfg
    n = len(positions)
    kbig = ids.shape[1]
    ws = CellWorkspace()
    debug = logger.isEnabledFor(logging.DEBUG)
    for i in range(i0, i1):
        ws.load(ctx.domain)
        ws.set_site(positions[i])
        fired, d_max, processed = clip_by_neighbors(ws, ids[i, :k1], dists[i, :k1], positions)
        if not fired and kbig > k1:
            # One escalation pass: continue through the next k neighbors
            # (clipping is order-insensitive, so this equals a fresh 2k run).
            fired, d2, p2 = clip_by_neighbors(ws, ids[i, k1:], dists[i, k1:], positions)
            processed += p2
            d_max = max(d_max, d2)
        if not (fired or processed >= n - 1):
            unsecured[i] = True

        host = int(hosts[i])
        if d_max > 0.0:
            fnear = build_fnear(mesh, host, d_max)
            decision = curvature_level(mesh, fnear, host, cfg.alpha, cfg.beta,
                                       max_level=cfg.max_clips)
        else:
            decision = ClipDecision(1, host)
        levels[i] = decision.level
        cf = clip_cell_by_facets(ws, decision, mesh)
        if debug:
            logger.debug(json.dumps({
                "site": i, "level": decision.level, "f_t": decision.f_t,
                "f_u": decision.f_u, "f_v": decision.f_v,
                "m": 0 if cf is None else cf.m,
                "fell_back": bool(cf is not None and cf.fell_back),
            }))
        if cf is None:
            degenerate[i] = True
            bary[i] = positions[i]
        else:
            fallbacks[i] = cf.fell_back
            bary[i] = centroid_of_clipped(cf)


def lloyd_iterate(sites, mesh, cfg, ctx=None, index=0):
    """One relaxation step over all sites; returns the moved sites and stats."""
    own_ctx = ctx is None
    if own_ctx:
        ctx = _EngineContext(mesh, cfg.validate())
    t0 = time.perf_counter()
    n = sites.count
    positions = sites.positions
    site_index = PointIndex(positions)     # sites move: rebuilt every iteration
    k1 = min(cfg.knn, n - 1)
    kbig = min(2 * cfg.knn, n - 1)
    if kbig > 0:
        ids, dists = site_index.neighbor_table(positions, kbig)
    else:
        ids = np.empty((n, 0), dtype=np.int64)
        dists = np.empty((n, 0))

    bary = np.empty_like(positions)
    levels = np.empty(n, dtype=np.int64)
    degenerate = np.zeros(n, dtype=bool)
    fallbacks = np.zeros(n, dtype=bool)
    unsecured = np.zeros(n, dtype=bool)

    args = (ctx, positions, sites.host_facet, ids, dists, k1)
    outs = (bary, levels, degenerate, fallbacks, unsecured)
    if ctx.pool is None:
        _site_pass(*args, 0, n, *outs)
    else:
        chunk = max(16, -(-n // (4 * ctx.workers)))
        futures = [ctx.pool.submit(_site_pass, *args, lo, min(lo + chunk, n), *outs)
                   for lo in range(0, n, chunk)]
        for f in futures:
            f.result()

    new_pos = bary.copy()
    new_host = sites.host_facet.copy()
    moved = ~degenerate
    if moved.any():
        proj, fids = project_points(mesh, ctx.vertex_index, bary[moved], cfg.k_proj)
        new_pos[moved] = proj
        new_host[moved] = fids
    if not np.isfinite(new_pos).all():
        raise PipelineError(f"non-finite site position at iteration {index}")

    delta = float(np.linalg.norm(new_pos - positions, axis=1).max() / mesh.bbox_diag)
    counts = tuple(int((levels == L).sum()) for L in (1, 2, 3))
    stats = IterationStats(index=index, delta=delta, level_counts=counts,
                           seconds=time.perf_counter() - t0,
                           degenerate=int(degenerate.sum()),
                           fallbacks=int(fallbacks.sum()),
                           unsecured=int(unsecured.sum()))
    if own_ctx:
        ctx.close()
    return SiteSet(new_pos, new_host), stats


def run_remesh(mesh, cfg, on_iteration=None):
    """Sample sites and relax until the displacement drops below epsilon or
    the iteration cap is reached.  Deterministic for a fixed seed and any
    thread count."""
    cfg.validate()
    t_start = time.perf_counter()
    sites = sample_uniform(mesh, cfg.n, cfg.seed)
    sampling_seconds = time.perf_counter() - t_start

    ctx = _EngineContext(mesh, cfg)
    iterations = []
    try:
        for it in range(cfg.max_iters):
            sites, stats = lloyd_iterate(sites, mesh, cfg, ctx=ctx, index=it)
            iterations.append(stats)
            logger.info(stats.to_json())
            if on_iteration is not None:
                on_iteration(stats)
            if stats.delta <= cfg.epsilon:
                break
    finally:
        ctx.close()
    return RemeshResult(sites=sites, iterations=iterations,
                        sampling_seconds=sampling_seconds,
                        total_seconds=time.perf_counter() - t_start)
