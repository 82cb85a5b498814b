"""Exact k-nearest-neighbor queries with deterministic tie-breaking."""

import numpy as np
from scipy.spatial import cKDTree


class PointIndex:
    """kd-tree over a fixed point set.

    Results are exact and totally ordered: ascending distance, ties broken by
    ascending point id, so repeated runs of the pipeline are reproducible.
    Duplicate points are retained with distinct ids.
    """

    def __init__(self, points):
        points = np.ascontiguousarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3 or len(points) == 0:
            raise ValueError("need a non-empty (n, 3) point array")
        self.points = points
        self._tree = cKDTree(points)

    def __len__(self):
        return len(self.points)

    def knn(self, q, k, exclude=None):
        """The k nearest stored points to ``q`` as (id, distance) pairs.

        ``exclude`` removes one point id from consideration (a site never
        returns itself).  Raises ValueError when k exceeds the available
        count.
        """
        q = np.asarray(q, dtype=np.float64)
        n = len(self.points)
        avail = n - (1 if exclude is not None else 0)
        if k < 1 or k > avail:
            raise ValueError(f"k={k} out of range (have {avail} candidates)")
        kq = min(n, k + (1 if exclude is not None else 0))
        d, _ = self._tree.query(q, k=kq)
        dk = float(np.atleast_1d(d)[-1])
        # Pull in every point tied at the k-th distance so the id tie-break
        # is applied over the full candidate set.
        radius = dk * (1.0 + 1e-12) + 1e-300
        cand = np.array(self._tree.query_ball_point(q, radius), dtype=np.int64)
        dist = np.linalg.norm(self.points[cand] - q, axis=1)
        order = np.lexsort((cand, dist))
        cand, dist = cand[order], dist[order]
        if exclude is not None:
            keep = cand != exclude
            cand, dist = cand[keep], dist[keep]
        if len(cand) < k:
            # Tree distance and the recomputed one can disagree in the last
            # ulp; widen the ball until enough candidates are in.
            grow = max(dk, 1e-30)
            while len(cand) < k:
                grow *= 2.0
                cand = np.array(self._tree.query_ball_point(q, dk + grow), dtype=np.int64)
                dist = np.linalg.norm(self.points[cand] - q, axis=1)
                order = np.lexsort((cand, dist))
                cand, dist = cand[order], dist[order]
                if exclude is not None:
                    keep = cand != exclude
                    cand, dist = cand[keep], dist[keep]
        return [(int(cand[i]), float(dist[i])) for i in range(k)]

    def neighbor_table(self, queries, k, exclude_self=True):
        """Batched knn for many query points at once.

        Returns (ids (m, k), dists (m, k)) with the same ordering contract as
        :meth:`knn`.  With ``exclude_self`` the row index is interpreted as
        the query's own id in this index and removed from its row; the
        queries must then be the stored points themselves.
        """
        queries = np.ascontiguousarray(queries, dtype=np.float64)
        m = len(queries)
        n = len(self.points)
        extra = 1 if exclude_self else 0
        if k + extra > n:
            raise ValueError(f"k={k} out of range for {n} stored points")
        d, i = self._tree.query(queries, k=k + extra)
        d = np.atleast_2d(d)
        i = np.atleast_2d(i)
        # Recompute distances so ordering matches brute-force arithmetic,
        # then enforce the (distance, id) total order row by row.
        d = np.linalg.norm(self.points[i] - queries[:, None, :], axis=2)
        ids = np.empty((m, k), dtype=np.int64)
        dists = np.empty((m, k), dtype=np.float64)
        for r in range(m):
            row_i, row_d = i[r], d[r]
            if exclude_self:
                keep = row_i != r
                # Duplicated coordinates can push the self id out of the
                # query result; drop the farthest entry instead.
                if keep.all():
                    keep[np.argmax(row_d)] = False
                row_i, row_d = row_i[keep], row_d[keep]
            order = np.lexsort((row_i, row_d))[:k]
            ids[r] = row_i[order]
            dists[r] = row_d[order]
        return ids, dists


def build_index(points):
    return PointIndex(points)


def knn(index, q, k, exclude=None):
    return index.knn(q, k, exclude=exclude)
