"""Compiled half-space clipping kernel over flat polyhedron buffers.

The cell lives in fixed-capacity arrays so the kernel can run without any
Python-object traffic: vertices in a (MAXV, 3) block, faces as index loops in
a (MAXF, MAXL) block with per-face lengths and integer tags.  ``clip_kernel``
consumes one buffer set and writes the clipped cell into a second one; the
caller ping-pongs between them.
"""

import numpy as np
from numba import njit

MAXV = 512
MAXF = 256
MAXL = 256

# clip_kernel status codes
UNCHANGED = 0
CLIPPED = 1
TANGENT = 2
EMPTY = -1
OVERFLOW = -2


@njit(cache=True, nogil=True)
def clip_kernel(v, nv, floops, flens, ftags, nf,
                nx, ny, nz, off, eps, tag,
                px, py, pz,
                v2, floops2, flens2, ftags2):
    """Clip the cell by the half-space n.x <= off; keep the on-plane band.

    Vertices with signed distance above ``eps`` are removed, crossing edges
    gain interpolated vertices (computed once per undirected edge in a
    canonical orientation so shared edges agree bitwise), and the cut points
    are connected into one new face tagged ``tag``, ordered by angle in the
    plane.  Returns (status, nv_out, nf_out, max_sq_dist) where max_sq_dist
    is the largest squared distance from (px, py, pz) to any surviving
    vertex (only meaningful when status == CLIPPED).
    """
    d = np.empty(nv, np.float64)
    nrem = 0
    ninterior = 0
    for i in range(nv):
        di = nx * v[i, 0] + ny * v[i, 1] + nz * v[i, 2] - off
        d[i] = di
        if di > eps:
            nrem += 1
        elif di < -eps:
            ninterior += 1
    if nrem == 0:
        return UNCHANGED, nv, nf, 0.0
    if nrem == nv or ninterior == 0:
        # No strictly interior vertex survives: the intersection is flat.
        return EMPTY, 0, 0, 0.0

    vmap = np.empty(nv, np.int32)
    nnv = 0
    maxd2 = 0.0
    for i in range(nv):
        if d[i] <= eps:
            vmap[i] = nnv
            v2[nnv, 0] = v[i, 0]
            v2[nnv, 1] = v[i, 1]
            v2[nnv, 2] = v[i, 2]
            dx = v[i, 0] - px
            dy = v[i, 1] - py
            dz = v[i, 2] - pz
            q = dx * dx + dy * dy + dz * dz
            if q > maxd2:
                maxd2 = q
            nnv += 1
        else:
            vmap[i] = -1

    # Open-addressing cache: undirected edge -> interpolated vertex index.
    hsize = 1
    while hsize < 4 * nv:
        hsize <<= 1
    hmask = hsize - 1
    hkeys = np.full(hsize, -1, np.int64)
    hvals = np.empty(hsize, np.int32)

    cutpts = np.empty(MAXV, np.int32)
    ncut = 0
    newloop = np.empty(MAXL + 8, np.int32)

    nnf = 0
    for f in range(nf):
        L = flens[f]
        anyrem = False
        allrem = True
        for s in range(L):
            if d[floops[f, s]] > eps:
                anyrem = True
            else:
                allrem = False
        if allrem:
            continue
        if not anyrem:
            if nnf >= MAXF:
                return OVERFLOW, 0, 0, 0.0
            for s in range(L):
                floops2[nnf, s] = vmap[floops[f, s]]
            flens2[nnf] = L
            ftags2[nnf] = ftags[f]
            nnf += 1
            continue

        m = 0
        for s in range(L):
            a = floops[f, s]
            b = floops[f, s + 1] if s + 1 < L else floops[f, 0]
            ka = d[a] <= eps
            kb = d[b] <= eps
            cp = np.int32(-1)
            if ka:
                newloop[m] = vmap[a]
                m += 1
                if not kb:
                    if d[a] >= -eps:
                        cp = vmap[a]
                    else:
                        cp = np.int32(-2)
            elif kb:
                if d[b] >= -eps:
                    cp = vmap[b]
                else:
                    cp = np.int32(-2)
            else:
                continue
            if cp == -1:
                continue
            if cp == -2:
                # Interpolate once per undirected edge, canonical orientation.
                lo, hi = (a, b) if a < b else (b, a)
                key = np.int64(lo) * np.int64(MAXV * 2) + np.int64(hi)
                h = np.int64(key * 2654435761) & hmask
                while True:
                    kk = hkeys[h]
                    if kk == key:
                        cp = hvals[h]
                        break
                    if kk == -1:
                        if nnv >= MAXV:
                            return OVERFLOW, 0, 0, 0.0
                        t = d[lo] / (d[lo] - d[hi])
                        x = v[lo, 0] + t * (v[hi, 0] - v[lo, 0])
                        y = v[lo, 1] + t * (v[hi, 1] - v[lo, 1])
                        z = v[lo, 2] + t * (v[hi, 2] - v[lo, 2])
                        v2[nnv, 0] = x
                        v2[nnv, 1] = y
                        v2[nnv, 2] = z
                        dx = x - px
                        dy = y - py
                        dz = z - pz
                        q = dx * dx + dy * dy + dz * dz
                        if q > maxd2:
                            maxd2 = q
                        cp = np.int32(nnv)
                        hkeys[h] = key
                        hvals[h] = cp
                        nnv += 1
                        break
                    h = (h + 1) & hmask
                newloop[m] = cp
                m += 1
            seen = False
            for c in range(ncut):
                if cutpts[c] == cp:
                    seen = True
                    break
            if not seen:
                cutpts[ncut] = cp
                ncut += 1

        # drop consecutive duplicates (including the wrap-around pair)
        mm = 0
        for s in range(m):
            if mm == 0 or newloop[s] != newloop[mm - 1]:
                newloop[mm] = newloop[s]
                mm += 1
        while mm > 1 and newloop[mm - 1] == newloop[0]:
            mm -= 1
        if mm >= 3:
            if nnf >= MAXF or mm > MAXL:
                return OVERFLOW, 0, 0, 0.0
            for s in range(mm):
                floops2[nnf, s] = newloop[s]
            flens2[nnf] = mm
            ftags2[nnf] = ftags[f]
            nnf += 1

    if ncut < 3:
        # Vertices flagged for removal but no polygon to seal the cut: the
        # plane only grazes the cell.  Treat the clip as tangent.
        return TANGENT, 0, 0, 0.0
    if nnf >= MAXF or ncut > MAXL:
        return OVERFLOW, 0, 0, 0.0

    # Seal with one new face: cut points ordered by angle around their mean.
    cx = 0.0
    cy = 0.0
    cz = 0.0
    for c in range(ncut):
        i = cutpts[c]
        cx += v2[i, 0]
        cy += v2[i, 1]
        cz += v2[i, 2]
    cx /= ncut
    cy /= ncut
    cz /= ncut
    ax = abs(nx)
    ay = abs(ny)
    az = abs(nz)
    if ax <= ay and ax <= az:
        rx, ry, rz = 1.0, 0.0, 0.0
    elif ay <= az:
        rx, ry, rz = 0.0, 1.0, 0.0
    else:
        rx, ry, rz = 0.0, 0.0, 1.0
    e1x = ny * rz - nz * ry
    e1y = nz * rx - nx * rz
    e1z = nx * ry - ny * rx
    en = (e1x * e1x + e1y * e1y + e1z * e1z) ** 0.5
    e1x /= en
    e1y /= en
    e1z /= en
    e2x = ny * e1z - nz * e1y
    e2y = nz * e1x - nx * e1z
    e2z = nx * e1y - ny * e1x

    angles = np.empty(ncut, np.float64)
    for c in range(ncut):
        i = cutpts[c]
        qx = v2[i, 0] - cx
        qy = v2[i, 1] - cy
        qz = v2[i, 2] - cz
        u = qx * e1x + qy * e1y + qz * e1z
        w = qx * e2x + qy * e2y + qz * e2z
        angles[c] = np.arctan2(w, u)
    for c in range(1, ncut):
        keyv = angles[c]
        keyi = cutpts[c]
        j = c - 1
        while j >= 0 and angles[j] > keyv:
            angles[j + 1] = angles[j]
            cutpts[j + 1] = cutpts[j]
            j -= 1
        angles[j + 1] = keyv
        cutpts[j + 1] = keyi

    for c in range(ncut):
        floops2[nnf, c] = cutpts[c]
    flens2[nnf] = ncut
    ftags2[nnf] = tag
    nnf += 1

    if nnv < 4 or nnf < 4:
        return EMPTY, 0, 0, 0.0
    return CLIPPED, nnv, nnf, maxd2
