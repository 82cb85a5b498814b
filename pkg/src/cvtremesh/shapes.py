"""Procedural test meshes: icospheres, rounded cubes, flat grids."""

import numpy as np

from .mesh import TriangleMesh


def icosahedron(radius=1.0):
    phi = (1.0 + 5.0**0.5) / 2.0
    v = np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=np.float64)
    v *= radius / np.linalg.norm(v[0])
    f = np.array([
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ], dtype=np.int64)
    return v, f


def icosphere(subdivisions=3, radius=1.0):
    """Icosahedron subdivided ``subdivisions`` times and projected onto the
    sphere; face count is 20 * 4**subdivisions."""
    v, f = icosahedron(radius)
    verts = [tuple(p) for p in v]
    faces = [tuple(t) for t in f]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                p = np.array(verts[i]) + np.array(verts[j])
                p *= radius / np.linalg.norm(p)
                cache[key] = len(verts)
                verts.append(tuple(p))
            return cache[key]

        nxt = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            nxt += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = nxt
    return TriangleMesh.from_arrays(np.array(verts), np.array(faces, dtype=np.int64))


def rounded_cube(divisions=12, fillet=0.25, half=1.0):
    """Cube of half-width ``half`` with edges and corners rounded to the
    ``fillet`` radius; each side is a divisions x divisions grid."""
    if not 0.0 < fillet < half:
        raise ValueError("fillet must lie in (0, half)")
    core = half - fillet
    verts = {}
    faces = []

    def vid(p):
        key = (round(p[0], 12), round(p[1], 12), round(p[2], 12))
        if key not in verts:
            verts[key] = len(verts)
        return verts[key]

    def snap(p):
        c = np.clip(p, -core, core)
        d = p - c
        ln = np.linalg.norm(d)
        return c + d * (fillet / ln)

    axes = ((0, 1, 2), (1, 2, 0), (2, 0, 1))
    lin = np.linspace(-half, half, divisions + 1)
    for ax, au, av in axes:
        for sign in (-1.0, 1.0):
            for i in range(divisions):
                for j in range(divisions):
                    quad = []
                    for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = np.zeros(3)
                        p[ax] = sign * half
                        p[au] = lin[i + du]
                        p[av] = lin[j + dv]
                        quad.append(vid(snap(p)))
                    a, b, c, d = quad if sign > 0 else quad[::-1]
                    faces.append((a, b, c))
                    faces.append((a, c, d))
    coords = np.empty((len(verts), 3))
    for key, idx in verts.items():
        coords[idx] = key
    return TriangleMesh.from_arrays(coords, np.array(faces, dtype=np.int64))


def flat_grid(nx=4, ny=4, size=1.0):
    """Planar z=0 grid of nx*ny cells, each split into two triangles."""
    xs = np.linspace(0.0, size, nx + 1)
    ys = np.linspace(0.0, size, ny + 1)
    verts = np.array([(x, y, 0.0) for y in ys for x in xs])
    faces = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b = a + 1
            c = a + nx + 1
            d = c + 1
            faces.append((a, b, d))
            faces.append((a, d, c))
    return TriangleMesh.from_arrays(verts, np.array(faces, dtype=np.int64))


def unit_square():
    """Two coplanar triangles covering [0, 1]^2 in the z=0 plane."""
    v = np.array([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)], dtype=np.float64)
    f = np.array([(0, 1, 2), (0, 2, 3)], dtype=np.int64)
    return TriangleMesh.from_arrays(v, f)


def cube(half=1.0):
    """Axis-aligned cube of half-width ``half``, two triangles per side."""
    v = np.array([(x, y, z) for x in (-half, half) for y in (-half, half)
                  for z in (-half, half)])
    quads = (
        (0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1),
        (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3),
    )
    faces = []
    for a, b, c, d in quads:
        faces.append((a, b, c))
        faces.append((a, c, d))
    return TriangleMesh.from_arrays(v, np.array(faces, dtype=np.int64))
