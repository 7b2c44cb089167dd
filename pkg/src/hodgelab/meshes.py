"""Generators for the standard test complexes."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .complexes import StratifiedComplex
from .errors import ValidationError


def interval_mesh(cells: int, length: float = 1.0, boundary: bool = True) -> StratifiedComplex:
    if cells < 1:
        raise ValidationError("need at least one cell")
    x = np.linspace(0.0, length, cells + 1)
    top = [(i, i + 1) for i in range(cells)]
    bnd = {(0,), (cells,)} if boundary else set()
    return StratifiedComplex(cells + 1, top, x[:, None], boundary=bnd,
                             strata={0: set(bnd)} if boundary else {0: set()},
                             metadata={"kind": "interval", "cells": cells, "length": length})


def _grid_triangles(N, M, periodic):
    vid = (lambda i, j: (i % N) * M + (j % M)) if periodic else (lambda i, j: i * (M + 1) + j)
    top = []
    for i in range(N):
        for j in range(M):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            top.append((a, b, c))
            top.append((a, c, d))
    return top


def torus_mesh(N: int, M: int | None = None, size=(1.0, 1.0)) -> StratifiedComplex:
    """Flat torus ``R^2 / (size_x Z x size_y Z)`` on an ``N x M`` grid, diagonals split.

    The metric is given by edge lengths; ``coords`` holds chart coordinates in the
    fundamental domain.
    """
    M = N if M is None else M
    if N < 3 or M < 3:
        raise ValidationError("torus grid needs at least 3 cells per direction")
    Lx, Ly = size
    top = _grid_triangles(N, M, True)
    coords = np.array([(i * Lx / N, j * Ly / M) for i in range(N) for j in range(M)])
    lengths = {}
    for t in top:
        for a, b in itertools.combinations(t, 2):
            di = (b // M - a // M) % N
            dj = (b % M - a % M) % M
            di = min(di, N - di)
            dj = min(dj, M - dj)
            lengths[tuple(sorted((a, b)))] = math.hypot(di * Lx / N, dj * Ly / M)
    # the chart from the unit square is (x, y) -> (Lx x, Ly y)
    lam = max(max(L, 1.0 / L) for L in (Lx, Ly))
    return StratifiedComplex(N * M, top, coords, lengths, strata={0: set(), 1: set()},
                             metadata={"kind": "torus", "grid": (N, M), "size": tuple(size),
                                       "Lambda": float(lam)})


def square_mesh(N: int, size: float = 1.0) -> StratifiedComplex:
    top = _grid_triangles(N, N, False)
    coords = np.array([(i * size / N, j * size / N) for i in range(N + 1) for j in range(N + 1)])
    return StratifiedComplex((N + 1) ** 2, top, coords,
                             metadata={"kind": "square", "grid": N, "size": size})


def cube_mesh(N: int, size: float = 1.0) -> StratifiedComplex:
    """Unit cube split into ``N^3`` cells of six Kuhn tetrahedra each."""
    vid = lambda i, j, k: (i * (N + 1) + j) * (N + 1) + k
    top = []
    for i, j, k in itertools.product(range(N), repeat=3):
        base = np.array([i, j, k])
        for perm in itertools.permutations(range(3)):
            cur = base.copy()
            simp = [vid(*cur)]
            for ax in perm:
                cur = cur.copy()
                cur[ax] += 1
                simp.append(vid(*cur))
            top.append(tuple(simp))
    grid = np.arange(N + 1) * size / N
    coords = np.array([(a, b, c) for a in grid for b in grid for c in grid])
    return StratifiedComplex((N + 1) ** 3, top, coords,
                             metadata={"kind": "cube", "grid": N, "size": size})


def disk_mesh(rings: int, radius: float = 1.0, boundary: bool = True) -> StratifiedComplex:
    """Disk triangulated by concentric rings; ring ``k`` carries ``6k`` vertices."""
    if rings < 1:
        raise ValidationError("need at least one ring")
    coords = [(0.0, 0.0)]
    start = [0]
    for k in range(1, rings + 1):
        start.append(len(coords))
        m = 6 * k
        r = radius * k / rings
        coords += [(r * math.cos(2 * math.pi * j / m), r * math.sin(2 * math.pi * j / m))
                   for j in range(m)]
    top = []
    for j in range(6):
        top.append((0, start[1] + j, start[1] + (j + 1) % 6))
    for k in range(2, rings + 1):
        ma, mb = 6 * (k - 1), 6 * k
        A = lambda i: start[k - 1] + i % ma
        B = lambda j: start[k] + j % mb
        i = j = 0
        while i < ma or j < mb:
            if i < ma and (j == mb or (i + 1) / ma <= (j + 1) / mb):
                top.append((A(i), A(i + 1), B(j)))
                i += 1
            else:
                top.append((A(i), B(j), B(j + 1)))
                j += 1
    bnd = set()
    if boundary:
        m = 6 * rings
        s = start[rings]
        bnd = {(s + j, s + (j + 1) % m) for j in range(m)}
    return StratifiedComplex(len(coords), top, np.array(coords), boundary=bnd,
                             strata={0: set(), 1: set(bnd)},
                             metadata={"kind": "disk", "rings": rings, "radius": radius})


def sphere_mesh(level: int = 2) -> StratifiedComplex:
    """Subdivided octahedron projected to the unit sphere."""
    verts = [np.array(v, dtype=float) for v in
             [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]]
    tris = [(0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4), (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5)]
    for _ in range(level):
        mid = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in mid:
                v = verts[a] + verts[b]
                verts.append(v / np.linalg.norm(v))
                mid[key] = len(verts) - 1
            return mid[key]

        new = []
        for a, b, c in tris:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        tris = new
    return StratifiedComplex(len(verts), tris, np.array(verts), strata={0: set(), 1: set()},
                             metadata={"kind": "sphere", "level": level})


def suspension_of_cycle(m: int = 6, height: float = 1.0) -> StratifiedComplex:
    """Spindle: two cones over an ``m``-cycle glued along the cycle (a 2-sphere)."""
    ring = [(math.cos(2 * math.pi * j / m), math.sin(2 * math.pi * j / m), 0.0) for j in range(m)]
    coords = np.array(ring + [(0.0, 0.0, height), (0.0, 0.0, -height)])
    n, s = m, m + 1
    top = [(j, (j + 1) % m, n) for j in range(m)] + [(j, (j + 1) % m, s) for j in range(m)]
    return StratifiedComplex(m + 2, top, coords, metadata={"kind": "spindle", "m": m})


def cone_distance(eps: float, theta: float) -> float:
    """Distance between two lid points at angular separation ``theta`` in a cone of
    radius ``eps`` (law of cosines, with square root)."""
    theta = min(abs(theta), math.pi)
    return math.sqrt(max(2.0 * eps * eps * (1.0 - math.cos(theta)), 0.0))


def closed_cone(base: StratifiedComplex, eps: float = 1.0) -> StratifiedComplex:
    """Cone ``[0, eps] x Y / {0} x Y`` over ``base`` with the apex as vertex 0.

    Radial edges have length ``eps``; a base edge of length ``l`` becomes the chord
    ``cone_distance(eps, l)``. The apex is a 0-stratum and the lid ``{eps} x Y`` is
    both the boundary and a codimension-one stratum.
    """
    if eps <= 0:
        raise ValidationError("eps must be positive")
    nb = base.n_vertices
    shift = lambda s: tuple(v + 1 for v in s)
    top = [(0,) + shift(s) for s in base.top]
    lengths = {(0, v + 1): eps for v in range(nb)}
    for e in (base.faces[1] if base.dim >= 1 else []):
        lengths[shift(e)] = cone_distance(eps, base.edge_length(e))
    lid = {shift(s) for s in base.simplices}
    n = base.dim + 1
    strata = {0: {(0,)}}
    if base.strata:
        for j, X in base.strata.items():
            strata[j + 1] = {(0,) + shift(s) for s in X} | {(0,)}
    strata[n - 1] = strata.get(n - 1, set()) | lid
    return StratifiedComplex(nb + 1, top, None, lengths, strata, lid,
                             {"kind": "closed_cone", "eps": eps,
                              "base": base.metadata.get("kind")})


def cycle_complex(m: int, length: float = 2 * math.pi) -> StratifiedComplex:
    top = [(j, (j + 1) % m) for j in range(m)]
    lengths = {tuple(sorted(e)): length / m for e in top}
    return StratifiedComplex(m, top, None, lengths, strata={0: set()},
                             metadata={"kind": "cycle", "m": m, "length": length})


def points_complex(k: int) -> StratifiedComplex:
    return StratifiedComplex(k, [(i,) for i in range(k)], np.zeros((k, 1)),
                             metadata={"kind": "points", "k": k})


def graph_complex(G, subdivisions: int = 3) -> StratifiedComplex:
    """Simplicial model of a metric graph; each edge is cut into ``subdivisions`` pieces."""
    if subdivisions < 3:
        raise ValidationError("at least 3 pieces per edge keep loops and multi-edges simplicial")
    vid = {v: i for i, v in enumerate(G.vertices)}
    nv = len(vid)
    top, lengths = [], {}
    for e in G.edges:
        chain = [vid[e.tail]]
        for _ in range(subdivisions - 1):
            chain.append(nv)
            nv += 1
        chain.append(vid[e.head])
        for a, b in zip(chain, chain[1:]):
            top.append((a, b))
            lengths[tuple(sorted((a, b)))] = e.length / subdivisions
    return StratifiedComplex(nv, top, None, lengths,
                             metadata={"kind": "graph", "subdivisions": subdivisions})
