"""Finite simplicial complexes with metric data, a stratification filtration and a boundary.

Simplices are sorted tuples of vertex indices; orientation is the sorted order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def closure(simplices):
    """All nonempty faces of the given simplices, as sorted tuples."""
    out = set()
    for s in simplices:
        s = tuple(sorted(s))
        for r in range(1, len(s) + 1):
            out.update(itertools.combinations(s, r))
    return out


@dataclass
class StratifiedComplex:
    """Simplicial complex ``K`` with optional coordinates, edge-length overrides,
    stratification ``{j: X_j}`` (closed subcomplexes, ``j < dim``) and boundary subcomplex.

    ``strata`` is ``None`` for a bare complex whose stratification is still unknown.
    """

    n_vertices: int
    top: list
    coords: np.ndarray | None = None
    lengths: dict = field(default_factory=dict)
    strata: dict | None = None
    boundary: set = field(default_factory=set)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        top = []
        for s in self.top:
            s = tuple(int(v) for v in s)
            if len(set(s)) != len(s):
                raise ValidationError(f"simplex {s} repeats a vertex")
            for v in s:
                if v < 0 or v >= self.n_vertices:
                    raise ValidationError(f"simplex {s} references vertex {v} out of range "
                                          f"0..{self.n_vertices - 1}")
            top.append(tuple(sorted(s)))
        self.top = top
        if not top:
            raise ValidationError("complex has no simplices")
        self._all = closure(top)
        used = {s[0] for s in self._all if len(s) == 1}
        if len(used) != self.n_vertices:
            missing = sorted(set(range(self.n_vertices)) - used)
            raise ValidationError(f"vertices {missing[:5]} belong to no simplex")
        self.dim = max(len(s) for s in top) - 1
        self.faces = [sorted(s for s in self._all if len(s) == p + 1) for p in range(self.dim + 1)]
        self.index = [{s: i for i, s in enumerate(fs)} for fs in self.faces]
        if self.coords is not None:
            self.coords = np.asarray(self.coords, dtype=float)
            if self.coords.ndim == 1:
                self.coords = self.coords[:, None]
            if len(self.coords) != self.n_vertices:
                raise ValidationError("coordinate count does not match vertex count")
        lengths = {}
        for e, L in (self.lengths or {}).items():
            e = tuple(sorted(int(v) for v in e))
            if e not in self.index[1] if self.dim >= 1 else True:
                raise ValidationError(f"length override for non-edge {e}")
            if not (L > 0 and math.isfinite(L)):
                raise ValidationError(f"edge {e}: length must be positive")
            lengths[e] = float(L)
        self.lengths = lengths
        if self.coords is None and self.dim >= 1:
            missing = [e for e in self.faces[1] if e not in self.lengths]
            if missing:
                raise ValidationError(f"no coordinates and no length for edge {missing[0]}")
        self.boundary = closure(self.boundary) if self.boundary else set()
        if not self.boundary <= self._all:
            bad = sorted(self.boundary - self._all)[0]
            raise ValidationError(f"boundary simplex {bad} is not in the complex")
        if self.strata is not None:
            strata = {}
            for j, sims in self.strata.items():
                c = closure(sims)
                if not c <= self._all:
                    bad = sorted(c - self._all)[0]
                    raise ValidationError(f"stratum X_{j} simplex {bad} is not in the complex")
                strata[int(j)] = c
            self.strata = self._complete_filtration(strata)

    def _complete_filtration(self, strata):
        # make X_j increasing in j, fill gaps, and cap dimensions
        out = {}
        acc = set()
        for j in range(self.dim):
            acc = acc | strata.get(j, set())
            out[j] = set(acc)
        for j in range(self.dim - 1, -1, -1):
            for i in range(j):
                out[j] |= out[i]
        for j, X in out.items():
            if any(len(s) - 1 > j for s in X):
                raise ValidationError(f"stratum X_{j} contains a simplex of dimension > {j}")
        return out

    # ------------------------------------------------------------------
    @property
    def counts(self):
        return [len(f) for f in self.faces]

    @property
    def simplices(self):
        return self._all

    def is_pure(self):
        return all(len(s) == self.dim + 1 for s in self.top) and \
            {s for s in self.top} == set(self.faces[self.dim])

    def edge_length(self, e):
        e = tuple(sorted(e))
        if e in self.lengths:
            return self.lengths[e]
        return float(np.linalg.norm(self.coords[e[0]] - self.coords[e[1]]))

    def euler_characteristic(self):
        return sum((-1) ** p * c for p, c in enumerate(self.counts))

    def cofaces(self, s):
        s = set(s)
        return [t for t in self._all if len(t) > len(s) and s <= set(t)]

    def link(self, s):
        """Link of ``s`` as a set of sorted tuples."""
        s = tuple(sorted(s))
        ss = set(s)
        out = set()
        for t in self._all:
            if len(t) > len(s) and ss <= set(t):
                out.add(tuple(v for v in t if v not in ss))
        return out

    def boundary_matrix_rows(self, p):
        """Incidence entries ``(row of (p+1)-simplex, col of p-simplex, sign)``."""
        rows, cols, vals = [], [], []
        if p + 1 > self.dim:
            return rows, cols, vals
        idx = self.index[p]
        for r, s in enumerate(self.faces[p + 1]):
            for j in range(len(s)):
                rows.append(r)
                cols.append(idx[s[:j] + s[j + 1:]])
                vals.append(-1 if j % 2 else 1)
        return rows, cols, vals

    def top_dimensional_faces_count(self):
        """Map (n-1)-face -> number of top simplices containing it."""
        cnt = {}
        for s in self.faces[self.dim]:
            for j in range(len(s)):
                f = s[:j] + s[j + 1:]
                cnt[f] = cnt.get(f, 0) + 1
        return cnt

    def orientation(self):
        """Consistent orientation signs of top simplices over the codimension-zero stratum.

        Adjacent top simplices sharing an (n-1)-face outside ``X_{n-1}`` (or, for a bare
        complex, a face with exactly two cofaces) must induce opposite orientations on it.
        Raises ``ValidationError`` when no consistent choice exists.
        """
        n = self.dim
        tops = self.faces[n]
        if n == 0:
            return np.ones(len(tops), dtype=int)
        sing = self.strata.get(n - 1, set()) if self.strata else set()
        adj = {}
        for t, s in enumerate(tops):
            for j in range(len(s)):
                f = s[:j] + s[j + 1:]
                adj.setdefault(f, []).append((t, -1 if j % 2 else 1))
        sign = np.zeros(len(tops), dtype=int)
        for start in range(len(tops)):
            if sign[start]:
                continue
            sign[start] = 1
            stack = [start]
            while stack:
                t = stack.pop()
                s = tops[t]
                for j in range(len(s)):
                    f = s[:j] + s[j + 1:]
                    nb = adj[f]
                    if len(nb) != 2 or f in sing:
                        continue
                    (t1, e1), (t2, e2) = nb
                    other, eo, et = (t2, e2, e1) if t1 == t else (t1, e1, e2)
                    want = -sign[t] * et * eo
                    if sign[other] == 0:
                        sign[other] = want
                        stack.append(other)
                    elif sign[other] != want:
                        raise ValidationError(
                            "codimension-zero stratum is not orientable "
                            f"(conflict across face {f})")
        return sign

    def with_strata(self, strata):
        return StratifiedComplex(self.n_vertices, list(self.top), self.coords, dict(self.lengths),
                                 strata, set(self.boundary), dict(self.metadata))

    def fingerprint(self):
        if self.strata is None:
            return None
        return {j: len(X) for j, X in sorted(self.strata.items())}


def barycentric_subdivision(K: StratifiedComplex):
    """First barycentric subdivision with subdivided strata, boundary and metric.

    New vertices are barycenters of simplices of ``K`` (ordered by the face lists);
    a new simplex is a flag ``t_0 < t_1 < ... < t_i`` of simplices of ``K``.
    Edge lengths of the subdivision are computed in the flat metric of the simplex
    containing the flag.
    """
    verts = [s for p in range(K.dim + 1) for s in K.faces[p]]
    vid = {s: i for i, s in enumerate(verts)}
    top = []
    for s in K.top:
        for perm in itertools.permutations(s):
            flag = [tuple(sorted(perm[:r])) for r in range(1, len(perm) + 1)]
            top.append(tuple(vid[f] for f in flag))
    top = sorted({tuple(sorted(t)) for t in top})

    coords = None
    if K.coords is not None:
        coords = np.array([K.coords[list(s)].mean(axis=0) for s in verts])
    all_new = closure(top)
    lengths = {}
    if K.lengths:
        for e in (x for x in all_new if len(x) == 2):
            a, b = verts[e[0]], verts[e[1]]
            host = a if set(b) <= set(a) else b
            lengths[e] = _flat_distance(K, host, a, b)

    def sub(X):
        # a flag lies in the subdivided subcomplex iff its largest simplex lies in X
        return {t for t in all_new if max((verts[v] for v in t), key=len) in X}

    strata = None if K.strata is None else {j: sub(X) for j, X in K.strata.items()}
    boundary = sub(K.boundary) if K.boundary else set()
    meta = dict(K.metadata)
    meta["subdivided"] = meta.get("subdivided", 0) + 1
    return StratifiedComplex(len(verts), top, coords, lengths, strata, boundary, meta)


def _flat_distance(K, host, a, b):
    """Distance between barycenters of faces a, b of simplex ``host`` in its flat metric."""
    host = tuple(sorted(host))
    m = len(host)
    L2 = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            L2[i, j] = L2[j, i] = K.edge_length((host[i], host[j])) ** 2
    wa = np.array([1.0 / len(a) if v in a else 0.0 for v in host])
    wb = np.array([1.0 / len(b) if v in b else 0.0 for v in host])
    w = wa - wb
    # squared distance between affine combinations: -1/2 w^T L2 w (sum w = 0)
    d2 = -0.5 * w @ L2 @ w
    return float(math.sqrt(max(d2, 0.0)))
