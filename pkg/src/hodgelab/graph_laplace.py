"""Function Laplacian on finite oriented metric graphs.

Functions in the domain of ``d`` are edgewise H^1 with a *balance* condition at each
vertex: the endpoint values on incoming edges sum to the endpoint values on outgoing
edges. A 1-form lies in the domain of the adjoint when, in each edge's own oriented
coordinate, all of its endpoint values at a vertex ``v`` equal one number ``F_v``.
With these conventions ``<df, w> = <f, -w'>`` and Delta_0 acts as ``-f''`` edgewise.

Vertices listed in ``lids`` (valence one only) instead carry a Neumann condition
``f' = 0``; the cone module uses them for the truncation boundary of a cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, SpectralGapError, ValidationError
from .spectral import SpectralResult, solve_pencil

SV_REL_TOL = 1e-8
GAP_RATIO = 1e3


@dataclass(frozen=True)
class Edge:
    id: Hashable
    tail: Hashable
    head: Hashable
    length: float


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        edges = tuple(e if isinstance(e, Edge) else Edge(*e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if len(set(self.vertices)) != len(self.vertices):
            raise ValidationError("duplicate vertex identifiers")
        if len({e.id for e in edges}) != len(edges):
            raise ValidationError("duplicate edge identifiers")
        vset = set(self.vertices)
        used = set()
        for e in edges:
            try:
                length = float(e.length)
            except (TypeError, ValueError):
                raise ValidationError(f"edge {e.id!r}: length must be a number") from None
            if not math.isfinite(length) or length <= 0:
                raise ValidationError(f"edge {e.id!r}: length must be positive and finite")
            for end in (e.tail, e.head):
                if end not in vset:
                    raise ValidationError(f"edge {e.id!r} references unknown vertex {end!r}")
                used.add(end)
        isolated = vset - used
        if isolated:
            raise ValidationError(f"isolated vertices not allowed: {sorted(map(str, isolated))}")

    @classmethod
    def from_dict(cls, doc):
        try:
            edges = [Edge(e["id"], e["tail"], e["head"], e["length"]) for e in doc["edges"]]
            return cls(tuple(doc["vertices"]), tuple(edges))
        except KeyError as exc:
            raise ValidationError(f"graph document missing field {exc}") from None

    def to_dict(self):
        return {
            "vertices": list(self.vertices),
            "edges": [{"id": e.id, "tail": e.tail, "head": e.head, "length": float(e.length)}
                      for e in self.edges],
        }

    @property
    def total_length(self):
        return float(sum(e.length for e in self.edges))

    def edge_index(self, edge_id):
        for i, e in enumerate(self.edges):
            if e.id == edge_id:
                return i
        raise ValidationError(f"unknown edge {edge_id!r}")

    def ends_at(self, v):
        """``(edge index, at_head)`` pairs for every edge endpoint located at ``v``."""
        out = []
        for i, e in enumerate(self.edges):
            if e.tail == v:
                out.append((i, False))
            if e.head == v:
                out.append((i, True))
        return out

    def valence(self, v):
        return len(self.ends_at(v))

    def components(self):
        parent = {v: v for v in self.vertices}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in self.edges:
            parent[find(e.tail)] = find(e.head)
        groups = {}
        for v in self.vertices:
            groups.setdefault(find(v), []).append(v)
        return list(groups.values())


@dataclass
class EdgeProfile:
    """Samples of a function on one edge at increasing arclength positions ``s``."""

    edge: Hashable
    s: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.s) < 2 or len(self.s) != len(self.values):
            raise ValidationError("an edge profile needs at least two nodes")
        if np.any(np.diff(self.s) <= 0):
            raise ValidationError("profile nodes must be strictly increasing in s")


@dataclass
class VertexData:
    vertex: Hashable
    balance_residual: float
    flux: float | None = None


def betti_numbers(G: MetricGraph):
    b0 = len(G.components())
    return b0, len(G.edges) - len(G.vertices) + b0


def _check_lids(G, lids):
    lids = frozenset(lids or ())
    for v in lids:
        if v not in G.vertices:
            raise ValidationError(f"lid vertex {v!r} not in graph")
        if G.valence(v) != 1:
            raise ValidationError(f"lid vertex {v!r} must have valence one")
    return lids


# ---------------------------------------------------------------------------
# secular equation


def condition_matrix(G: MetricGraph, k: float, lids=frozenset()):
    """Vertex-condition matrix for the edgewise ansatz at frequency ``k = sqrt(lam)``.

    On each edge ``f(s) = a cos(ks) + b kap sin(ks)/k`` with ``kap = max(k, 1)``;
    derivative rows are divided by ``kap``. The scaling is continuous in ``k`` down to
    ``k = 0`` where the basis becomes ``{1, s}``.
    """
    E = len(G.edges)
    kap = max(k, 1.0)
    A = np.zeros((2 * E, 2 * E))

    def vals(i, at_head):
        L = G.edges[i].length if at_head else 0.0
        c = math.cos(k * L)
        sinc = L * np.sinc(k * L / math.pi)  # sin(kL)/k, equal to L at k = 0
        f = (c, kap * sinc)
        df = (-k * k * sinc / kap, c)
        return f, df

    r = 0
    for v in G.vertices:
        ends = G.ends_at(v)
        if v in lids:
            i, h = ends[0]
            _, df = vals(i, h)
            A[r, 2 * i:2 * i + 2] += df
            r += 1
            continue
        for i, h in ends:
            f, _ = vals(i, h)
            A[r, 2 * i:2 * i + 2] += np.multiply(f, 1.0 if h else -1.0)
        r += 1
        i0, h0 = ends[0]
        _, d0 = vals(i0, h0)
        for i, h in ends[1:]:
            _, d = vals(i, h)
            A[r, 2 * i0:2 * i0 + 2] += d0
            A[r, 2 * i:2 * i + 2] -= d
            r += 1
    return A


def _reference_scale(G):
    # entries of the scaled condition matrix are bounded by max(1, L_max)
    return math.sqrt(2 * len(G.edges)) * max(1.0, max(e.length for e in G.edges))


def _svals(G, k, lids):
    """Singular values of the condition matrix relative to its reference scale."""
    s = np.linalg.svd(condition_matrix(G, k, lids), compute_uv=False)
    return s / _reference_scale(G)


def _gfun(G, k, lids):
    return _svals(G, k, lids)[-1]


def _golden_min(fun, a, b, rel=1e-15, maxiter=200):
    gr = (math.sqrt(5) - 1) / 2
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(maxiter):
        if b - a <= rel * max(abs(a), abs(b), 1.0):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def _bisect_det(G, lids, a, b, fa, maxiter=200):
    for _ in range(maxiter):
        m = 0.5 * (a + b)
        if b - a <= 1e-15 * max(b, 1.0):
            return m
        fm = np.linalg.det(condition_matrix(G, m, lids))
        if fm == 0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    raise ConvergenceError(f"bisection failed to bracket a root in [{a}, {b}]")


def secular_spectrum_0(G: MetricGraph, search_interval=(0.0, 100.0), tol=1e-8, lids=(),
                       step=None):
    """All eigenvalues of Delta_0 in ``search_interval`` from the secular equation.

    Candidate roots come from sign changes of the condition-matrix determinant
    (refined by bisection) and from local minima of its smallest relative singular
    value (refined by golden section); the second route catches roots of even
    multiplicity where the determinant does not change sign. The multiplicity of a
    root is the numerical nullity of the condition matrix there.
    """
    lids = _check_lids(G, lids)
    lo, hi = map(float, search_interval)
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise ValidationError("search interval must be bounded with lo <= hi")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    k_lo, k_hi = math.sqrt(max(lo, 0.0)), math.sqrt(max(hi, 0.0))
    if step is None:
        step = min(math.pi / (24.0 * G.total_length), max(k_hi, 1e-3) / 400.0)
    values, residuals, flags = [], [], []

    if lo <= 0.0:
        s = _svals(G, 0.0, lids)
        null = int(np.sum(s <= SV_REL_TOL))
        values += [0.0] * null
        residuals += [float(s[-1])] * null

    n = max(int(math.ceil((k_hi - k_lo) / step)), 2)
    ks = np.linspace(k_lo, k_hi, n + 1)
    if ks[0] == 0.0:
        ks = ks[1:]
    g = np.empty(len(ks))
    det = np.empty(len(ks))
    ref = _reference_scale(G)
    for j, k in enumerate(ks):
        A = condition_matrix(G, k, lids)
        g[j] = np.linalg.svd(A, compute_uv=False)[-1] / ref
        det[j] = np.linalg.det(A)

    cands = []
    for j in range(len(ks) - 1):
        if det[j] == 0.0:
            cands.append(ks[j])
        elif det[j] * det[j + 1] < 0:
            cands.append(_bisect_det(G, lids, ks[j], ks[j + 1], det[j]))
    for j in range(1, len(ks) - 1):
        if g[j] <= g[j - 1] and g[j] <= g[j + 1]:
            x, gx = _golden_min(lambda k: _gfun(G, k, lids), ks[j - 1], ks[j + 1])
            if gx < 1e-6:
                cands.append(x)
    if len(ks) >= 2 and g[-1] < g[-2] and g[-1] < 1e-6:
        cands.append(ks[-1])

    cands.sort()
    roots = []
    for c in cands:
        if c <= 0 or c < k_lo or c > k_hi:
            continue
        if roots and abs(c - roots[-1]) <= 1e-8 * max(c, 1.0):
            if _gfun(G, c, lids) < _gfun(G, roots[-1], lids):
                roots[-1] = c
            continue
        roots.append(c)

    for k in roots:
        s = _svals(G, k, lids)
        null = int(np.sum(s <= SV_REL_TOL))
        if null == 0:
            continue
        if null > 1 and s[-1] < 1e-13 and s[-null] > 1e-11:
            flags.append({"lambda": k * k, "merged_multiplicity": null})
        values += [k * k] * null
        residuals += [float(s[-1])] * null

    meta = {"method": "secular", "search_interval": [lo, hi], "tol": tol,
            "grid_step_k": step, "lids": sorted(map(str, lids)), "flags": flags}
    res = SpectralResult.from_values(0, values, residuals, meta)
    neg = res.eigenvalues < -1e-9
    if np.any(neg):
        raise ConvergenceError("negative eigenvalue from secular solver")
    return res


# ---------------------------------------------------------------------------
# finite elements


@dataclass
class GraphFEM:
    """P1 discretization: unknowns are per-edge node values, ``u = T w``."""

    graph: MetricGraph
    nodes_per_edge: int
    offsets: np.ndarray
    K: sp.csr_matrix
    M: sp.csr_matrix
    T: sp.csr_matrix
    constraints: sp.csr_matrix
    lids: frozenset = field(default_factory=frozenset)

    def edge_nodes(self, i):
        L = self.graph.edges[i].length
        return np.linspace(0.0, L, self.nodes_per_edge)

    def split(self, u):
        return [u[self.offsets[i]:self.offsets[i + 1]] for i in range(len(self.graph.edges))]


def graph_fem(G: MetricGraph, nodes_per_edge: int, lids=()):
    if nodes_per_edge < 2:
        raise ValidationError("nodes_per_edge must be at least 2")
    lids = _check_lids(G, lids)
    m = nodes_per_edge
    E = len(G.edges)
    N = m * E
    offsets = np.arange(E + 1) * m
    rows, cols, kv, mv = [], [], [], []
    for i, e in enumerate(G.edges):
        h = e.length / (m - 1)
        for a in range(m - 1):
            p, q = offsets[i] + a, offsets[i] + a + 1
            rows += [p, p, q, q]
            cols += [p, q, p, q]
            kv += [1 / h, -1 / h, -1 / h, 1 / h]
            mv += [h / 3, h / 6, h / 6, h / 3]
    K = sp.csr_matrix((kv, (rows, cols)), shape=(N, N))
    M = sp.csr_matrix((mv, (rows, cols)), shape=(N, N))

    crow, ccol, cval = [], [], []
    pivots = {}
    r = 0
    for v in G.vertices:
        if v in lids:
            continue
        ends = G.ends_at(v)
        for idx, (i, h) in enumerate(ends):
            slot = offsets[i] + (m - 1 if h else 0)
            crow.append(r)
            ccol.append(slot)
            cval.append(1.0 if h else -1.0)
            if idx == 0:
                pivots[slot] = r
        r += 1
    C = sp.csr_matrix((cval, (crow, ccol)), shape=(r, N))

    # eliminate one endpoint unknown per vertex against its balance row
    free = [j for j in range(N) if j not in pivots]
    col_of = {j: c for c, j in enumerate(free)}
    trow, tcol, tval = [], [], []
    for j in free:
        trow.append(j)
        tcol.append(col_of[j])
        tval.append(1.0)
    Cc = C.tocsr()
    for slot, rr in pivots.items():
        start, end = Cc.indptr[rr], Cc.indptr[rr + 1]
        cj = dict(zip(Cc.indices[start:end], Cc.data[start:end]))
        piv = cj.pop(slot)
        for j, c in cj.items():
            trow.append(slot)
            tcol.append(col_of[j])
            tval.append(-c / piv)
    T = sp.csr_matrix((tval, (trow, tcol)), shape=(N, len(free)))
    return GraphFEM(G, m, offsets, K, M, T, C, lids)


def fem_spectrum_0(G: MetricGraph, nodes_per_edge: int, count: int, lids=(), tol=1e-8,
                   seed=0):
    """Lowest ``count`` eigenvalues of the P1 pencil on the balance-constrained space."""
    fem = graph_fem(G, nodes_per_edge, lids)
    K = (fem.T.T @ fem.K @ fem.T).tocsr()
    M = (fem.T.T @ fem.M @ fem.T).tocsr()
    dim = K.shape[0]
    if count > dim:
        raise ValidationError(f"count={count} exceeds constrained-space dimension {dim}")
    vals, _, res = solve_pencil(K, M, count, tol=tol, seed=seed)
    vals = np.where(np.abs(vals) < 1e-11 * max(1.0, abs(vals).max()), 0.0, vals)
    if np.any(vals < -1e-9):
        raise ConvergenceError("negative eigenvalue in FEM pencil")
    meta = {"method": "fem-p1", "nodes_per_edge": nodes_per_edge, "tol": tol, "seed": seed,
            "dimension": dim, "lids": sorted(map(str, fem.lids))}
    return SpectralResult.from_values(0, vals, res, meta)


def harmonic_dim_1(G: MetricGraph, nodes_per_edge: int = 4):
    """dim of 1-forms orthogonal to Im(d): element count minus rank of the discrete d."""
    fem = graph_fem(G, nodes_per_edge)
    m = nodes_per_edge
    E = len(G.edges)
    n1 = (m - 1) * E
    rows, cols, vals = [], [], []
    for i in range(E):
        for a in range(m - 1):
            r = i * (m - 1) + a
            rows += [r, r]
            cols += [fem.offsets[i] + a, fem.offsets[i] + a + 1]
            vals += [-1.0, 1.0]
    D = sp.csr_matrix((vals, (rows, cols)), shape=(n1, m * E)) @ fem.T
    s = np.linalg.svd(D.toarray(), compute_uv=False)
    rank = _gapped_rank(s)
    return n1 - rank


def _gapped_rank(s, rel=SV_REL_TOL):
    if len(s) == 0 or s[0] == 0:
        return 0
    cut = rel * s[0]
    below = s[s <= cut]
    above = s[s > cut]
    if len(below) and len(above) and above[-1] < GAP_RATIO * max(below[0], 1e-300) \
            and below[0] > 1e-14 * s[0]:
        raise SpectralGapError("ambiguous numerical rank", below=float(below[0]),
                               above=float(above[-1]))
    return int(len(above))


# ---------------------------------------------------------------------------
# adjointness and orientation


def adjointness_defect(G: MetricGraph, trials: int, seed: int = 0, nodes_per_edge: int = 6,
                       flip_edge=None, normalized=False):
    """max |<df, w> - <f, d*w>| over random discrete f in Dom(d) and w in Dom(d*).

    ``f`` is P1 per edge satisfying the balance condition; ``w`` is P1 per edge with
    endpoint value ``F_v`` at every vertex. Both pairings are integrated exactly.
    ``flip_edge`` negates ``w`` at the head end of that edge (negative control).
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    fem = graph_fem(G, nodes_per_edge)
    rng = np.random.default_rng(seed)
    flip = None if flip_edge is None else G.edge_index(flip_edge)
    vindex = {v: j for j, v in enumerate(G.vertices)}
    worst = 0.0
    for _ in range(trials):
        f = fem.T @ rng.standard_normal(fem.T.shape[1])
        F = rng.standard_normal(len(G.vertices))
        lhs = rhs = nf = nw = 0.0
        for i, e in enumerate(G.edges):
            fe = f[fem.offsets[i]:fem.offsets[i + 1]]
            w = rng.standard_normal(nodes_per_edge)
            w[0] = F[vindex[e.tail]]
            w[-1] = F[vindex[e.head]] * (-1.0 if i == flip else 1.0)
            h = e.length / (nodes_per_edge - 1)
            df, dw = np.diff(fe), np.diff(w)
            lhs += np.sum(df * 0.5 * (w[:-1] + w[1:]))
            rhs += np.sum(-dw * 0.5 * (fe[:-1] + fe[1:]))
            nf += h * np.sum(fe[:-1] ** 2 + fe[:-1] * fe[1:] + fe[1:] ** 2) / 3
            nw += h * np.sum(w[:-1] ** 2 + w[:-1] * w[1:] + w[1:] ** 2) / 3
        d = abs(lhs - rhs)
        if normalized:
            d /= math.sqrt(nf * nw) if nf * nw > 0 else 1.0
        worst = max(worst, d)
    return worst


def reverse_edge(G: MetricGraph, edge_id, profiles=None):
    """Reverse one edge; the function on it changes sign and is re-parametrized."""
    i = G.edge_index(edge_id)
    e = G.edges[i]
    edges = list(G.edges)
    edges[i] = Edge(e.id, e.head, e.tail, e.length)
    G2 = MetricGraph(G.vertices, tuple(edges))
    if profiles is None:
        return G2, None
    out = {}
    for eid, prof in profiles.items():
        if eid == edge_id:
            L = G.edges[i].length
            out[eid] = EdgeProfile(eid, (L - prof.s)[::-1], -prof.values[::-1])
        else:
            out[eid] = EdgeProfile(eid, prof.s.copy(), prof.values.copy())
    return G2, out


def profiles_from_vector(fem: GraphFEM, u):
    return {e.id: EdgeProfile(e.id, fem.edge_nodes(i), part)
            for i, (e, part) in enumerate(zip(fem.graph.edges, fem.split(u)))}


def vertex_data(G: MetricGraph, profiles):
    """Balance residual at every vertex, and the flux when derivatives agree."""
    out = []
    for v in G.vertices:
        bal = 0.0
        ders = []
        for i, at_head in G.ends_at(v):
            p = profiles[G.edges[i].id]
            if at_head:
                bal += p.values[-1]
                ders.append((p.values[-1] - p.values[-2]) / (p.s[-1] - p.s[-2]))
            else:
                bal -= p.values[0]
                ders.append((p.values[1] - p.values[0]) / (p.s[1] - p.s[0]))
        flux = float(np.mean(ders)) if np.ptp(ders) < 1e-9 * (1 + np.abs(ders).max()) else None
        out.append(VertexData(v, float(bal), flux))
    return out


def in_domain(G: MetricGraph, profiles, tol=1e-10):
    return all(abs(vd.balance_residual) <= tol for vd in vertex_data(G, profiles))


def energy(profiles: dict):
    """Dirichlet energy sum_e int |f_e'|^2 of piecewise-linear profiles."""
    return float(sum(np.sum(np.diff(p.values) ** 2 / np.diff(p.s)) for p in profiles.values()))


def kernel_dimension(result: SpectralResult, gap_tol: float = 1e-6):
    """Number of eigenvalues below ``gap_tol``, refusing when no clear gap separates them."""
    vals = result.eigenvalues
    below = vals[vals < gap_tol]
    above = vals[vals >= gap_tol]
    if len(above) == 0:
        raise SpectralGapError("no eigenvalue above gap_tol; cannot certify the kernel",
                               below=float(below[-1]) if len(below) else None)
    top = float(abs(below).max()) if len(below) else 0.0
    first = float(above[0])
    if first < GAP_RATIO * gap_tol or (top > 0 and first / top < GAP_RATIO):
        raise SpectralGapError(
            f"no spectral gap at {gap_tol}: straddling eigenvalues {top} and {first}",
            below=top, above=first)
    return int(len(below))


# ---------------------------------------------------------------------------
# small graph constructors used by tests, examples and the cone module


def segment(length=1.0):
    return MetricGraph(("a", "b"), (Edge("e", "a", "b", length),))


def circle(length=2 * math.pi):
    return MetricGraph(("v",), (Edge("e", "v", "v", length),))


def bouquet(lengths: Iterable[float]):
    lengths = list(lengths)
    return MetricGraph(("v",), tuple(Edge(f"e{i}", "v", "v", L) for i, L in enumerate(lengths)))


def figure_eight(length=2 * math.pi):
    return bouquet([length, length])


def star(legs: Iterable[float], center="c"):
    legs = list(legs)
    verts = (center,) + tuple(f"x{i}" for i in range(len(legs)))
    return MetricGraph(verts, tuple(Edge(f"e{i}", center, f"x{i}", L)
                                    for i, L in enumerate(legs)))


def theta(lengths=(1.0, 1.0, 1.0)):
    return MetricGraph(("u", "w"), tuple(Edge(f"e{i}", "u", "w", L)
                                         for i, L in enumerate(lengths)))


def disjoint_union(*graphs):
    verts, edges = [], []
    for j, G in enumerate(graphs):
        verts += [f"{j}:{v}" for v in G.vertices]
        edges += [Edge(f"{j}:{e.id}", f"{j}:{e.tail}", f"{j}:{e.head}", e.length)
                  for e in G.edges]
    return MetricGraph(tuple(verts), tuple(edges))


def random_graph(n_vertices, n_edges, seed=0, length_range=(0.5, 1.5)):
    """Connected random multigraph (spanning tree plus extra edges, loops allowed)."""
    if n_edges < n_vertices - 1:
        raise ValidationError("need at least n_vertices - 1 edges for connectivity")
    rng = np.random.default_rng(seed)
    verts = tuple(f"v{i}" for i in range(n_vertices))
    pairs = [(int(rng.integers(0, i)), i) for i in range(1, n_vertices)]
    while len(pairs) < n_edges:
        pairs.append((int(rng.integers(0, n_vertices)), int(rng.integers(0, n_vertices))))
    edges = []
    for j, (a, b) in enumerate(pairs):
        if rng.random() < 0.5:
            a, b = b, a
        edges.append(Edge(f"e{j}", verts[a], verts[b], float(rng.uniform(*length_range))))
    return MetricGraph(verts, tuple(edges))
