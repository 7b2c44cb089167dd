"""Intersection homology of stratified simplicial complexes and the harmonic-form
cross-check against it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .complexes import StratifiedComplex, barycentric_subdivision, closure
from .errors import HodgeLabError, ValidationError
from .exact import integer_rank


# ----------------------------------------------------------------------------
# perversities


@dataclass(frozen=True)
class Perversity:
    """Values ``pbar(0), ..., pbar(n)``."""

    values: tuple

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if not vals or vals[0] != 0:
            raise ValidationError("perversity must start with pbar(0) = 0")
        for a, b in zip(vals, vals[1:]):
            if b - a not in (0, 1):
                raise ValidationError(f"perversity steps must be 0 or 1, got {vals}")
        object.__setattr__(self, "values", vals)

    def __call__(self, k: int) -> int:
        if k < 0:
            raise ValidationError("codimension must be >= 0")
        if k >= len(self.values):
            raise ValidationError(f"perversity only defined up to codimension "
                                  f"{len(self.values) - 1}")
        return self.values[k]

    @property
    def n(self):
        return len(self.values) - 1

    def dominates(self, other: "Perversity") -> bool:
        return all(a >= b for a, b in zip(self.values, other.values))


def gm_perversity(n: int) -> Perversity:
    """Upper middle perversity ``pbar(j) = floor((j - 1) / 2)``, ``pbar(0) = 0``."""
    if n < 0:
        raise ValidationError("n must be >= 0")
    return Perversity(tuple([0] + [(j - 1) // 2 for j in range(1, n + 1)]))


def parse_perversity(text: str, n: int | None = None) -> Perversity:
    try:
        vals = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ValidationError(f"perversity must be a comma list of integers: {text!r}") from exc
    pv = Perversity(vals)
    if n is not None and pv.n < n:
        raise ValidationError(f"perversity has {len(vals)} values; need {n + 1}")
    return pv


# ----------------------------------------------------------------------------
# combinatorial spheres and stratification


def _faces_of(simplices, dim):
    return [s for s in simplices if len(s) == dim + 1]


def _betti_exact(simplices):
    """Rational Betti numbers of a finite simplicial complex."""
    if not simplices:
        return []
    top = max(len(s) for s in simplices) - 1
    faces = [sorted(_faces_of(simplices, p)) for p in range(top + 1)]
    index = [{s: i for i, s in enumerate(f)} for f in faces]
    ranks = [0] * (top + 2)
    for p in range(1, top + 1):
        rows, cols, vals = [], [], []
        for c, s in enumerate(faces[p]):
            for j in range(len(s)):
                rows.append(index[p - 1][s[:j] + s[j + 1:]])
                cols.append(c)
                vals.append(-1 if j % 2 else 1)
        B = sp.csr_matrix((vals, (rows, cols)), shape=(len(faces[p - 1]), len(faces[p])))
        ranks[p] = integer_rank(B.T)
    return [len(faces[p]) - ranks[p] - ranks[p + 1] for p in range(top + 1)]


def _link_in(simplices, s):
    ss = set(s)
    return {tuple(v for v in t if v not in ss) for t in simplices
            if len(t) > len(s) and ss <= set(t)}


def is_combinatorial_sphere(simplices, m: int) -> bool:
    """Whether the complex generated by ``simplices`` is a combinatorial m-sphere.

    Checked as: pure of dimension m, every vertex link an (m-1)-sphere (recursively),
    and the rational homology of the m-sphere.
    """
    simplices = closure(simplices)
    if m == -1:
        return not simplices
    if not simplices:
        return False
    dims = {len(t) - 1 for t in simplices}
    if max(dims) != m:
        return False
    top = _faces_of(simplices, m)
    if closure(top) != simplices:
        return False
    if m == 0:
        return len(top) == 2
    verts = [t for t in simplices if len(t) == 1]
    for v in verts:
        if not is_combinatorial_sphere(_link_in(simplices, v), m - 1):
            return False
    betti = _betti_exact(simplices)
    want = [1] + [0] * (m - 1) + [1]
    return betti == want


def stratify_multiconical(K: StratifiedComplex, force: bool = False) -> StratifiedComplex:
    """Natural stratification of a bare complex by link inspection.

    Simplices are visited from the top dimension down. A d-simplex ``t`` is placed in
    the largest stratum dimension ``s`` (among its cofaces' strata) for which the part
    of its link lying in that stratum closes up to an ``(s-d-1)``-sphere; otherwise it
    starts a stratum of its own dimension. ``X_j`` is the union of simplices placed in
    dimension ``<= j``.
    """
    if K.strata is not None and not force:
        return K
    n = K.dim
    cof = {s: [] for s in K.simplices}
    for t in K.simplices:
        for r in range(1, len(t)):
            for f in _subfaces(t, r):
                cof[f].append(t)
    sdim = {}
    for d in range(n, -1, -1):
        for t in K.faces[d]:
            if not cof[t]:
                sdim[t] = d
                continue
            link = {tuple(v for v in c if v not in t) for c in cof[t]}
            link_dims = {len(r) - 1 for r in link}
            link_top = [r for r in link if not any(set(r) < set(q) for q in link)]
            if {len(r) - 1 for r in link_top} != {max(link_dims)}:
                raise ValidationError(f"link of simplex {t} is not pure; the complex is not a "
                                      "multiconical model")
            chosen = d
            for s in sorted({sdim[c] for c in cof[t]}, reverse=True):
                if s <= d:
                    continue
                part = [tuple(v for v in c if v not in t) for c in cof[t] if sdim[c] == s]
                if is_combinatorial_sphere(closure(part), s - d - 1):
                    chosen = s
                    break
            sdim[t] = chosen
    strata = {j: {t for t, s in sdim.items() if s <= j} for j in range(n)}
    out = K.with_strata(strata)
    out.metadata = dict(out.metadata, stratified="multiconical")
    return out


def _subfaces(t, r):
    import itertools
    return itertools.combinations(t, r)


# ----------------------------------------------------------------------------
# allowability and IH


def intersection_dim(simplex, stratum) -> int | None:
    """Dimension of ``simplex`` intersected with a full subcomplex, ``None`` if empty."""
    k = sum(1 for v in simplex if (v,) in stratum)
    return None if k == 0 else k - 1


def allowable(sigma, K: StratifiedComplex, pv: Perversity) -> bool:
    """GM allowability of a simplex (or every simplex in the support of a chain):
    ``dim(|s| n X_{n-k}) <= i - k + pbar(k)`` for all ``k >= 1``.

    Intersections are read off vertex sets, which is exact once the complex has been
    barycentrically subdivided (strata are then full subcomplexes).
    """
    if K.strata is None:
        raise ValidationError("strata must be computed first")
    if isinstance(sigma, dict):
        return all(allowable(s, K, pv) for s, c in sigma.items() if c != 0)
    if sigma and isinstance(sigma[0], (tuple, list)):
        return all(allowable(s, K, pv) for s in sigma)
    s = tuple(sorted(sigma))
    i = len(s) - 1
    n = K.dim
    for k in range(1, n + 1):
        X = K.strata.get(n - k, set())
        dim = intersection_dim(s, X)
        if dim is not None and dim > i - k + pv(k):
            return False
    return True


@dataclass
class IHResult:
    perversity: Perversity
    betti: dict
    fingerprint: dict = field(default_factory=dict)
    chain_groups: dict = field(default_factory=dict)

    def to_dict(self):
        return {"perversity": list(self.perversity.values),
                "betti": {str(k): v for k, v in sorted(self.betti.items())},
                "fingerprint": {str(k): v for k, v in sorted(self.fingerprint.items())}}

    def table(self):
        lines = ["degree  IH"]
        lines += [f"{k:>6}  {v}" for k, v in sorted(self.betti.items())]
        return "\n".join(lines)


def allowable_simplices(K: StratifiedComplex, pv: Perversity):
    """Per degree, the list of allowable simplices of ``K``."""
    return [[s for s in K.faces[i] if allowable(s, K, pv)] for i in range(K.dim + 1)]


def ih_betti(K: StratifiedComplex, pv: Perversity | None = None, subdivide: bool = True
             ) -> IHResult:
    """Intersection homology Betti numbers over the rationals.

    The complex is subdivided once so that strata are full subcomplexes. With ``A_i``
    the allowable i-simplices, ``IH_i = [a_i - rank(bd|A_i)] - [rank(bd|A_{i+1}) -
    rank(N_{i+1})]`` where ``N`` keeps only the boundary components on non-allowable
    faces. All ranks are exact.
    """
    if K.strata is None:
        K = stratify_multiconical(K)
    K.orientation()
    n = K.dim
    pv = gm_perversity(n) if pv is None else pv
    if pv.n < n:
        raise ValidationError(f"perversity defined up to {pv.n}, complex has dimension {n}")
    fp = K.fingerprint()
    L = barycentric_subdivision(K) if subdivide else K
    A = allowable_simplices(L, pv)
    allowed = [set(a) for a in A]
    full_rank, bad_rank = [0] * (n + 2), [0] * (n + 2)
    for i in range(1, n + 1):
        idx = L.index[i - 1]
        rows, cols, vals, brows = [], [], [], []
        for c, s in enumerate(A[i]):
            for j in range(len(s)):
                f = s[:j] + s[j + 1:]
                rows.append(idx[f])
                cols.append(c)
                vals.append(-1 if j % 2 else 1)
                brows.append(f not in allowed[i - 1])
        B = sp.csr_matrix((vals, (rows, cols)), shape=(L.counts[i - 1], len(A[i])))
        full_rank[i] = integer_rank(B.T) if len(A[i]) else 0
        mask = np.array(brows, dtype=bool)
        if mask.any():
            Nb = sp.csr_matrix((np.array(vals)[mask], (np.array(rows)[mask],
                                                      np.array(cols)[mask])),
                               shape=B.shape)
            bad_rank[i] = integer_rank(Nb.T)
    betti = {}
    groups = {}
    for i in range(n + 1):
        a = len(A[i])
        cycles = a - full_rank[i]
        bounds = full_rank[i + 1] - bad_rank[i + 1]
        betti[i] = cycles - bounds
        groups[i] = a - bad_rank[i]
        if betti[i] < 0:
            raise HodgeLabError(f"negative Betti number in degree {i}")
    return IHResult(pv, betti, fp, groups)


def simplicial_betti(K: StratifiedComplex):
    """Ordinary rational Betti numbers of ``K``."""
    b = _betti_exact(K.simplices)
    return {i: b[i] if i < len(b) else 0 for i in range(K.dim + 1)}


# ----------------------------------------------------------------------------
# cross-check with harmonic forms


@dataclass
class CrossCheckReport:
    rows: list
    passed: bool
    space: str

    def to_dict(self):
        return {"space": self.space, "passed": self.passed,
                "rows": [dict(r) for r in self.rows]}

    def table(self):
        lines = ["p  dim_ker  IH_(n-p)  verdict"]
        for r in self.rows:
            lines.append(f"{r['p']}  {r['harmonic']:>7}  {r['ih']:>8}  "
                         f"{'pass' if r['pass'] else 'FAIL'}")
        return "\n".join(lines)


def hodge_cross_check(space, harmonic=None, pv: Perversity | None = None,
                      ih: IHResult | None = None, search_cap: float = 200.0
                      ) -> CrossCheckReport:
    """Compare ``dim ker Delta_p`` with ``IH_{n-p}`` for every degree.

    ``space`` is a MetricGraph (n = 1) or a StratifiedComplex; ``harmonic`` may supply
    precomputed kernel dimensions, otherwise the owning solver is run (relative
    conditions on a complex's boundary).
    """
    from .graph_laplace import MetricGraph, harmonic_dim_1, kernel_dimension, secular_spectrum_0
    from .meshes import graph_complex

    if isinstance(space, MetricGraph):
        name = "graph"
        n = 1
        if harmonic is None:
            res = secular_spectrum_0(space, (0.0, search_cap))
            harmonic = [kernel_dimension(res), harmonic_dim_1(space)]
        if ih is None:
            K = stratify_multiconical(graph_complex(space))
            ih = ih_betti(K, pv)
    elif isinstance(space, StratifiedComplex):
        from .mesh_hodge import apply_relative_bc, build_complex, harmonic_dims
        name = space.metadata.get("kind", "complex")
        n = space.dim
        if harmonic is None:
            C = build_complex(space)
            if space.boundary:
                C = apply_relative_bc(C)
            harmonic = list(harmonic_dims(C))
        if ih is None:
            ih = ih_betti(space if space.strata is not None else stratify_multiconical(space),
                          pv)
    else:
        raise ValidationError(f"unsupported space type {type(space).__name__}")
    rows = []
    for p in range(n + 1):
        h = int(harmonic[p])
        b = int(ih.betti.get(n - p, 0))
        rows.append({"p": p, "harmonic": h, "ih_degree": n - p, "ih": b, "pass": h == b})
    return CrossCheckReport(rows, all(r["pass"] for r in rows), name)
