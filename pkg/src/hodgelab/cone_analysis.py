"""Metric cones over graphs, finite point sets or abstract base spectra.

Covers the cone distance, the cone and product formulas for L2 cohomology and
intersection homology, and the Neumann-lid spectrum of the function Laplacian by
separation of variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
from scipy import optimize, special

from .errors import ValidationError
from .graph_laplace import MetricGraph, secular_spectrum_0, star
from .spectral import SpectralResult, merge_results

MAX_ORDER = 2000.0


@dataclass(frozen=True)
class PointSet:
    """Finite metric space; ``distances`` is a symmetric matrix with zero diagonal."""

    distances: np.ndarray

    def __post_init__(self):
        D = np.asarray(self.distances, dtype=float)
        if D.ndim == 0:
            D = np.zeros((int(D), int(D)))
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] < 1:
            raise ValidationError("distances must be a square matrix of at least one point")
        if not np.allclose(D, D.T) or np.any(np.diag(D) != 0) or np.any(D < 0):
            raise ValidationError("distances must be symmetric, nonnegative, zero on diagonal")
        off = D[~np.eye(len(D), dtype=bool)]
        if np.any(off <= 0):
            raise ValidationError("distinct points must be at positive distance")
        object.__setattr__(self, "distances", D)

    @classmethod
    def uniform(cls, k: int, distance: float = math.pi):
        return cls(distance * (1 - np.eye(k)))

    def __len__(self):
        return len(self.distances)

    @property
    def diameter(self):
        return float(self.distances.max())


@dataclass
class ConeSpace:
    """Truncated cone ``CY(eps)`` over a graph, point set or base spectrum list."""

    base: object
    eps: float = 1.0
    base_dim: int | None = None

    def __post_init__(self):
        if not (isinstance(self.eps, (int, float)) and math.isfinite(self.eps) and self.eps > 0):
            raise ValidationError("eps must be finite and positive")
        self.eps = float(self.eps)
        if isinstance(self.base, MetricGraph):
            self.base_dim = 1
            if graph_diameter(self.base) > math.pi * (1 + 1e-9):
                raise ValidationError("base graph diameter exceeds pi")
        elif isinstance(self.base, PointSet):
            self.base_dim = 0
            if self.base.diameter > math.pi * (1 + 1e-12):
                raise ValidationError("base point distances exceed pi")
        else:
            mu = np.asarray(self.base, dtype=float).ravel()
            if len(mu) == 0 or np.any(mu < 0) or np.any(np.diff(mu) < 0) or \
                    not np.all(np.isfinite(mu)):
                raise ValidationError("base spectrum must be a nonempty nonnegative "
                                      "ascending list")
            self.base = mu
            if self.base_dim is None:
                self.base_dim = 1
            if self.base_dim < 1:
                raise ValidationError("a spectrum-list base needs dimension >= 1")

    @property
    def k(self):
        return self.base_dim + 1

    @property
    def kind(self):
        if isinstance(self.base, MetricGraph):
            return "graph"
        if isinstance(self.base, PointSet):
            return "points"
        return "spectrum"


def graph_diameter(G: MetricGraph, pieces: int = 16) -> float:
    """Diameter of a metric graph, sampled at ``pieces`` points per edge."""
    vid = {v: i for i, v in enumerate(G.vertices)}
    n = len(vid)
    rows, cols, w = [], [], []
    for e in G.edges:
        chain = [vid[e.tail]] + list(range(n, n + pieces - 1)) + [vid[e.head]]
        n += pieces - 1
        for a, b in zip(chain, chain[1:]):
            rows.append(a)
            cols.append(b)
            w.append(e.length / pieces)
    A = sp.coo_matrix((w, (rows, cols)), shape=(n, n)).tocsr()
    D = csgraph.shortest_path(A, directed=False)
    D = D[np.isfinite(D)]
    return float(D.max()) if D.size else 0.0


def cone_distance(t1: float, y1, t2: float, y2, dY) -> float:
    """Distance between ``(t1, y1)`` and ``(t2, y2)`` in the metric cone over ``Y``.

    ``dY`` is a callable ``dY(y1, y2)`` or a precomputed base distance.
    """
    d = float(dY(y1, y2)) if callable(dY) else float(dY)
    if d < 0:
        raise ValidationError("base distance must be nonnegative")
    if d > math.pi * (1 + 1e-12):
        raise ValidationError(f"base distance {d} exceeds pi")
    if t1 < 0 or t2 < 0:
        raise ValidationError("radii must be nonnegative")
    sq = t1 * t1 + t2 * t2 - 2.0 * t1 * t2 * math.cos(min(d, math.pi))
    return math.sqrt(max(sq, 0.0))


# ----------------------------------------------------------------------------
# cohomology tables


@dataclass
class CohomologyTable:
    """Degree -> dimension maps for L2 cohomology (plain and compactly supported) and
    intersection homology (Borel-Moore style ``ih`` and compactly supported ``ih_c``)."""

    n: int
    l2: dict = field(default_factory=dict)
    l2_c: dict = field(default_factory=dict)
    ih: dict = field(default_factory=dict)
    ih_c: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("l2", "l2_c", "ih", "ih_c"):
            table = {int(k): int(v) for k, v in getattr(self, name).items()}
            for deg, dim in table.items():
                if dim < 0:
                    raise ValidationError(f"{name}[{deg}] is negative")
                if (deg < 0 or deg > self.n) and dim != 0:
                    raise ValidationError(f"{name}[{deg}] nonzero outside 0..{self.n}")
            setattr(self, name, {i: table.get(i, 0) for i in range(self.n + 1)})

    def to_dict(self):
        return {"n": self.n, "l2": self.l2, "l2_c": self.l2_c, "ih": self.ih, "ih_c": self.ih_c}


def _check_dims(dims, name):
    out = {int(k): int(v) for k, v in dict(dims).items()}
    for k, v in out.items():
        if v < 0:
            raise ValidationError(f"{name}[{k}] = {v} is negative")
    return out


def _k1_reduced(base_dims):
    comps = base_dims.get(0, 0)
    if comps < 1:
        raise ValidationError("a 0-dimensional base needs at least one point")
    return comps - 1


def cone_l2_cohomology(base_dims, k: int) -> CohomologyTable:
    """L2 cohomology of ``CY`` from that of ``Y`` (dimension ``k - 1``).

    For ``k = 1`` the base is a finite set and ``base_dims[0]`` is its number of points.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    b = _check_dims(base_dims, "base_dims")
    if k == 1:
        red = _k1_reduced(b)
        return CohomologyTable(1, l2={0: red, 1: 0}, l2_c={0: 0, 1: 1},
                               ih={1: red, 0: 0}, ih_c={1: 0, 0: 1})
    l2 = {i: (b.get(i, 0) if i < k / 2 else 0) for i in range(k + 1)}
    l2_c = {i: (b.get(i - 1, 0) if i >= k / 2 + 1 else 0) for i in range(k + 1)}
    return CohomologyTable(k, l2=l2, l2_c=l2_c)


def cone_ih(base_ih, k: int, base_ih_c=None) -> CohomologyTable:
    """Intersection homology of ``CY`` from that of ``Y``; ``Y`` compact by default."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    b = _check_dims(base_ih, "base_ih")
    bc = b if base_ih_c is None else _check_dims(base_ih_c, "base_ih_c")
    if k == 1:
        red = _k1_reduced(b)
        return CohomologyTable(1, l2={0: red, 1: 0}, l2_c={0: 0, 1: 1},
                               ih={1: red, 0: 0}, ih_c={1: 0, 0: 1})
    ih, ih_c = {}, {}
    for i in range(k + 1):
        ih[k - i] = b.get(k - 1 - i, 0) if i < k / 2 else 0
        ih_c[k - i] = bc.get(k - i, 0) if i >= k / 2 + 1 else 0
    return CohomologyTable(k, ih=ih, ih_c=ih_c)


def cone_tables(base_dims, k: int, base_ih=None) -> CohomologyTable:
    """Both the L2 and the IH tables of ``CY`` in one object."""
    a = cone_l2_cohomology(base_dims, k)
    b = cone_ih(base_dims if base_ih is None else base_ih, k)
    return CohomologyTable(k, l2=a.l2, l2_c=a.l2_c, ih=b.ih, ih_c=b.ih_c)


def kunneth_product(cone_table: CohomologyTable, ball_dim: int) -> CohomologyTable:
    """Tables of ``B^{ball_dim} x CY`` from those of ``CY``."""
    if ball_dim < 0:
        raise ValidationError("ball_dim must be >= 0")
    k = cone_table.n
    n = k + ball_dim
    l2 = {i: cone_table.l2.get(i, 0) for i in range(n + 1)}
    l2_c = {i: cone_table.l2_c.get(i - ball_dim, 0) for i in range(n + 1)}
    ih = {n - i: cone_table.ih.get(k - i, 0) for i in range(n + 1)}
    ih_c = {j: cone_table.ih_c.get(j, 0) for j in range(n + 1)}
    return CohomologyTable(n, l2=l2, l2_c=l2_c, ih=ih, ih_c=ih_c)


# ----------------------------------------------------------------------------
# separation of variables


def _radial_fn(nu, a):
    # f(r) = r^{-a} J_nu(sqrt(lam) r): the lid condition f'(eps) = 0 reads x J'(x) - a J(x) = 0
    if a == 0:
        return lambda x: special.jvp(nu, x)
    return lambda x: x * special.jvp(nu, x) - a * special.jv(nu, x)


def radial_roots(mu: float, count: int | None = None, x_max: float | None = None,
                 base_dim: int = 1):
    """Roots ``x`` of the Neumann lid condition on the unit cone, ascending.

    ``x = 0`` is included exactly when ``mu = 0`` (the constant mode). Stops after
    ``count`` roots or at ``x_max``.
    """
    if mu < 0 or not math.isfinite(mu):
        raise ValidationError("mu must be finite and nonnegative")
    if count is None and x_max is None:
        raise ValidationError("give count or x_max")
    a = (base_dim - 1) / 2.0
    nu = math.sqrt(mu + a * a)
    if nu > MAX_ORDER:
        raise ValidationError(f"Bessel order {nu:.1f} outside supported range [0, {MAX_ORDER}]")
    f = _radial_fn(nu, a)
    roots = [0.0] if mu == 0 else []
    step = math.pi / 16
    x = max(1e-6, 0.5 * nu if nu > 50 else 1e-6)
    fx = f(x)
    while True:
        if count is not None and len(roots) >= count:
            break
        if x_max is not None and x > x_max:
            break
        x2 = x + step
        f2 = f(x2)
        if not (math.isfinite(fx) and math.isfinite(f2)):
            raise ValidationError(f"Bessel evaluation overflow at order {nu}, argument {x2}")
        if fx == 0.0 and x > 1e-6:
            roots.append(x)
        elif fx * f2 < 0:
            roots.append(optimize.brentq(f, x, x2, xtol=1e-15, rtol=1e-15, maxiter=200))
        x, fx = x2, f2
    roots = np.array(roots)
    if x_max is not None:
        roots = roots[roots <= x_max]
    if count is not None:
        roots = roots[:count]
    return roots


def radial_spectrum(mu: float, eps: float = 1.0, count: int = 10, tol: float = 1e-12,
                    base_dim: int = 1) -> SpectralResult:
    """First ``count`` eigenvalues of the radial problem for base eigenvalue ``mu``.

    Square-integrable at the vertex, Neumann at ``r = eps``. Values are ``(x / eps)^2``
    with ``x`` the roots on the unit cone, so rescaling is exact up to one rounding.
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    if eps <= 0:
        raise ValidationError("eps must be positive")
    x = radial_roots(mu, count=count, base_dim=base_dim)
    vals = (x / eps) ** 2
    meta = {"method": "bessel", "mu": float(mu), "eps": float(eps),
            "order": math.sqrt(mu + ((base_dim - 1) / 2.0) ** 2)}
    return SpectralResult.from_values(0, vals, np.zeros(len(vals)), meta, rel_tol=1e-12)


def _radial_below(mu, eps, cap, base_dim):
    x = radial_roots(mu, x_max=math.sqrt(cap) * eps, base_dim=base_dim)
    return (x / eps) ** 2


def cone_spectrum_below(cone: ConeSpace, cap: float, tol=1e-8) -> SpectralResult:
    """Every eigenvalue ``<= cap`` of the function Laplacian on ``CY(eps)``."""
    eps = cone.eps
    if cone.kind == "points":
        G = star([eps] * len(cone.base))
        lids = [v for v in G.vertices if v != "c"]
        res = secular_spectrum_0(G, (0.0, cap), tol=tol, lids=lids)
        res.metadata["reduction"] = "star graph with lids"
        return res
    if cone.kind == "graph":
        mus = secular_spectrum_0(cone.base, (0.0, cap * eps * eps), tol=tol).eigenvalues
    else:
        mus = cone.base[cone.base <= cap * eps * eps]
    parts, branches = [], []
    for mu in mus:
        lam = _radial_below(float(mu), eps, cap, cone.base_dim)
        parts.append(lam)
        branches.append((float(mu), len(lam)))
    meta = {"method": "separation", "cap": cap, "branches": branches, "eps": eps}
    return merge_results(0, parts, meta, rel_tol=1e-9)


def cone_graph_spectrum(Y, eps: float, count: int, tol: float = 1e-8) -> SpectralResult:
    """Lowest ``count`` eigenvalues of the function Laplacian on ``CY(eps)`` with a
    Neumann lid; ``Y`` is a MetricGraph, PointSet, spectrum list or ConeSpace."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    cone = Y if isinstance(Y, ConeSpace) else ConeSpace(Y, eps)
    cap = max(16.0, 4.0 * count) / cone.eps ** 2
    for _ in range(40):
        res = cone_spectrum_below(cone, cap, tol)
        if len(res) > count:
            break
        cap *= 2.0
    out = res.head(count)
    out.metadata["count"] = count
    return out
