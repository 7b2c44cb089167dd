"""Rayleigh-quotient upper bounds from rescaled bump forms, biLipschitz envelopes and
Weyl-exponent fits."""

from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .complexes import StratifiedComplex
from .errors import ConvergenceError, ValidationError
from .mesh_hodge import CochainSystem, build_complex, kernel_basis
from .spectral import SpectralResult

SUPPORT = (0.125, 0.875)


# ----------------------------------------------------------------------------
# bump profiles


def _bump(t, a=SUPPORT[0], b=SUPPORT[1]):
    t = np.asarray(t, dtype=float)
    inside = (t > a) & (t < b)
    return np.where(inside, ((t - a) * (b - t)) ** 3, 0.0)


def _bump_prime(t, a=SUPPORT[0], b=SUPPORT[1]):
    t = np.asarray(t, dtype=float)
    inside = (t > a) & (t < b)
    u, v = t - a, b - t
    return np.where(inside, 3.0 * (u * v) ** 2 * (v - u), 0.0)


@dataclass
class BumpProfile:
    """``psi = f dx_1 ^ ... ^ dx_p`` on the unit cube with ``f`` a normalized product of
    C^2 bumps supported in ``[1/8, 7/8]^n``.

    ``nodes``/``weights`` form a Gauss-Legendre tensor grid on the support, exact for
    the polynomial integrands involved.
    """

    n: int
    p: int
    nodes: np.ndarray
    weights: np.ndarray
    scale: float
    E_psi: float
    N_psi: float
    normalized: bool = True
    N_details: dict = field(default_factory=dict)

    def f(self, x):
        """Profile values at points ``x`` of shape ``(..., n)``."""
        x = np.asarray(x, dtype=float)
        return self.scale * np.prod(_bump(x), axis=-1)

    def grad_f(self, x):
        x = np.asarray(x, dtype=float)
        b = _bump(x)
        db = _bump_prime(x)
        out = np.empty(x.shape)
        for j in range(self.n):
            others = np.prod(np.delete(b, j, axis=-1), axis=-1)
            out[..., j] = self.scale * db[..., j] * others
        return out

    def grid_points(self):
        """Tensor quadrature points, shape ``(m^n, n)``, and weights ``(m^n,)``."""
        pts = np.array(list(itertools.product(self.nodes, repeat=self.n)))
        w = np.prod(np.array(list(itertools.product(self.weights, repeat=self.n))), axis=1)
        return pts, w

    def l2_norm_sq(self):
        pts, w = self.grid_points()
        return float(np.sum(w * self.f(pts) ** 2))

    def energy(self):
        """``int |d psi|^2``: only derivatives along axes ``p+1..n`` survive."""
        pts, w = self.grid_points()
        g = self.grad_f(pts)[:, self.p:]
        return float(np.sum(w * np.sum(g * g, axis=1)))


def bump_profile(n: int, p: int, grid: int = 16, reference_resolution: int | None = None,
                 max_resolution: int | None = None, rel_change: float = 0.01) -> BumpProfile:
    """Normalized bump form with energy and quotient square-norm.

    ``N_psi`` is 1 for ``p = 0``. For ``p >= 1`` it is the squared norm of ``psi`` after
    projection off the exact forms on a reference cube mesh, refined by doubling until
    the relative change falls below ``rel_change``.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    if not 0 <= p < n:
        raise ValidationError(f"degree p={p} must satisfy 0 <= p < n={n}; "
                              "for p >= n the form is closed")
    if grid < 7:
        raise ValidationError("grid needs at least 7 nodes for exact quadrature")
    x, w = np.polynomial.legendre.leggauss(grid)
    a, b = SUPPORT
    nodes = a + (b - a) * (x + 1) / 2
    weights = w * (b - a) / 2
    prof = BumpProfile(n, p, nodes, weights, 1.0, 0.0, 1.0)
    prof.scale = 1.0 / math.sqrt(prof.l2_norm_sq())
    prof.E_psi = prof.energy()
    if not prof.E_psi > 0:
        raise ValidationError("d psi vanishes")
    if p >= 1:
        key = (n, p, grid, reference_resolution, max_resolution, rel_change)
        if key not in _QUOTIENT_NORMS:
            _QUOTIENT_NORMS[key] = quotient_norm_sq(prof, reference_resolution,
                                                    max_resolution, rel_change)
        N, details = _QUOTIENT_NORMS[key]
        prof.N_psi, prof.N_details = N, copy.deepcopy(details)
    return prof


# the reference-mesh projection is deterministic and costly in three dimensions
_QUOTIENT_NORMS: dict = {}


# ----------------------------------------------------------------------------
# de Rham interpolation of psi onto simplicial cochains


def _simplex_rule(p, m):
    """Collapsed Gauss rule on the reference p-simplex: points ``(q, p)``, weights ``(q,)``."""
    if p == 0:
        return np.zeros((1, 0)), np.ones(1)
    x, w = np.polynomial.legendre.leggauss(m)
    t = (x + 1) / 2
    wt = w / 2
    pts, wts = [], []
    for idx in itertools.product(range(m), repeat=p):
        ts = t[list(idx)]
        u = np.empty(p)
        rem = 1.0
        jac = 1.0
        for i in range(p):
            u[i] = rem * ts[i]
            jac *= rem
            rem *= 1.0 - ts[i]
        pts.append(u)
        wts.append(np.prod(wt[list(idx)]) * jac)
    return np.array(pts), np.array(wts)


def de_rham_cochain(profile: BumpProfile, K: StratifiedComplex, p: int | None = None,
                    coeff=None, quad: int = 8):
    """Integrals of ``coeff dx_1 ^ ... ^ dx_p`` over the oriented p-simplices of ``K``,
    read in the chart coordinates ``K.coords``.

    ``coeff`` defaults to the profile function. On a torus mesh each simplex is
    unwrapped next to its first vertex before integrating.
    """
    p = profile.p if p is None else p
    faces = np.asarray(K.faces[p])
    X = K.coords[faces]
    size = K.metadata.get("size") if K.metadata.get("kind") == "torus" else None
    if size is not None:
        L = np.asarray(size, dtype=float)
        D = X - X[:, :1, :]
        D -= L * np.round(D / L)
        X = X[:, :1, :] + D
    evaluate = profile.f if coeff is None else coeff
    if p == 0:
        return evaluate(X[:, 0, :])
    E = X[:, 1:, :] - X[:, :1, :]
    det = np.linalg.det(E[:, :, :p]) if p > 0 else np.ones(len(X))
    pts, wts = _simplex_rule(p, quad)
    vals = np.zeros(len(X))
    for u, wq in zip(pts, wts):
        y = X[:, 0, :] + np.einsum("i,sik->sk", u, E)
        vals += wq * evaluate(y)
    return vals * det


def quotient_norm_sq(profile: BumpProfile, start: int | None = None, max_resolution=None,
                     rel_change=0.01):
    """Squared norm of ``psi`` modulo closed forms on the unit cube, discretized.

    On the cube, closed p-forms (p >= 1) are exact, so the discrete surrogate is the
    M-orthogonal projection of the interpolated cochain off ``im d_{p-1}``, reported
    relative to the discrete norm of the cochain itself.
    """
    from .meshes import cube_mesh, square_mesh

    n, p = profile.n, profile.p
    if n == 2:
        mesh, start, cap = square_mesh, start or 8, max_resolution or 64
    elif n == 3:
        mesh, start, cap = cube_mesh, start or 4, max_resolution or 16
    else:
        raise ValidationError("quotient norm reference meshes exist for n in {2, 3}")
    history = []
    res = start
    prev = None
    while res <= cap:
        C = build_complex(mesh(res))
        psi = de_rham_cochain(profile, C.complex, p)
        D = C.d[p - 1].astype(float).tocsr()
        M = C.M[p]
        A = (D.T @ M @ D).tocsr()
        rhs = D.T @ (M @ psi)
        g, info = spla.cg(A, rhs, rtol=1e-12, atol=0.0, maxiter=20 * A.shape[0])
        if info != 0:
            raise ConvergenceError(f"projection solve did not converge at resolution {res}")
        r = psi - D @ g
        N = float(r @ (M @ r)) / float(psi @ (M @ psi))
        history.append((res, N))
        if prev is not None and abs(N - prev) <= rel_change * abs(N):
            return N, {"resolution": res, "history": history}
        prev = N
        res *= 2
    raise ConvergenceError(f"quotient norm not stable to {rel_change} by resolution {cap}: "
                           f"{history}")


# ----------------------------------------------------------------------------
# box families


@dataclass
class BoxFamily:
    """``2^{nc}`` translated rescaled copies of a bump form in disjoint dyadic boxes."""

    profile: BumpProfile
    c: int
    offsets: np.ndarray
    energy: float
    norm_sq: float
    l2_sq: float

    @property
    def side(self):
        return 2.0 ** (-self.c)

    def __len__(self):
        return len(self.offsets)

    @property
    def energy_factor(self):
        return self.energy / self.profile.E_psi

    @property
    def norm_factor(self):
        return self.norm_sq / self.profile.N_psi

    def boxes(self):
        """Lower corners and common side of the boxes."""
        return self.offsets, self.side

    def form(self, j):
        """Coefficient function of ``psi_j`` (relative to ``dx_1 ^ ... ^ dx_p``)."""
        s, o, p = 2.0 ** self.c, self.offsets[j], self.profile.p

        def coeff(x):
            return s ** p * self.profile.f(s * (np.asarray(x) - o))
        return coeff


def box_family(psi: BumpProfile, c: int) -> BoxFamily:
    """Rescale by ``2^c`` and tile ``(0,1)^n``; energies and norms are measured by
    quadrature on the mapped grid."""
    if c < 0 or int(c) != c:
        raise ValidationError("c must be a nonnegative integer")
    c = int(c)
    n, p = psi.n, psi.p
    s = 2.0 ** c
    offsets = np.array(list(itertools.product(range(2 ** c), repeat=n)), dtype=float) / s
    pts, w = psi.grid_points()
    # box (0, 2^-c)^n: points y / s, weights w / s^n; the pulled-back coefficient picks
    # up s^p from dx_I and derivatives another factor s
    y, wy = pts / s, w / s ** n
    coeff = s ** p * psi.f(s * y)
    grad = s ** (p + 1) * psi.grad_f(s * y)[:, p:]
    l2 = float(np.sum(wy * coeff ** 2))
    energy = float(np.sum(wy * np.sum(grad * grad, axis=1)))
    norm_sq = psi.N_psi * l2 / psi.l2_norm_sq()
    return BoxFamily(psi, c, offsets, energy, norm_sq, l2)


def rescaling_factors(n, p, c):
    """Closed-form energy and quotient-norm factors under rescaling by ``2^c``."""
    return 2.0 ** (c * (2 * p + 2 - n)), 2.0 ** (c * (2 * p - n))


# ----------------------------------------------------------------------------
# certificates


def dyadic_level(k: int, n: int) -> int:
    """Smallest ``c`` with ``k <= 2^{nc}``."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    c = 0
    while 2 ** (n * c) < k:
        c += 1
    return c


@dataclass
class RayleighCertificate:
    k: int
    p: int
    bound: float
    Lambda: float
    c: int
    E_psi: float
    N_psi: float
    n: int
    witness: str = "box family"
    provenance: str = ""

    def to_dict(self):
        return {"k": self.k, "p": self.p, "bound": self.bound, "Lambda": self.Lambda,
                "c": self.c, "E_psi": self.E_psi, "N_psi": self.N_psi,
                "provenance": self.provenance}


def certificate(Lambda: float, n: int, p: int, k: int, psi: BumpProfile | None = None
                ) -> RayleighCertificate:
    """Upper bound ``4 Lambda^{4p+2n+2} E_psi / N_psi * kbar^{2/n}`` on ``lambda_{k,p}``
    for any space with a ``Lambda``-biLipschitz chart from the unit cube."""
    if not Lambda >= 1:
        raise ValidationError("Lambda must be >= 1")
    psi = bump_profile(n, p) if psi is None else psi
    if (psi.n, psi.p) != (n, p):
        raise ValidationError("profile dimension/degree do not match")
    c = dyadic_level(k, n)
    kbar = 2 ** (n * c)
    bound = 4.0 * Lambda ** (4 * p + 2 * n + 2) * psi.E_psi / psi.N_psi * kbar ** (2.0 / n)
    prov = (f"bump product on [1/8,7/8]^{n}, degree {p}, dyadic level c={c} "
            f"({kbar} boxes), Lambda={Lambda}")
    return RayleighCertificate(k, p, float(bound), float(Lambda), c, psi.E_psi, psi.N_psi,
                               n, "box family", prov)


def pulled_back_family(K: StratifiedComplex, family: BoxFamily, p: int | None = None,
                       chart_origin=None):
    """Cochains of the box forms on a mesh whose ``coords`` are chart coordinates."""
    p = family.profile.p if p is None else p
    origin = np.zeros(family.profile.n) if chart_origin is None else np.asarray(chart_origin)
    out = []
    for j in range(len(family)):
        coeff = family.form(j)
        out.append(de_rham_cochain(family.profile, K, p, lambda x: coeff(x - origin)))
    return out


def _kernel_basis_sparse0(C: CochainSystem):
    """M-orthonormal indicator basis of locally constant free functions."""
    import scipy.sparse as sp
    import scipy.sparse.csgraph as csgraph
    K = C.complex
    nv = K.counts[0]
    E = np.asarray(K.faces[1])
    A = sp.coo_matrix((np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(nv, nv))
    ncomp, lab = csgraph.connected_components(A, directed=False)
    fixed = np.ones(nv, dtype=bool)
    fixed[C.free[0]] = False
    dead = set(lab[fixed].tolist())
    lab_free = lab[C.free[0]]
    cols = []
    Mf = C.mass(0)
    for comp in range(ncomp):
        if comp in dead:
            continue
        v = (lab_free == comp).astype(float)
        cols.append(v / math.sqrt(v @ (Mf @ v)))
    return np.array(cols).T if cols else np.zeros((len(C.free[0]), 0))


def empirical_rayleigh(forms, C: CochainSystem, p: int = 0, dependence_tol: float = 1e-10):
    """Largest Rayleigh quotient ``|d w|^2 / |w|^2_quotient`` over the span of ``forms``.

    ``forms`` are full p-cochain vectors; constrained entries are dropped. The
    quotient norm is the M-norm after M-orthogonal projection off ``ker d_p``.
    """
    forms = [np.asarray(f, dtype=float) for f in forms]
    if not forms:
        raise ValidationError("need at least one form")
    W = np.column_stack([f[C.free[p]] if len(f) == C.complex.counts[p] else f for f in forms])
    M = C.mass(p)
    A = C.stiffness(p)
    norms = np.sqrt(np.einsum("ij,ij->j", W, M @ W))
    if np.any(norms == 0):
        raise ValidationError("forms are dependent (a form vanishes)")
    W = W / norms
    if p == 0:
        Z = _kernel_basis_sparse0(C)
    else:
        Z = kernel_basis(C, p)
    Wp = W - Z @ (Z.T @ (M @ W)) if Z.shape[1] else W
    Mr = Wp.T @ (M @ Wp)
    Ar = W.T @ (A @ W)
    Mr, Ar = 0.5 * (Mr + Mr.T), 0.5 * (Ar + Ar.T)
    wm = np.linalg.eigvalsh(Mr)
    if wm[0] <= dependence_tol:
        raise ValidationError("forms are dependent modulo ker d (subspace collapses under "
                              "projection)")
    vals = la.eigh(Ar, Mr, eigvals_only=True)
    return float(vals[-1])


# ----------------------------------------------------------------------------
# biLipschitz envelopes and perturbations


def bilipschitz_envelope(C: float, n: int, p: int, lam: float):
    """``[C^{-(2n+4p+2)} lam, C^{2n+4p+2} lam]``."""
    if not C >= 1:
        raise ValidationError("C must be >= 1")
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    e = 2 * n + 4 * p + 2
    return (C ** (-e) * lam, C ** e * lam)


def conformal_lengths(K: StratifiedComplex, vertex_factors):
    """Edge lengths ``l_ij sqrt(phi_i phi_j)`` from positive vertex factors ``phi``."""
    phi = np.asarray(vertex_factors, dtype=float)
    if np.any(phi <= 0):
        raise ValidationError("vertex factors must be positive")
    return {e: K.edge_length(e) * math.sqrt(phi[e[0]] * phi[e[1]]) for e in K.faces[1]}


def with_lengths(K: StratifiedComplex, lengths) -> StratifiedComplex:
    meta = dict(K.metadata)
    return StratifiedComplex(K.n_vertices, list(K.top), K.coords, dict(lengths), K.strata,
                             set(K.boundary), meta)


def pl_bilipschitz_constant(K1: StratifiedComplex, K2: StratifiedComplex) -> float:
    """BiLipschitz constant of the identity map between two metrics on the same complex,
    piecewise linear on top simplices: ``max(sqrt(max eig), 1/sqrt(min eig))`` of the
    per-simplex Gram pencils."""
    from .mesh_hodge import simplex_metrics
    n = K1.dim
    G1 = simplex_metrics(K1, n)
    G2 = simplex_metrics(K2, n)
    worst = 1.0
    for a, b in zip(G2, G1):
        w = la.eigh(a, b, eigvals_only=True)
        if w[0] <= 0:
            return math.inf
        worst = max(worst, math.sqrt(w[-1]), 1.0 / math.sqrt(w[0]))
    return worst


def random_conformal_perturbation(K: StratifiedComplex, C: float, seed: int = 0,
                                  max_tries: int = 60):
    """Vertex-conformal perturbation whose measured PL biLipschitz constant is ``<= C``.

    Log-factors are drawn uniformly in ``[-log C, log C]``, so every edge factor lies in
    ``[1/C, C]``; the amplitude shrinks geometrically until the measured constant fits.
    Returns ``(perturbed complex, measured constant)``.
    """
    if not C >= 1:
        raise ValidationError("C must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, K.n_vertices)
    amp = math.log(C)
    for _ in range(max_tries):
        K2 = with_lengths(K, conformal_lengths(K, np.exp(amp * u)))
        c = pl_bilipschitz_constant(K, K2)
        if c <= C:
            return K2, c
        amp *= 0.8
    raise ConvergenceError("could not find a perturbation within the requested constant")


# ----------------------------------------------------------------------------
# Weyl exponent


def weyl_fit(result, k_range=(10, 100)):
    """Least-squares slope and prefactor of ``log lambda_k`` against ``log k``.

    For a SpectralResult the zero cluster is dropped and positive eigenvalues are
    indexed from 1; a plain array is indexed as given. ``k_range`` is inclusive.
    """
    if isinstance(result, SpectralResult):
        pos = result.positive(1e-9 * max(abs(result.eigenvalues).max(initial=0.0), 1.0))
    else:
        pos = np.asarray(result, dtype=float)
    lo, hi = int(k_range[0]), int(k_range[1])
    if lo < 1 or hi - lo + 1 < 10:
        raise ValidationError("k range must start at >= 1 and contain at least 10 indices")
    if len(pos) < hi:
        raise ValidationError(f"only {len(pos)} positive eigenvalues; need {hi}")
    ks = np.arange(lo, hi + 1)
    lam = pos[lo - 1:hi]
    if np.any(lam <= 0):
        raise ValidationError("nonpositive eigenvalue in range")
    slope, intercept = np.polyfit(np.log(ks), np.log(lam), 1)
    return float(slope), float(math.exp(intercept))
