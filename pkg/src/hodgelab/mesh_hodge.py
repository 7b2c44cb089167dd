"""Whitney-form discretization of the form Laplacian on piecewise-flat simplicial complexes."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from .complexes import StratifiedComplex, closure
from .errors import RankAmbiguityError, SpectralGapError, ValidationError
from .spectral import SpectralResult, merge_results, pencil_residuals, solve_pencil

QUOTIENT_DENSE_MAX = 2500
SVD_REL_CUTOFF = 1e-8
SVD_GAP_RATIO = 1e3


@dataclass
class CochainSystem:
    """Coboundaries ``d[p]`` (integer, shape ``n_{p+1} x n_p``) and Whitney mass matrices
    ``M[p]`` of a complex, plus the free (unconstrained) cochain indices per degree."""

    complex: StratifiedComplex
    d: list
    M: list
    free: list
    relative: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.complex.dim

    def dims(self):
        return tuple(len(f) for f in self.free)

    def dmat(self, p):
        """Coboundary ``d_p`` restricted to free cochains; zero matrix for ``p = dim``."""
        if p < 0:
            return sp.csr_matrix((len(self.free[0]), 0))
        if p >= self.dim:
            return sp.csr_matrix((0, len(self.free[p])))
        return self.d[p][self.free[p + 1]][:, self.free[p]].tocsr()

    def mass(self, p):
        return self.M[p][self.free[p]][:, self.free[p]].tocsr()

    def stiffness(self, p):
        """``d_p^T M_{p+1} d_p`` on free cochains."""
        if p >= self.dim:
            n = len(self.free[p])
            return sp.csr_matrix((n, n))
        D = self.dmat(p)
        return (D.T @ self.mass(p + 1) @ D).tocsr()

    def embed(self, p, x):
        """Extend a vector on free cochains by zeros to all p-cochains."""
        out = np.zeros(self.complex.counts[p])
        out[self.free[p]] = x
        return out


# ----------------------------------------------------------------------------
# assembly


def simplex_metrics(K: StratifiedComplex, p_dim: int):
    """Gram matrices ``G`` (edge vectors from vertex 0) for all ``p_dim``-simplices."""
    faces = K.faces[p_dim]
    S = len(faces)
    G = np.zeros((S, p_dim, p_dim))
    if p_dim == 0:
        return G
    F = np.asarray(faces)
    if K.coords is not None and not K.lengths:
        X = K.coords[F]
        E = X[:, 1:, :] - X[:, :1, :]
        return np.einsum("sik,sjk->sij", E, E)
    L2 = np.zeros((S, p_dim + 1, p_dim + 1))
    for a, b in itertools.combinations(range(p_dim + 1), 2):
        vals = np.array([K.edge_length((f[a], f[b])) for f in faces]) ** 2
        L2[:, a, b] = L2[:, b, a] = vals
    for i in range(1, p_dim + 1):
        for j in range(1, p_dim + 1):
            G[:, i - 1, j - 1] = 0.5 * (L2[:, 0, i] + L2[:, 0, j] - L2[:, i, j])
    return G


def simplex_volumes(K: StratifiedComplex, p_dim: int):
    if p_dim == 0:
        return np.ones(K.counts[0])
    G = simplex_metrics(K, p_dim)
    det = np.linalg.det(G)
    return np.sqrt(np.clip(det, 0.0, None)) / math.factorial(p_dim)


def _whitney_mass_blocks(G, vol, n, p):
    """Local Whitney p-form mass matrices on a batch of n-simplices.

    Uses barycentric gradients ``<grad l_i, grad l_j>`` and the exact moments
    ``int l_a l_b = vol (1 + delta_ab) / ((n+1)(n+2))``.
    """
    S = G.shape[0]
    faces = list(itertools.combinations(range(n + 1), p + 1))
    nf = len(faces)
    out = np.zeros((S, nf, nf))
    if n == 0:
        out[:, 0, 0] = 1.0
        return faces, out
    Ginv = np.linalg.inv(G)
    P = np.hstack([-np.ones((n, 1)), np.eye(n)])
    Gf = np.einsum("ai,sab,bj->sij", P, Ginv, P)
    mom = lambda a, b: vol * (1.0 + (a == b)) / ((n + 1) * (n + 2))
    pf2 = math.factorial(p) ** 2
    for ti, tau in enumerate(faces):
        for ri in range(ti, nf):
            rho = faces[ri]
            acc = np.zeros(S)
            for ia, a in enumerate(tau):
                rt = [v for v in tau if v != a]
                for ib, b in enumerate(rho):
                    rr = [v for v in rho if v != b]
                    if p == 0:
                        det = 1.0
                    else:
                        det = np.linalg.det(Gf[:, rt][:, :, rr])
                    acc += (-1) ** (ia + ib) * mom(a, b) * det
            out[:, ti, ri] = out[:, ri, ti] = pf2 * acc
    return faces, out


def build_complex(K: StratifiedComplex) -> CochainSystem:
    """Integer coboundaries and Whitney mass matrices for a pure complex ``K``."""
    if not K.is_pure():
        raise ValidationError("mesh must be pure: every simplex must lie in a top simplex")
    n = K.dim
    counts = K.counts
    d = []
    for p in range(n):
        r, c, v = K.boundary_matrix_rows(p)
        d.append(sp.csr_matrix((np.array(v, dtype=np.int64), (r, c)),
                               shape=(counts[p + 1], counts[p])))
    G = simplex_metrics(K, n)
    det = np.linalg.det(G) if n > 0 else np.ones(len(G))
    scale = np.einsum("sii->s", G) ** n if n > 0 else np.ones(len(G))
    bad = det <= 1e-12 * np.maximum(scale, 1e-300)
    if np.any(bad):
        s = K.faces[n][int(np.argmax(bad))]
        raise ValidationError(f"degenerate simplex {s}: zero volume or violated triangle "
                              "inequality")
    vol = np.sqrt(det) / math.factorial(n)
    tops = np.asarray(K.faces[n])
    M = []
    for p in range(n + 1):
        faces, blocks = _whitney_mass_blocks(G, vol, n, p)
        idx = K.index[p]
        gidx = np.array([[idx[tuple(top[list(f)])] for f in faces] for top in tops])
        rows = np.repeat(gidx, len(faces), axis=1).ravel()
        cols = np.tile(gidx, (1, len(faces))).ravel()
        Mp = sp.csr_matrix((blocks.ravel(), (rows, cols)), shape=(counts[p], counts[p]))
        M.append(((Mp + Mp.T) * 0.5).tocsr())
    free = [np.arange(c) for c in counts]
    return CochainSystem(K, d, M, free, False, {"counts": tuple(counts)})


def apply_relative_bc(C: CochainSystem, boundary=None) -> CochainSystem:
    """Constrain cochains to vanish on the boundary subcomplex (defaults to ``K.boundary``)."""
    K = C.complex
    B = K.boundary if boundary is None else set(tuple(sorted(s)) for s in boundary)
    if B and closure(B) != B:
        raise ValidationError("boundary is not a subcomplex (not closed under faces)")
    if not B <= K.simplices:
        raise ValidationError("boundary contains simplices outside the complex")
    free = []
    for p in range(K.dim + 1):
        mask = np.array([s not in B for s in K.faces[p]], dtype=bool)
        free.append(np.flatnonzero(mask))
    meta = dict(C.metadata)
    meta["relative"] = bool(B)
    return CochainSystem(K, C.d, C.M, free, bool(B), meta)


# ----------------------------------------------------------------------------
# ranks and kernels


def gapped_rank(s, n_cols, what="matrix"):
    """Numerical rank from singular values with a relative cutoff and a required gap."""
    s = np.sort(np.asarray(s, dtype=float))[::-1]
    if len(s) == 0 or s[0] == 0:
        return 0
    rel = s / s[0]
    r = int(np.sum(rel > SVD_REL_CUTOFF))
    above = rel[r - 1] if r > 0 else None
    below = rel[r] if r < len(rel) else 0.0
    if below > 0 and above is not None and above / below < SVD_GAP_RATIO:
        raise RankAmbiguityError(f"{what}: singular values near cutoff "
                                 f"({above:.3e} vs {below:.3e})", below=below, above=above)
    if above is not None and above < SVD_REL_CUTOFF * SVD_GAP_RATIO:
        raise RankAmbiguityError(f"{what}: smallest retained singular value {above:.3e} "
                                 "too close to cutoff", below=below, above=above)
    return r


def _components_kernel_dim0(C: CochainSystem):
    """dim ker d_0 on free vertex cochains: components of the 1-skeleton without
    constrained vertices."""
    K = C.complex
    nv = K.counts[0]
    if K.dim == 0:
        return len(C.free[0])
    E = np.asarray(K.faces[1])
    A = sp.coo_matrix((np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(nv, nv))
    ncomp, lab = csgraph.connected_components(A, directed=False)
    fixed = np.ones(nv, dtype=bool)
    fixed[C.free[0]] = False
    dead = set(lab[fixed].tolist())
    return sum(1 for c in range(ncomp) if c not in dead)


def coboundary_rank(C: CochainSystem, p: int):
    """Rank of ``d_p`` on free cochains (0 outside ``0 <= p < dim``)."""
    if p < 0 or p >= C.dim:
        return 0
    if p == 0:
        return len(C.free[0]) - _components_kernel_dim0(C)
    D = C.dmat(p)
    if D.shape[0] == 0 or D.shape[1] == 0:
        return 0
    if min(D.shape) > 4000:
        from .exact import integer_rank
        return integer_rank(D)
    s = la.svdvals(D.toarray().astype(float))
    return gapped_rank(s, D.shape[1], f"d_{p}")


def harmonic_dim(C: CochainSystem, p: int, gap_tol=None) -> int:
    """``dim ker d_p - rank d_{p-1}`` on the (possibly constrained) cochain spaces."""
    if p < 0 or p > C.dim:
        raise ValidationError(f"degree {p} outside 0..{C.dim}")
    ker = len(C.free[p]) - coboundary_rank(C, p)
    h = ker - coboundary_rank(C, p - 1)
    if h < 0:
        raise RankAmbiguityError(f"negative harmonic dimension in degree {p}")
    return h


def harmonic_dims(C: CochainSystem):
    return tuple(harmonic_dim(C, p) for p in range(C.dim + 1))


def _row_space(D):
    """Orthonormal basis of the row space of a (dense) matrix, columns."""
    if D.shape[0] == 0:
        return np.zeros((D.shape[1], 0))
    U, s, Vt = la.svd(D, full_matrices=False)
    r = gapped_rank(s, D.shape[1])
    return Vt[:r].T


def kernel_basis(C: CochainSystem, p: int):
    """M-orthonormal basis of ``ker d_p`` on free cochains (dense)."""
    n = len(C.free[p])
    D = C.dmat(p).toarray().astype(float)
    if D.shape[0] == 0:
        Z = np.eye(n)
    else:
        U, s, Vt = la.svd(D, full_matrices=True)
        r = gapped_rank(s, n)
        Z = Vt[r:].T
    Mp = C.mass(p).toarray()
    G = Z.T @ Mp @ Z
    L = np.linalg.cholesky(0.5 * (G + G.T))
    return la.solve_triangular(L, Z.T, lower=True).T


def project_off_kernel(C: CochainSystem, p: int, x):
    """M-orthogonal projection of ``x`` onto the complement of ``ker d_p``."""
    Z = kernel_basis(C, p)
    x = np.asarray(x, dtype=float)
    return x - Z @ (Z.T @ (C.mass(p) @ x))


# ----------------------------------------------------------------------------
# spectra


def quotient_spectrum(C: CochainSystem, p: int, count: int, tol=1e-8, seed=0,
                      method="auto") -> SpectralResult:
    """Lowest ``count`` positive eigenvalues of ``(d_p^T M_{p+1} d_p, M_p)`` on the
    M-orthogonal complement of ``ker d_p``.

    Small systems project exactly onto ``range(M^{-1} d_p^T)``. Larger degree-0 systems
    use the sparse solver and drop the locally constant kernel, whose dimension is known
    combinatorially.
    """
    if p < 0 or p > C.dim:
        raise ValidationError(f"degree {p} outside 0..{C.dim}")
    meta = {"method": None, "degree": p, "counts": C.dims(), "relative": C.relative}
    if p == C.dim or count <= 0:
        meta["method"] = "empty"
        meta["complete"] = p == C.dim
        return SpectralResult.from_values(p, [], [], meta)
    n = len(C.free[p])
    if method == "auto":
        method = "dense" if n <= QUOTIENT_DENSE_MAX else "sparse"
    A = C.stiffness(p)
    M = C.mass(p)
    if method == "dense":
        D = C.dmat(p).toarray().astype(float)
        Q = _row_space(D)
        if Q.shape[1] == 0:
            meta["method"] = "dense-projection"
            meta["complete"] = True
            return SpectralResult.from_values(p, [], [], meta)
        Md = M.toarray()
        B = la.solve(Md, Q, assume_a="pos")
        Ar = B.T @ (A @ B)
        Mr = B.T @ Md @ B
        Ar, Mr = 0.5 * (Ar + Ar.T), 0.5 * (Mr + Mr.T)
        m = min(count, Q.shape[1])
        vals, Y = la.eigh(Ar, Mr, subset_by_index=[0, m - 1])
        X = B @ Y
        res = pencil_residuals(A, M, vals, X)
        meta["method"] = "dense-projection"
        meta["rank"] = Q.shape[1]
        meta["complete"] = m == Q.shape[1]
    elif method == "sparse":
        if p != 0:
            raise ValidationError(
                f"sparse quotient solve supports degree 0 only; degree {p} has {n} unknowns "
                f"(dense limit {QUOTIENT_DENSE_MAX})")
        kdim = _components_kernel_dim0(C)
        want = min(count + kdim, n)
        vals, X, res = solve_pencil(A, M, want, tol=tol, seed=seed)
        if kdim:
            zero, rest = vals[:kdim], vals[kdim:]
            top = max(abs(zero).max(), 1e-300)
            if len(rest) and rest[0] < SVD_GAP_RATIO * top:
                raise SpectralGapError("kernel cluster not separated from positive spectrum",
                                       below=float(top), above=float(rest[0]))
            vals, res = rest, res[kdim:]
        meta["method"] = "sparse-deflated"
        meta["kernel_dim"] = kdim
    else:
        raise ValidationError(f"unknown method {method!r}")
    if len(vals) and vals[0] <= 0:
        raise SpectralGapError(f"nonpositive quotient eigenvalue {vals[0]}", above=vals[0])
    return SpectralResult.from_values(p, vals, res, meta)


def hodge_assemble(q_p: SpectralResult, q_pm1: SpectralResult | None, harmonic: int,
                   count: int | None = None) -> SpectralResult:
    """Full degree-p spectrum: ``harmonic`` zeros, ``q_p`` and ``q_{p-1}`` merged.

    When ``count`` is given the merged list is truncated to the values certainly below
    the smaller of the two constituents' largest computed eigenvalues.
    """
    p = q_p.degree
    if q_pm1 is not None and q_pm1.degree != p - 1:
        raise ValidationError(f"degree mismatch: {q_pm1.degree} is not {p} - 1")
    if harmonic < 0:
        raise ValidationError("harmonic dimension must be nonnegative")
    parts = [np.zeros(harmonic), q_p]
    if q_pm1 is not None:
        parts.append(q_pm1)
    merged = merge_results(p, parts, {"harmonic": harmonic,
                                      "quotient_p": len(q_p),
                                      "quotient_pm1": 0 if q_pm1 is None else len(q_pm1)},
                           rel_tol=1e-6)
    if count is not None:
        caps = [r.eigenvalues[-1] for r in (q_p, q_pm1)
                if r is not None and len(r) and not r.metadata.get("complete")]
        vals, res = merged.eigenvalues, merged.residuals
        if caps:
            keep = vals <= min(caps) * (1 + 1e-9)
            vals, res = vals[keep], res[keep]
        return SpectralResult.from_values(p, vals, res, merged.metadata, 1e-6).head(count)
    return merged


def hodge_spectrum(C: CochainSystem, p: int, count: int, tol=1e-8, seed=0) -> SpectralResult:
    """Convenience wrapper assembling the degree-p Hodge spectrum from a cochain system."""
    q_p = quotient_spectrum(C, p, count, tol, seed)
    q_pm1 = quotient_spectrum(C, p - 1, count, tol, seed) if p > 0 else None
    h = harmonic_dim(C, p)
    return hodge_assemble(q_p, q_pm1, h, count)
