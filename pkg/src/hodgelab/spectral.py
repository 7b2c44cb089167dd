"""Spectral result container and the generalized symmetric eigensolver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, SpectralGapError, ValidationError

DENSE_THRESHOLD = 1200


def cluster_multiplicities(values, rel_tol=1e-6, abs_tol=1e-9):
    """Per-entry size of the cluster each sorted eigenvalue belongs to."""
    values = np.asarray(values, dtype=float)
    mult = np.ones(len(values), dtype=int)
    if len(values) == 0:
        return mult
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > abs_tol + rel_tol * abs(values[i]):
            mult[start:i] = i - start
            start = i
    return mult


@dataclass
class SpectralResult:
    """Eigenvalues of a form Laplacian in ascending order, counted with multiplicity.

    ``multiplicities[i]`` is the size of the cluster containing ``eigenvalues[i]``.
    """

    degree: int
    eigenvalues: np.ndarray
    multiplicities: np.ndarray
    residuals: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        self.residuals = np.asarray(self.residuals, dtype=float)
        self.multiplicities = np.asarray(self.multiplicities, dtype=int)
        if np.any(np.diff(self.eigenvalues) < 0):
            raise ValidationError("eigenvalues must be sorted ascending")

    @classmethod
    def from_values(cls, degree, values, residuals=None, metadata=None, rel_tol=1e-6):
        values = np.asarray(values, dtype=float)
        order = np.argsort(values, kind="stable")
        values = values[order]
        if residuals is None:
            residuals = np.zeros(len(values))
        else:
            residuals = np.asarray(residuals, dtype=float)[order]
        return cls(degree, values, cluster_multiplicities(values, rel_tol), residuals,
                   dict(metadata or {}))

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def values(self):
        return self.eigenvalues

    def rows(self) -> Iterator[tuple]:
        for k, (lam, m, r) in enumerate(zip(self.eigenvalues, self.multiplicities,
                                           self.residuals), start=1):
            yield self.degree, k, float(lam), int(m), float(r)

    def clusters(self):
        out, i = [], 0
        while i < len(self.eigenvalues):
            m = int(self.multiplicities[i])
            out.append((float(np.mean(self.eigenvalues[i:i + m])), m))
            i += m
        return out

    def head(self, count):
        """First ``count`` entries, keeping cluster sizes measured on the longer list."""
        return SpectralResult(self.degree, self.eigenvalues[:count],
                              self.multiplicities[:count], self.residuals[:count],
                              dict(self.metadata))

    def positive(self, gap_tol=1e-8):
        return self.eigenvalues[self.eigenvalues > gap_tol]

    def count_below(self, threshold):
        """Counting function N(threshold); refuses if the list may be truncated."""
        if len(self.eigenvalues) == 0 or self.eigenvalues[-1] <= threshold:
            raise SpectralGapError(
                f"spectrum only computed up to {self.eigenvalues[-1] if len(self) else None};"
                f" cannot count below {threshold}")
        return int(np.sum(self.eigenvalues <= threshold))


def merge_results(degree, parts, metadata=None, rel_tol=1e-9):
    """Merge several spectra (value lists or SpectralResults) into one ascending result."""
    vals, res = [], []
    for part in parts:
        if isinstance(part, SpectralResult):
            vals.append(part.eigenvalues)
            res.append(part.residuals)
        else:
            part = np.asarray(part, dtype=float)
            vals.append(part)
            res.append(np.zeros(len(part)))
    values = np.concatenate(vals) if vals else np.zeros(0)
    residuals = np.concatenate(res) if res else np.zeros(0)
    return SpectralResult.from_values(degree, values, residuals, metadata, rel_tol)


def _as_dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def _norm_inf(A):
    if sp.issparse(A):
        return float(abs(A).sum(axis=1).max()) if A.shape[0] else 0.0
    return float(np.abs(A).sum(axis=1).max()) if A.shape[0] else 0.0


def pencil_residuals(A, M, vals, vecs):
    """Normwise backward errors ``|Ax - lam Mx| / ((|A| + |lam| |M|) |x|)``."""
    vals = np.asarray(vals, dtype=float)
    R = A @ vecs - (M @ vecs) * vals
    num = np.linalg.norm(R, axis=0)
    scale = (_norm_inf(A) + np.abs(vals) * _norm_inf(M)) * np.linalg.norm(vecs, axis=0)
    return num / np.where(scale > 0, scale, 1.0)


def solve_pencil(A, M, count, tol=1e-8, seed=0, method="auto", sigma=None,
                 block_size=12, max_dim=None):
    """Lowest ``count`` eigenpairs of ``A x = lam M x``.

    ``A`` symmetric positive semidefinite, ``M`` symmetric positive definite; dense or
    scipy.sparse. Small problems use LAPACK directly. Larger ones run a shift-inverted
    block Lanczos iteration in the M-inner product with full reorthogonalization,
    started from a seeded random block. Residuals are normwise backward errors, see
    :func:`pencil_residuals`.

    Returns ``(values, vectors, residuals)``.
    """
    n = A.shape[0]
    if A.shape != (n, n) or M.shape != (n, n):
        raise ValidationError("A and M must be square and of equal size")
    if count < 1 or count > n:
        raise ValidationError(f"count={count} outside 1..{n}")
    if method == "auto":
        method = "dense" if n <= DENSE_THRESHOLD else "lanczos"
    if method == "dense":
        vals, vecs = _dense(A, M, count)
    elif method == "lanczos":
        vals, vecs = _block_lanczos(A, M, count, tol, seed, sigma, block_size, max_dim)
    else:
        raise ValidationError(f"unknown method {method!r}")
    res = pencil_residuals(A, M, vals, vecs)
    bad = res > max(tol, 1e-12) * 10
    if np.any(bad):
        raise ConvergenceError(f"residuals {res[bad]} above tolerance {tol}")
    return vals, vecs, res


def _dense(A, M, count):
    Ad, Md = _as_dense(A), _as_dense(M)
    try:
        la.cholesky(Md)
    except la.LinAlgError as exc:
        raise ValidationError("M is not positive definite") from exc
    vals, vecs = la.eigh(Ad, Md, subset_by_index=[0, count - 1])
    return vals, vecs


def _m_orthonormalize(V, M, basis=None, MB=None, drop_tol=1e-10):
    """Orthonormalize the columns of V in the M-inner product, twice against ``basis``."""
    for _ in range(2):
        if basis is not None and basis.shape[1]:
            V = V - basis @ (MB.T @ V)
    MV = M @ V
    G = V.T @ MV
    G = 0.5 * (G + G.T)
    w, U = np.linalg.eigh(G)
    keep = w > drop_tol * max(w.max(initial=0.0), 1e-300)
    if not np.any(keep):
        return V[:, :0]
    Q = V @ (U[:, keep] / np.sqrt(w[keep]))
    # one more pass for numerical orthogonality
    if basis is not None and basis.shape[1]:
        Q = Q - basis @ (MB.T @ Q)
    MQ = M @ Q
    G = Q.T @ MQ
    L = np.linalg.cholesky(0.5 * (G + G.T))
    return np.linalg.solve(L, Q.T).T


def _block_lanczos(A, M, count, tol, seed, sigma, block_size, max_dim):
    n = A.shape[0]
    A = sp.csc_matrix(A) if sp.issparse(A) else sp.csc_matrix(np.asarray(A))
    M = sp.csc_matrix(M) if sp.issparse(M) else sp.csc_matrix(np.asarray(M))
    if sigma is None:
        scale = abs(A.diagonal()).sum() / max(abs(M.diagonal()).sum(), 1e-300)
        sigma = -1e-6 * max(scale, 1e-12)
    try:
        lu = spla.splu((A - sigma * M).tocsc())
    except RuntimeError as exc:
        raise ValidationError("shifted pencil is singular; M not positive definite?") from exc
    rng = np.random.default_rng(seed)
    b = min(block_size, n)
    if max_dim is None:
        max_dim = min(n, max(20 * count + 300, 4 * b))
    V = _m_orthonormalize(rng.standard_normal((n, b)), M)
    MV = M @ V
    TV = lu.solve(np.asarray(MV))
    while True:
        H = MV.T @ TV
        H = 0.5 * (H + H.T)
        theta, Y = np.linalg.eigh(H)
        order = np.argsort(theta)[::-1]
        theta, Y = theta[order], Y[:, order]
        k = min(count, len(theta))
        if k == count and V.shape[1] >= count + b:
            lam = sigma + 1.0 / theta[:count]
            X = V @ Y[:, :count]
            res = pencil_residuals(A, M, lam, X)
            if np.all(res <= tol):
                idx = np.argsort(lam)
                return lam[idx], X[:, idx]
        if V.shape[1] >= max_dim:
            raise ConvergenceError(
                f"block Lanczos did not converge within {max_dim} basis vectors")
        W = TV[:, -b:] if TV.shape[1] >= b else TV
        Qn = _m_orthonormalize(W, M, V, MV)
        if Qn.shape[1] == 0:
            # invariant subspace reached: restart from fresh random directions
            Qn = _m_orthonormalize(rng.standard_normal((n, b)), M, V, MV)
            if Qn.shape[1] == 0:
                raise ConvergenceError("Krylov space exhausted")
        Qn = Qn[:, :max(0, max_dim - V.shape[1])] if V.shape[1] + Qn.shape[1] > max_dim else Qn
        MQ = M @ Qn
        V = np.hstack([V, Qn])
        MV = np.hstack([MV, MQ])
        TV = np.hstack([TV, lu.solve(np.asarray(MQ))])
