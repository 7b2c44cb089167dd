"""Exact rank of sparse integer matrices by fraction-free row elimination."""

from __future__ import annotations

from math import gcd

import scipy.sparse as sp


def _normalize(row):
    g = 0
    for v in row.values():
        g = gcd(g, v)
        if g == 1:
            return row
    if g > 1:
        return {k: v // g for k, v in row.items()}
    return row


def integer_rank(A) -> int:
    """Rank over the rationals of an integer matrix (dense array or scipy.sparse).

    Rows are kept as ``{column: int}`` dictionaries; each pivot row eliminates its
    pivot column from later rows by integer combination, and rows are divided by the
    gcd of their entries to keep coefficients small. Arithmetic is exact.
    """
    A = sp.csr_matrix(A)
    rows = []
    for i in range(A.shape[0]):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        r = {int(c): int(v) for c, v in zip(A.indices[lo:hi], A.data[lo:hi]) if v != 0}
        if r:
            rows.append(r)
    pivots = {}  # column -> pivot row
    rank = 0
    for r in rows:
        r = dict(r)
        while r:
            c = min(r)
            piv = pivots.get(c)
            if piv is None:
                pivots[c] = _normalize(r)
                rank += 1
                break
            a, b = piv[c], r[c]
            g = gcd(a, b)
            fa, fb = a // g, b // g
            new = {k: fa * v for k, v in r.items()}
            for k, v in piv.items():
                w = new.get(k, 0) - fb * v
                if w:
                    new[k] = w
                else:
                    new.pop(k, None)
            r = _normalize(new) if new else new
    return rank
