import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from hodgelab.errors import SpectralGapError, ValidationError
from hodgelab.spectral import (SpectralResult, cluster_multiplicities, merge_results,
                               pencil_residuals, solve_pencil)


def test_diagonal_pencil():
    vals, vecs, res = solve_pencil(np.diag([3.0, 1.0, 2.0]), np.eye(3), 3)
    assert np.allclose(vals, [1, 2, 3])
    assert res.max() < 1e-14


def test_two_by_two_pencil():
    A = np.array([[2.0, 1.0], [1.0, 2.0]])
    vals, _, _ = solve_pencil(A, np.eye(2), 2)
    assert np.allclose(vals, [1.0, 3.0])


def test_generalized_pencil_against_scipy():
    rng = np.random.default_rng(3)
    B = rng.standard_normal((40, 40))
    A = B @ B.T
    M = np.eye(40) + 0.1 * np.diag(rng.random(40))
    import scipy.linalg as la
    ref = la.eigh(A, M, eigvals_only=True)[:6]
    vals, vecs, res = solve_pencil(A, M, 6)
    assert np.allclose(vals, ref, rtol=1e-10)
    assert np.allclose(pencil_residuals(A, M, vals, vecs), res)


def test_lanczos_matches_dense_on_sparse_laplacian():
    n = 500
    main = 2.0 * np.ones(n)
    off = -np.ones(n - 1)
    A = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    rng = np.random.default_rng(1)
    M = sp.diags(1.0 + 0.5 * rng.random(n), format="csr")
    dense, _, _ = solve_pencil(A, M, 8, method="dense")
    lanczos, _, res = solve_pencil(A, M, 8, method="lanczos", tol=1e-12, seed=7)
    assert np.allclose(lanczos, dense, rtol=1e-8, atol=1e-12)
    assert res.max() < 1e-8


def test_lanczos_is_seed_reproducible():
    n = 400
    A = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")
    M = sp.identity(n, format="csr")
    a, _, _ = solve_pencil(A, M, 5, method="lanczos", seed=4)
    b, _, _ = solve_pencil(A, M, 5, method="lanczos", seed=4)
    assert np.array_equal(a, b)


def test_bad_shapes_rejected():
    with pytest.raises(ValidationError):
        solve_pencil(np.eye(3), np.eye(2), 1)


@given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=30))
def test_cluster_sizes_sum_consistently(values):
    vals = np.sort(values)
    mult = cluster_multiplicities(vals)
    r = SpectralResult.from_values(0, vals)
    assert sum(m for _, m in r.clusters()) == len(vals)
    assert np.all(mult >= 1)


def test_head_keeps_full_cluster_size():
    r = SpectralResult.from_values(0, [0.0, 1.0, 4.0, 4.0])
    h = r.head(3)
    assert list(h.multiplicities) == [1, 1, 2]


def test_count_below_refuses_truncated_list():
    r = SpectralResult.from_values(0, [1.0, 2.0, 3.0])
    assert r.count_below(2.5) == 2
    with pytest.raises(SpectralGapError):
        r.count_below(10.0)


def test_merge_sorts_and_tracks_multiplicity():
    r = merge_results(1, [[0.0, 5.0], SpectralResult.from_values(0, [5.0, 2.0])])
    assert list(r.eigenvalues) == [0.0, 2.0, 5.0, 5.0]
    assert list(r.multiplicities) == [1, 1, 2, 2]
