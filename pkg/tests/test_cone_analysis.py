import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hodgelab.cone_analysis import (CohomologyTable, ConeSpace, PointSet, cone_distance,
                                    cone_graph_spectrum, cone_ih, cone_l2_cohomology,
                                    cone_tables, kunneth_product, radial_roots,
                                    radial_spectrum)
from hodgelab.errors import ValidationError
from hodgelab.graph_laplace import circle, fem_spectrum_0, segment, star
from hodgelab.mesh_hodge import build_complex, hodge_spectrum
from hodgelab.meshes import disk_mesh


def _bessel_series(nu, x, deriv=False):
    total = 0.0
    for m in range(200):
        p = 2 * m + nu
        c = (-1) ** m / math.exp(math.lgamma(m + 1) + math.lgamma(m + nu + 1))
        if deriv:
            if p == 0:
                continue
            term = c * p / 2 * (x / 2) ** (p - 1)
        else:
            term = c * (x / 2) ** p
        total += term
        if m > x and abs(term) < 1e-18:
            break
    return total


def _oracle_roots(nu, a, count, x_max=30.0):
    f = lambda x: x * _bessel_series(nu, x, True) - a * _bessel_series(nu, x)
    xs = np.arange(1e-3, x_max, 0.01)
    fx = [f(x) for x in xs]
    roots = []
    for x0, x1, f0, f1 in zip(xs, xs[1:], fx, fx[1:]):
        if f0 * f1 < 0:
            lo, hi = x0, x1
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if f(lo) * f(mid) <= 0:
                    hi = mid
                else:
                    lo = mid
            roots.append(0.5 * (lo + hi))
        if len(roots) == count:
            break
    return np.array(roots)


@pytest.mark.parametrize("mu", [0.0, 1.0, 4.0, 2.25, 10.0])
def test_radial_roots_match_series_oracle(mu):
    got = radial_roots(mu, count=4)
    if mu == 0:
        assert got[0] == 0.0
        got = got[1:]
    ref = _oracle_roots(math.sqrt(mu), 0.0, len(got))
    assert np.allclose(got, ref, rtol=1e-9)


@pytest.mark.parametrize("mu", [0.0, 2.0, 6.0])
def test_higher_dimensional_base_roots(mu):
    # base of dimension 2: the radial factor is r^{-1/2} J_nu with nu^2 = mu + 1/4
    got = radial_roots(mu, count=4, base_dim=2)
    got = got[got > 0]
    ref = _oracle_roots(math.sqrt(mu + 0.25), 0.5, len(got))
    assert np.allclose(got, ref, rtol=1e-9)


def test_neumann_disk_first_radial_value():
    res = radial_spectrum(0.0, 1.0, 3)
    assert res.eigenvalues[0] == 0.0
    assert res.eigenvalues[1] == pytest.approx(14.68197, rel=1e-5)


@pytest.mark.parametrize("eps", [0.25, 0.5, 2.0, 3.7])
def test_eps_scaling_is_exact(eps):
    a = radial_spectrum(1.0, 1.0, 6).eigenvalues
    b = radial_spectrum(1.0, eps, 6).eigenvalues
    assert np.allclose(b * eps ** 2, a, rtol=1e-14)


def test_cone_over_point_closed_form():
    res = cone_graph_spectrum(PointSet.uniform(1), 1.0, 6)
    expected = [((2 * k - 1) * math.pi / 2) ** 2 for k in range(1, 7)]
    assert np.allclose(res.eigenvalues, expected, rtol=1e-10)


def test_cone_over_two_points_is_a_segment():
    res = cone_graph_spectrum(PointSet.uniform(2), 1.0, 6)
    expected = [(k * math.pi / 2) ** 2 for k in range(0, 6)]
    assert np.allclose(res.eigenvalues, expected, rtol=1e-10, atol=1e-10)


def test_cone_over_circle_matches_disk_fem():
    cone = cone_graph_spectrum(circle(2 * math.pi), 1.0, 8)
    fem = hodge_spectrum(build_complex(disk_mesh(16, boundary=False)), 0, 8)
    assert np.allclose(cone.eigenvalues[1:], fem.eigenvalues[1:], rtol=0.02)
    assert list(cone.multiplicities[:5]) == [1, 2, 2, 2, 2]


def test_cone_base_diameter_limited():
    with pytest.raises(ValidationError):
        ConeSpace(circle(8.0))
    with pytest.raises(ValidationError):
        ConeSpace(PointSet(np.array([[0.0, 4.0], [4.0, 0.0]])))


def test_bad_eps_rejected():
    with pytest.raises(ValidationError):
        cone_graph_spectrum(segment(1.0), -1.0, 3)


def test_cone_distance_examples():
    assert cone_distance(1.0, None, 1.0, None, math.pi) == pytest.approx(2.0)
    assert cone_distance(1.0, None, 2.0, None, 0.0) == pytest.approx(1.0)
    assert cone_distance(0.0, None, 3.0, None, 1.0) == pytest.approx(3.0)
    assert cone_distance(1.0, None, 1.0, None, math.pi / 2) == pytest.approx(math.sqrt(2))
    with pytest.raises(ValidationError):
        cone_distance(1.0, None, 1.0, None, 4.0)


radius = st.floats(0.0, 5.0, allow_nan=False)
angle = st.floats(0.0, math.pi / 3, allow_nan=False)


@given(radius, radius, radius, angle, angle)
def test_cone_distance_triangle_inequality(t1, t2, t3, a, b):
    # three points on a base arc at positions 0, a, a + b (all distances <= pi)
    d12 = cone_distance(t1, 0, t2, 0, a)
    d23 = cone_distance(t2, 0, t3, 0, b)
    d13 = cone_distance(t1, 0, t3, 0, a + b)
    assert d13 <= d12 + d23 + 1e-9


def test_l2_table_three_points():
    t = cone_l2_cohomology({0: 3}, 1)
    assert (t.l2[0], t.l2[1], t.l2_c[0], t.l2_c[1]) == (2, 0, 0, 1)


def test_l2_table_circle():
    t = cone_l2_cohomology({0: 1, 1: 1}, 2)
    assert (t.l2[0], t.l2[1], t.l2[2]) == (1, 0, 0)
    assert t.l2_c[2] == 1


def test_ih_table_torus():
    t = cone_ih({0: 1, 1: 2, 2: 1}, 3)
    assert t.ih[2] == 2
    assert t.ih[1] == 0


def test_ih_table_two_points():
    assert cone_ih({0: 2}, 1).ih[1] == 1


def test_kunneth_instances():
    circle_cone = cone_l2_cohomology({0: 1, 1: 1}, 2)
    assert circle_cone.l2_c[2] == 1
    assert kunneth_product(circle_cone, 1).l2_c[3] == 1
    torus_cone = cone_ih({0: 1, 1: 2, 2: 1}, 3)
    prod = kunneth_product(torus_cone, 1)
    assert prod.n == 4 and prod.ih[3] == 2


def test_kunneth_with_trivial_ball_is_identity():
    t = cone_tables({0: 1, 1: 2, 2: 1}, 3)
    assert kunneth_product(t, 0).to_dict() == t.to_dict()


@given(st.integers(1, 4), st.data())
def test_l2_and_ih_tables_are_dual(m, data):
    # closed orientable base of dimension m: Betti numbers are palindromic
    half = data.draw(st.lists(st.integers(0, 5), min_size=m // 2 + 1, max_size=m // 2 + 1))
    b = [half[min(i, m - i)] for i in range(m + 1)]
    b[0] = b[m] = max(1, b[0])
    k = m + 1
    t = cone_tables(dict(enumerate(b)), k)
    for i in range(k + 1):
        assert t.l2[i] == t.ih[k - i]
        assert t.l2_c[i] == t.ih_c[k - i]


def test_negative_entries_rejected():
    with pytest.raises(ValidationError):
        cone_l2_cohomology({0: -1}, 2)
    with pytest.raises(ValidationError):
        CohomologyTable(2, l2={3: 1})


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_point_cone_kernel_is_reduced_h0(k):
    res = cone_graph_spectrum(PointSet.uniform(k), 2.0, 8)
    zeros = int(np.sum(res.eigenvalues < 1e-9))
    assert zeros == cone_l2_cohomology({0: k}, 1).l2[0]
    G = star([2.0] * k)
    lids = [v for v in G.vertices if v != "c"]
    fem = fem_spectrum_0(G, 400, 8, lids=lids)
    assert np.allclose(res.eigenvalues, fem.eigenvalues, rtol=1e-3, atol=1e-8)
