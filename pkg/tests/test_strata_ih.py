import pytest
from hypothesis import given, strategies as st

from hodgelab.complexes import StratifiedComplex, barycentric_subdivision
from hodgelab.cone_analysis import cone_ih
from hodgelab.errors import HodgeLabError, ValidationError
from hodgelab.graph_laplace import (circle, disjoint_union, figure_eight, random_graph,
                                    segment, star, theta)
from hodgelab.meshes import (closed_cone, cycle_complex, disk_mesh, graph_complex,
                             points_complex, sphere_mesh, suspension_of_cycle, torus_mesh)
from hodgelab.strata_ih import (Perversity, allowable, gm_perversity, hodge_cross_check,
                                ih_betti, is_combinatorial_sphere, parse_perversity,
                                simplicial_betti, stratify_multiconical)


def _bare(K):
    return StratifiedComplex(K.n_vertices, K.top, K.coords, K.lengths,
                             boundary=set(K.boundary))


def test_gm_perversity_values():
    assert gm_perversity(3).values == (0, 0, 0, 1)
    assert gm_perversity(7)(7) == 3
    assert gm_perversity(5)(1) == 0


@pytest.mark.parametrize("vals", [(1, 1), (0, 2), (0, 1, 0)])
def test_invalid_perversity_rejected(vals):
    with pytest.raises(ValidationError):
        Perversity(vals)


def test_parse_perversity():
    assert parse_perversity("0,0,1") == Perversity((0, 0, 1))
    with pytest.raises(ValidationError):
        parse_perversity("0,x")


def test_graph_singular_vertices_are_the_non_valence_two_ones():
    G = star([1.0, 1.0, 1.0])
    K = stratify_multiconical(graph_complex(G))
    sing = {s[0] for s in K.strata[0]}
    valence = {}
    for s in K.faces[1]:
        for v in s:
            valence[v] = valence.get(v, 0) + 1
    assert sing == {v for v, d in valence.items() if d != 2}
    assert len(sing) == 4


def test_closed_surface_has_no_strata():
    K = stratify_multiconical(_bare(sphere_mesh(1)))
    assert all(not X for X in K.strata.values())


def test_disk_boundary_is_found():
    d = disk_mesh(2)
    K = stratify_multiconical(StratifiedComplex(d.n_vertices, d.top, d.coords))
    assert K.strata[1] == d.strata[1]


def test_allowable_examples_on_disk():
    K = disk_mesh(2)
    pv = gm_perversity(2)
    assert allowable(list(K.faces[2]), K, pv)
    boundary_edges = [s for s in K.boundary if len(s) == 2]
    assert not allowable(boundary_edges, K, pv)
    v = next(s for s in K.boundary if len(s) == 1)
    assert not allowable(v, K, pv)


def test_allowable_examples_on_graph():
    K = stratify_multiconical(graph_complex(figure_eight()))
    pv = gm_perversity(1)
    sing = next(iter(K.strata[0]))
    assert not allowable(sing, K, pv)
    assert all(allowable(e, K, pv) for e in K.faces[1])


@pytest.mark.parametrize("G,expected", [
    (figure_eight(), {0: 1, 1: 2}),
    (segment(), {0: 1, 1: 0}),
    (theta(), {0: 1, 1: 2}),
    (disjoint_union(circle(), circle()), {0: 2, 1: 2}),
])
def test_graph_ih(G, expected):
    assert ih_betti(stratify_multiconical(graph_complex(G))).betti == expected


def test_disk_ih_kills_everything_but_degree_zero():
    assert ih_betti(disk_mesh(2)).betti == {0: 1, 1: 0, 2: 0}


@pytest.mark.parametrize("K", [torus_mesh(3), sphere_mesh(0), cycle_complex(5)],
                         ids=["torus", "sphere", "circle"])
def test_empty_singular_set_reduces_to_simplicial(K):
    S = stratify_multiconical(_bare(K))
    assert ih_betti(S).betti == simplicial_betti(S)


@pytest.mark.parametrize("K", [
    stratify_multiconical(graph_complex(figure_eight())),
    disk_mesh(2),
    closed_cone(cycle_complex(4)),
    suspension_of_cycle(4),
], ids=["eight", "disk", "cone", "spindle"])
def test_subdivision_invariance(K):
    K = K if K.strata is not None else stratify_multiconical(K)
    a = ih_betti(K).betti
    b = ih_betti(barycentric_subdivision(K)).betti
    assert a == b


@pytest.mark.parametrize("K", [closed_cone(cycle_complex(4)), closed_cone(torus_mesh(3))],
                         ids=["cone-circle", "cone-torus"])
def test_larger_perversity_never_shrinks_chain_groups(K):
    n = K.dim
    lo = gm_perversity(n)
    hi = Perversity(tuple(min(j, v + 1) if j else 0 for j, v in enumerate(lo.values)))
    if not all(b - a in (0, 1) for a, b in zip(hi.values, hi.values[1:])):
        hi = Perversity(tuple(range(n + 1)))
    assert hi.dominates(lo)
    g_lo = ih_betti(K, lo).chain_groups
    g_hi = ih_betti(K, hi).chain_groups
    assert all(g_hi[i] >= g_lo[i] for i in g_lo)


@pytest.mark.parametrize("base,dims", [
    (points_complex(1), {0: 1}),
    (points_complex(3), {0: 3}),
    (cycle_complex(5), {0: 1, 1: 1}),
    (sphere_mesh(0), {0: 1, 1: 0, 2: 1}),
    (torus_mesh(3), {0: 1, 1: 2, 2: 1}),
], ids=["1pt", "3pts", "circle", "sphere", "torus"])
def test_triangulated_cones_agree_with_cone_formula(base, dims):
    K = closed_cone(base)
    k = K.dim
    formula = cone_ih(dims, k)
    assert ih_betti(K).betti == formula.ih_c


@pytest.mark.parametrize("space", [figure_eight(), theta(), segment(), star([1.0] * 3),
                                   disjoint_union(circle(), segment()),
                                   random_graph(5, 8, seed=1)],
                         ids=["eight", "theta", "segment", "star", "two", "random"])
def test_cross_check_on_graphs(space):
    assert hodge_cross_check(space).passed


@pytest.mark.parametrize("K", [torus_mesh(3), sphere_mesh(1), disk_mesh(2),
                               suspension_of_cycle(6)],
                         ids=["torus", "sphere", "disk", "spindle"])
def test_cross_check_on_meshes(K):
    rep = hodge_cross_check(K)
    assert rep.passed, rep.table()


def test_disk_cross_check_rows():
    rows = hodge_cross_check(disk_mesh(2)).rows
    assert [r["harmonic"] for r in rows] == [0, 0, 1]
    assert [r["ih"] for r in rows] == [0, 0, 1]


def test_combinatorial_spheres():
    assert is_combinatorial_sphere(cycle_complex(4).top, 1)
    assert is_combinatorial_sphere(sphere_mesh(0).top, 2)
    assert not is_combinatorial_sphere(torus_mesh(3).top, 2)
    assert not is_combinatorial_sphere([(0, 1), (1, 2)], 1)


def test_non_orientable_rejected():
    # minimal Moebius band triangulation (5 vertices)
    top = [(0, 1, 2), (1, 2, 3), (2, 3, 4), (3, 4, 0), (4, 0, 1)]
    top = [tuple(sorted(t)) for t in top]
    lengths = {}
    for t in top:
        for a in t:
            for b in t:
                if a < b:
                    lengths[(a, b)] = 1.0
    K = StratifiedComplex(5, top, None, lengths)
    with pytest.raises(HodgeLabError):
        ih_betti(stratify_multiconical(K))


@given(st.integers(3, 9))
def test_cycle_ih_is_circle_homology(m):
    K = stratify_multiconical(cycle_complex(m))
    assert ih_betti(K).betti == {0: 1, 1: 1}
