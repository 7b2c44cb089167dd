"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
terminal summary.
"""

import math
import time

import numpy as np

from hodgelab.cone_analysis import (PointSet, cone_graph_spectrum, cone_ih,
                                    cone_l2_cohomology, kunneth_product, radial_spectrum)
from hodgelab.graph_laplace import (adjointness_defect, betti_numbers, bouquet, circle,
                                    disjoint_union, figure_eight, kernel_dimension,
                                    random_graph, reverse_edge, secular_spectrum_0, segment,
                                    star, theta)
from hodgelab.mesh_hodge import (apply_relative_bc, build_complex, harmonic_dims,
                                 hodge_spectrum, quotient_spectrum)
from hodgelab.meshes import (closed_cone, cycle_complex, disk_mesh, interval_mesh,
                             points_complex, sphere_mesh, torus_mesh)
from hodgelab.minmax_bounds import (bilipschitz_envelope, box_family, bump_profile,
                                    certificate, dyadic_level, empirical_rayleigh,
                                    pl_bilipschitz_constant, pulled_back_family,
                                    random_conformal_perturbation,
                                    rescaling_factors, weyl_fit, with_lengths)
from hodgelab.strata_ih import hodge_cross_check, ih_betti

RESULTS = {}


def record(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS[n] = line
    print(line)
    assert ok, line


def graph_corpus():
    corpus = {
        "segment": segment(),
        "circle": circle(),
        "figure-eight": figure_eight(),
        "3-star": star([1.0, 1.3, 0.8]),
        "theta": theta((1.0, 1.2, 0.9)),
        "two components": disjoint_union(circle(), segment(1.5)),
        "bouquet of three": bouquet([1.0, 1.5, 2.0]),
    }
    for b1, seed in ((0, 4), (1, 5), (2, 6), (3, 7)):
        corpus[f"random b1={b1}"] = random_graph(5, 4 + b1, seed=seed)
    return corpus


# ----------------------------------------------------------------------------


def test_criterion_1_graph_kernels_match_betti_numbers():
    t0 = time.perf_counter()
    corpus = graph_corpus()
    bad = []
    for name, G in corpus.items():
        b1 = betti_numbers(G)[1]
        kdim = kernel_dimension(secular_spectrum_0(G, (0.0, 60.0)))
        rep = hodge_cross_check(G)
        if kdim != b1 or not rep.passed:
            bad.append(f"{name}: ker={kdim}, b1={b1}, ih check {rep.passed}")
    dt = time.perf_counter() - t0
    ok = len(corpus) >= 10 and not bad and dt < 60
    record(1, ok, f"{len(corpus)} graphs, {dt:.1f}s" + (f"; {bad}" if bad else ""))


def test_criterion_2_closed_form_spectra():
    t0 = time.perf_counter()
    errs = {}
    # segment with relative conditions: exact secular solver and Whitney FEM
    seg = secular_spectrum_0(segment(), (0.0, 5.5 ** 2 * math.pi ** 2)).eigenvalues
    exact = np.array([(k * math.pi) ** 2 for k in range(1, 6)])
    errs["segment secular"] = (np.max(abs(seg - exact) / exact), 1e-3)
    C = apply_relative_bc(build_complex(interval_mesh(400)))
    fem = quotient_spectrum(C, 0, 5).eigenvalues
    errs["segment FEM (400 cells)"] = (np.max(abs(fem - exact) / exact), 0.02)
    # circle of length L
    L = 3.0
    circ = secular_spectrum_0(circle(L), (0.0, (2 * math.pi * 4.5 / L) ** 2)).eigenvalues
    exact = np.array([0.0] + sorted([(2 * math.pi * m / L) ** 2 for m in (1, 2, 3, 4)] * 2))
    errs["circle secular"] = (np.max(abs(circ[1:] - exact[1:]) / exact[1:]), 1e-3)
    # cone over one point
    cone = cone_graph_spectrum(PointSet.uniform(1), 1.0, 6).eigenvalues
    exact = np.array([((2 * k - 1) * math.pi / 2) ** 2 for k in range(1, 7)])
    errs["cone over point"] = (np.max(abs(cone - exact) / exact), 1e-3)
    # Neumann unit disk, first nonzero radially symmetric eigenvalue
    target = 14.68
    radial = radial_spectrum(0.0, 1.0, 2).eigenvalues[1]
    errs["disk radial (Bessel)"] = (abs(radial - target) / target, 1e-3)
    disk = cone_graph_spectrum(circle(2 * math.pi), 1.0, 8)
    radial_in_cone = min(disk.eigenvalues, key=lambda v: abs(v - target))
    errs["disk cone separation"] = (abs(radial_in_cone - target) / target, 1e-3)
    fem = hodge_spectrum(build_complex(disk_mesh(16, boundary=False)), 0, 8).eigenvalues
    near = min(fem, key=lambda v: abs(v - target))
    errs["disk FEM (16 rings)"] = (abs(near - target) / target, 0.02)
    dt = time.perf_counter() - t0
    fails = [k for k, (e, tol) in errs.items() if not e <= tol]
    detail = ", ".join(f"{k} {e:.1e}/{tol:g}" for k, (e, tol) in errs.items())
    record(2, not fails and dt < 120, f"{detail}; {dt:.1f}s")


def _control_edge(G):
    """An edge whose head is not a leaf, reversing one edge if necessary."""
    for e in G.edges:
        if G.valence(e.head) >= 2:
            return G, e.id
    for e in G.edges:
        if G.valence(e.tail) >= 2:
            return reverse_edge(G, e.id)[0], e.id
    return G, None


def test_criterion_3_adjointness():
    worst, weakest_control, skipped = 0.0, math.inf, []
    for name, G in graph_corpus().items():
        worst = max(worst, adjointness_defect(G, trials=100, seed=13, normalized=True))
        H, edge = _control_edge(G)
        if edge is None:
            skipped.append(name)
            continue
        flipped = adjointness_defect(H, trials=100, seed=13, flip_edge=edge, normalized=True)
        weakest_control = min(weakest_control, flipped)
    ok = worst <= 1e-10 and weakest_control >= 0.1
    record(3, ok, f"max defect {worst:.1e}, smallest flipped defect {weakest_control:.3f}"
                  f"; no interior vertex for control: {skipped}")


def test_criterion_4_minmax_soundness():
    t0 = time.perf_counter()
    K = torus_mesh(64)
    C = build_complex(K)
    Lam = K.metadata["Lambda"]
    q = quotient_spectrum(C, 0, 16).eigenvalues
    psi = bump_profile(2, 0)
    rows, ok = [], True
    for k in (1, 4, 16):
        fam = box_family(psi, dyadic_level(k, 2))
        forms = pulled_back_family(K, fam)[:k]
        ray = empirical_rayleigh(forms, C, 0)
        bound = certificate(Lam, 2, 0, k, psi).bound
        lam = q[k - 1]
        ok &= ray >= lam and bound >= 1.05 * lam
        rows.append(f"k={k}: lambda {lam:.2f}, rayleigh {ray:.1f}, bound {bound:.1f}")
    dt = time.perf_counter() - t0
    record(4, ok and dt < 180, "; ".join(rows) + f"; {dt:.1f}s")


def test_criterion_5_weyl_exponent():
    circ = secular_spectrum_0(circle(2 * math.pi), (0.0, 60.0 ** 2))
    s1, _ = weyl_fit(circ, (10, 100))
    tor = quotient_spectrum(build_complex(torus_mesh(48)), 0, 110)
    s2, _ = weyl_fit(tor.eigenvalues, (10, 100))
    ok = abs(s1 - 2.0) <= 0.2 * 2.0 and abs(s2 - 1.0) <= 0.2 * 1.0
    record(5, ok, f"circle exponent {s1:.3f} (expect 2), torus exponent {s2:.3f} (expect 1)")


def test_criterion_6_bilipschitz_sandwich():
    K = torus_mesh(8)
    base = build_complex(K)
    ref = {p: quotient_spectrum(base, p, 20).eigenvalues for p in (0, 1)}
    Cmax = 1.5
    perturbed = [random_conformal_perturbation(K, Cmax, seed=seed) for seed in range(5)]
    for factor in (Cmax, 1 / Cmax):
        K2 = with_lengths(K, {e: factor * L for e, L in K.lengths.items()})
        perturbed.append((K2, pl_bilipschitz_constant(K, K2)))
    inside, checked, used = True, 0, 0.0
    for K2, c in perturbed:
        C2 = build_complex(K2)
        for p in (0, 1):
            lam2 = quotient_spectrum(C2, p, 20).eigenvalues
            width = (2 * 2 + 4 * p + 2) * math.log(Cmax)
            for lam, mu in zip(ref[p], lam2):
                lo, hi = bilipschitz_envelope(Cmax, 2, p, lam)
                inside &= lo <= mu <= hi
                used = max(used, abs(math.log(mu / lam)) / width)
                checked += 1
    consts = [c for _, c in perturbed]
    ok = inside and checked == len(perturbed) * 2 * 20 and max(consts) <= Cmax * (1 + 1e-12)
    record(6, ok, f"{checked} eigenvalues over {len(perturbed)} metrics with PL constants "
                  f"{min(consts):.3f}..{max(consts):.3f}; largest shift uses "
                  f"{100 * used:.1f}% of the envelope half-width")


def test_criterion_7_cone_formulas():
    checks = []
    t = cone_l2_cohomology({0: 3}, 1)
    checks.append(("k=1 three points", (t.l2[0], t.l2[1], t.l2_c[0], t.l2_c[1]) == (2, 0, 0, 1)))
    t = cone_ih({0: 2}, 1)
    checks.append(("k=1 two points IH1", t.ih[1] == 1))
    circle_cone = cone_l2_cohomology({0: 1, 1: 1}, 2)
    checks.append(("k=2 circle", (circle_cone.l2[0], circle_cone.l2[1]) == (1, 0)))
    checks.append(("k=2 circle compact", circle_cone.l2_c[2] == 1))
    torus_cone = cone_ih({0: 1, 1: 2, 2: 1}, 3)
    checks.append(("k=3 torus", (torus_cone.ih[2], torus_cone.ih[1]) == (2, 0)))
    checks.append(("kunneth compact shift", kunneth_product(circle_cone, 1).l2_c[3] == 1))
    checks.append(("kunneth IH", kunneth_product(torus_cone, 1).ih[3] == 2))
    for name, base, dims in (("1pt", points_complex(1), {0: 1}),
                             ("3pts", points_complex(3), {0: 3}),
                             ("circle", cycle_complex(5), {0: 1, 1: 1}),
                             ("sphere", sphere_mesh(0), {0: 1, 1: 0, 2: 1}),
                             ("torus", torus_mesh(3), {0: 1, 1: 2, 2: 1})):
        K = closed_cone(base)
        checks.append((f"triangulated cone over {name}",
                       ih_betti(K).betti == cone_ih(dims, K.dim).ih_c))
    bad = [n for n, ok in checks if not ok]
    record(7, not bad, f"{len(checks)} exact checks" + (f"; failed {bad}" if bad else ""))


def _graph_counts(G):
    res = secular_spectrum_0(G, (0.0, 250.0))
    return res.count_below(10.0), res.count_below(100.0), betti_numbers(G)[1]


def _mesh_counts(C, count):
    res = hodge_spectrum(C, 0, count)
    return res.count_below(10.0), res.count_below(100.0), sum(harmonic_dims(C))


def test_criterion_8_counting_functions():
    spaces = {name: (lambda G=G: _graph_counts(G)) for name, G in graph_corpus().items()}
    spaces["cone over point"] = lambda: (
        cone_graph_spectrum(PointSet.uniform(1), 1.0, 20).count_below(10.0),
        cone_graph_spectrum(PointSet.uniform(1), 1.0, 20).count_below(100.0), 0)
    spaces["cone over circle"] = lambda: (
        cone_graph_spectrum(circle(2 * math.pi), 1.0, 60).count_below(10.0),
        cone_graph_spectrum(circle(2 * math.pi), 1.0, 60).count_below(100.0), 1)
    spaces["torus"] = lambda: _mesh_counts(build_complex(torus_mesh(16)), 30)
    spaces["disk"] = lambda: _mesh_counts(build_complex(disk_mesh(8, boundary=False)), 40)
    spaces["sphere"] = lambda: _mesh_counts(build_complex(sphere_mesh(2)), 130)
    spaces["interval"] = lambda: _mesh_counts(
        apply_relative_bc(build_complex(interval_mesh(200))), 10)
    bad = []
    for name, fn in spaces.items():
        n10, n100, harm = fn()
        finite = all(isinstance(x, int) and x >= 0 for x in (n10, n100, harm))
        if not (finite and n10 < n100):
            bad.append(f"{name}: N(10)={n10}, N(100)={n100}")
    record(8, not bad, f"{len(spaces)} spaces" + (f"; {bad}" if bad else ""))


def test_criterion_9_rescaling_laws():
    worst = 0.0
    for n in (2, 3):
        for p in (0, 1):
            psi = bump_profile(n, p)
            for c in (0, 1, 2):
                fam = box_family(psi, c)
                e, m = rescaling_factors(n, p, c)
                worst = max(worst, abs(fam.energy_factor / e - 1), abs(fam.norm_factor / m - 1))
    record(9, worst <= 1e-10, f"max relative error {worst:.1e} over 12 cases")
