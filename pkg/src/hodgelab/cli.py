"""Command line front end: ``hodgelab <command> [options] <space file>``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import HodgeLabError, ValidationError
from .io import digest, emit, fmt, load_space, report_json, spectrum_csv
from .spectral import SpectralResult

EXIT_CODES = {"error": 1, "validation": 2, "convergence": 3, "gap": 4, "rank": 5}
COMMANDS = ("spectrum", "certify", "ih", "hodge-check", "weyl")


# ----------------------------------------------------------------------------
# spectra per document kind


def graph_spectrum(G, degree, count, tol=1e-8):
    from .graph_laplace import harmonic_dim_1, secular_spectrum_0

    if degree not in (0, 1):
        raise ValidationError("graphs carry degrees 0 and 1 only")
    cap = (math.pi * (count + 2 + len(G.edges)) / G.total_length) ** 2
    while True:
        res = secular_spectrum_0(G, (0.0, cap), tol=tol)
        if len(res) > count:
            break
        cap *= 2.0
    if degree == 0:
        return res.head(count)
    h = harmonic_dim_1(G)
    pos = res.eigenvalues[res.eigenvalues > 1e-9]
    vals = np.concatenate([np.zeros(h), pos])
    return SpectralResult.from_values(1, vals, None, dict(res.metadata, harmonic=h)).head(count)


def mesh_system(K):
    from .mesh_hodge import apply_relative_bc, build_complex

    C = build_complex(K)
    return apply_relative_bc(C) if K.boundary else C


def space_spectrum(doc, degree, count, tol=1e-8, seed=0):
    if doc.kind == "graph":
        return graph_spectrum(doc.payload, degree, count, tol)
    if doc.kind == "cone":
        from .cone_analysis import cone_graph_spectrum
        if degree != 0:
            raise ValidationError("cone spectra are available in degree 0 only")
        return cone_graph_spectrum(doc.payload, doc.payload.eps, count, tol)
    from .mesh_hodge import hodge_spectrum
    K = doc.payload
    if not 0 <= degree <= K.dim:
        raise ValidationError(f"degree must lie in 0..{K.dim}")
    return hodge_spectrum(mesh_system(K), degree, count, tol, seed)


# ----------------------------------------------------------------------------
# commands


def cmd_spectrum(doc, args):
    res = space_spectrum(doc, args.degree, args.count, args.tol, args.seed)
    return {"spectrum": {"degree": res.degree, "eigenvalues": res.eigenvalues,
                         "multiplicities": res.multiplicities, "residuals": res.residuals,
                         "method": res.metadata.get("method")}}, spectrum_csv(res), 0


def cmd_certify(doc, args):
    from .mesh_hodge import quotient_spectrum
    from .minmax_bounds import bump_profile, certificate

    if doc.kind != "mesh":
        raise ValidationError("certify needs a mesh document with a chart")
    K = doc.payload
    Lam = args.Lambda if args.Lambda is not None else doc.Lambda
    Lam = K.metadata.get("Lambda") if Lam is None else Lam
    if Lam is None:
        raise ValidationError("no chart constant: pass --Lambda or set metadata Lambda")
    n, p, k = K.dim, args.degree, args.k
    if not 0 <= p < n:
        raise ValidationError(f"certificates need 0 <= degree < {n}")
    cert = certificate(float(Lam), n, p, k, bump_profile(n, p))
    q = quotient_spectrum(mesh_system(K), p, k, args.tol, args.seed)
    if len(q) < k:
        raise ValidationError(f"the mesh has only {len(q)} positive eigenvalues in degree {p}")
    lam = float(q.eigenvalues[k - 1])
    row = {"k": k, "p": p, "lambda_k": lam, "bound": cert.bound, "holds": lam <= cert.bound,
           "margin": cert.bound / lam - 1.0}
    csv = "k,p,lambda_k,bound,holds\n" + f"{k},{p},{fmt(lam)},{fmt(cert.bound)}," \
        f"{'yes' if row['holds'] else 'no'}\n"
    return {"certificate": cert.to_dict(), "comparison": row}, csv, 0


def _ih_complex(doc):
    from .meshes import graph_complex
    from .strata_ih import stratify_multiconical

    if doc.kind == "graph":
        return stratify_multiconical(graph_complex(doc.payload))
    if doc.kind == "mesh":
        return stratify_multiconical(doc.payload)
    raise ValidationError("ih needs a graph or mesh document")


def _perversity(args, n):
    from .strata_ih import gm_perversity, parse_perversity
    return parse_perversity(args.perversity, n) if args.perversity else gm_perversity(n)


def cmd_ih(doc, args):
    from .strata_ih import ih_betti

    K = _ih_complex(doc)
    res = ih_betti(K, _perversity(args, K.dim))
    csv = "degree,betti\n" + "".join(f"{d},{b}\n" for d, b in sorted(res.betti.items()))
    return {"ih": res.to_dict(), "table": res.table()}, csv, 0


def cmd_hodge_check(doc, args):
    from .strata_ih import hodge_cross_check, ih_betti

    if doc.kind == "cone":
        raise ValidationError("hodge-check needs a graph or mesh document")
    K = _ih_complex(doc)
    ih = ih_betti(K, _perversity(args, K.dim))
    space = doc.payload if doc.kind == "graph" else K
    rep = hodge_cross_check(space, ih=ih)
    csv = "p,harmonic,ih_degree,ih,pass\n" + "".join(
        f"{r['p']},{r['harmonic']},{r['ih_degree']},{r['ih']},{int(r['pass'])}\n"
        for r in rep.rows)
    return {"hodge_check": rep.to_dict(), "table": rep.table()}, csv, 0 if rep.passed else 1


def cmd_weyl(doc, args):
    from .minmax_bounds import weyl_fit

    lo, hi = args.k_range
    res = space_spectrum(doc, args.degree, max(args.count, hi + 20), args.tol, args.seed)
    slope, const = weyl_fit(res, (lo, hi))
    dim = {"graph": 1, "cone": 2}.get(doc.kind) or doc.payload.dim
    out = {"weyl": {"exponent": slope, "prefactor": const, "k_range": [lo, hi],
                    "expected": 2.0 / dim, "dimension": dim}}
    csv = "exponent,prefactor,expected\n" + f"{fmt(slope)},{fmt(const)},{fmt(2.0 / dim)}\n"
    return out, csv, 0


HANDLERS = {"spectrum": cmd_spectrum, "certify": cmd_certify, "ih": cmd_ih,
            "hodge-check": cmd_hodge_check, "weyl": cmd_weyl}


# ----------------------------------------------------------------------------
# entry point


def build_parser():
    ap = argparse.ArgumentParser(prog="hodgelab",
                                 description="Spectra, eigenvalue certificates and "
                                             "intersection homology of singular spaces.")
    ap.add_argument("--version", action="version", version=f"hodgelab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("space", help="graph/cone JSON or mesh text file")
        p.add_argument("--degree", type=int, default=0)
        p.add_argument("--count", type=int, default=10)
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--Lambda", type=float, default=None)
        p.add_argument("--k", type=int, default=1)
        p.add_argument("--perversity", default=None,
                       help="comma list pbar(0),...,pbar(n) replacing the default")
        p.add_argument("--k-range", type=int, nargs=2, default=(10, 100),
                       metavar=("LO", "HI"))
    return ap


def run(command, args):
    """Execute one command; returns ``(report dict, csv text, exit status)``."""
    if command not in HANDLERS:
        raise ValidationError(f"unknown command {command!r}")
    if args.count < 1:
        raise ValidationError("--count must be >= 1")
    with open(args.space, "rb") as fh:
        raw = fh.read()
    doc = load_space(args.space)
    results, csv, status = HANDLERS[command](doc, args)
    settings = {k: getattr(args, k) for k in ("degree", "count", "tol", "seed", "Lambda",
                                               "k", "perversity", "k_range")}
    report = {"command": command, "version": __version__,
              "input": os.path.basename(args.space), "kind": doc.kind,
              "inputs_digest": digest(raw, json.dumps(settings, sort_keys=True, default=str)),
              "settings": settings, "results": results, "status": status}
    return report, csv, status


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    t0 = time.perf_counter()
    try:
        report, csv, status = run(args.command, args)
    except HodgeLabError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    stem = args.command.replace("-", "_")
    with open(os.path.join(args.out, f"{stem}.csv"), "w", encoding="utf-8") as fh:
        fh.write(csv)
    with open(os.path.join(args.out, f"{stem}.json"), "w", encoding="utf-8") as fh:
        fh.write(report_json(report))
    with open(os.path.join(args.out, f"{stem}.timing.json"), "w", encoding="utf-8") as fh:
        fh.write(report_json({"wall_time_s": time.perf_counter() - t0}))
    table = report["results"].get("table")
    sys.stdout.write(table + "\n" if table else csv)
    return status


def export(doc, path):
    """Write a document in its native format."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit(doc))


if __name__ == "__main__":
    sys.exit(main())
