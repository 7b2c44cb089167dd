"""Reading and writing space documents (graph JSON, cone JSON, mesh text) and reports."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .complexes import StratifiedComplex
from .cone_analysis import ConeSpace, PointSet
from .errors import ValidationError
from .graph_laplace import MetricGraph

PRECISION = 12
MESH_HEADER = "HODGELAB-MESH"


@dataclass
class SpaceDocument:
    """A validated space: ``kind`` is ``graph``, ``cone`` or ``mesh``."""

    kind: str
    payload: object
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = {"graph": MetricGraph, "cone": ConeSpace, "mesh": StratifiedComplex}
        if self.kind not in expected:
            raise ValidationError(f"unknown kind {self.kind!r}")
        if not isinstance(self.payload, expected[self.kind]):
            raise ValidationError(f"kind {self.kind!r} does not match payload "
                                  f"{type(self.payload).__name__}")
        lam = self.metadata.get("Lambda")
        if lam is not None and not (isinstance(lam, (int, float)) and lam >= 1):
            raise ValidationError("metadata Lambda must be a number >= 1")

    @property
    def Lambda(self):
        return self.metadata.get("Lambda")

    def canonical(self):
        return json.loads(emit(self)) if self.kind != "mesh" else emit(self)

    def __eq__(self, other):
        return isinstance(other, SpaceDocument) and self.kind == other.kind and \
            emit(self) == emit(other)


# ----------------------------------------------------------------------------
# JSON documents


def _cone_from_dict(doc):
    if "base" not in doc:
        raise ValidationError("cone document needs a 'base' field")
    eps = doc.get("eps", 1.0)
    base = doc["base"]
    base_dim = doc.get("base_dim")
    if isinstance(base, list):
        payload = ConeSpace(base, eps, base_dim)
    elif isinstance(base, dict) and "edges" in base:
        payload = ConeSpace(MetricGraph.from_dict(base), eps)
    elif isinstance(base, dict) and "distances" in base:
        payload = ConeSpace(PointSet(np.asarray(base["distances"], dtype=float)), eps)
    elif isinstance(base, dict) and "points" in base:
        k = base["points"]
        if not isinstance(k, int) or k < 1:
            raise ValidationError("'points' must be a positive integer")
        payload = ConeSpace(PointSet.uniform(k), eps)
    else:
        raise ValidationError("cone base must be a graph, a point set or a spectrum list")
    return payload


def _cone_to_dict(cone: ConeSpace):
    if cone.kind == "graph":
        base = cone.base.to_dict()
    elif cone.kind == "points":
        base = {"distances": cone.base.distances.tolist()}
    else:
        base = [float(x) for x in cone.base]
    out = {"kind": "cone", "base": base, "eps": cone.eps}
    if cone.kind == "spectrum":
        out["base_dim"] = cone.base_dim
    return out


def loads_json(text: str) -> SpaceDocument:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: "
                              f"{exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("top-level JSON value must be an object")
    kind = doc.get("kind") or ("cone" if "base" in doc else "graph" if "edges" in doc else None)
    meta = dict(doc.get("metadata", {}))
    if kind == "graph":
        return SpaceDocument("graph", MetricGraph.from_dict(doc), meta)
    if kind == "cone":
        return SpaceDocument("cone", _cone_from_dict(doc), meta)
    raise ValidationError("cannot tell document kind: expected 'kind', 'edges' or 'base'")


# ----------------------------------------------------------------------------
# mesh text format


def _fmt_float(x):
    return repr(float(x))


def emit_mesh(K: StratifiedComplex, metadata=None) -> str:
    """Text form of a stratified complex.

    Layout: header line, ``<vertices> <top simplices> <coordinate dim>``, vertex
    coordinate lines, top simplex lines ``<count> v0 v1 ...``, then optional blocks
    ``strata <j> <count>``, ``boundary <count>``, ``lengths <count>`` (lines ``i j L``)
    and ``meta <key> <json>`` lines.
    """
    cdim = 0 if K.coords is None else K.coords.shape[1]
    lines = [MESH_HEADER, f"{K.n_vertices} {len(K.top)} {cdim}"]
    if cdim:
        lines += [" ".join(_fmt_float(x) for x in row) for row in K.coords]
    lines += [f"{len(s)} " + " ".join(map(str, s)) for s in K.top]

    def block(sims):
        maximal = [s for s in sims if not any(len(t) > len(s) and set(s) < set(t)
                                              for t in sims)]
        return [f"{len(s)} " + " ".join(map(str, s)) for s in sorted(maximal)]

    if K.strata is not None:
        for j in sorted(K.strata):
            body = block(K.strata[j])
            lines.append(f"strata {j} {len(body)}")
            lines += body
    if K.boundary:
        body = block(K.boundary)
        lines.append(f"boundary {len(body)}")
        lines += body
    if K.lengths:
        lines.append(f"lengths {len(K.lengths)}")
        lines += [f"{a} {b} {_fmt_float(L)}" for (a, b), L in sorted(K.lengths.items())]
    meta = dict(K.metadata)
    meta.update(metadata or {})
    for key in sorted(meta):
        lines.append(f"meta {key} {json.dumps(_jsonable(meta[key]), sort_keys=True)}")
    return "\n".join(lines) + "\n"


def loads_mesh(text: str) -> SpaceDocument:
    raw = text.splitlines()
    lines = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in enumerate(raw)]
    lines = [(i, ln) for i, ln in lines if ln]
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise ValidationError("unexpected end of mesh file")
        item = lines[pos]
        pos += 1
        return item

    def ints(lineno, parts, what):
        try:
            return [int(x) for x in parts]
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: {what} must be integers") from exc

    lineno, first = take()
    if first != MESH_HEADER:
        raise ValidationError(f"line {lineno}: expected header {MESH_HEADER!r}")
    lineno, counts = take()
    parts = counts.split()
    if len(parts) != 3:
        raise ValidationError(f"line {lineno}: expected '<vertices> <simplices> <coord dim>'")
    nv, ns, cdim = ints(lineno, parts, "counts")
    if nv < 1 or ns < 1 or cdim < 0:
        raise ValidationError(f"line {lineno}: counts must be positive")
    coords = None
    if cdim:
        rows = []
        for _ in range(nv):
            lineno, ln = take()
            vals = ln.split()
            if len(vals) != cdim:
                raise ValidationError(f"line {lineno}: expected {cdim} coordinates")
            try:
                rows.append([float(x) for x in vals])
            except ValueError as exc:
                raise ValidationError(f"line {lineno}: bad coordinate") from exc
        coords = np.array(rows)

    def simplex_line():
        lineno, ln = take()
        vals = ints(lineno, ln.split(), "simplex entries")
        if not vals or vals[0] != len(vals) - 1 or vals[0] < 1:
            raise ValidationError(f"line {lineno}: simplex line must be '<count> v0 v1 ...'")
        for v in vals[1:]:
            if v < 0 or v >= nv:
                raise ValidationError(f"line {lineno}: simplex references vertex {v}, "
                                      f"valid indices are 0..{nv - 1}")
        return tuple(vals[1:])

    top = [simplex_line() for _ in range(ns)]
    strata, boundary, lengths, meta = None, set(), {}, {}
    while pos < len(lines):
        lineno, ln = take()
        parts = ln.split()
        tag = parts[0]
        if tag == "strata":
            if len(parts) != 3:
                raise ValidationError(f"line {lineno}: expected 'strata <j> <count>'")
            j, cnt = ints(lineno, parts[1:], "strata header")
            strata = {} if strata is None else strata
            strata[j] = {simplex_line() for _ in range(cnt)}
        elif tag == "boundary":
            (cnt,) = ints(lineno, parts[1:2], "boundary count")
            boundary = {simplex_line() for _ in range(cnt)}
        elif tag == "lengths":
            (cnt,) = ints(lineno, parts[1:2], "lengths count")
            for _ in range(cnt):
                ln2, body = take()
                p2 = body.split()
                if len(p2) != 3:
                    raise ValidationError(f"line {ln2}: expected 'i j length'")
                a, b = ints(ln2, p2[:2], "edge endpoints")
                try:
                    L = float(p2[2])
                except ValueError as exc:
                    raise ValidationError(f"line {ln2}: bad length") from exc
                if not (L > 0 and math.isfinite(L)):
                    raise ValidationError(f"line {ln2}: length must be positive")
                lengths[(min(a, b), max(a, b))] = L
        elif tag == "meta":
            if len(parts) < 3:
                raise ValidationError(f"line {lineno}: expected 'meta <key> <json>'")
            try:
                meta[parts[1]] = json.loads(ln.split(None, 2)[2])
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {lineno}: bad meta value") from exc
        else:
            raise ValidationError(f"line {lineno}: unknown block {tag!r}")
    doc_meta = {k: meta[k] for k in ("Lambda", "label") if k in meta}
    if "size" in meta and isinstance(meta["size"], list):
        meta["size"] = tuple(meta["size"])
    try:
        K = StratifiedComplex(nv, top, coords, lengths, strata, boundary, meta)
    except ValidationError as exc:
        raise ValidationError(f"mesh invalid: {exc}") from exc
    if K.strata is not None:
        K.orientation()
    return SpaceDocument("mesh", K, doc_meta)


# ----------------------------------------------------------------------------
# public entry points


def loads(text: str) -> SpaceDocument:
    if text.lstrip().startswith(MESH_HEADER):
        return loads_mesh(text)
    return loads_json(text)


def load_space(path) -> SpaceDocument:
    if not os.path.exists(path):
        raise ValidationError(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def emit(doc: SpaceDocument) -> str:
    """Serialize a document; ``loads(emit(doc)) == doc``."""
    if doc.kind == "mesh":
        return emit_mesh(doc.payload, doc.metadata)
    if doc.kind == "graph":
        out = {"kind": "graph", **doc.payload.to_dict()}
    else:
        out = _cone_to_dict(doc.payload)
    if doc.metadata:
        out["metadata"] = doc.metadata
    return json.dumps(out, indent=2, sort_keys=True) + "\n"


# ----------------------------------------------------------------------------
# reports


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.{PRECISION}g}")
    return x


def report_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def fmt(x) -> str:
    return f"{float(x):.{PRECISION}g}"


def spectrum_csv(result) -> str:
    lines = ["p,k,lambda,multiplicity,residual"]
    for p, k, lam, m, r in result.rows():
        lines.append(f"{p},{k},{fmt(lam)},{m},{fmt(r)}")
    return "\n".join(lines) + "\n"


def digest(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, str):
            part = part.encode("utf-8")
        h.update(part)
        h.update(b"\0")
    return h.hexdigest()
