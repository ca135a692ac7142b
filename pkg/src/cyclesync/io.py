"""Plain-text measurement files, scenario directories and JSON estimates.

Text formats are UTF-8 and whitespace separated; blank lines and lines
starting with ``#`` are skipped. Floats are written with 17 significant
digits so that files round-trip exactly.

    graph        "n m", then m lines "i j"
    directions   lines "i j gx gy gz"
    rotations    lines "i j r11 r12 r13 r21 ... r33"   (row-major, R_ij = R_i R_j^T)
    locations    lines "i x y z"
    abs. rots    lines "i r11 ... r33"
    labels       lines "i j flag"                        (flag 1 = corrupted)
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator

import numpy as np

from .directions import DirectionMeasurements
from .graph import ViewGraph, build_view_graph
from .rotation import RotationMeasurements

ESTIMATE_FORMAT = "cyclesync-estimate"
ESTIMATE_VERSION = 1


class FormatError(ValueError):
    pass


def _records(path) -> Iterator[tuple[int, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if text and not text.startswith("#"):
                yield lineno, text.split()


def _ints(path, lineno, fields) -> list[int]:
    try:
        return [int(f) for f in fields]
    except ValueError:
        raise FormatError(f"{path}:{lineno}: expected integers, got {' '.join(fields)!r}") from None


def _floats(path, lineno, fields) -> list[float]:
    try:
        vals = [float(f) for f in fields]
    except ValueError:
        raise FormatError(f"{path}:{lineno}: expected numbers, got {' '.join(fields)!r}") from None
    if not all(np.isfinite(vals)):
        raise FormatError(f"{path}:{lineno}: non-finite value")
    return vals


def _num(x: float) -> str:
    return repr(float(x))


# -- graph ---------------------------------------------------------------------


def write_graph(path, graph: ViewGraph) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{graph.n} {graph.m}\n")
        for i, j in graph.edges:
            fh.write(f"{i} {j}\n")


def read_graph(path) -> ViewGraph:
    records = _records(path)
    first = next(records, None)
    if first is None:
        raise FormatError(f"{path}: empty graph file")
    lineno, fields = first
    if len(fields) != 2:
        raise FormatError(f"{path}:{lineno}: header must be 'n m'")
    n, m = _ints(path, lineno, fields)
    edges = []
    for lineno, fields in records:
        if len(fields) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'i j', got {len(fields)} fields")
        edges.append(_ints(path, lineno, fields))
    if len(edges) != m:
        raise FormatError(f"{path}: header declares {m} edges, found {len(edges)}")
    try:
        return build_view_graph(n, edges)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


# -- per-edge measurements -----------------------------------------------------


def _edge_table(path, width: int, graph: ViewGraph, what: str):
    """Rows keyed by edge; returns (values in canonical edge order, reversed flags)."""
    values = np.full((graph.m, width), np.nan)
    flipped = np.zeros(graph.m, bool)
    seen = np.zeros(graph.m, bool)
    for lineno, fields in _records(path):
        if len(fields) != width + 2:
            raise FormatError(f"{path}:{lineno}: expected 'i j' and {width} {what} values, got {len(fields)} fields")
        i, j = _ints(path, lineno, fields[:2])
        if not graph.has_edge(i, j):
            raise FormatError(f"{path}:{lineno}: edge ({i}, {j}) is not in the graph")
        e = graph.edge_id(i, j)
        if seen[e]:
            raise FormatError(f"{path}:{lineno}: duplicate measurement for edge ({i}, {j})")
        seen[e] = True
        values[e] = _floats(path, lineno, fields[2:])
        flipped[e] = i > j
    if not seen.all():
        i, j = graph.edges[np.argmin(seen)]
        raise FormatError(f"{path}: no measurement for edge ({i}, {j})")
    return values, flipped


def write_directions(path, graph: ViewGraph, dirs: DirectionMeasurements) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (i, j), g in zip(graph.edges, dirs.vectors):
            fh.write(f"{i} {j} {' '.join(_num(x) for x in g)}\n")


def read_directions(path, graph: ViewGraph) -> DirectionMeasurements:
    """Directions in canonical edge order; "j i" lines are negated, all are renormalized."""
    vals, flipped = _edge_table(path, 3, graph, "direction")
    norms = np.linalg.norm(vals, axis=1)
    if np.any(norms == 0):
        i, j = graph.edges[np.argmax(norms == 0)]
        raise FormatError(f"{path}: zero direction vector on edge ({i}, {j})")
    vals = np.where(flipped[:, None], -vals, vals)
    return DirectionMeasurements(vals / norms[:, None])


def write_rotations(path, graph: ViewGraph, rots: RotationMeasurements) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (i, j), R in zip(graph.edges, rots.matrices):
            fh.write(f"{i} {j} {' '.join(_num(x) for x in R.ravel())}\n")


def read_rotations(path, graph: ViewGraph) -> RotationMeasurements:
    """Relative rotations in canonical order; "j i" lines are transposed."""
    vals, flipped = _edge_table(path, 9, graph, "rotation")
    R = vals.reshape(-1, 3, 3)
    R = np.where(flipped[:, None, None], np.swapaxes(R, 1, 2), R)
    try:
        return RotationMeasurements(R)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_labels(path, graph: ViewGraph, corrupted) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (i, j), flag in zip(graph.edges, np.asarray(corrupted, bool)):
            fh.write(f"{i} {j} {int(flag)}\n")


def read_labels(path, graph: ViewGraph) -> np.ndarray:
    vals, _ = _edge_table(path, 1, graph, "label")
    if not np.all(np.isin(vals, (0.0, 1.0))):
        raise FormatError(f"{path}: labels must be 0 or 1")
    return vals[:, 0].astype(bool)


# -- per-node tables -----------------------------------------------------------


def _node_table(path, width: int, n: int | None = None) -> np.ndarray:
    rows = {}
    for lineno, fields in _records(path):
        if len(fields) != width + 1:
            raise FormatError(f"{path}:{lineno}: expected node id and {width} values, got {len(fields)} fields")
        (i,) = _ints(path, lineno, fields[:1])
        if i < 0 or (n is not None and i >= n):
            raise FormatError(f"{path}:{lineno}: node {i} out of range")
        if i in rows:
            raise FormatError(f"{path}:{lineno}: duplicate node {i}")
        rows[i] = _floats(path, lineno, fields[1:])
    count = n if n is not None else len(rows)
    missing = sorted(set(range(count)) - set(rows))
    if missing:
        raise FormatError(f"{path}: missing node {missing[0]}")
    return np.array([rows[i] for i in range(count)], dtype=float).reshape(count, width)


def write_locations(path, locations) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, x in enumerate(np.asarray(locations, float)):
            fh.write(f"{i} {' '.join(_num(v) for v in x)}\n")


def read_locations(path, n: int | None = None) -> np.ndarray:
    return _node_table(path, 3, n)


def write_absolute_rotations(path, rotations) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, R in enumerate(np.asarray(rotations, float)):
            fh.write(f"{i} {' '.join(_num(v) for v in R.ravel())}\n")


def read_absolute_rotations(path, n: int | None = None) -> np.ndarray:
    return _node_table(path, 9, n).reshape(-1, 3, 3)


# -- scenario directories ------------------------------------------------------

GRAPH_FILE = "graph.txt"
DIRECTIONS_FILE = "directions.txt"
ROTATIONS_FILE = "rotations.txt"
LOCATIONS_FILE = "locations.txt"
ABS_ROTATIONS_FILE = "abs_rotations.txt"
LABELS_FILE = "labels.txt"
MANIFEST_FILE = "manifest.json"


def write_scenario(out_dir, graph: ViewGraph, gt, manifest: dict, dirs=None, rots=None) -> Path:
    """Write a generated scenario: measurements, ground truth, labels and a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_graph(out / GRAPH_FILE, graph)
    files = {"graph": GRAPH_FILE, "labels": LABELS_FILE, "locations": LOCATIONS_FILE,
             "abs_rotations": ABS_ROTATIONS_FILE}
    if dirs is not None:
        write_directions(out / DIRECTIONS_FILE, graph, dirs)
        files["directions"] = DIRECTIONS_FILE
    if rots is not None:
        write_rotations(out / ROTATIONS_FILE, graph, rots)
        files["rotations"] = ROTATIONS_FILE
    write_labels(out / LABELS_FILE, graph, gt.corrupted)
    write_locations(out / LOCATIONS_FILE, gt.locations)
    write_absolute_rotations(out / ABS_ROTATIONS_FILE, gt.rotations)
    with open(out / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        json.dump({**manifest, "files": files}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def read_manifest(scenario_dir) -> dict:
    path = Path(scenario_dir) / MANIFEST_FILE
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# -- estimates -----------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def write_estimate(path, kind: str, graph: ViewGraph, *, locations=None, rotations=None,
                   edges: dict | None = None, log=None, config: dict | None = None) -> None:
    """Versioned JSON document holding a location or rotation estimate."""
    if kind not in ("locations", "rotations"):
        raise ValueError("kind must be 'locations' or 'rotations'")
    doc = {
        "format": ESTIMATE_FORMAT,
        "version": ESTIMATE_VERSION,
        "kind": kind,
        "n": graph.n,
        "edges": {"i": graph.edges[:, 0], "j": graph.edges[:, 1], **(edges or {})},
        "log": log or [],
        "config": config or {},
    }
    if locations is not None:
        doc["locations"] = np.asarray(locations, float)
    if rotations is not None:
        doc["rotations"] = np.asarray(rotations, float)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, default=_jsonable, indent=1)
        fh.write("\n")


def read_estimate(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != ESTIMATE_FORMAT:
        raise FormatError(f"{path}: not an estimate document")
    if doc.get("version") != ESTIMATE_VERSION:
        raise FormatError(f"{path}: unsupported estimate version {doc.get('version')!r}")
    for key in ("locations", "rotations"):
        if key in doc:
            doc[key] = np.asarray(doc[key], dtype=float)
    if doc["kind"] not in doc:
        raise FormatError(f"{path}: {doc['kind']} missing")
    return doc
