"""View graphs and their 3-cycle (common neighbor) index."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised for malformed view graphs."""


@dataclass(frozen=True)
class TriangleIndex:
    """Common neighbors ``N_ij`` of every edge in CSR layout.

    Entries for edge ``e`` live in ``k[offsets[e]:offsets[e + 1]]`` in
    ascending node order. ``edge_ik`` / ``edge_jk`` hold the ordinals of
    the two other edges of each triangle, and ``owner`` repeats ``e`` for
    every entry so that per-edge reductions can use ``np.bincount``.
    """

    offsets: np.ndarray
    k: np.ndarray
    owner: np.ndarray
    edge_ik: np.ndarray
    edge_jk: np.ndarray

    def __len__(self) -> int:
        return len(self.offsets) - 1

    def neighbors(self, e: int) -> np.ndarray:
        return self.k[self.offsets[e]:self.offsets[e + 1]]

    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def as_lists(self) -> list[list[int]]:
        return [self.neighbors(e).tolist() for e in range(len(self))]

    def subset(self, keep: np.ndarray) -> "TriangleIndex":
        """Restrict to the flat entries where ``keep`` is true."""
        keep = np.asarray(keep, dtype=bool)
        counts = np.bincount(self.owner[keep], minlength=len(self))
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return TriangleIndex(
            offsets=offsets,
            k=self.k[keep],
            owner=self.owner[keep],
            edge_ik=self.edge_ik[keep],
            edge_jk=self.edge_jk[keep],
        )


@dataclass(frozen=True)
class ViewGraph:
    n: int
    edges: np.ndarray  # (m, 2) int64, i < j, lexicographically sorted
    adjacency: tuple[np.ndarray, ...]
    edge_index: dict[tuple[int, int], int] = field(repr=False)
    triangles: TriangleIndex = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_id(self, i: int, j: int) -> int:
        """Ordinal of the undirected edge ``{i, j}``."""
        key = (i, j) if i < j else (j, i)
        try:
            return self.edge_index[key]
        except KeyError:
            raise GraphError(f"no edge ({i}, {j})") from None

    def has_edge(self, i: int, j: int) -> bool:
        key = (i, j) if i < j else (j, i)
        return key in self.edge_index

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def components(self, weights: np.ndarray | None = None) -> np.ndarray:
        """Connected component label per node, optionally using only edges with positive weight."""
        import scipy.sparse as sp
        from scipy.sparse.csgraph import connected_components

        mask = np.ones(self.m, bool) if weights is None else np.asarray(weights) > 0
        e = self.edges[mask]
        a = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(self.n, self.n))
        _, labels = connected_components(a, directed=False)
        return labels

    def is_connected(self, weights: np.ndarray | None = None) -> bool:
        return bool(np.all(self.components(weights) == 0))


def build_view_graph(n: int, edges: Iterable[Sequence[int]]) -> ViewGraph:
    """Canonicalize an undirected edge list and precompute its triangles.

    Edges are stored as ``(min, max)`` pairs in lexicographic order, so
    any permutation of the same input produces an identical graph.

    Raises:
        GraphError: on a self-loop, an out-of-range node or a duplicate edge.
    """
    if n < 1:
        raise GraphError(f"node count must be >= 1, got {n}")
    canon: set[tuple[int, int]] = set()
    for pair in edges:
        if len(pair) != 2:
            raise GraphError(f"edge {tuple(pair)!r} is not a pair")
        i, j = int(pair[0]), int(pair[1])
        if i == j:
            raise GraphError(f"self-loop at ({i}, {j})")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"edge ({i}, {j}) references a node outside [0, {n})")
        key = (i, j) if i < j else (j, i)
        if key in canon:
            raise GraphError(f"duplicate edge ({i}, {j})")
        canon.add(key)

    ordered = sorted(canon)
    arr = np.array(ordered, dtype=np.int64).reshape(-1, 2)
    edge_index = {e: idx for idx, e in enumerate(ordered)}

    nbrs: list[list[int]] = [[] for _ in range(n)]
    for i, j in ordered:
        nbrs[i].append(j)
        nbrs[j].append(i)
    adjacency = tuple(np.array(sorted(a), dtype=np.int64) for a in nbrs)

    tri = _index_triangles(arr, adjacency, edge_index)
    return ViewGraph(n=n, edges=arr, adjacency=adjacency, edge_index=edge_index, triangles=tri)


def _index_triangles(edges, adjacency, edge_index) -> TriangleIndex:
    m = len(edges)
    ks: list[np.ndarray] = []
    counts = np.zeros(m, dtype=np.int64)
    for e, (i, j) in enumerate(edges):
        common = np.intersect1d(adjacency[i], adjacency[j], assume_unique=True)
        ks.append(common)
        counts[e] = len(common)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    k = np.concatenate(ks).astype(np.int64) if m else np.zeros(0, np.int64)
    owner = np.repeat(np.arange(m, dtype=np.int64), counts)
    ii = edges[owner, 0] if m else np.zeros(0, np.int64)
    jj = edges[owner, 1] if m else np.zeros(0, np.int64)
    edge_ik = np.fromiter(
        (edge_index[(a, b) if a < b else (b, a)] for a, b in zip(ii.tolist(), k.tolist())),
        dtype=np.int64,
        count=len(k),
    )
    edge_jk = np.fromiter(
        (edge_index[(a, b) if a < b else (b, a)] for a, b in zip(jj.tolist(), k.tolist())),
        dtype=np.int64,
        count=len(k),
    )
    return TriangleIndex(offsets=offsets, k=k, owner=owner, edge_ik=edge_ik, edge_jk=edge_jk)


def common_neighbors(graph: ViewGraph) -> TriangleIndex:
    """The triangle index ``N_ij`` of ``graph`` (computed once at build time)."""
    return graph.triangles


def erdos_renyi_edges(n: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """Include each pair ``i < j`` independently with probability ``p``.

    One uniform is drawn per pair in lexicographic order, so the result
    depends only on ``(n, p)`` and the generator state.
    """
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return np.stack([iu[keep], ju[keep]], axis=1).astype(np.int64)
