"""Adjacency containers, edge-list I/O and network preprocessing.

Node indices are 0-based inside the library. Edge-list files use 1-based
ids unless ``zero_based=True`` is passed.
"""

from __future__ import annotations

import logging
import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import BoundsError, DomainError, ParseError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SymmetricAdjacency:
    """Unweighted undirected graph with no self-loops.

    ``rows``/``cols`` hold each undirected edge once with ``rows < cols``,
    sorted lexicographically.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    self_loops_dropped: int = 0

    @classmethod
    def from_edges(cls, n: int, edges, self_loops_dropped: int = 0) -> "SymmetricAdjacency":
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        e = e.reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise BoundsError(f"edge endpoint outside 0..{n - 1}")
        loops = e[:, 0] == e[:, 1]
        e = e[~loops]
        lo = np.minimum(e[:, 0], e[:, 1])
        hi = np.maximum(e[:, 0], e[:, 1])
        pairs = np.unique(np.stack([lo, hi], axis=1), axis=0) if len(e) else np.empty((0, 2), np.int64)
        r, c = pairs[:, 0].copy(), pairs[:, 1].copy()
        r.setflags(write=False)
        c.setflags(write=False)
        return cls(int(n), r, c, self_loops_dropped + int(loops.sum()))

    @classmethod
    def from_dense(cls, a) -> "SymmetricAdjacency":
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError("adjacency must be square")
        if not np.array_equal(a, a.T):
            raise DomainError("adjacency must be symmetric")
        r, c = np.nonzero(np.triu(a, k=1))
        return cls.from_edges(a.shape[0], np.stack([r, c], axis=1))

    @property
    def n_edges(self) -> int:
        return len(self.rows)

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.rows.tolist(), self.cols.tolist()))

    def degrees(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.n) + np.bincount(self.cols, minlength=self.n)

    def to_csr(self) -> sp.csr_matrix:
        data = np.ones(2 * self.n_edges)
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        return sp.csr_matrix((data, (r, c)), shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymmetricAdjacency):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
        )


@dataclass(frozen=True, eq=False)
class BipartiteAdjacency:
    """0/1 incidence between ``n`` primary nodes and ``m`` bipartite nodes."""

    n: int
    m: int
    rows: np.ndarray
    cols: np.ndarray

    @classmethod
    def from_edges(cls, n: int, m: int, edges) -> "BipartiteAdjacency":
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        e = e.reshape(-1, 2)
        if e.size:
            if e[:, 0].min() < 0 or e[:, 0].max() >= n:
                raise BoundsError(f"primary index outside 0..{n - 1}")
            if e[:, 1].min() < 0 or e[:, 1].max() >= m:
                raise BoundsError(f"bipartite index outside 0..{m - 1}")
            e = np.unique(e, axis=0)
        r, c = e[:, 0].copy(), e[:, 1].copy()
        r.setflags(write=False)
        c.setflags(write=False)
        return cls(int(n), int(m), r, c)

    @classmethod
    def from_dense(cls, b) -> "BipartiteAdjacency":
        b = np.asarray(b)
        if b.ndim != 2:
            raise DomainError("bipartite adjacency must be 2-D")
        r, c = np.nonzero(b)
        return cls.from_edges(b.shape[0], b.shape[1], np.stack([r, c], axis=1))

    @property
    def n_edges(self) -> int:
        return len(self.rows)

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.rows.tolist(), self.cols.tolist()))

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (np.ones(self.n_edges), (self.rows, self.cols)), shape=(self.n, self.m)
        )

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def __eq__(self, other) -> bool:
        if not isinstance(other, BipartiteAdjacency):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
        )


@dataclass(frozen=True)
class NodeSubset:
    """Sorted original indices of kept nodes and their compact positions."""

    kept: tuple[int, ...]
    remap: dict[int, int] = field(compare=False, repr=False)

    @classmethod
    def of(cls, nodes) -> "NodeSubset":
        kept = tuple(sorted({int(v) for v in nodes}))
        return cls(kept, {v: i for i, v in enumerate(kept)})

    def __len__(self) -> int:
        return len(self.kept)

    def __contains__(self, v) -> bool:
        return v in self.remap


# ---------------------------------------------------------------------------
# edge-list files


def _parse_pairs(path, zero_based: bool):
    offset = 0 if zero_based else 1
    dims = None
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                tok = line[1:].split()
                if tok and tok[0] == "dims":
                    try:
                        dims = [int(t) for t in tok[1:]]
                    except ValueError:
                        raise ParseError(f"{path}:{lineno}: bad dims header {line!r}") from None
                continue
            tok = line.split()
            if len(tok) != 2:
                raise ParseError(f"{path}:{lineno}: expected two integers, got {line!r}")
            try:
                i, j = int(tok[0]) - offset, int(tok[1]) - offset
            except ValueError:
                raise ParseError(f"{path}:{lineno}: expected two integers, got {line!r}") from None
            if i < 0 or j < 0:
                raise BoundsError(f"{path}:{lineno}: node id below {offset}")
            pairs.append((i, j))
    return dims, np.array(pairs, dtype=np.int64).reshape(-1, 2)


def load_edge_list(
    path: str | os.PathLike,
    kind: str = "primary",
    n: int | None = None,
    m: int | None = None,
    zero_based: bool = False,
) -> SymmetricAdjacency | BipartiteAdjacency:
    """Read a whitespace-separated edge list.

    Sizes come from the explicit ``n``/``m`` arguments, then a ``#dims``
    header, and finally the largest id seen in the file.
    """
    if kind not in ("primary", "bipartite"):
        raise DomainError(f"unknown edge-list kind {kind!r}")
    dims, pairs = _parse_pairs(path, zero_based)
    dims = dims or []
    if n is None:
        if dims:
            n = dims[0]
        elif len(pairs):
            n = int(pairs.max() if kind == "primary" else pairs[:, 0].max()) + 1
        else:
            n = 0
    if kind == "primary":
        if len(pairs) and pairs.max() >= n:
            raise BoundsError(f"{path}: node id exceeds declared n={n}")
        adj = SymmetricAdjacency.from_edges(n, pairs)
        if adj.self_loops_dropped:
            logger.warning("%s: dropped %d self-loop(s)", path, adj.self_loops_dropped)
        return adj
    if m is None:
        m = dims[1] if len(dims) >= 2 else (int(pairs[:, 1].max()) + 1 if len(pairs) else 0)
    if len(pairs) and pairs[:, 0].max() >= n:
        raise BoundsError(f"{path}: primary id exceeds declared n={n}")
    if len(pairs) and pairs[:, 1].max() >= m:
        raise BoundsError(f"{path}: bipartite id exceeds declared m={m}")
    return BipartiteAdjacency.from_edges(n, m, pairs)


def save_edge_list(
    adj: SymmetricAdjacency | BipartiteAdjacency, path: str | os.PathLike, zero_based: bool = False
) -> None:
    offset = 0 if zero_based else 1
    with open(path, "w", encoding="utf-8") as fh:
        if isinstance(adj, BipartiteAdjacency):
            fh.write(f"#dims {adj.n} {adj.m}\n")
        else:
            fh.write(f"#dims {adj.n}\n")
        for i, j in zip(adj.rows.tolist(), adj.cols.tolist()):
            fh.write(f"{i + offset} {j + offset}\n")


# ---------------------------------------------------------------------------
# preprocessing


def c_core(a: SymmetricAdjacency, c: int) -> NodeSubset:
    """Nodes of the maximal induced subgraph with minimum degree ``c``.

    Peels in FIFO order: nodes below ``c`` in index order first, then each
    neighbour at the moment its degree falls to ``c - 1``. The core itself
    does not depend on the order.
    """
    if c < 1:
        raise DomainError("c must be >= 1")
    csr = a.to_csr()
    indptr, indices = csr.indptr, csr.indices
    deg = a.degrees().astype(np.int64)
    removed = np.zeros(a.n, dtype=bool)
    queue = deque(np.flatnonzero(deg < c).tolist())
    while queue:
        v = queue.popleft()
        removed[v] = True
        for u in indices[indptr[v]:indptr[v + 1]]:
            if removed[u]:
                continue
            deg[u] -= 1
            if deg[u] == c - 1:
                queue.append(int(u))
    return NodeSubset.of(np.flatnonzero(~removed))


def largest_connected_component(a: SymmetricAdjacency) -> NodeSubset:
    if a.n < 1:
        raise DomainError("graph has no nodes")
    _, comp = connected_components(a.to_csr(), directed=False)
    sizes = np.bincount(comp)
    best = sizes.max()
    # component ids are assigned in order of first node, so the first
    # maximal component also has the smallest minimum index
    winner = int(np.flatnonzero(sizes == best)[0])
    return NodeSubset.of(np.flatnonzero(comp == winner))


def density(a: SymmetricAdjacency) -> float:
    if a.n < 2:
        raise DomainError("density needs at least two nodes")
    return a.n_edges / (a.n * (a.n - 1) / 2)


def _check_subset(s: NodeSubset, n: int) -> np.ndarray:
    kept = np.asarray(s.kept, dtype=np.int64)
    if kept.size and (kept.min() < 0 or kept.max() >= n):
        raise BoundsError(f"subset index outside 0..{n - 1}")
    return kept


def restrict(a: SymmetricAdjacency, s: NodeSubset) -> SymmetricAdjacency:
    """Induced subgraph on ``s`` with nodes renumbered ``0..len(s)-1``."""
    kept = _check_subset(s, a.n)
    pos = np.full(a.n, -1, dtype=np.int64)
    pos[kept] = np.arange(len(kept))
    keep = (pos[a.rows] >= 0) & (pos[a.cols] >= 0)
    edges = np.stack([pos[a.rows[keep]], pos[a.cols[keep]]], axis=1)
    return SymmetricAdjacency.from_edges(len(kept), edges)


def restrict_rows(b: BipartiteAdjacency, s: NodeSubset) -> BipartiteAdjacency:
    """Keep only the primary rows in ``s``; bipartite columns are untouched."""
    kept = _check_subset(s, b.n)
    pos = np.full(b.n, -1, dtype=np.int64)
    pos[kept] = np.arange(len(kept))
    keep = pos[b.rows] >= 0
    edges = np.stack([pos[b.rows[keep]], b.cols[keep]], axis=1)
    return BipartiteAdjacency.from_edges(len(kept), b.m, edges)
