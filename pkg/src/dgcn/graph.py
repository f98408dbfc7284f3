"""Directed graph container, text I/O and strongly connected components."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _sort_ids(ids):
    """Order original node ids: numerically when all are ints, else as strings."""
    ids = list(ids)
    if all(isinstance(i, (int, np.integer)) for i in ids):
        return sorted(ids)
    return sorted(ids, key=str)


def _parse_id(token: str) -> Hashable:
    try:
        v = int(token)
    except ValueError:
        return token
    return v if v >= 0 else token


@dataclass(frozen=True)
class DirectedGraph:
    """Weighted directed graph on dense node indices ``0..n-1``.

    Edges are stored as three parallel arrays sorted by ``(src, dst)``, with at
    most one entry per ordered pair and strictly positive weights. ``node_ids``
    maps each dense index back to the id used in the source files.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    node_ids: tuple = field(default=())

    def __post_init__(self):
        if self.n < 0:
            raise ValidationError("node count must be non-negative")
        if not self.node_ids:
            object.__setattr__(self, "node_ids", tuple(range(self.n)))
        if len(self.node_ids) != self.n:
            raise ValidationError("node_ids length does not match n")

    @classmethod
    def from_edges(cls, n, edges, node_ids=None, binarize=False) -> "DirectedGraph":
        """Build a graph from ``(src, dst)`` or ``(src, dst, weight)`` tuples.

        Duplicate pairs have their weights summed (or collapse to weight 1 when
        ``binarize``); zero-weight edges are dropped.
        """
        src, dst, w = [], [], []
        for e in edges:
            if len(e) == 2:
                u, v, x = e[0], e[1], 1.0
            else:
                u, v, x = e
            src.append(u)
            dst.append(v)
            w.append(float(x))
        return cls.from_arrays(n, src, dst, w, node_ids=node_ids, binarize=binarize)

    @classmethod
    def from_arrays(cls, n, src, dst, weight, node_ids=None, binarize=False):
        src = np.asarray(src, dtype=np.int64).reshape(-1)
        dst = np.asarray(dst, dtype=np.int64).reshape(-1)
        weight = np.asarray(weight, dtype=np.float64).reshape(-1)
        if not (len(src) == len(dst) == len(weight)):
            raise ValidationError("edge arrays differ in length")
        if len(src) and (src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n):
            raise ValidationError(f"edge endpoint outside [0, {n})")
        if not np.all(np.isfinite(weight)):
            raise ValidationError("edge weights must be finite")
        if np.any(weight < 0):
            raise ValidationError("edge weights must be non-negative")
        keep = weight > 0
        src, dst, weight = src[keep], dst[keep], weight[keep]
        if binarize:
            weight = np.ones_like(weight)
        # coalesce duplicates in (src, dst) order
        key = src * max(n, 1) + dst
        order = np.argsort(key, kind="stable")
        key, src, dst, weight = key[order], src[order], dst[order], weight[order]
        if len(key):
            starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
            weight = np.add.reduceat(weight, starts)
            src, dst = src[starts], dst[starts]
            if binarize:
                weight = np.ones_like(weight)
        return cls(
            n=int(n),
            src=_frozen(src, np.int64),
            dst=_frozen(dst, np.int64),
            weight=_frozen(weight, np.float64),
            node_ids=tuple(node_ids) if node_ids is not None else (),
        )

    @property
    def num_edges(self) -> int:
        return len(self.src)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return list(zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()))

    @property
    def total_weight(self) -> float:
        return float(self.weight.sum())

    def index_of(self) -> dict:
        return {nid: i for i, nid in enumerate(self.node_ids)}

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.weight, (self.src, self.dst)), shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.src, self.dst] = self.weight
        return a

    def is_symmetric(self) -> bool:
        a = self.to_csr()
        return (a != a.T).nnz == 0

    def induced_subgraph(self, nodes: Sequence[int]) -> "DirectedGraph":
        """Subgraph on ``nodes`` (re-indexed in ascending original index order)."""
        nodes = np.unique(np.asarray(nodes, dtype=np.int64))
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        keep = (remap[self.src] >= 0) & (remap[self.dst] >= 0)
        return DirectedGraph.from_arrays(
            len(nodes),
            remap[self.src[keep]],
            remap[self.dst[keep]],
            self.weight[keep],
            node_ids=[self.node_ids[i] for i in nodes],
        )

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        return (
            self.n == other.n
            and tuple(self.node_ids) == tuple(other.node_ids)
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.weight, other.weight)
        )

    __hash__ = None


@dataclass(frozen=True)
class NodeData:
    """Per-node labels and raw features aligned to a graph's dense order.

    ``labels`` uses -1 for unlabeled nodes. ``features`` has shape
    ``(n, F_in)``; ``F_in`` may be 0.
    """

    labels: np.ndarray
    features: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != labels.shape[0]:
            raise ValidationError("features must be an (n, F_in) array aligned with labels")
        if np.any(labels >= self.num_classes) or np.any(labels < -1):
            raise ValidationError(f"label outside [0, {self.num_classes})")
        if np.any(labels >= 0) and self.num_classes < 2:
            raise ValidationError("at least two classes are required")
        object.__setattr__(self, "labels", _frozen(labels, np.int64))
        object.__setattr__(self, "features", _frozen(features, np.float64))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def labeled(self) -> np.ndarray:
        return np.flatnonzero(self.labels >= 0)

    def subset(self, nodes) -> "NodeData":
        nodes = np.asarray(nodes, dtype=np.int64)
        return NodeData(self.labels[nodes], self.features[nodes], self.num_classes)


# --------------------------------------------------------------------------- I/O


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line.split()


def load_edgelist(path, weighted: bool = True, binarize: bool = False) -> DirectedGraph:
    """Read a whitespace-separated ``src dst [weight]`` edgelist.

    Node ids may be non-negative integers or arbitrary strings; they are
    re-indexed densely in sorted order. When ``weighted`` is false any third
    column is ignored and every line counts as weight 1.
    """
    raw = []
    for lineno, parts in _data_lines(path):
        if len(parts) not in (2, 3):
            raise ParseError(f"expected 'src dst [weight]', got {len(parts)} fields", path, lineno)
        w = 1.0
        if weighted and len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise ParseError(f"bad weight {parts[2]!r}", path, lineno) from None
            if not np.isfinite(w):
                raise ParseError(f"non-finite weight {parts[2]!r}", path, lineno)
            if w < 0:
                raise ValidationError(f"{path}:{lineno}: negative weight {w}")
        raw.append((_parse_id(parts[0]), _parse_id(parts[1]), w))

    ids = _sort_ids({u for u, _, _ in raw} | {v for _, v, _ in raw})
    index = {nid: i for i, nid in enumerate(ids)}
    src = [index[u] for u, _, _ in raw]
    dst = [index[v] for _, v, _ in raw]
    w = [x for _, _, x in raw]
    g = DirectedGraph.from_arrays(len(ids), src, dst, w, node_ids=ids, binarize=binarize)
    log.debug("loaded %s: %d nodes, %d edges", path, g.n, g.num_edges)
    return g


def write_edgelist(g: DirectedGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes={g.n} edges={g.num_edges}\n")
        for u, v, w in zip(g.src.tolist(), g.dst.tolist(), g.weight.tolist()):
            fh.write(f"{g.node_ids[u]} {g.node_ids[v]} {w!r}\n")


def load_node_data(g: DirectedGraph, labels_path=None, features_path=None, num_classes=None) -> NodeData:
    """Join label and feature files onto ``g``'s node order.

    Label lines for ids outside the graph are ignored (they belong to nodes
    removed upstream). Every graph node needs a feature row when a feature file
    is given.
    """
    index = g.index_of()
    labels = np.full(g.n, -1, dtype=np.int64)
    seen_max = -1
    if labels_path is not None:
        for lineno, parts in _data_lines(labels_path):
            if len(parts) != 2:
                raise ParseError("expected 'node_id class_index'", labels_path, lineno)
            try:
                c = int(parts[1])
            except ValueError:
                raise ParseError(f"bad class index {parts[1]!r}", labels_path, lineno) from None
            if c < 0:
                raise ParseError(f"negative class index {c}", labels_path, lineno)
            seen_max = max(seen_max, c)
            i = index.get(_parse_id(parts[0]))
            if i is not None:
                labels[i] = c
    if num_classes is None:
        num_classes = seen_max + 1

    if features_path is None:
        features = np.zeros((g.n, 0))
    else:
        rows = {}
        width = None
        for lineno, parts in _data_lines(features_path):
            try:
                vec = [float(x) for x in parts[1:]]
            except ValueError:
                raise ParseError("non-numeric feature value", features_path, lineno) from None
            if width is None:
                width = len(vec)
            elif len(vec) != width:
                raise ParseError(f"feature width {len(vec)} != {width}", features_path, lineno)
            i = index.get(_parse_id(parts[0]))
            if i is not None:
                rows[i] = vec
        width = width or 0
        missing = g.n - len(rows)
        if missing:
            raise ValidationError(f"{missing} graph nodes have no feature row in {features_path}")
        features = np.array([rows[i] for i in range(g.n)], dtype=np.float64).reshape(g.n, width)
    return NodeData(labels, features, max(num_classes, 0))


def write_node_data(g: DirectedGraph, data: NodeData, labels_path, features_path=None) -> None:
    with open(labels_path, "w", encoding="utf-8") as fh:
        for i in range(g.n):
            if data.labels[i] >= 0:
                fh.write(f"{g.node_ids[i]} {int(data.labels[i])}\n")
    if features_path is not None and data.features.shape[1] > 0:
        with open(features_path, "w", encoding="utf-8") as fh:
            for i in range(g.n):
                vals = " ".join(repr(float(x)) for x in data.features[i])
                fh.write(f"{g.node_ids[i]} {vals}\n")


# ----------------------------------------------------------------- components


def strongly_connected_components(g: DirectedGraph) -> list[list[int]]:
    """Partition nodes into strongly connected components.

    Iterative Tarjan; components come out in reverse topological order of the
    condensation, each sorted ascending.
    """
    n = g.n
    a = g.to_csr()
    indptr, indices = a.indptr, a.indices
    index = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    on_stack = np.zeros(n, dtype=bool)
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0

    for root in range(n):
        if index[root] >= 0:
            continue
        # frames of (node, next edge offset)
        work = [(root, indptr[root])]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            end = indptr[v + 1]
            while pos < end:
                w = indices[pos]
                pos += 1
                if index[w] < 0:
                    work[-1] = (v, pos)
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, indptr[w]))
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    out.append(sorted(comp))
    return out


def is_strongly_connected(g: DirectedGraph) -> bool:
    return g.n > 0 and len(strongly_connected_components(g)) == 1


def largest_scc(g: DirectedGraph) -> np.ndarray:
    """Dense indices of the largest SCC.

    Ties on node count go to the component with more induced edges, then to the
    one holding the smallest original node id.
    """
    if g.n == 0:
        raise ValidationError("graph is empty")
    comps = strongly_connected_components(g)
    label = np.empty(g.n, dtype=np.int64)
    for k, c in enumerate(comps):
        label[c] = k
    internal = label[g.src] == label[g.dst]
    edge_counts = np.bincount(label[g.src[internal]], minlength=len(comps))
    order_ids = _sort_ids(g.node_ids)
    rank = {nid: r for r, nid in enumerate(order_ids)}

    def key(k):
        c = comps[k]
        return (-len(c), -int(edge_counts[k]), min(rank[g.node_ids[i]] for i in c))

    best = min(range(len(comps)), key=key)
    return np.asarray(comps[best], dtype=np.int64)


def largest_scc_subgraph(g: DirectedGraph) -> DirectedGraph:
    return g.induced_subgraph(largest_scc(g))


def add_self_loops(g: DirectedGraph) -> DirectedGraph:
    """Return the graph with adjacency ``A + I``."""
    loops = np.arange(g.n, dtype=np.int64)
    return DirectedGraph.from_arrays(
        g.n,
        np.r_[g.src, loops],
        np.r_[g.dst, loops],
        np.r_[g.weight, np.ones(g.n)],
        node_ids=g.node_ids,
    )
