"""Sparse undirected graphs, the self-looped normalized Laplacian, and
per-node homophily statistics.

The Laplacian used everywhere in this package is L = I - S (A + I) S with
S = diag(1 / sqrt(d_v + 1)), i.e. the symmetric normalization of the
adjacency matrix after adding a self loop to every node. Its eigenvalues lie
in [0, 2) and its null space is spanned by the vector sqrt(d_v + 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .exceptions import InputError


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph in compressed sparse row form.

    Self loops are never stored and duplicate input edges are merged, so
    ``degrees[v]`` counts distinct neighbors. Column indices are sorted
    ascending within each row and every edge appears in both orientations.
    """

    n: int
    row_offsets: np.ndarray  # int64, shape (n + 1,)
    col_indices: np.ndarray  # int64, shape (row_offsets[-1],)
    degrees: np.ndarray      # int64, shape (n,)

    def __post_init__(self):
        for arr in (self.row_offsets, self.col_indices, self.degrees):
            arr.setflags(write=False)

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return int(self.col_indices.size // 2)

    def neighbors(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v]:self.row_offsets[v + 1]]


def build_graph(edge_list, n: int) -> Graph:
    """Build a Graph from an iterable of (u, v) pairs over nodes 0..n-1.

    The input may list edges in any orientation, contain duplicates, or
    contain self loops; duplicates and self loops are dropped. Construction
    is deterministic: the same edge list always yields bit-identical arrays.

    Raises InputError for node ids outside [0, n).
    """
    if n < 0:
        raise InputError(f"node count must be nonnegative, got {n}")
    edges = np.asarray(list(edge_list) if not isinstance(edge_list, np.ndarray) else edge_list,
                       dtype=np.int64)
    if edges.size == 0:
        edges = edges.reshape(0, 2)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise InputError("edge list must be a sequence of (u, v) pairs")

    bad = (edges < 0) | (edges >= n)
    if bad.any():
        row = int(np.flatnonzero(bad.any(axis=1))[0])
        u, v = edges[row]
        raise InputError(f"edge ({u}, {v}) out of range for a graph with {n} nodes")

    edges = edges[edges[:, 0] != edges[:, 1]]
    both = np.concatenate([edges, edges[:, ::-1]], axis=0)
    # dedupe via a scalar key; n^2 stays below 2^63 for any graph that fits in memory
    keys = np.unique(both[:, 0] * np.int64(n) + both[:, 1]) if n > 0 else np.empty(0, np.int64)
    src = keys // n if n > 0 else keys
    dst = keys % n if n > 0 else keys

    degrees = np.bincount(src, minlength=n).astype(np.int64)
    row_offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degrees, out=row_offsets[1:])
    return Graph(n=n, row_offsets=row_offsets, col_indices=dst.astype(np.int64),
                 degrees=degrees)


@dataclass(frozen=True)
class SparseSymOp:
    """The self-looped normalized Laplacian as an implicit sparse operator.

    Applies L = I - S (A + I) S without ever materializing the n-by-n matrix.
    The operator is symmetric positive semidefinite. Both the operator and
    the underlying Graph are immutable, so concurrent applications are safe;
    each apply costs O(|E| * d) for an n-by-d input.
    """

    graph: Graph
    scale: np.ndarray          # 1 / sqrt(d_v + 1)
    adjacency: sp.csr_matrix   # unweighted adjacency, no self loops

    @property
    def n(self) -> int:
        return self.graph.n


def laplacian_operator(g: Graph) -> SparseSymOp:
    """Prepare the sparse Laplacian operator for a graph."""
    scale = 1.0 / np.sqrt(g.degrees.astype(np.float64) + 1.0)
    scale.setflags(write=False)
    data = np.ones(g.col_indices.size, dtype=np.float64)
    adjacency = sp.csr_matrix((data, g.col_indices, g.row_offsets), shape=(g.n, g.n))
    return SparseSymOp(graph=g, scale=scale, adjacency=adjacency)


def laplacian_apply(op: SparseSymOp, x: np.ndarray) -> np.ndarray:
    """Apply the self-looped normalized Laplacian to a dense signal.

    ``x`` may be a length-n vector or an n-by-d matrix; the result has the
    same shape. Raises InputError on a row-count mismatch.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[0] != op.graph.n:
        raise InputError(
            f"signal of shape {x.shape} does not match a graph with {op.graph.n} nodes")
    scale = op.scale if x.ndim == 1 else op.scale[:, None]
    y = scale * x
    return x - scale * (op.adjacency @ y + y)


@dataclass(frozen=True)
class HomophilyReport:
    """Per-node homophily: the fraction of a node's neighbors sharing its label.

    Isolated nodes have no defined value and are listed in ``excluded``.
    ``node_ids`` and ``values`` are aligned; values lie in [0, 1].
    """

    node_ids: np.ndarray
    values: np.ndarray
    excluded: np.ndarray

    def __post_init__(self):
        for arr in (self.node_ids, self.values, self.excluded):
            arr.setflags(write=False)

    def histogram(self, bins: int = 10):
        """Histogram of homophily values over [0, 1]; returns (counts, edges)."""
        if bins < 1:
            raise InputError(f"bin count must be positive, got {bins}")
        return np.histogram(self.values, bins=bins, range=(0.0, 1.0))


def node_homophily(g: Graph, labels) -> HomophilyReport:
    """Compute per-node homophily under the given node labels."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != g.n:
        raise InputError(f"labels of shape {labels.shape} do not match {g.n} nodes")
    rows = np.repeat(np.arange(g.n), g.degrees)
    same = labels[g.col_indices] == labels[rows]
    same_counts = np.bincount(rows[same], minlength=g.n)
    connected = g.degrees > 0
    ids = np.flatnonzero(connected)
    values = same_counts[ids] / g.degrees[ids]
    return HomophilyReport(node_ids=ids, values=values,
                           excluded=np.flatnonzero(~connected))
