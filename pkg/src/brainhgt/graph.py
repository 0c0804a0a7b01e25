"""Brain graph construction: correlation, orthogonal MST sparsification,
global efficiency / wiring cost, and the percentage-threshold baseline."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BadShape, ConstantRow, DenseWeightZero, DisconnectedInput, EmptyGraph


@dataclass
class InverseWeightedGraph:
    """Undirected graph with ``weight = 1/|r|`` on every nonzero correlation.

    Edges are stored as parallel arrays with ``i < j``, in lexicographic order.
    """
    n: int
    ei: np.ndarray
    ej: np.ndarray
    weight: np.ndarray

    @property
    def n_edges(self):
        return len(self.ei)

    def to_matrix(self):
        d = np.full((self.n, self.n), np.inf)
        d[self.ei, self.ej] = self.weight
        d[self.ej, self.ei] = self.weight
        return d


@dataclass
class SparseBrainGraph:
    adjacency: np.ndarray
    edge_weights: dict
    spl: np.ndarray
    ge: float = float("nan")
    cost: float = float("nan")
    trees: list = field(default_factory=list)

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def density(self):
        n = self.n
        return len(self.edge_weights) / (n * (n - 1) / 2) if n > 1 else 0.0

    @property
    def objective(self):
        return self.ge - self.cost

    def edges(self):
        return sorted(self.edge_weights)


def pearson_correlation(ts):
    """Pearson correlation between the rows (ROIs) of an N x T matrix."""
    x = np.asarray(ts, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise BadShape(f"time series must be N x T with T >= 2, got {x.shape}")
    xc = x - x.mean(axis=1, keepdims=True)
    flat = np.flatnonzero(np.ptp(x, axis=1) == 0)
    if len(flat):
        raise ConstantRow(int(flat[0]))
    ss = np.einsum("ij,ij->i", xc, xc)
    z = xc / np.sqrt(ss)[:, None]
    r = z @ z.T
    r = np.clip(0.5 * (r + r.T), -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return r


def inverse_distance_graph(r):
    r = np.asarray(r, dtype=np.float64)
    n = r.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    vals = r[iu, ju]
    keep = vals != 0
    return InverseWeightedGraph(n, iu[keep], ju[keep], 1.0 / np.abs(vals[keep]))


def default_max_trees(n_nodes, n_edges):
    return n_edges // max(n_nodes - 1, 1) + 1


def orthogonal_msts(graph, max_trees=None):
    """Repeatedly extract a minimum spanning forest and remove its edges.

    Returns a list of edge-index arrays (indices into ``graph.ei``), each in
    the order Kruskal accepted them.
    """
    if graph.n < 2:
        raise BadShape("need at least two nodes")
    if graph.n_edges == 0:
        raise EmptyGraph("inverse-weighted graph has no edges")
    if max_trees is None:
        max_trees = default_max_trees(graph.n, graph.n_edges)
    # (weight, i, j) ascending; lexicographic (i, j) breaks weight ties
    order = np.lexsort((graph.ej, graph.ei, graph.weight))
    active = np.ones(graph.n_edges, dtype=bool)
    rank = np.empty(graph.n_edges, dtype=np.int64)
    rank[order] = np.arange(graph.n_edges)
    trees = []
    while len(trees) < max_trees and active.any():
        chosen = kernels.kruskal_forest(graph.n, graph.ei, graph.ej, order, active)
        idx = np.flatnonzero(chosen)
        idx = idx[np.argsort(rank[idx], kind="stable")]
        trees.append(idx)
        active[idx] = False
    return trees


def global_efficiency(adjacency):
    """Mean inverse hop distance over ordered node pairs (unreachable -> 0)."""
    a = np.asarray(adjacency) != 0
    n = a.shape[0]
    if n < 2:
        raise BadShape("global efficiency needs at least two nodes")
    spl = kernels.bfs_hops(a)
    off = ~np.eye(n, dtype=bool) & (spl < n)
    return float((1.0 / spl[off]).sum() / (n * (n - 1)))


def wiring_cost(edges, r):
    """Retained absolute correlation over the total absolute correlation."""
    r = np.asarray(r, dtype=np.float64)
    n = r.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    total = np.abs(r[iu, ju]).sum()
    if total == 0:
        raise DenseWeightZero("dense graph has zero total weight")
    # same summation order as the total so the full edge set gives exactly 1
    keep = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        keep[i, j] = keep[j, i] = True
    kept = np.abs(r[iu, ju])[keep[iu, ju]].sum()
    return float(kept / total)


def shortest_path_lengths(adjacency):
    return kernels.bfs_hops(adjacency)


def _build(n, pairs, r, ge=float("nan"), cost=float("nan"), trees=()):
    adj = np.zeros((n, n), dtype=np.int8)
    weights = {}
    for i, j in pairs:
        i, j = (int(i), int(j)) if i < j else (int(j), int(i))
        adj[i, j] = adj[j, i] = 1
        weights[(i, j)] = float(abs(r[i, j]))
    return SparseBrainGraph(adj, weights, kernels.bfs_hops(adj), ge, cost, list(trees))


def omst_sparsify(r, max_trees=None):
    """Orthogonal-MST sparsification maximising ``GE - Cost`` over edge prefixes.

    Edges of the extracted trees are appended one at a time in extraction
    order; the shortest prefix with the highest objective wins.
    """
    r = np.asarray(r, dtype=np.float64)
    graph = inverse_distance_graph(r)
    n = graph.n
    trees = orthogonal_msts(graph, max_trees)
    if len(trees[0]) != n - 1:
        raise DisconnectedInput(
            f"first spanning tree covers {len(trees[0]) + 1} of {n} nodes")
    seq = np.concatenate(trees)
    ei, ej = graph.ei[seq], graph.ej[seq]
    absr = np.abs(r[ei, ej])
    total = np.abs(r[np.triu_indices(n, k=1)]).sum()
    ge, cost = kernels.prefix_scan(n, ei, ej, absr, total)
    best = int(np.argmax(ge - cost))  # first maximum = sparsest candidate
    tree_pairs = [[(int(graph.ei[e]), int(graph.ej[e])) for e in t] for t in trees]
    pairs = list(zip(ei[: best + 1], ej[: best + 1]))
    return _build(n, pairs, r, float(ge[best]), float(cost[best]), tree_pairs)


def threshold_sparsify(r, density=0.15):
    """Keep the ``ceil(density * N(N-1)/2)`` strongest absolute correlations."""
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    r = np.asarray(r, dtype=np.float64)
    n = r.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    w = np.abs(r[iu, ju])
    nz = w > 0
    iu, ju, w = iu[nz], ju[nz], w[nz]
    k = min(max(1, math.ceil(density * n * (n - 1) / 2 - 1e-9)), len(w))
    order = np.lexsort((ju, iu, -w))[:k]
    pairs = list(zip(iu[order], ju[order]))
    g = _build(n, pairs, r)
    g.ge = global_efficiency(g.adjacency) if n > 1 else 0.0
    g.cost = wiring_cost(g.edges(), r) if len(w) else 0.0
    return g


def evaluate_graph(adjacency, r):
    """Recompute ``(ge, cost, objective)`` from scratch for an adjacency."""
    a = np.asarray(adjacency) != 0
    iu, ju = np.nonzero(np.triu(a, k=1))
    ge = global_efficiency(a)
    cost = wiring_cost(list(zip(iu, ju)), r)
    return ge, cost, ge - cost
