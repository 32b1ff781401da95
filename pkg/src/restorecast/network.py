"""Highway network graph, damage application and network efficiency.

Nodes are intersections, edges are highway segments. Damage never deletes
nodes: a damaged edge is removed, a damaged node loses every incident edge
and stays in the graph isolated, so the node count used to normalize the
efficiency is the same for every damage state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

__all__ = [
    "NetworkError",
    "HighwayNetwork",
    "DamageState",
    "PathLengthMatrix",
    "build_network",
    "apply_damage",
    "shortest_path_lengths",
    "network_efficiency",
]


class NetworkError(ValueError):
    """Invalid network construction or damage reference."""


@dataclass(frozen=True)
class HighwayNetwork:
    """Undirected, unweighted graph with stable node order and edge ids.

    Build instances with :func:`build_network`; the constructor does not
    validate.
    """

    nodes: tuple
    edges: Mapping[Hashable, tuple]
    _index: Mapping[Hashable, int] = field(repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def edge_ids(self) -> tuple:
        return tuple(self.edges)

    def index_of(self, node: Hashable) -> int:
        return self._index[node]

    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix in node order."""
        n = self.n_nodes
        adj = np.zeros((n, n), dtype=np.int8)
        rows, cols = self._edge_index_arrays()
        adj[rows, cols] = 1
        adj[cols, rows] = 1
        return adj

    def _edge_index_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.edges:
            empty = np.empty(0, dtype=np.intp)
            return empty, empty
        pairs = np.array(
            [(self._index[u], self._index[v]) for u, v in self.edges.values()],
            dtype=np.intp,
        )
        return pairs[:, 0], pairs[:, 1]

    def sparse_adjacency(self) -> sparse.csr_matrix:
        n = self.n_nodes
        rows, cols = self._edge_index_arrays()
        data = np.ones(2 * rows.size, dtype=np.float64)
        return sparse.csr_matrix(
            (data, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
            shape=(n, n),
        )


@dataclass(frozen=True)
class DamageState:
    """Components with status 1 (damaged) at one hour; anything unlisted is functional."""

    damaged_nodes: frozenset = frozenset()
    damaged_edges: frozenset = frozenset()
    timestamp: object = None

    def __post_init__(self):
        object.__setattr__(self, "damaged_nodes", frozenset(self.damaged_nodes))
        object.__setattr__(self, "damaged_edges", frozenset(self.damaged_edges))

    @property
    def is_empty(self) -> bool:
        return not self.damaged_nodes and not self.damaged_edges


@dataclass(frozen=True)
class PathLengthMatrix:
    """Hop counts between every node pair; ``inf`` marks unreachable pairs."""

    nodes: tuple
    lengths: np.ndarray
    _index: Mapping[Hashable, int] = field(repr=False, compare=False)

    def __getitem__(self, pair: tuple) -> float:
        i, j = pair
        return float(self.lengths[self._index[i], self._index[j]])

    def reachable(self, i: Hashable, j: Hashable) -> bool:
        return bool(np.isfinite(self[i, j]))


def build_network(
    node_ids: Sequence[Hashable],
    edges: Iterable[tuple],
    edge_ids: Sequence[Hashable] | None = None,
) -> HighwayNetwork:
    """Build a validated :class:`HighwayNetwork`.

    Parameters
    ----------
    node_ids : sequence
        Unique node identifiers; their order fixes the matrix order.
    edges : iterable of pairs
        Unordered node pairs, one per highway segment.
    edge_ids : sequence, optional
        Identifier per edge. Defaults to the pair itself as given.
    """
    nodes = tuple(node_ids)
    index: dict = {}
    for i, node in enumerate(nodes):
        if node in index:
            raise NetworkError(f"duplicate node id {node!r}")
        index[node] = i

    edges = [tuple(e) for e in edges]
    if edge_ids is None:
        edge_ids = edges
    elif len(edge_ids) != len(edges):
        raise NetworkError("edge_ids and edges differ in length")

    mapping: dict = {}
    seen_pairs: set = set()
    for eid, pair in zip(edge_ids, edges):
        if len(pair) != 2:
            raise NetworkError(f"edge {eid!r} is not a node pair")
        u, v = pair
        for end in (u, v):
            if end not in index:
                raise NetworkError(f"edge {eid!r} references unknown node {end!r}")
        if u == v:
            raise NetworkError(f"self-loop edge {eid!r} on node {u!r}")
        if eid in mapping:
            raise NetworkError(f"duplicate edge id {eid!r}")
        key = frozenset((u, v))
        if key in seen_pairs:
            raise NetworkError(f"duplicate edge between {u!r} and {v!r}")
        seen_pairs.add(key)
        mapping[eid] = (u, v)

    return HighwayNetwork(nodes, MappingProxyType(mapping), MappingProxyType(index))


def apply_damage(net: HighwayNetwork, damage: DamageState) -> HighwayNetwork:
    """Return the subnetwork left after removing damaged components.

    The node set is unchanged. Damaged edges are dropped, and so is every
    edge touching a damaged node.
    """
    unknown_nodes = [v for v in damage.damaged_nodes if v not in net._index]
    if unknown_nodes:
        raise NetworkError(f"damage references unknown node(s) {sorted(map(repr, unknown_nodes))}")
    unknown_edges = [e for e in damage.damaged_edges if e not in net.edges]
    if unknown_edges:
        raise NetworkError(f"damage references unknown edge(s) {sorted(map(repr, unknown_edges))}")
    if damage.is_empty:
        return net

    dead_nodes = damage.damaged_nodes
    dead_edges = damage.damaged_edges
    kept = {
        eid: (u, v)
        for eid, (u, v) in net.edges.items()
        if eid not in dead_edges and u not in dead_nodes and v not in dead_nodes
    }
    return HighwayNetwork(net.nodes, MappingProxyType(kept), net._index)


def shortest_path_lengths(net: HighwayNetwork) -> PathLengthMatrix:
    """All-pairs hop counts by level-synchronous BFS from every source at once."""
    n = net.n_nodes
    lengths = np.full((n, n), np.inf)
    if n == 0:
        return PathLengthMatrix(net.nodes, lengths, net._index)
    np.fill_diagonal(lengths, 0.0)
    adj = net.sparse_adjacency()

    # row s of `visited` / `frontier` belongs to BFS source s
    visited = np.eye(n, dtype=bool)
    frontier = np.eye(n, dtype=np.float64)
    level = 0
    while True:
        level += 1
        reached = np.asarray(frontier @ adj) > 0
        reached &= ~visited
        if not reached.any():
            break
        lengths[reached] = level
        visited |= reached
        frontier = reached.astype(np.float64)
    return PathLengthMatrix(net.nodes, lengths, net._index)


def network_efficiency(net: HighwayNetwork) -> float:
    """Mean inverse shortest-path length over ordered node pairs.

    Unreachable pairs contribute 0. The normalizer is ``N(N-1)`` with ``N``
    the node count, so isolated (damaged) nodes still count.
    """
    n = net.n_nodes
    if n < 2:
        raise NetworkError(f"efficiency needs at least 2 nodes, got {n}")
    d = shortest_path_lengths(net).lengths
    off = ~np.eye(n, dtype=bool)
    inverse = np.zeros_like(d)
    np.divide(1.0, d, out=inverse, where=off & np.isfinite(d))
    return float(inverse.sum() / (n * (n - 1)))
