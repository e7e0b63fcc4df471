"""Clustered network topology: undirected graph plus a cluster partition.

Nodes are indexed 0..N-1 internally. A node always belongs to its own
neighborhood, so the intra-cluster neighborhood of an isolated node is
the singleton containing the node itself.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

from .errors import EmptyCluster, InvalidEdge, OverlappingClusters, UncoveredNode


@dataclass(frozen=True)
class NeighborhoodView:
    """Neighborhood of one node split along the cluster boundary.

    ``intra`` and ``inter`` partition the full neighborhood (self included):
    ``intra`` holds the same-cluster neighbors plus the node itself,
    ``inter`` the out-of-cluster neighbors. ``intra_strict`` excludes the
    node, ``inter_with_self`` adds it back to the out-of-cluster side.
    """

    node: int
    intra: frozenset[int]
    intra_strict: frozenset[int]
    inter: frozenset[int]
    inter_with_self: frozenset[int]


@dataclass(frozen=True)
class ClusteredNetwork:
    """Immutable graph with a validated cluster partition.

    Build instances through :func:`build_network`, which checks the
    partition and edge invariants. ``dim`` is the length of the parameter
    vector estimated at every node.
    """

    n_nodes: int
    dim: int
    edges: tuple[tuple[int, int], ...]
    clusters: tuple[frozenset[int], ...]
    adjacency: tuple[frozenset[int], ...]
    cluster_index: tuple[int, ...]

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def cluster_of(self, k: int) -> frozenset[int]:
        """Members of the cluster containing node ``k`` (``k`` included)."""
        return self.clusters[self.cluster_index[k]]

    def neighborhood(self, k: int) -> NeighborhoodView:
        """Split the neighborhood of ``k`` along its cluster boundary."""
        if not 0 <= k < self.n_nodes:
            raise IndexError(f"node {k} out of range [0, {self.n_nodes})")
        cluster = self.cluster_of(k)
        neigh = self.adjacency[k]
        intra_strict = frozenset(neigh & cluster)
        inter = frozenset(neigh - cluster)
        return NeighborhoodView(
            node=k,
            intra=intra_strict | {k},
            intra_strict=intra_strict,
            inter=inter,
            inter_with_self=inter | {k},
        )

    def intra_links(self) -> list[tuple[int, int]]:
        """Directed same-cluster links ``(l, k)`` with ``l != k``."""
        return [
            (l, k)
            for k in range(self.n_nodes)
            for l in sorted(self.neighborhood(k).intra_strict)
        ]

    def inter_links(self) -> list[tuple[int, int]]:
        """Directed cross-cluster links ``(k, l)``."""
        return [
            (k, l)
            for k in range(self.n_nodes)
            for l in sorted(self.neighborhood(k).inter)
        ]

    def is_connected(self) -> bool:
        if self.n_nodes == 0:
            return True
        seen = {0}
        stack = [0]
        while stack:
            for nxt in self.adjacency[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == self.n_nodes


def build_network(
    n_nodes: int,
    dim: int,
    edges,
    clusters,
) -> ClusteredNetwork:
    """Validate and assemble a :class:`ClusteredNetwork`.

    ``edges`` is an iterable of undirected node pairs, ``clusters`` an
    iterable of node index sets that must partition ``range(n_nodes)``.
    Raises :class:`InvalidEdge`, :class:`EmptyCluster`,
    :class:`OverlappingClusters` or :class:`UncoveredNode` on violation.
    A disconnected graph is legal but reported with a warning.
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be positive")
    if dim < 1:
        raise ValueError("dim must be positive")

    cluster_sets = [frozenset(int(i) for i in c) for c in clusters]
    if not cluster_sets:
        raise EmptyCluster("at least one cluster is required")
    for members in cluster_sets:
        if not members:
            raise EmptyCluster("clusters must be non-empty")
        bad = [i for i in members if not 0 <= i < n_nodes]
        if bad:
            raise UncoveredNode(f"cluster member {bad[0]} out of range")

    cluster_index = [-1] * n_nodes
    for q, members in enumerate(cluster_sets):
        for i in members:
            if cluster_index[i] != -1:
                raise OverlappingClusters(
                    f"node {i} appears in clusters {cluster_index[i]} and {q}"
                )
            cluster_index[i] = q
    uncovered = [i for i, q in enumerate(cluster_index) if q == -1]
    if uncovered:
        raise UncoveredNode(f"node {uncovered[0]} belongs to no cluster")

    adjacency: list[set[int]] = [set() for _ in range(n_nodes)]
    normalized = set()
    for edge in edges:
        a, b = (int(v) for v in edge)
        if not (0 <= a < n_nodes and 0 <= b < n_nodes):
            raise InvalidEdge(f"edge ({a}, {b}) out of range")
        if a == b:
            raise InvalidEdge(f"self-edge at node {a}")
        normalized.add((min(a, b), max(a, b)))
        adjacency[a].add(b)
        adjacency[b].add(a)

    net = ClusteredNetwork(
        n_nodes=n_nodes,
        dim=dim,
        edges=tuple(sorted(normalized)),
        clusters=tuple(cluster_sets),
        adjacency=tuple(frozenset(s) for s in adjacency),
        cluster_index=tuple(cluster_index),
    )
    if not net.is_connected():
        warnings.warn("network is not connected", stacklevel=2)
    return net
