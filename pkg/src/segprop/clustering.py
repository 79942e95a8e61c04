"""Merge procedures that turn per-node features into instance groups.

Two procedures operate on a segment graph whose nodes carry feature rows:

* ``cluster_layer`` walks edges in ascending feature-distance order and
  merges endpoint clusters closer than a threshold, never joining two
  labeled clusters.
* ``cluster_final`` repeatedly sweeps the remaining unlabeled nodes and
  folds each into its feature-nearest neighbor until every node is labeled.

Merge decisions depend only on feature *values*; both procedures can replay
a recorded decision sequence so that perturbed features reuse the original
assignments (needed for finite-difference gradient checks).
"""

from __future__ import annotations

import torch

from .errors import GraphError
from .seggraph import SegmentGraph


def _edge_distances(features: torch.Tensor, edges):
    with torch.no_grad():
        out = []
        for a, b in edges:
            out.append(float(torch.linalg.vector_norm(features[a] - features[b])))
    return out


def _pool(features: torch.Tensor, members) -> torch.Tensor:
    """Elementwise max over the member rows (lowest row wins grad on ties)."""
    return features[list(members)].max(dim=0).values


class _Groups:
    """Union-find over node ids, tracking at most one label per group."""

    def __init__(self, labels):
        self.parent = list(range(len(labels)))
        self.label = list(labels)

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.label[ra] is None:
            self.label[ra] = self.label[rb]


def cluster_layer(graph: SegmentGraph, features: torch.Tensor, tau: float,
                  replay=None):
    """One merge pass; returns (coarser graph with pooled features, clusters).

    Edges are visited in ascending (distance, node pair) order; an edge whose
    endpoints already share a cluster, or whose two clusters are both
    labeled, is skipped; otherwise the clusters merge when the endpoint
    distance (on the original node features) is below ``tau``.  The returned
    ``clusters`` lists member node ids per new node and can be passed back as
    ``replay`` to reproduce the grouping for different feature values.
    """
    m = graph.num_nodes
    if features.shape[0] != m:
        raise GraphError(f"feature rows ({features.shape[0]}) != nodes ({m})")
    if replay is None:
        groups = _Groups(graph.node_labels)
        dists = _edge_distances(features, graph.edges)
        order = sorted(range(len(graph.edges)),
                       key=lambda i: (dists[i], graph.edges[i]))
        for i in order:
            a, b = graph.edges[i]
            ra, rb = groups.find(a), groups.find(b)
            if ra == rb:
                continue
            if groups.label[ra] is not None and groups.label[rb] is not None:
                continue
            if dists[i] < tau:
                groups.union(ra, rb)
        by_root = {}
        for node in range(m):
            by_root.setdefault(groups.find(node), []).append(node)
        clusters = sorted(by_root.values(), key=lambda ms: ms[0])
    else:
        clusters = [list(ms) for ms in replay]
        seen = sorted(n for ms in clusters for n in ms)
        if seen != list(range(m)):
            raise GraphError("replay clusters do not partition the nodes")

    labels = []
    segments = []
    pooled = []
    for members in clusters:
        found = [graph.node_labels[n] for n in members
                 if graph.node_labels[n] is not None]
        labels.append(found[0] if found else None)
        segments.append(tuple(sorted(s for n in members
                                     for s in graph.node_segments[n])))
        pooled.append(_pool(features, members))

    node_of = {}
    for new_id, members in enumerate(clusters):
        for n in members:
            node_of[n] = new_id
    edges = sorted({(min(node_of[a], node_of[b]), max(node_of[a], node_of[b]))
                    for a, b in graph.edges if node_of[a] != node_of[b]})
    out = SegmentGraph(node_segments=tuple(segments),
                       node_labels=tuple(labels),
                       edges=tuple(edges),
                       layer=graph.layer + 1)
    return out.with_features(torch.stack(pooled)), clusters


def cluster_final(graph: SegmentGraph, features: torch.Tensor, replay=None):
    """Fold every unlabeled node into a labeled group; returns (graph, merges).

    Nodes are swept in ascending id order; each still-alive unlabeled node
    merges into its feature-nearest current neighbor (ties to the lowest
    id), and that neighbor immediately inherits the max-pooled feature and
    the rewired edges before the sweep continues.  ``merges`` records the
    (source, target) pairs in order and doubles as ``replay``.
    """
    m = graph.num_nodes
    if m == 0:
        raise GraphError("cannot run the final grouping on an empty graph")
    if features.shape[0] != m:
        raise GraphError(f"feature rows ({features.shape[0]}) != nodes ({m})")
    labels = list(graph.node_labels)
    feats = [features[i] for i in range(m)]
    members = [list(graph.node_segments[i]) for i in range(m)]
    adj = {i: set() for i in range(m)}
    for a, b in graph.edges:
        adj[a].add(b)
        adj[b].add(a)
    alive = [True] * m

    def merge(src: int, dst: int) -> None:
        feats[dst] = torch.maximum(feats[dst], feats[src])
        members[dst].extend(members[src])
        for n in adj[src]:
            adj[n].discard(src)
            if n != dst:
                adj[n].add(dst)
                adj[dst].add(n)
        adj[src] = set()
        alive[src] = False

    if replay is None:
        merges = []
        for _ in range(m):
            pending = [i for i in range(m) if alive[i] and labels[i] is None]
            if not pending:
                break
            for i in pending:
                if not alive[i]:
                    continue
                if not adj[i]:
                    raise GraphError(f"unlabeled node {i} has no neighbors")
                with torch.no_grad():
                    target = min(
                        adj[i],
                        key=lambda k: (float(torch.linalg.vector_norm(
                            feats[i] - feats[k])), k))
                merge(i, target)
                merges.append((i, target))
        else:
            raise GraphError("final grouping did not converge")
    else:
        merges = [tuple(p) for p in replay]
        for src, dst in merges:
            if not (alive[src] and alive[dst]):
                raise GraphError("replay merge refers to a dead node")
            merge(src, dst)

    survivors = [i for i in range(m) if alive[i]]
    if any(labels[i] is None for i in survivors):
        raise GraphError("final grouping left an unlabeled node")
    remap = {old: new for new, old in enumerate(survivors)}
    edges = sorted({(min(remap[a], remap[b]), max(remap[a], remap[b]))
                    for a in survivors for b in adj[a] if a < b})
    out = SegmentGraph(
        node_segments=tuple(tuple(sorted(members[i])) for i in survivors),
        node_labels=tuple(labels[i] for i in survivors),
        edges=tuple(edges),
        layer=graph.layer + 1)
    return out.with_features(torch.stack([feats[i] for i in survivors])), merges
