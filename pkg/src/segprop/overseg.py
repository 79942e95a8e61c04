"""Normal-based graph-cut over-segmentation.

Builds a point adjacency graph (mesh edges when faces exist, symmetric k-NN
otherwise), weights edges by normal dissimilarity with a convexity discount,
and segments with the adaptive-threshold union-find merge.  The resulting
segments are treated as atomic by every later stage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError
from .scene import Scene, Segmentation

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdjacencyEdge:
    """Undirected point-adjacency edge, a < b, weight in [0, 2]."""

    a: int
    b: int
    weight: float


def build_point_adjacency(scene: Scene, k: int = 10) -> list[AdjacencyEdge]:
    """Adjacency edges with normal-dissimilarity weights.

    With mesh faces present the edges are the unique triangle edges;
    otherwise the symmetric k-NN graph.  weight = 1 - dot(n_a, n_b), halved
    when the edge is convex: n_a.(p_b - p_a) + n_b.(p_a - p_b) < 0.
    """
    if scene.normals is None:
        raise ValidationError("scene has no normals; run estimate_normals first")
    if scene.faces is not None:
        pairs = np.concatenate([scene.faces[:, [0, 1]],
                                scene.faces[:, [1, 2]],
                                scene.faces[:, [0, 2]]])
    else:
        if k < 1:
            raise ValidationError("k must be >= 1 when no faces are present", field="k")
        if scene.num_points < 2:
            return []
        tree = cKDTree(scene.points)
        _, idx = tree.query(scene.points, k=min(k, scene.num_points - 1) + 1)
        src = np.repeat(np.arange(scene.num_points), idx.shape[1] - 1)
        pairs = np.stack([src, idx[:, 1:].ravel()], axis=1)

    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    keep = lo != hi
    pairs = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)

    na, nb = scene.normals[pairs[:, 0]], scene.normals[pairs[:, 1]]
    pa, pb = scene.points[pairs[:, 0]], scene.points[pairs[:, 1]]
    weight = 1.0 - np.einsum("ij,ij->i", na, nb)
    d = pb - pa
    convex = (np.einsum("ij,ij->i", na, d) - np.einsum("ij,ij->i", nb, d)) < 0
    weight[convex] *= 0.5
    weight = np.clip(weight, 0.0, 2.0)

    return [AdjacencyEdge(int(a), int(b), float(w))
            for (a, b), w in zip(pairs, weight)]


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        # returns the surviving root
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        return a


def felzenszwalb_segment(scene: Scene, edges: list[AdjacencyEdge],
                         kappa: float = 0.06, min_size: int = 20) -> Segmentation:
    """Graph segmentation with the adaptive region threshold kappa/|C|.

    Edges are processed in ascending (weight, a, b) order; two components
    merge when the edge weight is <= min over both of Int(C) + kappa/|C|,
    where Int(C) is the largest edge weight merged inside C so far.
    Components smaller than ``min_size`` are then folded into the neighbor
    component reachable over their cheapest edge.  Segment ids are dense and
    ordered by smallest member point index.
    """
    if kappa <= 0:
        raise ValidationError("kappa must be positive", field="kappa")
    if min_size < 1:
        raise ValidationError("min_size must be >= 1", field="min_size")
    n = scene.num_points
    for e in edges:
        if not (0 <= e.a < n and 0 <= e.b < n):
            raise ValidationError(f"edge ({e.a},{e.b}) out of range")

    order = sorted(range(len(edges)), key=lambda i: (edges[i].weight, edges[i].a, edges[i].b))
    uf = _UnionFind(n)
    internal = [0.0] * n  # Int(C), indexed by current root
    for i in order:
        e = edges[i]
        ra, rb = uf.find(e.a), uf.find(e.b)
        if ra == rb:
            continue
        if e.weight <= min(internal[ra] + kappa / uf.size[ra],
                           internal[rb] + kappa / uf.size[rb]):
            root = uf.union(ra, rb)
            internal[root] = e.weight  # ascending order: current weight is the max

    _absorb_small(uf, edges, n, min_size)
    return _relabel(uf, n)


def _absorb_small(uf, edges, n, min_size):
    """Fold undersized components into their cheapest-edge neighbor.

    Rounds repeat until no undersized component with an outgoing edge is
    left.  Per round, components are visited in ascending smallest-member
    order and each follows its lexicographically smallest outgoing
    (weight, a, b) edge; choices are re-resolved against merges made
    earlier in the same round.
    """
    while True:
        smallest = {}
        for i in range(n):
            r = uf.find(i)
            if r not in smallest:
                smallest[r] = i  # first hit in ascending scan
        best = {}
        for e in sorted(edges, key=lambda e: (e.weight, e.a, e.b)):
            ra, rb = uf.find(e.a), uf.find(e.b)
            if ra == rb:
                continue
            best.setdefault(ra, e)
            best.setdefault(rb, e)
        small = sorted((r for r in smallest if uf.size[r] < min_size),
                       key=smallest.get)
        if not small:
            return
        merged_any = False
        for r in small:
            r = uf.find(r)
            if uf.size[r] >= min_size:
                continue
            e = best.get(r)
            if e is None:
                log.warning("isolated component of size %d kept as its own segment",
                            uf.size[r])
                continue
            dst = uf.find(e.b) if uf.find(e.a) == r else uf.find(e.a)
            if dst != r:  # an earlier merge this round may have joined them
                uf.union(r, dst)
                merged_any = True
        if not merged_any:
            return


def _relabel(uf, n):
    ids = np.empty(n, dtype=np.int64)
    mapping = {}
    for i in range(n):
        root = uf.find(i)
        if root not in mapping:
            mapping[root] = len(mapping)  # first-seen = smallest member index
        ids[i] = mapping[root]
    return Segmentation(ids, len(mapping))
