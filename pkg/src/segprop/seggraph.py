"""The segment graph: nodes are groups of segments, edges are spatial adjacency.

Nodes partition the original segments (and therefore the scene's points) at
every stage; merging only ever coarsens the partition.  A node carries an
optional (semantic_class, instance_id) label and, during the grouping
forward pass, a feature vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GraphError, ValidationError
from .annotation import SegLevelLabelSet
from .overseg import AdjacencyEdge
from .scene import Scene, Segmentation


@dataclass(frozen=True)
class SegmentGraph:
    """Immutable snapshot of one grouping stage.

    node_segments[i] is the sorted tuple of original segment ids owned by
    node i; node_labels[i] is (semantic_class, instance_id) or None; edges
    are sorted (a, b) node pairs with a < b.  ``features`` is an optional
    M x C tensor aligned with the nodes.
    """

    node_segments: tuple
    node_labels: tuple
    edges: tuple
    layer: int = 0
    features: object | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "node_segments",
                           tuple(tuple(sorted(s)) for s in self.node_segments))
        object.__setattr__(self, "node_labels", tuple(self.node_labels))
        m = len(self.node_segments)
        if len(self.node_labels) != m:
            raise ValidationError("node_labels length mismatch")
        norm = set()
        for a, b in self.edges:
            if a == b:
                raise ValidationError(f"self-edge on node {a}")
            if not (0 <= a < m and 0 <= b < m):
                raise ValidationError(f"edge ({a},{b}) references a missing node")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    @property
    def num_nodes(self) -> int:
        return len(self.node_segments)

    def neighbors(self) -> list[list[int]]:
        adj = [[] for _ in range(self.num_nodes)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return [sorted(v) for v in adj]

    def node_points(self, segmentation: Segmentation) -> list[np.ndarray]:
        """Point indices per node, in ascending order."""
        seg_points = segmentation.segment_points()
        return [np.sort(np.concatenate([seg_points[s] for s in segs]))
                for segs in self.node_segments]

    def with_features(self, features) -> "SegmentGraph":
        return SegmentGraph(self.node_segments, self.node_labels, self.edges,
                            self.layer, features)

    def labeled_nodes(self) -> list[int]:
        return [i for i, lab in enumerate(self.node_labels) if lab is not None]

    def to_dump(self) -> dict:
        return {
            "layer": self.layer,
            "nodes": [{"segments": list(segs),
                       "label": None if lab is None else
                       {"class": lab[0], "instance": lab[1]}}
                      for segs, lab in zip(self.node_segments, self.node_labels)],
            "edges": [list(e) for e in self.edges],
        }


def graph_from_dump(data: dict) -> SegmentGraph:
    nodes = data["nodes"]
    return SegmentGraph(
        tuple(tuple(n["segments"]) for n in nodes),
        tuple(None if n["label"] is None else
              (n["label"]["class"], n["label"]["instance"]) for n in nodes),
        tuple(tuple(e) for e in data["edges"]),
        int(data.get("layer", 0)))


def build_segment_graph(scene: Scene, segmentation: Segmentation,
                        labels: SegLevelLabelSet,
                        point_adjacency: list[AdjacencyEdge]) -> SegmentGraph:
    """One node per segment, edges where point adjacency crosses segments.

    Labels are copied onto the clicked segments' nodes.  If a connected
    component contains no labeled node, a bridge edge is added from that
    component's centroid-nearest node to the nearest node outside it, until
    every component can reach a label; without this, the final clustering
    could never label such a component.
    """
    if scene.num_points != segmentation.num_points:
        raise ValidationError("scene and segmentation lengths differ")
    labels.validate_against(segmentation)
    if not labels.labels:
        raise GraphError("label set is empty; at least one labeled segment required")

    num = segmentation.num_segments
    seg_of = segmentation.seg_ids
    edge_set = set()
    for e in point_adjacency:
        sa, sb = int(seg_of[e.a]), int(seg_of[e.b])
        if sa != sb:
            edge_set.add((min(sa, sb), max(sa, sb)))

    node_labels = [None] * num
    for lab in labels.labels:
        node_labels[lab.segment_id] = (lab.semantic_class, lab.instance_id)

    # per-segment centroids for the bridging rule
    sums = np.zeros((num, 3))
    np.add.at(sums, seg_of, scene.points)
    counts = np.bincount(seg_of, minlength=num).astype(float)
    centroids = sums / counts[:, None]

    edges = set(edge_set)
    while True:
        comp = _components(num, edges)
        unlabeled = _components_without_label(comp, node_labels)
        if not unlabeled:
            break
        members = unlabeled[0]
        inside = np.array(members)
        comp_centroid = (centroids[inside] * counts[inside, None]).sum(0) / counts[inside].sum()
        u = members[int(np.argmin(np.linalg.norm(centroids[inside] - comp_centroid, axis=1)))]
        outside = np.array([i for i in range(num) if comp[i] != comp[u]])
        v = outside[int(np.argmin(np.linalg.norm(centroids[outside] - centroids[u], axis=1)))]
        edges.add((min(u, int(v)), max(u, int(v))))

    return SegmentGraph(tuple((s,) for s in range(num)), tuple(node_labels),
                        tuple(sorted(edges)), layer=0)


def _components(num, edges):
    comp = list(range(num))

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            comp[max(ra, rb)] = min(ra, rb)
    return [find(i) for i in range(num)]


def _components_without_label(comp, node_labels):
    """Components lacking any labeled node, as sorted member lists (smallest root first)."""
    groups = {}
    for i, root in enumerate(comp):
        groups.setdefault(root, []).append(i)
    bad = [sorted(members) for root, members in sorted(groups.items())
           if not any(node_labels[i] is not None for i in members)]
    return bad
