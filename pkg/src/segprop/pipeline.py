"""Staged forward pass: segment graph -> instance graph with 256-dim features.

Stage 1 runs the structural extractor per segment and one merge pass with a
loose threshold; stages 2 and 3 concatenate a semantic extractor's output
onto the pooled features, refine them with a graph convolution, and merge
again with tighter thresholds; the final stage greedily folds whatever is
still unlabeled into a labeled group.  The trace of merge decisions is
returned so a forward can be replayed with identical grouping under
perturbed parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .clustering import cluster_final, cluster_layer
from .config import PipelineConfig
from .errors import GraphError
from .network import DTYPE, GroupingNet, unit_sphere
from .scene import Scene, Segmentation, farthest_point_sample
from .seggraph import SegmentGraph


@dataclass
class ForwardTrace:
    """Recorded merge decisions of one forward pass."""
    layers: list = field(default_factory=list)   # per merge pass: member lists
    final: list = field(default_factory=list)    # (source, target) pairs

    def to_dict(self) -> dict:
        return {"layers": [[list(m) for m in cl] for cl in self.layers],
                "final": [list(p) for p in self.final]}

    @classmethod
    def from_dict(cls, data: dict) -> "ForwardTrace":
        return cls(layers=[[list(m) for m in cl] for cl in data["layers"]],
                   final=[tuple(p) for p in data["final"]])


@dataclass
class ForwardResult:
    snapshots: list          # SegmentGraph per stage, initial graph first
    trace: ForwardTrace

    @property
    def final_graph(self) -> SegmentGraph:
        return self.snapshots[-1]


class SceneInputs:
    """Caches FPS samples and extractor inputs for one scene's geometry.

    Node compositions recur across epochs, and the sampled inputs depend
    only on geometry and the node's segment set, so they are memoized keyed
    by (stage, segments).  The FPS seed is derived from the pipeline seed,
    the stage, and the segment ids, which keeps sampling stable no matter
    when a node first appears.
    """

    def __init__(self, scene: Scene, segmentation: Segmentation,
                 config: PipelineConfig):
        if scene.num_points != segmentation.num_points:
            raise GraphError("scene and segmentation point counts differ")
        self.scene = scene
        self.segmentation = segmentation
        self.config = config
        self._segment_points = segmentation.segment_points()
        self._cache: dict = {}

    def _node_indices(self, node_segments) -> np.ndarray:
        return np.concatenate([self._segment_points[s] for s in node_segments])

    def structural_batch(self, graph: SegmentGraph) -> torch.Tensor:
        """(M, fps_points, 6) unit-sphere XYZ + RGB per node."""
        return self._batch(graph, stage=0)

    def semantic_batch(self, graph: SegmentGraph, stage: int) -> torch.Tensor:
        """(M, fps_points, 9) XYZ + RGB + XYZ centered on the node centroid."""
        return self._batch(graph, stage=stage)

    def _batch(self, graph: SegmentGraph, stage: int) -> torch.Tensor:
        rows = []
        for node_segments in graph.node_segments:
            key = (stage, node_segments)
            if key not in self._cache:
                self._cache[key] = self._build(node_segments, stage)
            rows.append(self._cache[key])
        return torch.stack(rows)

    def _build(self, node_segments, stage: int) -> torch.Tensor:
        idx = self._node_indices(node_segments)
        samp = farthest_point_sample(
            self.scene.points[idx], self.config.fps_points,
            [self.config.seed, stage, *node_segments])
        xyz = self.scene.points[idx][samp]
        rgb = self.scene.colors[idx][samp]
        if stage == 0:
            arr = np.concatenate([unit_sphere(xyz), rgb], axis=1)
        else:
            center = self.scene.points[idx].mean(axis=0)
            arr = np.concatenate([xyz, rgb, xyz - center], axis=1)
        return torch.as_tensor(arr, dtype=DTYPE)


def grouping_forward(inputs: SceneInputs, graph: SegmentGraph,
                     net: GroupingNet, replay: ForwardTrace | None = None
                     ) -> ForwardResult:
    """Run all merge stages; with ``replay``, reuse its recorded decisions."""
    cfg = inputs.config
    trace = ForwardTrace()
    snapshots = [graph]

    def layer_replay(i):
        return None if replay is None else replay.layers[i]

    # structural stage: 128-dim features, loose threshold
    feats = net.structural(inputs.structural_batch(graph))
    graph, clusters = cluster_layer(graph, feats, cfg.taus[0], layer_replay(0))
    trace.layers.append(clusters)
    snapshots.append(graph)

    # two semantic stages: concat extractor output, graph conv, merge
    for i, extractor, gcn in ((1, net.semantic1, net.gcn1),
                              (2, net.semantic2, net.gcn2)):
        sem = extractor(inputs.semantic_batch(graph, stage=i))
        feats = torch.cat([graph.features, sem], dim=1)
        feats = gcn(feats, graph.edges)
        graph, clusters = cluster_layer(graph, feats, cfg.taus[i],
                                        layer_replay(i))
        trace.layers.append(clusters)
        snapshots.append(graph)

    final_replay = None if replay is None else replay.final
    graph, merges = cluster_final(graph, graph.features, final_replay)
    trace.final = merges
    snapshots.append(graph)
    verify_snapshots(snapshots, inputs.segmentation)
    return ForwardResult(snapshots=snapshots, trace=trace)


def verify_snapshots(snapshots: list[SegmentGraph],
                     segmentation: Segmentation) -> None:
    """Safety checks after every forward pass.

    Raises GraphError if any stage loses or duplicates a segment, drops or
    duplicates a label, lets point coverage shrink, or if the final stage
    has an unlabeled node or a node count other than the initial label count.
    """
    sizes = [len(p) for p in segmentation.segment_points()]
    all_segments = set(range(segmentation.num_segments))
    first = snapshots[0]
    labels0 = sorted(lab for lab in first.node_labels if lab is not None)
    prev_cover = -1
    for graph in snapshots:
        segs = [s for node in graph.node_segments for s in node]
        if len(segs) != len(all_segments) or set(segs) != all_segments:
            raise GraphError(f"stage {graph.layer} broke the segment partition")
        labels = sorted(lab for lab in graph.node_labels if lab is not None)
        if labels != labels0:
            raise GraphError(f"stage {graph.layer} changed the label multiset")
        cover = sum(sizes[s] for node, lab in
                    zip(graph.node_segments, graph.node_labels)
                    if lab is not None for s in node)
        if cover < prev_cover:
            raise GraphError(f"stage {graph.layer} reduced label coverage")
        prev_cover = cover
    last = snapshots[-1]
    if any(lab is None for lab in last.node_labels):
        raise GraphError("final stage left an unlabeled node")
    if last.num_nodes != len(labels0):
        raise GraphError(
            f"final stage has {last.num_nodes} nodes for {len(labels0)} labels")


def pseudo_labels_from_graph(graph: SegmentGraph, segmentation: Segmentation
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (semantic, instance) arrays from a graph's node labels.

    Points of unlabeled nodes get -1 in both arrays; the final stage graph
    has none, so there it is a total labeling.
    """
    semantic = np.full(segmentation.num_points, -1, dtype=np.int64)
    instance = np.full(segmentation.num_points, -1, dtype=np.int64)
    segment_points = segmentation.segment_points()
    for node, label in enumerate(graph.node_labels):
        if label is None:
            continue
        cls, ins = label
        for s in graph.node_segments[node]:
            semantic[segment_points[s]] = cls
            instance[segment_points[s]] = ins
    return semantic, instance
