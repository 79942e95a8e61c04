import numpy as np
import pytest
import torch

from segprop.annotation import mechanical_annotate
from segprop.config import PipelineConfig
from segprop.overseg import build_point_adjacency, felzenszwalb_segment
from segprop.seggraph import build_segment_graph
from segprop.synthetic import RoomSpec, class_names, generate_synthetic

torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_room():
    """One fixed small room: (scene, gt).  Treated as read-only."""
    spec = RoomSpec(counts={"floor": 1, "wall": 1, "chair": 1, "table": 1},
                    extent=(3.0, 3.0, 2.2), seed=12,
                    density=500.0, min_points=300, max_points=900)
    return generate_synthetic(spec)


@pytest.fixture(scope="session")
def room_chain(small_room):
    """The full prepared chain for the small room, shared by pipeline tests:
    dict with scene, gt, edges, seg, labels, graph, cfg."""
    scene, gt = small_room
    cfg = PipelineConfig()
    edges = build_point_adjacency(scene, k=cfg.adjacency_k)
    seg = felzenszwalb_segment(scene, edges, kappa=cfg.kappa,
                               min_size=cfg.min_size)
    labels = mechanical_annotate(gt, seg, top_n=1, seed=0,
                                 class_names=class_names())
    graph = build_segment_graph(scene, seg, labels, edges)
    return {"scene": scene, "gt": gt, "edges": edges, "seg": seg,
            "labels": labels, "graph": graph, "cfg": cfg}
