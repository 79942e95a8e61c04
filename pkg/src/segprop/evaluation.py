"""IoU metrics for pseudo labels against ground truth.

Points the ground truth leaves unlabeled (-1) are excluded from every
intersection and union.  Coverage is the fraction of all points that carry
a pseudo label, reported alongside so partial stages are comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .scene import PointLabels, Segmentation
from .seggraph import SegmentGraph


@dataclass(frozen=True)
class IoUReport:
    per_class: dict          # class id -> IoU over gt-labeled points
    mean: float              # unweighted mean over per_class
    coverage: float          # labeled fraction of all points

    def to_dict(self) -> dict:
        return {"perClass": {str(k): v for k, v in sorted(self.per_class.items())},
                "mean": self.mean, "coverage": self.coverage}


def _check_lengths(pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise ValidationError(
            f"prediction has {pred.shape[0]} points, ground truth {gt.shape[0]}")


def semantic_iou(pred_semantic: np.ndarray, gt: PointLabels) -> IoUReport:
    """Per-class IoU; classes present in either side (on gt-labeled points)."""
    pred = np.asarray(pred_semantic, dtype=np.int64)
    _check_lengths(pred, gt.semantic)
    mask = gt.semantic >= 0
    p, g = pred[mask], gt.semantic[mask]
    classes = sorted(set(np.unique(g).tolist()) |
                     set(c for c in np.unique(p).tolist() if c >= 0))
    per_class = {}
    for c in classes:
        inter = int(np.sum((p == c) & (g == c)))
        union = int(np.sum((p == c) | (g == c)))
        per_class[c] = inter / union if union else 0.0
    mean = sum(per_class.values()) / len(per_class) if per_class else 0.0
    coverage = float(np.mean(pred >= 0)) if pred.size else 0.0
    return IoUReport(per_class=per_class, mean=mean, coverage=coverage)


def instance_iou(pred_instance: np.ndarray, gt: PointLabels) -> IoUReport:
    """IoU per ground-truth instance id, against the prediction's same id.

    Predicted ids with no ground-truth counterpart are reported with a 0
    entry, but the mean averages over ground-truth instances only.
    """
    pred = np.asarray(pred_instance, dtype=np.int64)
    _check_lengths(pred, gt.instance)
    mask = gt.instance >= 0
    p, g = pred[mask], gt.instance[mask]
    gt_ids = set(np.unique(g).tolist())
    ids = sorted(gt_ids | set(i for i in np.unique(p).tolist() if i >= 0))
    per_id = {}
    for i in ids:
        inter = int(np.sum((p == i) & (g == i)))
        union = int(np.sum((p == i) | (g == i)))
        per_id[i] = inter / union if union else 0.0
    mean = (sum(per_id[i] for i in gt_ids) / len(gt_ids)) if gt_ids else 0.0
    coverage = float(np.mean(pred >= 0)) if pred.size else 0.0
    return IoUReport(per_class=per_id, mean=mean, coverage=coverage)


@dataclass(frozen=True)
class StageReport:
    stage: int
    semantic: IoUReport
    instance: IoUReport

    def to_dict(self) -> dict:
        return {"stage": self.stage, "semantic": self.semantic.to_dict(),
                "instance": self.instance.to_dict()}


def stage_reports(snapshots: list[SegmentGraph], segmentation: Segmentation,
                  gt: PointLabels) -> list[StageReport]:
    """Evaluate the partial labeling after every grouping stage."""
    from .pipeline import pseudo_labels_from_graph
    out = []
    for stage, graph in enumerate(snapshots):
        semantic, instance = pseudo_labels_from_graph(graph, segmentation)
        out.append(StageReport(stage=stage,
                               semantic=semantic_iou(semantic, gt),
                               instance=instance_iou(instance, gt)))
    return out


def merge_reports(reports: list[IoUReport]) -> IoUReport:
    """Combine per-scene reports: average IoU per class over the scenes that
    have that class, then re-mean; coverage averages over scenes."""
    if not reports:
        raise ValidationError("nothing to merge", field="reports")
    acc: dict = {}
    for r in reports:
        for c, v in r.per_class.items():
            acc.setdefault(c, []).append(v)
    per_class = {c: sum(vs) / len(vs) for c, vs in sorted(acc.items())}
    mean = sum(per_class.values()) / len(per_class) if per_class else 0.0
    coverage = sum(r.coverage for r in reports) / len(reports)
    return IoUReport(per_class=per_class, mean=mean, coverage=coverage)
