"""Segment-level weak labels: one click per instance, extended to its segment.

A label records the clicked point, the segment that click lands in, the
semantic class and the instance id.  A segment carries at most one instance;
one instance may own several segments only through explicit multi-part
labeling (manual annotation of an instance split into disconnected parts).
``mechanical_annotate`` synthesizes labels from ground truth by clicking a
random point within each instance's Top-N largest segments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LabelConflictError, ValidationError
from .scene import GroundTruth, Segmentation
from .sceneio import read_json, write_json


@dataclass(frozen=True)
class SegLevelLabel:
    instance_id: int
    semantic_class: int
    segment_id: int
    click_point: int


@dataclass(frozen=True)
class SegLevelLabelSet:
    labels: tuple
    class_names: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        seen_segments = {}
        for i, lab in enumerate(self.labels):
            prev = seen_segments.get(lab.segment_id)
            if prev is not None:
                raise ValidationError("segment labeled twice",
                                      field=f"labels[{i}].segment")
            seen_segments[lab.segment_id] = lab.instance_id

    @property
    def instance_ids(self) -> list[int]:
        return sorted({lab.instance_id for lab in self.labels})

    def by_segment(self) -> dict[int, SegLevelLabel]:
        return {lab.segment_id: lab for lab in self.labels}

    def validate_against(self, segmentation: Segmentation) -> None:
        for i, lab in enumerate(self.labels):
            if not 0 <= lab.segment_id < segmentation.num_segments:
                raise ValidationError("segment id out of range",
                                      field=f"labels[{i}].segment")
            if not 0 <= lab.click_point < segmentation.num_points:
                raise ValidationError("click point out of range",
                                      field=f"labels[{i}].click")
            if segmentation.seg_ids[lab.click_point] != lab.segment_id:
                raise ValidationError("click point lies outside the labeled segment",
                                      field=f"labels[{i}].click")


def extend_click_to_segment(segmentation: Segmentation, click_point: int,
                            semantic_class: int, instance_id: int,
                            existing: SegLevelLabelSet | None = None) -> SegLevelLabel:
    """Extend a click into a segment-level label.

    Idempotent for repeated clicks of the same instance on the same segment;
    a click on a segment already owned by a different instance raises
    LabelConflictError (the annotator must re-click).
    """
    if not 0 <= click_point < segmentation.num_points:
        raise ValidationError("click point out of range", field="click")
    seg = int(segmentation.seg_ids[click_point])
    if existing is not None:
        prev = existing.by_segment().get(seg)
        if prev is not None and prev.instance_id != instance_id:
            raise LabelConflictError(
                f"segment {seg} already labeled as instance {prev.instance_id}")
        if prev is not None:
            return prev
    return SegLevelLabel(instance_id, semantic_class, seg, click_point)


def mechanical_annotate(gt: GroundTruth, segmentation: Segmentation,
                        top_n: int = 1, seed: int = 0,
                        class_names: dict | None = None) -> SegLevelLabelSet:
    """Synthesize one seg-level label per ground-truth instance.

    Per instance, segments are ranked by how many of the instance's points
    they contain (descending, ties by segment id) and a click point is drawn
    uniformly from the instance's points inside the Top-N ranked segments.
    Segments already claimed by an earlier instance are skipped so the label
    set stays valid; ranking always uses the instance's own point counts.
    """
    if top_n not in (1, 2, 3):
        raise ValidationError("top-n must be 1, 2, or 3", field="top_n")
    if gt.num_points != segmentation.num_points:
        raise ValidationError("ground truth and segmentation lengths differ")
    instance_ids = np.unique(gt.instance)
    instance_ids = instance_ids[instance_ids >= 0]
    if instance_ids.size == 0:
        raise ValidationError("ground truth has no instances")

    rng = np.random.default_rng(seed)
    labels = []
    claimed = set()
    for inst in instance_ids:
        mask = gt.instance == inst
        segs, counts = np.unique(segmentation.seg_ids[mask], return_counts=True)
        ranked = segs[np.lexsort((segs, -counts))]
        eligible = [s for s in ranked[:top_n] if s not in claimed]
        if not eligible:
            # all Top-N segments already claimed; fall back to the best-ranked
            # free segment so the one-instance-per-segment invariant holds
            eligible = [s for s in ranked[top_n:] if s not in claimed][:1]
        if not eligible:
            raise LabelConflictError(
                f"instance {int(inst)} has no unclaimed segment to label")
        pool = np.flatnonzero(mask & np.isin(segmentation.seg_ids, eligible))
        click = int(pool[rng.integers(pool.size)])
        seg = int(segmentation.seg_ids[click])
        claimed.add(seg)
        sem = int(gt.semantic[mask][0])
        labels.append(SegLevelLabel(int(inst), sem, seg, click))
    return SegLevelLabelSet(tuple(labels), dict(class_names or {}))


def save_labels(label_set: SegLevelLabelSet, path, meta=None) -> None:
    obj = {
        "classes": {str(k): v for k, v in sorted(label_set.class_names.items())},
        "labels": [{"instance": lab.instance_id, "class": lab.semantic_class,
                    "segment": lab.segment_id, "click": lab.click_point}
                   for lab in label_set.labels],
    }
    if meta is not None:
        obj["config"] = meta
    write_json(obj, path)


def load_labels(path, segmentation: Segmentation | None = None) -> SegLevelLabelSet:
    data = read_json(path)
    if "labels" not in data:
        raise ValidationError("missing key", field="labels")
    labels = []
    for i, entry in enumerate(data["labels"]):
        for key in ("instance", "class", "segment", "click"):
            if key not in entry:
                raise ValidationError("missing key", field=f"labels[{i}].{key}")
        labels.append(SegLevelLabel(int(entry["instance"]), int(entry["class"]),
                                    int(entry["segment"]), int(entry["click"])))
    classes = {int(k): str(v) for k, v in data.get("classes", {}).items()}
    label_set = SegLevelLabelSet(tuple(labels), classes)
    if segmentation is not None:
        label_set.validate_against(segmentation)
    return label_set
