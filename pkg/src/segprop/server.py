"""HTTP service backing the browser annotation tool.

Serves scenes, the class map, seg-level labels (read and write) and grouped
results out of a data directory that follows the CLI's file naming.  Label
writes go through the same click-extension rule as the library, are
serialized per scene, persist to the labels file immediately, and carry a
revision counter so the client can detect that its mirror is current.

Points can be decimated with ``?stride=n``; the response echoes the stride
and the client maps displayed index i back to original index i * stride
when posting clicks.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, ConfigDict, Field

from . import sceneio
from .annotation import SegLevelLabelSet, extend_click_to_segment, save_labels
from .errors import LabelConflictError, SegpropError, ValidationError
from .scene import Scene, Segmentation
from .synthetic import class_names as default_class_names


@dataclass
class SceneState:
    scene: Scene
    segmentation: Segmentation
    labels: SegLevelLabelSet
    labels_path: str
    revision: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


class ClickBody(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    click: int
    cls: int = Field(alias="class")
    instance: int


def _labels_json(state: SceneState) -> dict:
    return {
        "classes": {str(k): v for k, v in sorted(state.labels.class_names.items())},
        "labels": [{"instance": lab.instance_id, "class": lab.semantic_class,
                    "segment": lab.segment_id, "click": lab.click_point}
                   for lab in state.labels.labels],
        "revision": state.revision,
    }


def create_app(data_dir: str) -> FastAPI:
    app = FastAPI(title="segprop annotation service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    states: dict[str, SceneState] = {}
    states_lock = threading.Lock()

    def get_state(scene_id: str) -> SceneState:
        with states_lock:
            if scene_id in states:
                return states[scene_id]
            base = os.path.join(data_dir, scene_id)
            scene_path = next((base + ext for ext in (".scene.json", ".ply")
                               if os.path.exists(base + ext)), None)
            if scene_path is None or not os.path.exists(base + ".segs.json"):
                raise HTTPException(404, f"unknown scene {scene_id!r}")
            try:
                scene = sceneio.load_scene(scene_path)
                seg = sceneio.load_segmentation(base + ".segs.json")
                labels_path = base + ".labels.json"
                if os.path.exists(labels_path):
                    from .annotation import load_labels
                    labels = load_labels(labels_path, seg)
                else:
                    labels = SegLevelLabelSet((), _classes_for(base))
            except SegpropError as e:
                raise HTTPException(500, str(e)) from e
            state = SceneState(scene, seg, labels, labels_path)
            states[scene_id] = state
            return state

    def _classes_for(base: str) -> dict:
        gt_path = base + ".gt.json"
        if os.path.exists(gt_path):
            found = sceneio.load_classes(gt_path)
            if found:
                return found
        return default_class_names()

    @app.get("/api/scene/{scene_id}")
    def get_scene(scene_id: str, stride: int = 1):
        if stride < 1:
            raise HTTPException(422, "stride must be >= 1")
        state = get_state(scene_id)
        pts = state.scene.points[::stride]
        cols = state.scene.colors[::stride]
        seg = state.segmentation.seg_ids[::stride]
        return {"points": pts.tolist(), "colors": cols.tolist(),
                "segIndices": seg.tolist(), "stride": stride,
                "numPoints": state.scene.num_points}

    @app.get("/api/classes")
    def get_classes():
        for scene_id in sorted(states):
            return {str(k): v for k, v in
                    sorted(states[scene_id].labels.class_names.items())}
        for entry in sorted(os.listdir(data_dir)):
            if entry.endswith(".gt.json"):
                found = sceneio.load_classes(os.path.join(data_dir, entry))
                if found:
                    return {str(k): v for k, v in sorted(found.items())}
        return {str(k): v for k, v in sorted(default_class_names().items())}

    @app.get("/api/labels/{scene_id}")
    def get_labels(scene_id: str):
        return _labels_json(get_state(scene_id))

    @app.post("/api/labels/{scene_id}")
    def post_label(scene_id: str, body: ClickBody):
        state = get_state(scene_id)
        with state.lock:
            try:
                label = extend_click_to_segment(
                    state.segmentation, body.click, body.cls, body.instance,
                    existing=state.labels)
            except LabelConflictError as e:
                raise HTTPException(409, str(e)) from e
            except ValidationError as e:
                raise HTTPException(422, str(e)) from e
            if label not in state.labels.labels:
                state.labels = SegLevelLabelSet(
                    state.labels.labels + (label,), state.labels.class_names)
                state.revision += 1
                save_labels(state.labels, state.labels_path)
            return _labels_json(state)

    @app.get("/api/result/{scene_id}")
    def get_result(scene_id: str):
        state = get_state(scene_id)
        pseudo_path = os.path.join(data_dir, scene_id + ".pseudo.json")
        if not os.path.exists(pseudo_path):
            raise HTTPException(404, f"no grouped result for {scene_id!r}")
        pseudo = sceneio.load_point_labels(pseudo_path)
        clicks = [{"point": lab.click_point, "instance": lab.instance_id,
                   "class": lab.semantic_class}
                  for lab in state.labels.labels]
        return {"semantic": pseudo.semantic.tolist(),
                "instance": pseudo.instance.tolist(), "clicks": clicks}

    return app
