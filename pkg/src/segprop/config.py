"""One flat config object carried through the pipeline and into artifacts.

Every file the tools write embeds the producing config and seed so a run can
be reproduced bit for bit from the artifact alone.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    # over-segmentation
    normals_k: int = 12
    adjacency_k: int = 10
    kappa: float = 0.06
    min_size: int = 20
    # annotation
    top_n: int = 1
    # grouping network
    fps_points: int = 64
    knn_points: int = 8
    lam: float = 0.125
    taus: tuple[float, float, float] = (6.0, 2.0, 2.0)
    init_gain: float = 1.0
    # training
    learning_rate: float = 0.1
    momentum: float = 0.9
    epochs: int = 100
    grad_clip: float = 1.0
    grad_mode: str = "analytic"

    def __post_init__(self):
        if len(self.taus) != 3:
            raise ValidationError("taus must have one threshold per merge layer",
                                  field="taus")
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        if self.grad_mode not in ("analytic", "numeric"):
            raise ValidationError(f"unknown grad_mode {self.grad_mode!r}",
                                  field="grad_mode")
        if self.top_n not in (1, 2, 3):
            raise ValidationError("top-n must be 1, 2, or 3", field="top_n")
        for name in ("normals_k", "adjacency_k", "min_size", "fps_points",
                     "knn_points", "epochs"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1", field=name)
        for name in ("kappa", "lam", "learning_rate", "init_gain", "grad_clip"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive", field=name)
        if not 0 <= self.momentum < 1:
            raise ValidationError("momentum must be in [0, 1)", field="momentum")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["taus"] = list(self.taus)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}",
                                  field=unknown[0])
        kwargs = dict(data)
        if "taus" in kwargs:
            kwargs["taus"] = tuple(kwargs["taus"])
        return cls(**kwargs)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)
