"""Report files for evaluation and training runs.

CSV carries the numbers, JSON carries the same plus the producing config,
and the figures are rendered straight to PNG (no display server needed).
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluation import StageReport
from .sceneio import write_json

STAGE_NAMES = ("segments", "structural", "semantic 1", "semantic 2", "final")


def _stage_name(stage: int) -> str:
    return STAGE_NAMES[stage] if stage < len(STAGE_NAMES) else f"stage {stage}"


def write_stage_csv(reports: list[StageReport], path,
                    class_names: dict | None = None) -> None:
    """One row per stage: stage, per-class semantic IoUs in class-id order,
    mean, coverage.  Classes absent from a stage leave an empty cell."""
    classes = sorted({c for r in reports for c in r.semantic.per_class}
                     | set(class_names or {}))
    names = class_names or {}

    def header(c):
        return f"iou_{names.get(c, f'class_{c}')}"

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["stage"] + [header(c) for c in classes] + ["mean", "coverage"])
        for r in reports:
            row = [r.stage]
            row += [f"{r.semantic.per_class[c]:.6f}"
                    if c in r.semantic.per_class else "" for c in classes]
            row += [f"{r.semantic.mean:.6f}", f"{r.semantic.coverage:.6f}"]
            w.writerow(row)


def write_stage_json(reports: list[StageReport], path, meta=None) -> None:
    data = {"stages": [r.to_dict() for r in reports]}
    if meta:
        data.update(meta)
    write_json(data, path)


def render_stage_figure(reports: list[StageReport], path) -> None:
    """Mean IoU and coverage per grouping stage."""
    stages = [r.stage for r in reports]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(stages, [r.semantic.mean for r in reports], "o-",
            label="semantic mIoU")
    ax.plot(stages, [r.instance.mean for r in reports], "s-",
            label="instance mIoU")
    ax.plot(stages, [r.semantic.coverage for r in reports], "^--",
            label="coverage")
    ax.set_xticks(stages)
    ax.set_xticklabels([_stage_name(s) for s in stages], rotation=20)
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("grouping stage")
    ax.set_ylabel("fraction")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_class_figure(report: StageReport, path,
                        class_names: dict | None = None) -> None:
    """Per-class IoU bars for one (usually the final) stage."""
    names = class_names or {}
    items = sorted(report.semantic.per_class.items())
    labels = [names.get(c, str(c)) for c, _ in items]
    values = [v for _, v in items]
    fig, ax = plt.subplots(figsize=(max(4, 0.8 * len(items) + 2), 4))
    ax.bar(range(len(items)), values, color="tab:blue")
    ax.set_xticks(range(len(items)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("IoU")
    ax.set_title(f"per-class IoU ({_stage_name(report.stage)})")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_loss_csv(epoch_losses: list[float], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(epoch_losses):
            w.writerow([i, repr(float(v))])


def render_loss_figure(epoch_losses: list[float], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(len(epoch_losses)), epoch_losses, "-")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
