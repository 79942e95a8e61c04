import csv

import pytest

from segprop.evaluation import IoUReport, StageReport
from segprop.report import (STAGE_NAMES, render_class_figure,
                            render_loss_figure, render_stage_figure,
                            write_loss_csv, write_stage_csv, write_stage_json)
from segprop.sceneio import read_json


def make_report(stage, per_class, coverage):
    mean = sum(per_class.values()) / len(per_class) if per_class else 0.0
    semantic = IoUReport(per_class=per_class, mean=mean, coverage=coverage)
    instance = IoUReport(per_class={0: coverage}, mean=coverage,
                         coverage=coverage)
    return StageReport(stage=stage, semantic=semantic, instance=instance)


@pytest.fixture()
def reports():
    return [make_report(0, {0: 0.2}, 0.3),
            make_report(1, {0: 0.5, 2: 0.4}, 0.7),
            make_report(4, {0: 1.0, 2: 0.9}, 1.0)]


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


class TestStageCsv:
    def test_row_and_column_counts(self, reports, tmp_path):
        path = tmp_path / "report.csv"
        write_stage_csv(reports, path)
        rows = read_rows(path)
        num_classes = 2  # classes 0 and 2 appear across the stages
        assert len(rows) == 1 + len(reports)
        assert all(len(row) == 1 + num_classes + 2 for row in rows)

    def test_header_order_and_names(self, reports, tmp_path):
        path = tmp_path / "report.csv"
        write_stage_csv(reports, path, class_names={0: "floor", 2: "chair"})
        rows = read_rows(path)
        assert rows[0] == ["stage", "iou_floor", "iou_chair", "mean",
                           "coverage"]

    def test_unnamed_classes_fall_back_to_id(self, reports, tmp_path):
        path = tmp_path / "report.csv"
        write_stage_csv(reports, path)
        assert read_rows(path)[0][1:3] == ["iou_class_0", "iou_class_2"]

    def test_absent_class_leaves_blank_cell(self, reports, tmp_path):
        path = tmp_path / "report.csv"
        write_stage_csv(reports, path)
        rows = read_rows(path)
        assert rows[1] == ["0", "0.200000", "", "0.200000", "0.300000"]
        assert rows[3] == ["4", "1.000000", "0.900000", "0.950000", "1.000000"]

    def test_class_names_extend_columns(self, reports, tmp_path):
        # a registry class never predicted still gets its (empty) column
        path = tmp_path / "report.csv"
        write_stage_csv(reports, path, class_names={0: "floor", 1: "wall",
                                                    2: "chair"})
        rows = read_rows(path)
        assert rows[0][1:4] == ["iou_floor", "iou_wall", "iou_chair"]
        assert [row[2] for row in rows[1:]] == ["", "", ""]


class TestStageJson:
    def test_round_trip_with_meta(self, reports, tmp_path):
        path = tmp_path / "report.json"
        write_stage_json(reports, path, meta={"scenes": ["room"]})
        data = read_json(path)
        assert data["scenes"] == ["room"]
        assert [s["stage"] for s in data["stages"]] == [0, 1, 4]
        assert data["stages"][2]["semantic"]["perClass"] == {"0": 1.0,
                                                             "2": 0.9}


class TestLossCsv:
    def test_exact_float_round_trip(self, tmp_path):
        path = tmp_path / "loss.csv"
        losses = [0.1 + 0.2, 1.0 / 3.0, 5e-320]
        write_loss_csv(losses, path)
        rows = read_rows(path)
        assert rows[0] == ["epoch", "loss"]
        assert [int(r[0]) for r in rows[1:]] == [0, 1, 2]
        assert [float(r[1]) for r in rows[1:]] == losses


class TestFigures:
    def test_stage_figure_renders(self, reports, tmp_path):
        path = tmp_path / "stage_curve.png"
        render_stage_figure(reports, path)
        assert path.stat().st_size > 1000
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_class_figure_renders(self, reports, tmp_path):
        path = tmp_path / "class_iou.png"
        render_class_figure(reports[-1], path, class_names={0: "floor"})
        assert path.stat().st_size > 1000
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_loss_figure_renders(self, tmp_path):
        path = tmp_path / "loss.png"
        render_loss_figure([3.0, 2.0, 1.5], path)
        assert path.stat().st_size > 1000

    def test_stage_names_cover_pipeline(self):
        assert len(STAGE_NAMES) == 5
        assert STAGE_NAMES[0] == "segments"
        assert STAGE_NAMES[-1] == "final"
