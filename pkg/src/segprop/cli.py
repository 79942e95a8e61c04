"""Command line front end.

Stages hand off through files in a data directory, named
``<name>.scene.json`` / ``.gt.json`` / ``.segs.json`` / ``.labels.json`` /
``.pseudo.json`` / ``.stages.json``, so each command can run alone and every
artifact embeds the config that produced it.  Exit codes: 0 success, 1 usage
error, 2 bad input data, 3 runtime failure; ``--json`` switches stderr
errors to one machine-readable JSON object.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import sys

from .config import PipelineConfig
from .errors import (LabelConflictError, ParseError, SegpropError,
                     ValidationError)

log = logging.getLogger("segprop")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

_SUFFIXES = {
    "scene": ".scene.json", "gt": ".gt.json", "segs": ".segs.json",
    "labels": ".labels.json", "pseudo": ".pseudo.json",
    "stages": ".stages.json", "checkpoint": ".ckpt.json",
}


def _path(args, kind: str, flag_value=None) -> str:
    if flag_value:
        return flag_value
    return os.path.join(args.data_dir, args.name + _SUFFIXES[kind])


def _require(path: str, flag: str) -> str:
    if not os.path.exists(path):
        raise UsageError(f"{flag}: file not found: {path}")
    return path


def _config_from(args) -> PipelineConfig:
    cfg = PipelineConfig()
    mapping = {"seed": "seed", "k": "adjacency_k", "kappa": "kappa",
               "min_size": "min_size", "normals_k": "normals_k",
               "top_n": "top_n", "epochs": "epochs", "lr": "learning_rate",
               "momentum": "momentum", "gain": "init_gain",
               "grad_mode": "grad_mode"}
    overrides = {}
    for flag, name in mapping.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    return cfg.replace(**overrides)


def _load_scene_any(path: str):
    from . import sceneio
    from .scene import estimate_normals
    scene = sceneio.load_scene(path)
    if scene.normals is None:
        log.info("estimating normals for %s", path)
        scene = estimate_normals(scene)
    return scene


def _scene_path(args) -> str:
    if args.scene:
        return _require(args.scene, "--scene")
    base = os.path.join(args.data_dir, args.name)
    for cand in (base + ".scene.json", base + ".ply"):
        if os.path.exists(cand):
            return cand
    raise UsageError(f"--scene: no scene file for {args.name!r} in {args.data_dir}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    from . import sceneio
    from .synthetic import class_names, generate_synthetic, random_spec
    cfg = _config_from(args)
    spec = random_spec(cfg.seed, args.instances)
    scene, gt = generate_synthetic(spec)
    scene_path = _path(args, "scene", args.out)
    gt_path = _path(args, "gt", args.gt_out)
    for p in (scene_path, gt_path):
        parent = os.path.dirname(p)
        if parent:
            os.makedirs(parent, exist_ok=True)
    sceneio.save_scene(scene, scene_path, meta=cfg.to_dict())
    sceneio.save_point_labels(gt, gt_path, meta=cfg.to_dict(),
                              classes=class_names())
    n_inst = int(gt.instance.max()) + 1
    print(f"wrote {scene_path} ({scene.num_points} points, {n_inst} instances)")
    return 0


def cmd_overseg(args) -> int:
    from . import sceneio
    from .overseg import build_point_adjacency, felzenszwalb_segment
    cfg = _config_from(args)
    scene = _load_scene_any(_scene_path(args))
    edges = build_point_adjacency(scene, k=cfg.adjacency_k)
    seg = felzenszwalb_segment(scene, edges, kappa=cfg.kappa,
                               min_size=cfg.min_size)
    out = _path(args, "segs", args.out)
    sceneio.save_segmentation(seg, out, meta=cfg.to_dict())
    print(f"wrote {out} ({seg.num_segments} segments)")
    return 0


def cmd_annotate(args) -> int:
    from . import sceneio
    from .annotation import mechanical_annotate, save_labels
    if args.top_n is not None and args.top_n not in (1, 2, 3):
        raise UsageError("top-n must be 1, 2, or 3")
    cfg = _config_from(args)
    gt_path = _require(_path(args, "gt", args.gt), "--gt")
    segs_path = _require(_path(args, "segs", args.segs), "--segs")
    gt = sceneio.load_point_labels(gt_path)
    seg = sceneio.load_segmentation(segs_path)
    classes = sceneio.load_classes(gt_path) or {}
    labels = mechanical_annotate(gt, seg, top_n=cfg.top_n, seed=cfg.seed,
                                 class_names=classes)
    out = _path(args, "labels", args.out)
    save_labels(labels, out, meta=cfg.to_dict())
    print(f"wrote {out} ({len(labels.labels)} seg-level labels)")
    return 0


def _build_bundle(name, scene_path, segs_path, labels_path, cfg):
    from . import sceneio
    from .annotation import load_labels
    from .overseg import build_point_adjacency
    from .pipeline import SceneInputs
    from .seggraph import build_segment_graph
    from .training import SceneBundle
    scene = _load_scene_any(scene_path)
    seg = sceneio.load_segmentation(segs_path)
    labels = load_labels(labels_path, seg)
    edges = build_point_adjacency(scene, k=cfg.adjacency_k)
    graph = build_segment_graph(scene, seg, labels, edges)
    return SceneBundle(name, SceneInputs(scene, seg, cfg), graph), labels


def cmd_group(args) -> int:
    import torch

    from . import sceneio
    from .pipeline import grouping_forward, pseudo_labels_from_graph
    from .scene import PointLabels
    from .training import init_models, load_checkpoint
    torch.set_num_threads(1)
    if args.checkpoint:
        net, _, cfg, _ = load_checkpoint(_require(args.checkpoint, "--checkpoint"))
    else:
        cfg = _config_from(args)
        net, _ = init_models(2, cfg)
    labels_path = _require(_path(args, "labels", args.labels), "--labels")
    segs_path = _require(_path(args, "segs", args.segs), "--segs")
    bundle, labels = _build_bundle(args.name, _scene_path(args), segs_path,
                                   labels_path, cfg)
    with torch.no_grad():
        result = grouping_forward(bundle.inputs, bundle.graph, net)
    semantic, instance = pseudo_labels_from_graph(result.final_graph,
                                                  bundle.inputs.segmentation)
    out = _path(args, "pseudo", args.out)
    sceneio.save_point_labels(PointLabels(semantic, instance), out,
                              meta=cfg.to_dict(), classes=labels.class_names)
    stages_out = _path(args, "stages", args.stages_out)
    sceneio.write_json({"config": cfg.to_dict(),
                        "stages": [g.to_dump() for g in result.snapshots]},
                       stages_out)
    final = result.final_graph
    print(f"wrote {out} ({final.num_nodes} instances, coverage 1.000)")
    return 0


def _discover(args, suffix_kind: str) -> list[str]:
    if args.names:
        return [n.strip() for n in args.names.split(",") if n.strip()]
    suffix = _SUFFIXES[suffix_kind]
    found = sorted(os.path.basename(p)[:-len(suffix)]
                   for p in glob.glob(os.path.join(args.data_dir, "*" + suffix)))
    if not found:
        raise UsageError(f"--data-dir: no *{suffix} files in {args.data_dir}")
    return found


def cmd_train(args) -> int:
    import torch

    from .report import render_loss_figure, write_loss_csv
    from .training import init_models, save_checkpoint, train
    torch.set_num_threads(1)
    cfg = _config_from(args)
    names = _discover(args, "labels")
    bundles = []
    num_classes = 2
    for name in names:
        ns = argparse.Namespace(data_dir=args.data_dir, name=name, scene=None)
        bundle, labels = _build_bundle(
            name, _scene_path(ns),
            _require(os.path.join(args.data_dir, name + ".segs.json"), "--data-dir"),
            os.path.join(args.data_dir, name + ".labels.json"), cfg)
        bundles.append(bundle)
        ids = [lab.semantic_class for lab in labels.labels]
        ids += list(labels.class_names)
        num_classes = max([num_classes] + [i + 1 for i in ids])
    net, classifier = init_models(num_classes, cfg)
    log.info("training on %d scenes, %d classes, %d epochs",
             len(bundles), num_classes, cfg.epochs)
    tlog = train(bundles, net, classifier, cfg)
    ckpt = _path(args, "checkpoint", args.out)
    save_checkpoint(ckpt, net, classifier, cfg, tlog.epoch_losses)
    loss_csv = args.loss_csv or os.path.join(args.data_dir, args.name + ".loss.csv")
    write_loss_csv(tlog.epoch_losses, loss_csv)
    render_loss_figure(tlog.epoch_losses, os.path.splitext(loss_csv)[0] + ".png")
    print(f"wrote {ckpt} (final loss {tlog.epoch_losses[-1]:.6f})")
    return 0


def cmd_eval(args) -> int:
    from . import sceneio
    from .evaluation import (StageReport, instance_iou, merge_reports,
                             semantic_iou, stage_reports)
    from .report import (render_class_figure, render_stage_figure,
                         write_stage_csv, write_stage_json)
    from .seggraph import graph_from_dump
    cfg = _config_from(args)
    names = _discover(args, "pseudo")
    os.makedirs(args.out_dir, exist_ok=True)
    per_scene = {}
    stage_lists = []
    class_names = {}
    for name in names:
        base = os.path.join(args.data_dir, name)
        gt_path = _require(base + ".gt.json", "--data-dir")
        gt = sceneio.load_point_labels(gt_path)
        class_names = class_names or (sceneio.load_classes(gt_path) or {})
        pseudo = sceneio.load_point_labels(base + ".pseudo.json")
        stages_path = base + ".stages.json"
        if os.path.exists(stages_path) and os.path.exists(base + ".segs.json"):
            seg = sceneio.load_segmentation(base + ".segs.json")
            dumps = sceneio.read_json(stages_path)["stages"]
            snapshots = [graph_from_dump(d) for d in dumps]
            reports = stage_reports(snapshots, seg, gt)
        else:
            reports = [StageReport(0, semantic_iou(pseudo.semantic, gt),
                                   instance_iou(pseudo.instance, gt))]
        per_scene[name] = reports
        stage_lists.append(reports)
    depth = max(len(r) for r in stage_lists)
    merged = []
    for s in range(depth):
        at_stage = [r[s] for r in stage_lists if len(r) > s]
        merged.append(StageReport(
            s, merge_reports([r.semantic for r in at_stage]),
            merge_reports([r.instance for r in at_stage])))
    write_stage_csv(merged, os.path.join(args.out_dir, "report.csv"), class_names)
    write_stage_json(merged, os.path.join(args.out_dir, "report.json"),
                     meta={"config": cfg.to_dict(), "scenes":
                           {n: [r.to_dict() for r in rs]
                            for n, rs in per_scene.items()}})
    render_stage_figure(merged, os.path.join(args.out_dir, "stage_curve.png"))
    render_class_figure(merged[-1], os.path.join(args.out_dir, "class_iou.png"),
                        class_names)
    final = merged[-1]
    print(f"mean semantic IoU {final.semantic.mean:.4f}, "
          f"mean instance IoU {final.instance.mean:.4f} "
          f"over {len(names)} scene(s) -> {args.out_dir}")
    return 0


def cmd_inspect(args) -> int:
    from . import sceneio
    cfg = _config_from(args)
    labels_path = _require(_path(args, "labels", args.labels), "--labels")
    segs_path = _require(_path(args, "segs", args.segs), "--segs")
    bundle, _ = _build_bundle(args.name, _scene_path(args), segs_path,
                              labels_path, cfg)
    graph = bundle.graph
    dump = {"config": cfg.to_dict(), "graph": graph.to_dump(),
            "stats": {"nodes": graph.num_nodes, "edges": len(graph.edges),
                      "labeled": len(graph.labeled_nodes())}}
    if args.out:
        sceneio.write_json(dump, args.out)
        print(f"wrote {args.out}")
    else:
        json.dump(dump, sys.stdout, indent=1, sort_keys=True)
        print()
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app
    app = create_app(args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segprop",
        description="Weak seg-level labels to dense pseudo labels for 3D scenes.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data-dir", default=".", help="artifact directory")
    common.add_argument("--name", default="room", help="scene name stem")
    common.add_argument("--json", action="store_true",
                        help="emit errors as JSON on stderr")
    common.add_argument("--seed", type=int, default=None, help="seed (default 0)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common],
                       help="generate a synthetic room scene + ground truth")
    p.add_argument("--instances", type=int, default=5,
                   help="total instance count incl. floor and walls")
    p.add_argument("--out", help="scene output path")
    p.add_argument("--gt-out", help="ground truth output path")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("overseg", parents=[common],
                       help="over-segment a scene into small segments")
    p.add_argument("--scene", help="scene file (.scene.json or .ply)")
    p.add_argument("--out", help="segmentation output path")
    p.add_argument("--k", type=int, default=None, help="adjacency kNN (default 10)")
    p.add_argument("--kappa", type=float, default=None,
                   help="merge threshold scale (default 0.06)")
    p.add_argument("--min-size", type=int, default=None, dest="min_size",
                   help="minimum segment size (default 20)")
    p.add_argument("--normals-k", type=int, default=None, dest="normals_k",
                   help="normal estimation kNN (default 12)")
    p.set_defaults(func=cmd_overseg)

    p = sub.add_parser("annotate-mech", parents=[common],
                       help="synthesize one seg-level label per gt instance")
    p.add_argument("--gt", help="ground truth labels file")
    p.add_argument("--segs", help="segmentation file")
    p.add_argument("--out", help="labels output path")
    p.add_argument("--top-n", type=int, default=None, dest="top_n",
                   help="click within the top-N ranked segments (1-3)")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("group", parents=[common],
                       help="run the grouping stages to dense pseudo labels")
    p.add_argument("--scene", help="scene file")
    p.add_argument("--segs", help="segmentation file")
    p.add_argument("--labels", help="seg-level labels file")
    p.add_argument("--checkpoint", help="trained checkpoint (else untrained net)")
    p.add_argument("--out", help="pseudo label output path")
    p.add_argument("--stages-out", dest="stages_out",
                   help="stage snapshot output path")
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("train", parents=[common],
                       help="train the grouping net on annotated scenes")
    p.add_argument("--names", help="comma-separated scene names (default: all)")
    p.add_argument("--out", help="checkpoint output path")
    p.add_argument("--loss-csv", dest="loss_csv", help="loss log output path")
    p.add_argument("--epochs", type=int, default=None, help="epochs (default 100)")
    p.add_argument("--lr", type=float, default=None,
                   help="learning rate (default 0.1)")
    p.add_argument("--momentum", type=float, default=None,
                   help="SGD momentum (default 0.9)")
    p.add_argument("--gain", type=float, default=None,
                   help="init scale multiplier (default 1.0)")
    p.add_argument("--grad-mode", dest="grad_mode",
                   choices=["analytic", "numeric"], default=None,
                   help="gradient computation (default analytic)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common],
                       help="score pseudo labels against ground truth")
    p.add_argument("--names", help="comma-separated scene names (default: all)")
    p.add_argument("--out-dir", dest="out_dir", default="reports",
                   help="report directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", parents=[common],
                       help="dump the initial segment graph as JSON")
    p.add_argument("--scene", help="scene file")
    p.add_argument("--segs", help="segmentation file")
    p.add_argument("--labels", help="seg-level labels file")
    p.add_argument("--out", help="write dump here instead of stdout")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("serve", parents=[common],
                       help="HTTP service for the browser annotation tool")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)
    return parser


def _emit_error(args, err) -> None:
    if getattr(args, "json", False):
        payload = {"error": type(err).__name__, "message": str(err)}
        for key in ("field", "line", "offset"):
            value = getattr(err, key, None)
            if value is not None:
                payload[key] = value
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    else:
        print(f"error: {err}", file=sys.stderr)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        return args.func(args)
    except UsageError as e:
        _emit_error(args, e)
        return 1
    except (ParseError, ValidationError, LabelConflictError) as e:
        _emit_error(args, e)
        return 2
    except SegpropError as e:
        _emit_error(args, e)
        return 3
    except Exception as e:  # noqa: BLE001 - last-resort runtime failure
        _emit_error(args, e)
        return 3


if __name__ == "__main__":
    sys.exit(main())
