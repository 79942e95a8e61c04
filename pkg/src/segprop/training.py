"""Training loop and gradient validation for the grouping network.

Each epoch alternates grouping (E-step: run the merge stages to get one
feature row and class target per produced instance) with a gradient step
(M-step: cross-entropy of a small classifier on those rows, backpropagated
through pooling, graph convolutions and extractors).  Merge decisions are
control flow, not part of the differentiated graph; the gradient check
replays the recorded decisions while perturbing parameters so both gradient
routes see the same grouping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn

from .config import PipelineConfig
from .errors import ValidationError
from .network import DTYPE, GroupingNet, init_uniform
from .pipeline import ForwardResult, ForwardTrace, SceneInputs, grouping_forward
from .seggraph import SegmentGraph


class InstanceClassifier(nn.Module):
    """256 -> 128 -> num_classes, relu between, trained jointly with the net."""

    def __init__(self, num_classes: int, hidden: int = 128):
        super().__init__()
        if num_classes < 2:
            raise ValidationError("need at least two classes", field="num_classes")
        self.fc1 = nn.Linear(GroupingNet.FINAL_DIM, hidden).to(DTYPE)
        self.fc2 = nn.Linear(hidden, num_classes).to(DTYPE)
        self.num_classes = num_classes

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.fc2(torch.relu(self.fc1(features)))


def cross_entropy(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean negative log-softmax at the target, max-subtracted for stability."""
    z = logits - logits.max(dim=1, keepdim=True).values
    log_norm = torch.log(torch.exp(z).sum(dim=1))
    picked = z[torch.arange(len(targets)), targets]
    return (log_norm - picked).mean()


class MomentumSGD:
    """v <- momentum * v + grad; p <- p - lr * v."""

    def __init__(self, params, lr: float, momentum: float):
        self.params = [p for p in params if p.requires_grad]
        self.lr = lr
        self.momentum = momentum
        self.velocity = [torch.zeros_like(p) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    @torch.no_grad()
    def step(self) -> None:
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            v.mul_(self.momentum).add_(p.grad)
            p.add_(v, alpha=-self.lr)


@torch.no_grad()
def clip_gradients(params, limit: float) -> float:
    """Scale all ``p.grad`` so their global L2 norm is at most ``limit``.

    Per-scene steps at a fixed learning rate are prone to a feedback loop:
    once the pooled features grow, a single late reassignment produces a
    gradient proportional to the feature scale and momentum turns it into a
    runaway step.  Capping the step size breaks the loop without touching
    the update rule.  Returns the pre-clip norm.
    """
    grads = [p.grad for p in params if p.grad is not None]
    if not grads:
        return 0.0
    total = torch.sqrt(sum((g ** 2).sum() for g in grads))
    if total > limit:
        for g in grads:
            g.mul_(limit / total)
    return float(total)


@dataclass
class SceneBundle:
    """Everything constant across epochs for one training scene."""
    name: str
    inputs: SceneInputs
    graph: SegmentGraph


@dataclass
class TrainLog:
    epoch_losses: list = field(default_factory=list)
    scene_names: list = field(default_factory=list)


def scene_loss(bundle: SceneBundle, net: GroupingNet,
               classifier: InstanceClassifier,
               replay: ForwardTrace | None = None
               ) -> tuple[torch.Tensor, ForwardResult]:
    """Cross-entropy over the instances the grouping produced for one scene."""
    result = grouping_forward(bundle.inputs, bundle.graph, net, replay)
    final = result.final_graph
    targets = torch.tensor([lab[0] for lab in final.node_labels],
                           dtype=torch.int64)
    if int(targets.max()) >= classifier.num_classes:
        raise ValidationError(
            f"scene {bundle.name!r} labels class {int(targets.max())} but the "
            f"classifier has {classifier.num_classes} outputs")
    logits = classifier(final.features)
    return cross_entropy(logits, targets), result


def train(bundles: list[SceneBundle], net: GroupingNet,
          classifier: InstanceClassifier, config: PipelineConfig) -> TrainLog:
    """Run the alternating loop for ``config.epochs`` over all scenes.

    Scenes are visited in list order every epoch; the logged value per epoch
    is the mean of the per-scene losses.  A non-finite loss aborts
    immediately, naming the scene.
    """
    if not bundles:
        raise ValidationError("no training scenes", field="bundles")
    params = list(net.parameters()) + list(classifier.parameters())
    opt = MomentumSGD(params, config.learning_rate, config.momentum)
    log = TrainLog(scene_names=[b.name for b in bundles])
    for epoch in range(config.epochs):
        total = 0.0
        for bundle in bundles:
            opt.zero_grad()
            loss, result = scene_loss(bundle, net, classifier)
            value = loss.item()
            if not math.isfinite(value):
                raise ValidationError(
                    f"non-finite loss ({value}) on scene {bundle.name!r} "
                    f"at epoch {epoch}")
            if config.grad_mode == "analytic":
                loss.backward()
            else:
                _numeric_backward(bundle, net, classifier, opt.params,
                                  result.trace)
            clip_gradients(opt.params, config.grad_clip)
            opt.step()
            total += value
        log.epoch_losses.append(total / len(bundles))
    return log


def _replayed_loss(bundle: SceneBundle, net: GroupingNet,
                   classifier: InstanceClassifier, trace: ForwardTrace) -> float:
    with torch.no_grad():
        loss, _ = scene_loss(bundle, net, classifier, replay=trace)
    return float(loss)


def _numeric_backward(bundle: SceneBundle, net: GroupingNet,
                      classifier: InstanceClassifier, params,
                      trace: ForwardTrace, epsilon: float = 1e-5) -> None:
    """Fill ``p.grad`` by central differences at fixed grouping decisions.

    Two replayed forwards per parameter coordinate: exact but slow, so only
    sensible with most parameters frozen (``requires_grad_(False)``).
    """
    for p in params:
        grad = torch.zeros_like(p)
        flat = p.data.view(-1)
        gflat = grad.view(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + epsilon
            up = _replayed_loss(bundle, net, classifier, trace)
            flat[i] = orig - epsilon
            down = _replayed_loss(bundle, net, classifier, trace)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * epsilon)
        p.grad = grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    num_checked: int
    entries: list  # (param name, flat index, analytic, numeric, rel error)


def grad_check(bundle: SceneBundle, net: GroupingNet,
               classifier: InstanceClassifier, num_samples: int = 200,
               epsilon: float = 1e-5, seed: int = 0,
               analytic_override: dict | None = None) -> GradCheckReport:
    """Compare autograd against central differences on sampled coordinates.

    Relative error per coordinate is |a - n| / max(1e-8, |a| + |n|).  The
    grouping decisions recorded by the unperturbed forward are replayed for
    every perturbed evaluation.  ``analytic_override`` substitutes supplied
    gradients (name -> tensor) for autograd's, which lets a test prove the
    check fails on corrupted values.
    """
    named = [(f"net.{n}", p) for n, p in net.named_parameters()]
    named += [(f"classifier.{n}", p) for n, p in classifier.named_parameters()]
    for _, p in named:
        p.grad = None
    loss, result = scene_loss(bundle, net, classifier)
    loss.backward()
    analytic = {name: p.grad.detach().clone() for name, p in named}
    if analytic_override:
        unknown = sorted(set(analytic_override) - set(analytic))
        if unknown:
            raise ValidationError(f"unknown parameter {unknown[0]!r}")
        analytic.update({k: torch.as_tensor(v, dtype=DTYPE)
                         for k, v in analytic_override.items()})

    sizes = [p.numel() for _, p in named]
    total = sum(sizes)
    rng = torch.Generator().manual_seed(seed)
    count = min(num_samples, total)
    coords = sorted(torch.randperm(total, generator=rng)[:count].tolist())

    entries = []
    worst = (0.0, "")
    for coord in coords:
        pi = 0
        while coord >= sizes[pi]:
            coord -= sizes[pi]
            pi += 1
        name, p = named[pi]
        flat = p.data.view(-1)
        orig = flat[coord].item()
        flat[coord] = orig + epsilon
        up = _replayed_loss(bundle, net, classifier, result.trace)
        flat[coord] = orig - epsilon
        down = _replayed_loss(bundle, net, classifier, result.trace)
        flat[coord] = orig
        numeric = (up - down) / (2 * epsilon)
        a = float(analytic[name].view(-1)[coord])
        rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
        entries.append((name, coord, a, numeric, rel))
        if rel > worst[0]:
            worst = (rel, name)
    return GradCheckReport(max_rel_error=worst[0], worst_param=worst[1],
                           num_checked=len(entries), entries=entries)


def init_models(num_classes: int, config: PipelineConfig
                ) -> tuple[GroupingNet, InstanceClassifier]:
    """Fresh grouping net + classifier, both from the config's seed and gain."""
    net = GroupingNet(lam=config.lam, k_points=config.knn_points,
                      seed=config.seed, gain=config.init_gain)
    classifier = InstanceClassifier(num_classes)
    init_uniform(classifier, seed=config.seed + 1, gain=config.init_gain)
    return net, classifier


def save_checkpoint(path, net: GroupingNet, classifier: InstanceClassifier,
                    config: PipelineConfig, epoch_losses=()) -> None:
    """Write models + config as JSON; floats round-trip exactly via repr."""
    from .sceneio import write_json
    write_json({
        "config": config.to_dict(),
        "num_classes": classifier.num_classes,
        "epoch_losses": list(epoch_losses),
        "net": {n: p.detach().tolist() for n, p in net.named_parameters()},
        "classifier": {n: p.detach().tolist()
                       for n, p in classifier.named_parameters()},
    }, path)


def load_checkpoint(path) -> tuple[GroupingNet, InstanceClassifier,
                                   PipelineConfig, list]:
    from .sceneio import read_json
    data = read_json(path)
    for key in ("config", "num_classes", "net", "classifier"):
        if key not in data:
            raise ValidationError(f"checkpoint is missing {key!r}", field=key)
    config = PipelineConfig.from_dict(data["config"])
    net, classifier = init_models(int(data["num_classes"]), config)
    for model, stored in ((net, data["net"]), (classifier, data["classifier"])):
        for name, p in model.named_parameters():
            if name not in stored:
                raise ValidationError(f"checkpoint is missing parameter {name!r}")
            value = torch.tensor(stored[name], dtype=DTYPE)
            if value.shape != p.shape:
                raise ValidationError(
                    f"parameter {name!r} has shape {tuple(value.shape)}, "
                    f"expected {tuple(p.shape)}")
            with torch.no_grad():
                p.copy_(value)
    return net, classifier, config, list(data.get("epoch_losses", []))
