"""Trainable pieces of the grouping network, in double precision torch.

Three EdgeConv-style segment feature extractors (one structural, two
semantic), an exponential distance-kernel similarity, and a graph
convolution whose coefficients are those similarities normalized per node.
Everything runs on CPU float64 so gradients can be validated against central
finite differences.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn

from .errors import ValidationError

DTYPE = torch.float64


def similarity(h_i, h_j, lam: float):
    """exp(-lam * ||h_i - h_j||_2); equals 1 for identical features."""
    if lam <= 0:
        raise ValidationError("lam must be positive", field="lam")
    a = torch.as_tensor(h_i, dtype=DTYPE)
    b = torch.as_tensor(h_j, dtype=DTYPE)
    if a.shape != b.shape:
        raise ValidationError("feature dimensions differ")
    return torch.exp(-lam * torch.linalg.vector_norm(a - b))


def edge_similarities(features: torch.Tensor, edges, lam: float) -> torch.Tensor:
    """Similarity per (a, b) edge pair, differentiable in the features."""
    if not len(edges):
        return features.new_zeros((0,))
    idx = torch.as_tensor(np.asarray(edges, dtype=np.int64).reshape(-1, 2))
    diff = features[idx[:, 0]] - features[idx[:, 1]]
    return torch.exp(-lam * torch.linalg.vector_norm(diff, dim=1))


def gcn_coefficients(features: torch.Tensor, edges, lam: float) -> torch.Tensor:
    """Dense M x M attention matrix: row i holds a_ii and a_ik for k in N_i.

    a_ij = e_ij / (e_ii + sum_k e_ik) with e_ii = 1, so every row of
    coefficients over {i} + N_i sums to exactly 1.
    """
    m = features.shape[0]
    e = edge_similarities(features, edges, lam)
    denom = features.new_ones(m)
    if len(edges):
        idx = torch.as_tensor(np.asarray(edges, dtype=np.int64).reshape(-1, 2))
        denom = denom.index_add(0, idx[:, 0], e).index_add(0, idx[:, 1], e)
    coeff = features.new_zeros((m, m))
    ar = torch.arange(m)
    coeff[ar, ar] = 1.0 / denom
    if len(edges):
        coeff[idx[:, 0], idx[:, 1]] = e / denom[idx[:, 0]]
        coeff[idx[:, 1], idx[:, 0]] = e / denom[idx[:, 1]]
    return coeff


class GraphConv(nn.Module):
    """h_i' = relu(sum_j a_ij W h_j) over the node's closed neighborhood."""

    def __init__(self, dim: int, lam: float = 0.125):
        super().__init__()
        self.dim = dim
        self.lam = lam
        self.weight = nn.Parameter(torch.empty(dim, dim, dtype=DTYPE))

    def forward(self, features: torch.Tensor, edges) -> torch.Tensor:
        if features.shape[1] != self.dim:
            raise ValidationError(
                f"expected {self.dim}-dim features, got {features.shape[1]}")
        coeff = gcn_coefficients(features, edges, self.lam)
        return torch.relu(coeff @ (features @ self.weight.T))


class EdgeConvExtractor(nn.Module):
    """Per-segment feature from a fixed-size sampled point array.

    For every sampled point, edge features MLP(concat(x_i, x_j - x_i)) are
    computed over its k nearest sampled points (by XYZ, self included) with a
    relu after each layer, max-reduced over neighbors, then pooled over the
    points: "max" keeps the MLP width, "max_and_avg" concatenates both pools
    and doubles it.
    """

    def __init__(self, in_channels: int, widths, k_points: int = 8,
                 pooling: str = "max"):
        super().__init__()
        if pooling not in ("max", "max_and_avg"):
            raise ValidationError(f"unknown pooling {pooling!r}", field="pooling")
        self.in_channels = in_channels
        self.k_points = k_points
        self.pooling = pooling
        layers = []
        prev = 2 * in_channels
        for w in widths:
            layers.append(nn.Linear(prev, w).to(DTYPE))
            prev = w
        self.layers = nn.ModuleList(layers)
        self.out_channels = prev * (2 if pooling == "max_and_avg" else 1)

    def forward(self, clouds: torch.Tensor) -> torch.Tensor:
        """clouds: (M, S, C) sampled segment point arrays -> (M, out) features."""
        if clouds.ndim != 3 or clouds.shape[2] != self.in_channels:
            raise ValidationError(
                f"expected (M, S, {self.in_channels}) input, got {tuple(clouds.shape)}")
        m, s, _ = clouds.shape
        k = min(self.k_points, s)
        with torch.no_grad():
            xyz = clouds[..., :3]
            dist = torch.cdist(xyz, xyz)
            idx = torch.argsort(dist, dim=-1, stable=True)[..., :k]  # self included
        gathered = torch.gather(
            clouds.unsqueeze(2).expand(m, s, k, clouds.shape[2]), 1,
            idx.unsqueeze(-1).expand(m, s, k, clouds.shape[2]))
        center = clouds.unsqueeze(2).expand_as(gathered)
        h = torch.cat([center, gathered - center], dim=-1)
        for layer in self.layers:
            h = torch.relu(layer(h))
        per_point = h.max(dim=2).values          # reduce over neighbors
        pooled = per_point.max(dim=1).values     # reduce over points
        if self.pooling == "max_and_avg":
            pooled = torch.cat([pooled, per_point.mean(dim=1)], dim=1)
        return pooled


class GroupingNet(nn.Module):
    """All trainable parameters of the grouping stages.

    Structural extractor: 6-dim inputs, one MLP layer (64), max+avg pooling
    -> 128.  Semantic extractors: 9-dim inputs, one layer (64) and two
    layers (64, 64), max pooling -> 64 each.  Graph convolutions keep their
    input width (192 after the first concat, 256 after the second).
    """

    STRUCTURAL_DIM = 128
    FINAL_DIM = 256

    def __init__(self, lam: float = 0.125, k_points: int = 8,
                 seed: int = 0, gain: float = 1.0):
        super().__init__()
        self.structural = EdgeConvExtractor(6, [64], k_points, pooling="max_and_avg")
        self.semantic1 = EdgeConvExtractor(9, [64], k_points, pooling="max")
        self.semantic2 = EdgeConvExtractor(9, [64, 64], k_points, pooling="max")
        self.gcn1 = GraphConv(self.STRUCTURAL_DIM + 64, lam)
        self.gcn2 = GraphConv(self.STRUCTURAL_DIM + 64 + 64, lam)
        self.reset_parameters(seed, gain)

    def reset_parameters(self, seed: int, gain: float = 1.0) -> None:
        init_uniform(self, seed, gain)


def init_uniform(module: nn.Module, seed: int, gain: float = 1.0) -> None:
    """Seeded uniform init in [-s, s], s = gain / sqrt(fan_in), applied to
    weights and biases alike, in named-parameter order."""
    gen = torch.Generator().manual_seed(seed)
    for name, p in module.named_parameters():
        fan_in = p.shape[1] if p.ndim >= 2 else _bias_fan_in(module, name)
        s = gain / math.sqrt(fan_in)
        with torch.no_grad():
            p.uniform_(-s, s, generator=gen)


def _bias_fan_in(module: nn.Module, bias_name: str) -> int:
    weight_name = bias_name.rsplit(".", 1)[0] + ".weight"
    for name, p in module.named_parameters():
        if name == weight_name:
            return p.shape[1]
    return 1


def unit_sphere(xyz: np.ndarray) -> np.ndarray:
    """Center a point set and scale it into the unit sphere."""
    centered = xyz - xyz.mean(axis=0, keepdims=True)
    radius = np.linalg.norm(centered, axis=1).max()
    if radius > 0:
        centered = centered / radius
    return centered
