"""Gated graph-convolution encoders for areas and agents."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .instance import FEATURE_DIM


class FeatureBatchNorm(nn.Module):
    """Batch norm over every leading axis, features last.

    Unlike ``nn.BatchNorm1d`` this accepts a single sample in training mode
    (variance 0, so the output collapses to the shift). Running averages use
    ``running = momentum * running + (1 - momentum) * batch``.
    """

    def __init__(self, dim: int, momentum: float = 0.9, eps: float = 1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.weight = nn.Parameter(torch.ones(dim))
        self.bias = nn.Parameter(torch.zeros(dim))
        self.register_buffer("running_mean", torch.zeros(dim))
        self.register_buffer("running_var", torch.ones(dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        flat = x.reshape(-1, x.shape[-1])
        if self.training:
            mean = flat.mean(0)
            var = flat.var(0, unbiased=False)
            with torch.no_grad():
                self.running_mean.mul_(self.momentum).add_((1 - self.momentum) * mean.detach())
                self.running_var.mul_(self.momentum).add_((1 - self.momentum) * var.detach())
        else:
            mean, var = self.running_mean, self.running_var
        return (x - mean) / torch.sqrt(var + self.eps) * self.weight + self.bias


class GatedLayer(nn.Module):
    """One residual gated graph-convolution layer over node and edge features."""

    def __init__(self, dim: int):
        super().__init__()
        self.U = nn.Linear(dim, dim, bias=False)
        self.V = nn.Linear(dim, dim, bias=False)
        self.A = nn.Linear(dim, dim, bias=False)
        self.B = nn.Linear(dim, dim, bias=False)
        self.C = nn.Linear(dim, dim, bias=False)
        self.node_norm = FeatureBatchNorm(dim)
        self.edge_norm = FeatureBatchNorm(dim)

    def forward(self, h, e, mask):
        """h: (B, n, d), e: (B, n, n, d), mask: (B, n, n) bool neighbour mask."""
        gate = torch.sigmoid(e) * mask.unsqueeze(-1)
        vh = self.V(h)
        # mean over neighbours; isolated nodes aggregate to zero
        degree = mask.sum(-1, keepdim=True).clamp(min=1).to(h.dtype)
        agg = torch.einsum("bijd,bjd->bid", gate, vh) / degree
        h_new = h + torch.relu(self.node_norm(self.U(h) + agg))

        bh, ch = self.B(h), self.C(h)
        e_new = e + torch.relu(self.edge_norm(self.A(e) + bh.unsqueeze(2) + ch.unsqueeze(1)))
        return h_new, e_new


@dataclass
class Embeddings:
    h: torch.Tensor  # (B, n, d)
    e: torch.Tensor  # (B, n, n, d)


class GraphEncoder(nn.Module):
    """Input projection followed by ``layers`` gated layers.

    Points are projected from ``in_dim`` coordinates and edges from the scalar
    Euclidean distance between ``positions``.
    """

    def __init__(self, in_dim: int, dim: int = 128, layers: int = 3):
        super().__init__()
        self.node_proj = nn.Linear(in_dim, dim)
        self.edge_proj = nn.Linear(1, dim)
        self.layers = nn.ModuleList(GatedLayer(dim) for _ in range(layers))

    def init_embeddings(self, features, positions):
        h = self.node_proj(features)
        dist = (positions.unsqueeze(2) - positions.unsqueeze(1)).norm(dim=-1, keepdim=True)
        e = self.edge_proj(dist)
        return h, e

    def forward(self, features, positions, mask=None) -> Embeddings:
        h, e = self.init_embeddings(features, positions)
        if mask is None:
            mask = complete_mask(features.shape[0], features.shape[1], features.device)
        for layer in self.layers:
            h, e = layer(h, e, mask)
        return Embeddings(h, e)


def complete_mask(batch: int, size: int, device=None) -> torch.Tensor:
    eye = torch.eye(size, dtype=torch.bool, device=device)
    return (~eye).expand(batch, size, size)


def node_encoder(dim: int = 128, layers: int = 3) -> GraphEncoder:
    return GraphEncoder(FEATURE_DIM, dim, layers)


def agent_encoder(dim: int = 128, layers: int = 3) -> GraphEncoder:
    return GraphEncoder(2, dim, layers)


def encode_nodes(encoder: GraphEncoder, features, centers, adjacency) -> Embeddings:
    """features (B, n, 8), centers (B, n, 2), adjacency (B, n, n) weights."""
    return encoder(features, centers, adjacency > 0)


def encode_agents(encoder: GraphEncoder, positions) -> Embeddings:
    """positions (B, m, 2); the agent graph is complete."""
    return encoder(positions, positions)


def uniform_init_(module: nn.Module, dim: int) -> None:
    """Fan-in style uniform init in [-1/sqrt(d), 1/sqrt(d)] for every weight and bias.

    Batch-norm scale/shift keep their identity initialization.
    """
    bound = 1.0 / math.sqrt(dim)
    for name, p in module.named_parameters():
        if "norm" in name:
            continue
        nn.init.uniform_(p, -bound, bound)
