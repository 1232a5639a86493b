"""Three chained pointer networks: which area, which start corner, which scan pattern.

All functions are batched: leading axis B indexes independent decoding states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


class DecoderExhaustedError(RuntimeError):
    pass


class NonFiniteLogitsError(FloatingPointError):
    pass


@dataclass
class StageDistribution:
    probs: torch.Tensor  # (B, K)
    log_probs: torch.Tensor  # (B, K), -inf where masked
    logits: torch.Tensor | None = None  # clipped scores before masking


def masked_softmax(logits, mask=None) -> StageDistribution:
    if bool(torch.isnan(logits).any()):
        raise NonFiniteLogitsError("NaN in pointer logits")
    raw = logits
    if mask is not None:
        if bool((~mask).all(-1).any()):
            raise DecoderExhaustedError("no selectable candidate left")
        logits = logits.masked_fill(~mask, float("-inf"))
    log_probs = torch.log_softmax(logits, dim=-1)
    return StageDistribution(log_probs.exp(), log_probs, raw)


def attention(query, keys, values, heads=1, mask=None):
    """Multi-head dot-product attention of one query per batch row.

    query (B, d), keys (B, K, d), values (B, K, d), mask (B, K) True = visible.
    Heads are concatenated without an output projection.
    """
    B, K, d = keys.shape
    hd = d // heads
    q = query.view(B, heads, 1, hd)
    k = keys.view(B, K, heads, hd).transpose(1, 2)
    v = values.view(B, K, heads, hd).transpose(1, 2)
    scores = (q @ k.transpose(-1, -2)) / math.sqrt(hd)  # (B, H, 1, K)
    if mask is not None:
        scores = scores.masked_fill(~mask[:, None, None, :], float("-inf"))
    weights = torch.softmax(scores, dim=-1)
    return (weights @ v).reshape(B, d)


def clipped_pointer(query, keys, scale, clip):
    """clip * tanh(q . k / sqrt(scale)) for each key. query (B, d), keys (B, K, d)."""
    return clip * torch.tanh(torch.einsum("bd,bkd->bk", query, keys) / math.sqrt(scale))


class DecoderParams(nn.Module):
    """Learnable weights of the three decoder networks (all linear maps bias-free)."""

    def __init__(self, dim=128, heads=8, corner_dim=128, pattern_dim=128, clip=10.0):
        super().__init__()
        if dim % heads:
            raise ValueError(f"heads={heads} must divide dim={dim}")
        self.dim, self.heads, self.clip = dim, heads, clip
        self.corner_dim, self.pattern_dim = corner_dim, pattern_dim
        lin = lambda i, o: nn.Linear(i, o, bias=False)  # noqa: E731
        # area network
        self.W_F = lin(6 * dim, dim)
        self.W_C1, self.W_A1, self.W_A2 = lin(dim, dim), lin(dim, dim), lin(dim, dim)
        self.W_Q1, self.W_K1 = lin(dim, dim), lin(dim, dim)
        self.first_placeholder = nn.Parameter(torch.zeros(dim))
        self.last_placeholder = nn.Parameter(torch.zeros(dim))
        self.area_placeholder = nn.Parameter(torch.zeros(dim))
        # corner network
        self.W_C2, self.W_Lam = lin(2, corner_dim), lin(2, corner_dim)
        self.W_Lam1, self.W_Lam2 = lin(corner_dim, corner_dim), lin(corner_dim, corner_dim)
        self.W_Q2, self.W_K2 = lin(corner_dim, corner_dim), lin(2, corner_dim)
        # pattern network
        self.W_C3, self.W_Psi1, self.W_Psi2 = lin(2, pattern_dim), lin(2, pattern_dim), lin(2, pattern_dim)
        self.W_Q3, self.W_K3 = lin(pattern_dim, pattern_dim), lin(2, pattern_dim)


def build_context(params: DecoderParams, graph_mean, first_area, last_area, start_agent, current_agent, current_area):
    """Fuse the six context slots; ``None`` slots take the learned placeholders.

    Each argument is (B, d) or None (undefined for the whole batch); a tuple
    ``(values, defined)`` with a (B,) bool mask mixes defined and undefined rows.
    """

    def slot(value, placeholder):
        if value is None:
            return placeholder.expand_as(graph_mean)
        if isinstance(value, tuple):
            values, defined = value
            return torch.where(defined.unsqueeze(-1), values, placeholder.expand_as(values))
        return value

    parts = [
        graph_mean,
        slot(first_area, params.first_placeholder),
        slot(last_area, params.last_placeholder),
        start_agent,
        current_agent,
        slot(current_area, params.area_placeholder),
    ]
    return params.W_F(torch.cat(parts, dim=-1))


def refine_context(params: DecoderParams, context, node_h, available):
    """Multi-head attention of the fused context over the unassigned areas."""
    return attention(params.W_C1(context), params.W_A1(node_h), params.W_A2(node_h), params.heads, available)


def area_logits(params: DecoderParams, refined, node_h, available) -> StageDistribution:
    logits = clipped_pointer(params.W_Q1(refined), params.W_K1(node_h), params.dim, params.clip)
    return masked_softmax(logits, available)


def area_frame(position, corners):
    """Express the agent and the corners in the chosen area's own frame.

    Corners become offsets from the centre in units of the half side (the
    sign patterns (+-1, +-1)); the agent becomes the unit direction from the
    centre. In absolute coordinates a bilinear score cannot tell which corner
    faces the agent, since that depends on the sign of position - centre.
    """
    center = corners.mean(1)
    half = (corners[:, 2] - corners[:, 0]) / 2
    local = (corners - center.unsqueeze(1)) / half.unsqueeze(1)
    direction = torch.nn.functional.normalize(position - center, dim=-1)
    return direction, local


def corner_logits(params: DecoderParams, position, corners) -> StageDistribution:
    """position (B, 2) current agent location, corners (B, 4, 2) of the chosen area."""
    direction, local = area_frame(position, corners)
    query = params.W_C2(direction)
    embedded = params.W_Lam(local)
    context = attention(query, params.W_Lam1(embedded), params.W_Lam2(embedded))
    logits = clipped_pointer(params.W_Q2(context), params.W_K2(local), params.corner_dim, params.clip)
    return masked_softmax(logits)


def pattern_logits(params: DecoderParams, start_corner, endpoints) -> StageDistribution:
    """start_corner (B, 2), endpoints (B, p, 2) scan end point of each pattern."""
    query = params.W_C3(start_corner)
    context = attention(query, params.W_Psi1(endpoints), params.W_Psi2(endpoints))
    logits = clipped_pointer(params.W_Q3(context), params.W_K3(endpoints), params.pattern_dim, params.clip)
    return masked_softmax(logits)


def choose(dist: StageDistribution, mode: str, uniforms=None, forced=None) -> torch.Tensor:
    """Pick one index per row: greedy argmax (lowest index on ties), inverse-CDF sampling, or forced."""
    if forced is not None:
        return torch.as_tensor(forced, dtype=torch.long)
    if mode == "greedy":
        return dist.probs.argmax(-1)
    if mode != "sample":
        raise ValueError(f"unknown decode mode {mode!r}")
    probs = dist.probs.detach().double().cpu().numpy()
    cum = np.cumsum(probs, axis=1)
    target = np.asarray(uniforms) * cum[:, -1]
    idx = (cum <= target[:, None]).sum(1)
    # float round-off can push the draw past the last supported candidate
    last_valid = probs.shape[1] - 1 - np.argmax(probs[:, ::-1] > 0, axis=1)
    idx = np.minimum(idx, last_valid)
    return torch.from_numpy(idx)


def gather_rows(x, idx):
    """x (B, K, ...) indexed by idx (B,) -> (B, ...)."""
    return x[torch.arange(x.shape[0]), idx]


def select_action(params, context_args, node_h, available, positions, corners, endpoint_fn, mode,
                  uniforms=None, forced=None):
    """Chain the three stages for one agent per batch row.

    ``context_args`` are the build_context slots, ``positions`` (B, 2) the acting
    agents' locations, ``corners`` (B, n, 4, 2), ``endpoint_fn(area, corner)``
    returns (B, p, 2) pattern end points. ``uniforms`` is (B, 3) draws for
    sampling, ``forced`` a (B, 3) array of actions to replay.

    Returns ``(actions (B, 3) long, stage_log_probs (B, 3))``.
    """
    fa = None if forced is None else forced[:, 0]
    fk = None if forced is None else forced[:, 1]
    fz = None if forced is None else forced[:, 2]
    u = (None, None, None) if uniforms is None else (uniforms[:, 0], uniforms[:, 1], uniforms[:, 2])

    context = build_context(params, *context_args)
    refined = refine_context(params, context, node_h, available)
    d_area = area_logits(params, refined, node_h, available)
    area = choose(d_area, mode, u[0], fa)

    area_corners = gather_rows(corners, area)
    d_corner = corner_logits(params, positions, area_corners)
    corner = choose(d_corner, mode, u[1], fk)

    start = gather_rows(area_corners, corner)
    d_pattern = pattern_logits(params, start, endpoint_fn(area, corner))
    pattern = choose(d_pattern, mode, u[2], fz)

    log_probs = torch.stack(
        [gather_rows(d_area.log_probs, area), gather_rows(d_corner.log_probs, corner),
         gather_rows(d_pattern.log_probs, pattern)],
        dim=-1,
    )
    return torch.stack([area, corner, pattern], dim=-1), log_probs
