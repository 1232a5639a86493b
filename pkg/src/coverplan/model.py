"""The full policy: node encoder, agent encoder and the three-stage decoder."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn

from .decoder import DecoderParams
from .encoder import agent_encoder, node_encoder, uniform_init_


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 128
    layers: int = 3
    heads: int = 8
    corner_dim: int = 128
    pattern_dim: int = 128
    clip: float = 10.0
    patterns: int = 2
    agents_encoder: bool = True

    def to_dict(self):
        return asdict(self)


class Policy(nn.Module):
    def __init__(self, config: ModelConfig = ModelConfig(), seed: int | None = 0):
        super().__init__()
        self.config = config
        self.nodes = node_encoder(config.dim, config.layers)
        # a disabled agent encoder keeps only the linear position projection
        self.agents = agent_encoder(config.dim, config.layers if config.agents_encoder else 0)
        self.decoder = DecoderParams(config.dim, config.heads, config.corner_dim, config.pattern_dim, config.clip)
        if seed is not None:
            gen_state = torch.random.get_rng_state()
            torch.manual_seed(seed)
            uniform_init_(self, config.dim)
            torch.random.set_rng_state(gen_state)

    @property
    def dtype(self):
        return next(self.parameters()).dtype

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())
