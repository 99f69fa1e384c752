"""Representation learners mapping the embedded fields to ``r_b``."""
import math

import torch
from torch import nn

from .errors import DimensionError
from .layers import MLP, init_linear_


class MLPBackbone(nn.Module):
    def __init__(self, in_dim, hidden):
        super().__init__()
        self.in_dim = in_dim
        self.mlp = MLP(in_dim, hidden, final_activation=True)
        self.out_dim = self.mlp.out_dim

    def forward(self, e):
        x = e.reshape(e.shape[0], -1)
        if x.shape[1] != self.in_dim:
            raise DimensionError(f"backbone expects {self.in_dim} inputs, got {x.shape[1]}")
        return self.mlp(x)

    def reset_parameters(self, generator):
        init_linear_(self, generator)
        return self


class CrossNetwork(nn.Module):
    """Explicit crosses ``x_{l+1} = x_0 * (x_l . w_l) + b_l + x_l``."""

    def __init__(self, in_dim, depth):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(depth, in_dim))
        self.bias = nn.Parameter(torch.zeros(depth, in_dim))

    def forward(self, x0):
        x = x0
        for w, b in zip(self.weight, self.bias):
            x = x0 * (x @ w).unsqueeze(-1) + b + x
        return x

    def reset_parameters(self, generator):
        bound = 1.0 / math.sqrt(self.weight.shape[1])
        with torch.no_grad():
            nn.init.uniform_(self.weight, -bound, bound, generator=generator)
            self.bias.zero_()
        return self


class DCNBackbone(nn.Module):
    """Cross network and deep stack side by side; outputs are concatenated."""

    def __init__(self, in_dim, hidden, cross_depth):
        super().__init__()
        self.in_dim = in_dim
        self.cross = CrossNetwork(in_dim, cross_depth)
        self.deep = MLP(in_dim, hidden, final_activation=True)
        self.out_dim = in_dim + self.deep.out_dim

    def forward(self, e):
        x = e.reshape(e.shape[0], -1)
        if x.shape[1] != self.in_dim:
            raise DimensionError(f"backbone expects {self.in_dim} inputs, got {x.shape[1]}")
        return torch.cat([self.cross(x), self.deep(x)], dim=1)

    def reset_parameters(self, generator):
        self.cross.reset_parameters(generator)
        init_linear_(self.deep, generator)
        return self


def build_backbone(cfg, n_fields, dim):
    in_dim = n_fields * dim
    if cfg.kind == "mlp":
        return MLPBackbone(in_dim, cfg.hidden)
    if cfg.kind == "dcn":
        return DCNBackbone(in_dim, cfg.hidden, cfg.cross_depth)
    raise DimensionError(f"unknown backbone kind {cfg.kind!r}")
