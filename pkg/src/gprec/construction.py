"""Strategies that fuse ``r_b``, ``r_G`` and ``r_P`` into the final click probability."""
from dataclasses import dataclass, field

import torch
from torch import nn

from .errors import ConfigError, DimensionError
from .layers import MLP, init_linear_


class PredictionHead(nn.Module):
    """Affine/ReLU stack ending in one logit; ``forward`` returns a probability."""

    def __init__(self, in_dim, widths=(64, 32, 16, 1)):
        super().__init__()
        if list(widths)[-1] != 1:
            raise DimensionError("prediction head must end in width 1")
        self.mlp = MLP(in_dim, widths)
        self.in_dim = in_dim

    def logit(self, x, deltas=None):
        if x.shape[1] != self.in_dim:
            raise DimensionError(f"head expects width {self.in_dim}, got {x.shape[1]}")
        return self.mlp(x, deltas)

    def forward(self, x, deltas=None):
        return torch.sigmoid(self.logit(x, deltas))

    @property
    def layers(self):
        return self.mlp.layers

    def reset_parameters(self, generator):
        return init_linear_(self, generator)


@dataclass
class ConstructionOutput:
    prob: torch.Tensor
    components: dict = field(default_factory=dict)


def _cat(*parts):
    return torch.cat([p for p in parts if p is not None], dim=1)


class InputStrategy(nn.Module):
    """``f_y([r_b, r_G, r_P])``."""

    def __init__(self, base_dim, group_dim, personal_dim, widths):
        super().__init__()
        self.head = PredictionHead(base_dim + group_dim + personal_dim, widths)

    def forward(self, r_b, r_g, r_p=None):
        return ConstructionOutput(self.head(_cat(r_b, r_g, r_p)))

    def reset_parameters(self, generator):
        self.head.reset_parameters(generator)
        return self


def resolve_dp_targets(target, n_layers):
    if target == "last":
        return [n_layers - 1]
    if target == "first":
        return [0]
    if target == "all":
        return list(range(n_layers))
    idx = int(target)
    if not -n_layers <= idx < n_layers:
        raise ConfigError(f"dp target {target!r} outside a {n_layers}-layer head", [("construct.dp_target", "out of range")])
    return [idx % n_layers]


class DynamicParameterStrategy(nn.Module):
    """``f_y(r_b; theta_y + W_DP)`` with ``W_DP = reshape(f_DP([r_G, r_P]))`` per sample.

    The generated delta is added to the weight matrices of the target layers
    only (biases untouched).
    """

    def __init__(self, base_dim, group_dim, personal_dim, widths, target="last", hidden=(64,)):
        super().__init__()
        self.head = PredictionHead(base_dim, widths)
        self.targets = resolve_dp_targets(target, len(self.head.layers))
        self.shapes = [tuple(self.head.layers[i].weight.shape) for i in self.targets]
        self.sizes = [a * b for a, b in self.shapes]
        self.generator = MLP(group_dim + personal_dim, list(hidden) + [sum(self.sizes)])

    def deltas(self, r_g, r_p=None):
        flat = self.generator(_cat(r_g, r_p))
        if flat.shape[1] != sum(self.sizes):
            raise DimensionError(f"generator emits {flat.shape[1]} values, target layers need {sum(self.sizes)}")
        chunks = torch.split(flat, self.sizes, dim=1)
        return {i: c.view(-1, *s) for i, c, s in zip(self.targets, chunks, self.shapes)}

    def forward(self, r_b, r_g, r_p=None, deltas=None):
        if deltas is None:
            deltas = self.deltas(r_g, r_p)
        return ConstructionOutput(self.head(r_b, deltas))

    def reset_parameters(self, generator):
        init_linear_(self, generator)
        return self


class EnsembleStrategy(nn.Module):
    """Average of three independent predictors on ``r_b``, ``r_G`` and ``r_P``."""

    def __init__(self, base_dim, group_dim, personal_dim, widths, space="prob"):
        super().__init__()
        self.space = space
        self.base = PredictionHead(base_dim, widths)
        self.group = PredictionHead(group_dim, widths)
        self.personal = PredictionHead(personal_dim, widths) if personal_dim else None

    def forward(self, r_b, r_g, r_p=None):
        logits = {"base": self.base.logit(r_b), "group": self.group.logit(r_g)}
        if self.personal is not None:
            logits["personal"] = self.personal.logit(r_p)
        probs = {k: torch.sigmoid(v) for k, v in logits.items()}
        if self.space == "logit":
            prob = torch.sigmoid(torch.stack(list(logits.values())).mean(0))
        else:
            prob = torch.stack(list(probs.values())).mean(0)
        return ConstructionOutput(prob, probs)

    def reset_parameters(self, generator):
        init_linear_(self, generator)
        return self


def build_strategy(cfg, base_dim, group_dim, personal_dim):
    if cfg.strategy == "input":
        return InputStrategy(base_dim, group_dim, personal_dim, cfg.head)
    if cfg.strategy == "dp":
        return DynamicParameterStrategy(base_dim, group_dim, personal_dim, cfg.head, cfg.dp_target, cfg.dp_hidden)
    if cfg.strategy == "ensemble":
        return EnsembleStrategy(base_dim, group_dim, personal_dim, cfg.head, cfg.ensemble_space)
    raise ConfigError(f"unknown strategy {cfg.strategy!r}", [("construct.strategy", "input, dp or ensemble")])
