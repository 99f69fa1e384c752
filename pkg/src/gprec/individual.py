"""Individual representation from personal-feature embeddings, and its decorrelation loss."""
import torch
from torch import nn

from .errors import ConfigError
from .layers import MLP, init_linear_

NORM_EPS = 1e-12


class IndividualModeling(nn.Module):
    """``f2``: flattened personal embeddings -> ``r_P``."""

    def __init__(self, in_dim, out_dim, hidden=(64,)):
        super().__init__()
        if in_dim == 0:
            raise ConfigError("no personal features declared; use the v2 ablation to drop r_P",
                              [("individual.enabled", "requires at least one personal field")])
        self.mlp = MLP(in_dim, list(hidden) + [out_dim])
        self.out_dim = out_dim

    def forward(self, e_personal):
        return self.mlp(e_personal.reshape(e_personal.shape[0], -1))

    def reset_parameters(self, generator):
        return init_linear_(self, generator)


def orthogonal_loss(r_group, r_personal, mode="raw", eps=NORM_EPS):
    """Batch mean of ``cos(r_G, r_P)``.

    ``mode`` selects the penalty on the cosine: ``raw`` (as is), ``abs`` or
    ``square``. Pairs where either norm is below ``eps`` contribute 0.
    Returns ``(loss, n_degenerate)``.
    """
    if r_group.shape != r_personal.shape:
        raise ConfigError(f"r_G {tuple(r_group.shape)} and r_P {tuple(r_personal.shape)} widths differ",
                          [("individual.dim", "must equal the group representation width")])
    tiny = torch.finfo(r_group.dtype).tiny
    # clamped before sqrt so zero vectors give zero (not NaN) gradients
    ng = (r_group * r_group).sum(-1).clamp_min(tiny).sqrt()
    np_ = (r_personal * r_personal).sum(-1).clamp_min(tiny).sqrt()
    ok = (ng >= eps) & (np_ >= eps)
    denom = torch.where(ok, ng * np_, torch.ones_like(ng))
    cos = torch.where(ok, (r_group * r_personal).sum(-1) / denom, torch.zeros_like(ng))
    if mode == "abs":
        cos = cos.abs()
    elif mode == "square":
        cos = cos * cos
    elif mode != "raw":
        raise ConfigError(f"unknown orthogonal mode {mode!r}", [("individual.ortho_mode", "raw, abs or square")])
    return cos.mean(), int((~ok).sum())
