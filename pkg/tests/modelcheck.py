"""Shared builders for whole-model checks (gradient suite, identities)."""
import copy

import numpy as np
import torch

from gprec.config import apply_ablation
from gprec.data import FeatureSchema, Field
from gprec.group import contrastive_aux_loss, sample_gumbel
from gprec.model import build_model
from gprec.seeding import torch_generator
from gprec.training import lambdas_of, total_loss

from conftest import tiny_config
from oracles import gradient_check

STRATEGIES = ("input", "dp", "ensemble")
ABLATIONS = ("none", "v1", "v2", "v3", "v4", "v5")
# exaggerated weights so every auxiliary path is visible to finite differences
CHECK_LAMBDAS = (1.0, 0.5, 0.5)


def schema():
    return FeatureSchema((
        Field("user_id", "personal", 7),
        Field("segment", "other", 4),
        Field("item_id", "item", 6),
        Field("genre", "item", 3),
    ))


def batch(n=6, seed=0):
    rng = np.random.default_rng(seed)
    s = schema()
    idx = np.column_stack([rng.integers(1, f.cardinality, n) for f in s.fields])
    y = np.array([1, 0] * (n // 2) + [1] * (n % 2))
    return torch.as_tensor(idx), torch.as_tensor(y, dtype=torch.float64)


def wired(strategy, ablation, backbone="mlp", G=3):
    cfg = tiny_config(strategy, G)
    cfg.backbone.kind = backbone
    cfg.backbone.cross_depth = 2
    cfg.train.ablation = ablation
    cfg = apply_ablation(cfg)
    lam = tuple(c if w != 0 else 0.0 for c, w in zip(CHECK_LAMBDAS, lambdas_of(cfg)))
    model = build_model(schema(), cfg, seed=0).double()
    return model, cfg, lam


def model_gradient_errors(strategy, ablation, backbone="mlp"):
    """Max relative FD error per parameter group for one wiring, noise fixed to a recorded draw."""
    model, cfg, lam = wired(strategy, ablation, backbone)
    model.train()
    x, y = batch()
    noise = sample_gumbel((len(y), 2, cfg.group.count), torch_generator(0, "gumbel"), torch.float64)

    # The contrastive term treats the aux head as constant, so the reference
    # objective evaluates it with a snapshot of the head taken at the base point.
    frozen = copy.deepcopy(model.aux_head) if model.use_gprec else None

    def loss():
        t = model.losses(x, y, noise=noise)
        contrast = t.contrast
        if t.output.group is not None and t.output.group.r_contrast is not None:
            contrast = contrastive_aux_loss(t.output.group.r_contrast, t.output.embedded.item, frozen, y,
                                            cfg.group.clamp_con)
        return total_loss(t.major, t.group, contrast, t.ortho, lam).total

    out = {}
    for key, named in model.parameter_groups().items():
        errors = gradient_check(loss, named, k=10)
        out[key] = max(errors.values())
    return out
