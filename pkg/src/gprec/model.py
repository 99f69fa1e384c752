"""Backbone recommenders with and without the GPRec plug-in."""
from dataclasses import dataclass, field

import torch
from torch import nn

from .backbones import build_backbone
from .construction import PredictionHead, build_strategy
from .embedding import FeatureEmbedding
from .group import GroupAuxHead, GroupModeling, contrastive_aux_loss, group_aux_loss
from .individual import IndividualModeling, orthogonal_loss
from .losses import bce
from .seeding import torch_generator


@dataclass
class ForwardOutput:
    prob: torch.Tensor
    r_base: torch.Tensor
    group: object = None
    r_personal: torch.Tensor = None
    components: dict = field(default_factory=dict)
    embedded: object = None


@dataclass
class LossTerms:
    major: torch.Tensor
    group: torch.Tensor
    contrast: torch.Tensor
    ortho: torch.Tensor
    degenerate: int = 0
    output: ForwardOutput = None


class CTRModel(nn.Module):
    """Embedding -> backbone -> prediction, optionally with group and individual modeling.

    ``cfg`` is an :class:`~gprec.config.ExperimentConfig`; only the model,
    backbone, group, individual and construct sections are read. Each
    component is initialised from its own named seed stream, so the
    backbone path is identical with or without the plug-in.
    """

    def __init__(self, schema, cfg, seed=0):
        super().__init__()
        self.schema = schema
        self.cfg = cfg
        d = cfg.model.embedding_dim
        self.use_gprec = cfg.model.use_gprec
        self.embedding = FeatureEmbedding(schema, d)
        self.backbone = build_backbone(cfg.backbone, len(schema.fields), d)
        n_user = schema.count("personal") + schema.count("other")
        if not self.use_gprec:
            self.head = PredictionHead(self.backbone.out_dim, cfg.construct.head)
        else:
            self.group = GroupModeling(n_user * d, cfg.group)
            self.aux_head = GroupAuxHead(self.group.out_dim, schema.count("item") * d, cfg.group.aux_head)
            personal_dim = 0
            if cfg.individual.enabled:
                personal_dim = cfg.individual.dim or self.group.out_dim
                self.individual = IndividualModeling(schema.count("personal") * d, personal_dim, cfg.individual.hidden)
            self.strategy = build_strategy(cfg.construct, self.backbone.out_dim, self.group.out_dim, personal_dim)
        self.reset_parameters(seed)

    @property
    def has_individual(self):
        return self.use_gprec and hasattr(self, "individual")

    def reset_parameters(self, seed):
        for name, child in self.named_children():
            child.reset_parameters(torch_generator(seed, f"init/{name}"))
        return self

    def forward(self, x, noise=None, generator=None):
        e = self.embedding(x)
        r_b = self.backbone(e.all)
        if not self.use_gprec:
            return ForwardOutput(self.head(r_b), r_b, embedded=e)
        g = self.group(e.user, noise=noise, generator=generator)
        r_p = self.individual(e.personal) if self.has_individual else None
        out = self.strategy(r_b, g.r_group, r_p)
        return ForwardOutput(out.prob, r_b, g, r_p, out.components, e)

    def losses(self, x, y, noise=None, generator=None):
        out = self(x, noise=noise, generator=generator)
        major = bce(out.prob, y)
        zero = major.new_zeros(())
        if not self.use_gprec:
            return LossTerms(major, zero, zero, zero, 0, out)
        g, e_item = out.group, out.embedded.item
        l_group = group_aux_loss(g.r_group, e_item, self.aux_head, y)
        l_con = zero
        if g.r_contrast is not None:
            l_con = contrastive_aux_loss(g.r_contrast, e_item, self.aux_head, y, self.cfg.group.clamp_con)
        l_ortho, degenerate = zero, 0
        if out.r_personal is not None:
            l_ortho, degenerate = orthogonal_loss(g.r_group, out.r_personal, self.cfg.individual.ortho_mode)
        return LossTerms(major, l_group, l_con, l_ortho, degenerate, out)

    def parameter_groups(self):
        """Trainable parameters keyed by the component they belong to."""
        groups = {}
        for name, p in self.named_parameters():
            top = name.split(".")[0]
            if top == "group":
                key = "group_embeddings" if name.split(".")[1] in ("positive", "negative", "embeddings") else "group_classifier"
            elif top == "strategy" and ".generator." in name:
                key = "dp_generator"
            elif top == "strategy":
                key = "strategy_" + name.split(".")[1]
            else:
                key = top
            groups.setdefault(key, []).append((name, p))
        return groups


def build_model(schema, cfg, seed=0):
    return CTRModel(schema, cfg, seed)
