"""Learnable group division with Gumbel masks over a dual group embedding space.

Each of ``G`` groups owns a positive and a negative embedding. A classifier
over the user-feature embeddings scores membership per group as a 2-way
distribution ``(s1, s0)``; a Gumbel-Softmax relaxation turns the scores into
near-binary masks ``m1`` (with ``m0 = 1 - m1``) that blend the two embeddings.
Memberships are independent across groups, so a user may sit in several.
"""
import csv
from dataclasses import dataclass
from pathlib import Path

import math

import numpy as np
import torch
from torch import nn
from torch.func import functional_call

from .errors import ConfigError, DimensionError, DomainError, NumericError, UndefinedMetricError
from .layers import MLP, init_linear_
from .losses import bce, bce_per_sample

_TINY = 1e-20


def group_scores(logits):
    """Per-group 2-way softmax of ``(B, G, 2)`` logits, returned as ``(B, 2, G)``:
    row 0 holds the in-group scores ``s1``, row 1 the out-group scores ``s0``."""
    if not torch.isfinite(logits).all():
        raise NumericError("non-finite group classifier activations", component="group_scores")
    return torch.softmax(logits, dim=-1).transpose(1, 2)


def sample_gumbel(shape, generator=None, dtype=torch.float32):
    u = torch.rand(shape, generator=generator, dtype=dtype)
    u = u.clamp(_TINY, 1.0 - torch.finfo(dtype).eps)
    return -torch.log(-torch.log(u))


def _mask(log_s1, log_s0, tau, noise):
    a, b = log_s1, log_s0
    if noise is not None:
        a = a + noise[:, 0]
        b = b + noise[:, 1]
    # two-way softmax: exp(a/t) / (exp(a/t) + exp(b/t))
    return torch.sigmoid((a - b) / tau)


def gumbel_mask(scores, tau, noise=None, noise_enabled=False, generator=None):
    """Gumbel-Softmax masks from ``(B, 2, G)`` scores.

    Returns ``(m1, m0)``, each ``(B, G)``. With ``noise_enabled`` and no
    explicit ``noise`` tensor, Gumbel noise of shape ``(B, 2, G)`` is drawn
    from ``generator``.
    """
    if not tau > 0:
        raise ConfigError(f"temperature must be > 0, got {tau}", [("group.tau", "must be > 0")])
    if (scores <= 0).any():
        raise DomainError("group scores must be strictly positive")
    if noise is None and noise_enabled:
        noise = sample_gumbel(scores.shape, generator, scores.dtype)
    m1 = _mask(torch.log(scores[:, 0]), torch.log(scores[:, 1]), tau, noise)
    return m1, 1 - m1


def group_representation(m1, positive, negative, mode="concat"):
    """Blend dual embeddings with mask ``m1`` (and ``1 - m1``).

    Returns ``(r_group, r_contrast)``; the contrast representation swaps the
    roles of the two masks. ``concat`` keeps one slot per group
    (width ``G * d``), ``sum`` adds the groups (width ``d``).
    """
    if positive.shape != negative.shape or m1.shape[-1] != positive.shape[0]:
        raise DimensionError(f"mask {tuple(m1.shape)} incompatible with embeddings {tuple(positive.shape)}")
    m0 = 1 - m1
    w1 = m1.unsqueeze(-1)
    w0 = m0.unsqueeze(-1)
    r = w1 * positive + w0 * negative
    r_con = w0 * positive + w1 * negative
    if mode == "concat":
        return r.flatten(1), r_con.flatten(1)
    if mode == "sum":
        return r.sum(1), r_con.sum(1)
    raise ConfigError(f"unknown group mode {mode!r}", [("group.mode", "must be concat or sum")])


class GroupClassifier(nn.Module):
    """Group classifier ``g``: a trunk over flattened user embeddings, then one head per group.

    With ``shared_trunk`` the trunk is common to all groups; otherwise every
    group has its own full stack, evaluated in one batched pass.
    """

    def __init__(self, in_dim, n_groups, trunk=(64, 32), shared_trunk=True, n_out=2):
        super().__init__()
        self.n_groups, self.n_out, self.shared = n_groups, n_out, shared_trunk
        if shared_trunk:
            self.trunk = MLP(in_dim, trunk, final_activation=True)
            self.heads = nn.Linear(self.trunk.out_dim, n_groups * n_out)
        else:
            dims = [in_dim] + list(trunk) + [n_out]
            self.weights = nn.ParameterList(nn.Parameter(torch.empty(n_groups, b, a)) for a, b in zip(dims[:-1], dims[1:]))
            self.biases = nn.ParameterList(nn.Parameter(torch.empty(n_groups, b)) for b in dims[1:])

    def forward(self, x):
        if self.shared:
            out = self.heads(self.trunk(x))
            return out.view(x.shape[0], self.n_groups, self.n_out)
        h = x.unsqueeze(1).expand(-1, self.n_groups, -1)
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = torch.einsum("bgi,goi->bgo", h, w) + b
            if i < n - 1:
                h = torch.relu(h)
        return h

    def reset_parameters(self, generator):
        if self.shared:
            return init_linear_(self, generator)
        with torch.no_grad():
            for w, b in zip(self.weights, self.biases):
                bound = 1.0 / math.sqrt(w.shape[-1])
                nn.init.uniform_(w, -bound, bound, generator=generator)
                nn.init.uniform_(b, -bound, bound, generator=generator)
        return self


@dataclass
class GroupOutput:
    logits: torch.Tensor          # (B, G, 2) dual, (B, G) single
    mask: torch.Tensor            # m1 (B, G), or softmax weights for single embeddings
    r_group: torch.Tensor
    r_contrast: torch.Tensor = None
    noise: torch.Tensor = None

    @property
    def scores(self):
        return group_scores(self.logits)

    @property
    def mask_complement(self):
        return 1 - self.mask


class GroupModeling(nn.Module):
    """Group division + group embedding space producing ``r_G`` and ``r_G^Con``.

    ``dual=False`` gives the single-embedding variant: a G-way softmax over
    group logits weighting one embedding per group, with no contrast branch.
    """

    def __init__(self, user_in_dim, cfg):
        super().__init__()
        self.cfg = cfg
        self.n_groups, self.dim, self.dual = cfg.count, cfg.dim, cfg.dual
        self.mode = cfg.resolved_mode()
        self.tau = cfg.tau
        self.hard_inference = cfg.hard_inference
        self.classifier = GroupClassifier(user_in_dim, cfg.count, cfg.trunk, cfg.shared_trunk, 2 if cfg.dual else 1)
        if cfg.dual:
            self.positive = nn.Parameter(torch.empty(cfg.count, cfg.dim))
            self.negative = nn.Parameter(torch.empty(cfg.count, cfg.dim))
        else:
            self.embeddings = nn.Parameter(torch.empty(cfg.count, cfg.dim))
        self.out_dim = cfg.representation_width()

    def reset_parameters(self, generator):
        self.classifier.reset_parameters(generator)
        bound = 1.0 / math.sqrt(self.dim)
        with torch.no_grad():
            for p in ([self.positive, self.negative] if self.dual else [self.embeddings]):
                nn.init.uniform_(p, -bound, bound, generator=generator)
        return self

    def forward(self, e_user, noise=None, generator=None):
        x = e_user.reshape(e_user.shape[0], -1)
        logits = self.classifier(x)
        if not torch.isfinite(logits).all():
            raise NumericError("non-finite group classifier activations", component="group_scores")
        if not self.dual:
            weights = torch.softmax(logits.squeeze(-1), dim=-1)
            return GroupOutput(logits.squeeze(-1), weights, weights @ self.embeddings)
        log_s = torch.log_softmax(logits, dim=-1)
        if self.training:
            if noise is None:
                noise = sample_gumbel((x.shape[0], 2, self.n_groups), generator, x.dtype)
        else:
            noise = None
        m1 = _mask(log_s[..., 0], log_s[..., 1], self.tau, noise)
        if not self.training and self.hard_inference:
            m1 = (m1 > 0.5).to(m1.dtype)
        r, r_con = group_representation(m1, self.positive, self.negative, self.mode)
        return GroupOutput(logits, m1, r, r_con, noise)

    def hard_memberships(self, e_user):
        """Noise-free memberships thresholded at 0.5, ``(B, G)`` bool."""
        x = e_user.reshape(e_user.shape[0], -1)
        logits = self.classifier(x)
        if not self.dual:
            w = torch.softmax(logits.squeeze(-1), dim=-1)
            return torch.nn.functional.one_hot(w.argmax(-1), self.n_groups).bool()
        log_s = torch.log_softmax(logits, dim=-1)
        return _mask(log_s[..., 0], log_s[..., 1], self.tau, None) > 0.5


class GroupAuxHead(nn.Module):
    """``f1``: predicts the label from a group representation and the item embeddings."""

    def __init__(self, group_dim, item_dim, widths=(64, 32, 16, 1)):
        super().__init__()
        self.mlp = MLP(group_dim + item_dim, widths)

    def forward(self, r, e_item):
        return torch.sigmoid(self.mlp(torch.cat([r, e_item.reshape(e_item.shape[0], -1)], dim=1)))

    def frozen(self, r, e_item):
        """Same function with the head's parameters treated as constants."""
        params = {k: v.detach() for k, v in self.mlp.named_parameters()}
        x = torch.cat([r, e_item.reshape(e_item.shape[0], -1)], dim=1)
        return torch.sigmoid(functional_call(self.mlp, params, (x,)))

    def reset_parameters(self, generator):
        return init_linear_(self, generator)


def group_aux_loss(r_group, e_item, head, y):
    """BCE of the group-only prediction; gradients reach the head and everything upstream."""
    return bce(head(r_group, e_item), y)


def contrastive_aux_loss(r_contrast, e_item, head, y, clamp=10.0):
    """BCE of the prediction from the inverted-mask representation, head frozen.

    Per-sample losses are capped at ``clamp`` before averaging; the trainer
    subtracts this term, so it must stay bounded.
    """
    per = bce_per_sample(head.frozen(r_contrast, e_item), y)
    if clamp is not None:
        per = per.clamp(max=clamp)
    return per.mean()


def cosine_similarity_matrix(vectors):
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    if (norms == 0).any():
        raise UndefinedMetricError(f"zero-norm embedding at rows {np.where(norms == 0)[0].tolist()}")
    unit = vectors / norms[:, None]
    sim = unit @ unit.T
    return (sim + sim.T) / 2


def export_similarity(positive, negative, group_ids, path=None):
    """Cosine similarities over ``[p_i1..p_ik, n_i1..n_ik]``.

    Returns ``(matrix, labels)`` and, with ``path``, writes a labelled CSV
    with 6-decimal entries.
    """
    positive = np.asarray(positive.detach().cpu() if torch.is_tensor(positive) else positive, dtype=np.float64)
    negative = np.asarray(negative.detach().cpu() if torch.is_tensor(negative) else negative, dtype=np.float64)
    group_ids = [int(g) for g in group_ids]
    bad = [g for g in group_ids if not 0 <= g < len(positive)]
    if bad:
        raise DimensionError(f"group ids out of range: {bad}")
    vectors = np.concatenate([positive[group_ids], negative[group_ids]])
    labels = [f"p{g}" for g in group_ids] + [f"n{g}" for g in group_ids]
    matrix = cosine_similarity_matrix(vectors)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([""] + labels)
            for label, row in zip(labels, matrix):
                w.writerow([label] + [f"{v:.6f}" for v in row])
    return matrix, labels


def contrast_summary(positive, negative):
    """Mean ``cos(p_i, n_i)`` and grand-mean absolute off-diagonal similarity over all 2G embeddings."""
    positive = np.asarray(positive.detach().cpu() if torch.is_tensor(positive) else positive, dtype=np.float64)
    negative = np.asarray(negative.detach().cpu() if torch.is_tensor(negative) else negative, dtype=np.float64)
    g = len(positive)
    sim = cosine_similarity_matrix(np.concatenate([positive, negative]))
    pair = np.diag(sim[:g, g:])
    off = ~np.eye(2 * g, dtype=bool)
    return {"mean_pair_cosine": float(pair.mean()), "mean_abs_similarity": float(np.abs(sim[off]).mean())}
