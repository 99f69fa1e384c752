"""Field-wise embedding lookup producing the personal / other-user / item blocks."""
import math
from dataclasses import dataclass

import torch
from torch import nn

from .errors import EmbeddingLookupError


@dataclass
class EmbeddedBatch:
    personal: torch.Tensor   # (B, n_personal, d)
    other: torch.Tensor      # (B, n_other, d)
    item: torch.Tensor       # (B, n_item, d)

    @property
    def user(self):
        return torch.cat([self.personal, self.other], dim=1)

    @property
    def all(self):
        return torch.cat([self.personal, self.other, self.item], dim=1)

    @staticmethod
    def flat(t):
        return t.reshape(t.shape[0], -1)


class FeatureEmbedding(nn.Module):
    """One ``(cardinality, d)`` table per schema field."""

    def __init__(self, schema, dim=16):
        super().__init__()
        self.schema = schema
        self.dim = dim
        self.tables = nn.ModuleList(nn.Embedding(f.cardinality, dim) for f in schema.fields)
        self.register_buffer("cardinality", torch.tensor(schema.cardinalities, dtype=torch.long), persistent=False)
        self.roles = {role: schema.positions(role) for role in ("personal", "other", "item")}

    def reset_parameters(self, generator):
        bound = 1.0 / math.sqrt(self.dim)
        with torch.no_grad():
            for t in self.tables:
                nn.init.uniform_(t.weight, -bound, bound, generator=generator)
        return self

    def lookup(self, x):
        if x.dim() != 2 or x.shape[1] != len(self.tables):
            raise EmbeddingLookupError(f"expected index batch (B, {len(self.tables)}), got {tuple(x.shape)}")
        if x.numel() and ((x < 0).any() or (x >= self.cardinality).any()):
            bad = ((x < 0) | (x >= self.cardinality)).any(0).nonzero().flatten().tolist()
            raise EmbeddingLookupError(f"index out of range for fields {[self.schema.names[i] for i in bad]}")
        return [table(x[:, i]) for i, table in enumerate(self.tables)]

    def forward(self, x):
        cols = self.lookup(x)

        def block(role):
            pos = self.roles[role]
            if not pos:
                return cols[0].new_zeros(x.shape[0], 0, self.dim)
            return torch.stack([cols[i] for i in pos], dim=1)

        return EmbeddedBatch(block("personal"), block("other"), block("item"))
