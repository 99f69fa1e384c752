"""Small building blocks shared by the backbones and GPRec heads."""
import math

import torch
from torch import nn


class MLP(nn.Module):
    """Affine layers with ReLU between them.

    ``widths`` lists output widths; the last layer is left linear unless
    ``final_activation`` is set.
    """

    def __init__(self, in_dim, widths, final_activation=False):
        super().__init__()
        dims = [in_dim] + list(widths)
        self.layers = nn.ModuleList(nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:]))
        self.final_activation = final_activation
        self.in_dim = in_dim
        self.out_dim = dims[-1]

    def forward(self, x, deltas=None):
        """``deltas`` optionally maps layer index -> per-sample weight delta ``(B, out, in)``."""
        n = len(self.layers)
        for i, layer in enumerate(self.layers):
            out = layer(x)
            if deltas is not None and i in deltas:
                out = out + torch.einsum("bi,boi->bo", x, deltas[i])
            x = out
            if i < n - 1 or self.final_activation:
                x = torch.relu(x)
        return x


def init_linear_(module, generator):
    """Uniform(+-1/sqrt(fan_in)) for every Linear weight and bias, drawn from ``generator``."""
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, nn.Linear):
                bound = 1.0 / math.sqrt(m.in_features)
                nn.init.uniform_(m.weight, -bound, bound, generator=generator)
                if m.bias is not None:
                    nn.init.uniform_(m.bias, -bound, bound, generator=generator)
    return module


def zero_(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module
