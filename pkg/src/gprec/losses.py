"""Binary cross-entropy on probabilities, shared by training and evaluation."""
import torch

EPS = 1e-7


def bce_per_sample(prob, y, eps=EPS):
    prob = prob.reshape(-1).clamp(eps, 1 - eps)
    y = y.reshape(-1).to(prob.dtype)
    return -(y * torch.log(prob) + (1 - y) * torch.log1p(-prob))


def bce(prob, y, eps=EPS):
    """Mean of ``-[y log p + (1 - y) log(1 - p)]`` with ``p`` clamped to ``[eps, 1 - eps]``."""
    return bce_per_sample(prob, y, eps).mean()
