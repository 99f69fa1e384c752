"""CTR metrics, replicate comparison and parameter sweeps."""
import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from scipy import stats

from .errors import StatisticsError, UndefinedMetricError
from .losses import EPS


@dataclass
class MetricReport:
    auc: float
    logloss: float
    n_samples: int
    seed: int = None

    def to_dict(self):
        return asdict(self)


def auc(scores, labels):
    """Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly, ties 1/2."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative label")
    ranks = stats.rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def logloss(scores, labels, eps=EPS):
    p = np.clip(np.asarray(scores, dtype=np.float64).ravel(), eps, 1 - eps)
    y = np.asarray(labels, dtype=np.float64).ravel()
    return float(np.mean(-(y * np.log(p) + (1 - y) * np.log1p(-p))))


@torch.no_grad()
def predict(model, dataset, batch_size=8192):
    was_training = model.training
    model.eval()
    x_all = torch.as_tensor(dataset.indices)
    out = []
    for start in range(0, len(dataset), batch_size):
        out.append(model(x_all[start:start + batch_size]).prob.reshape(-1).to(torch.float64))
    model.train(was_training)
    return torch.cat(out).numpy() if out else np.zeros(0)


def evaluate(model, dataset, batch_size=8192, seed=None):
    scores = predict(model, dataset, batch_size)
    return MetricReport(auc(scores, dataset.labels), logloss(scores, dataset.labels), len(dataset), seed)


@dataclass
class ComparisonResult:
    mean_a: float
    std_a: float
    mean_b: float
    std_b: float
    t_statistic: float
    p_value: float
    significant: bool
    n_a: int
    n_b: int

    def to_dict(self):
        return asdict(self)


def _values(runs, metric):
    out = []
    for r in runs:
        if isinstance(r, MetricReport):
            out.append(r.auc if metric == "auc" else r.logloss)
        elif isinstance(r, dict):
            out.append(r[metric])
        else:
            out.append(float(r))
    return np.asarray(out, dtype=np.float64)


def compare(runs_a, runs_b, metric="auc", alpha=0.05, higher_is_better=True):
    """One-sided Welch t-test that method ``a`` beats method ``b`` on per-seed values."""
    a, b = _values(runs_a, metric), _values(runs_b, metric)
    if len(a) < 2 or len(b) < 2:
        raise StatisticsError("need at least two runs per method")
    if not higher_is_better:
        a, b = -a, -b
    diff = a.mean() - b.mean()
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        # t is +-inf or undefined; decide from the sign of the difference
        t = 0.0 if diff == 0 else np.copysign(np.inf, diff)
        p = 0.5 if diff == 0 else (0.0 if diff > 0 else 1.0)
    else:
        res = stats.ttest_ind(a, b, equal_var=False, alternative="greater")
        t, p = float(res.statistic), float(res.pvalue)
    sign = 1 if higher_is_better else -1
    return ComparisonResult(float(sign * a.mean()), float(a.std(ddof=1)), float(sign * b.mean()), float(b.std(ddof=1)),
                            float(t), float(p), bool(p < alpha), len(a), len(b))


def write_rows(path, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)
    return path


def membership_codes(memberships):
    """Encode each row of a boolean ``(n, G)`` membership matrix as one integer pattern id."""
    memberships = np.asarray(memberships, dtype=bool)
    _, codes = np.unique(memberships, axis=0, return_inverse=True)
    return codes.ravel()


def matched_accuracy(predicted, truth):
    """Accuracy of ``predicted`` cluster ids against ``truth`` under the best one-to-one matching."""
    from scipy.optimize import linear_sum_assignment

    predicted = np.asarray(predicted).ravel()
    truth = np.asarray(truth).ravel()
    p_ids, p = np.unique(predicted, return_inverse=True)
    t_ids, t = np.unique(truth, return_inverse=True)
    table = np.zeros((len(p_ids), len(t_ids)), dtype=np.int64)
    np.add.at(table, (p.ravel(), t.ravel()), 1)
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum() / len(truth))


@torch.no_grad()
def user_memberships(model, dataset, batch_size=8192):
    """Hard (noise-free, 0.5-thresholded) group memberships for each sample's user features."""
    model.eval()
    x_all = torch.as_tensor(dataset.indices)
    out = []
    for start in range(0, len(dataset), batch_size):
        e = model.embedding(x_all[start:start + batch_size])
        out.append(model.group.hard_memberships(e.user))
    return torch.cat(out).numpy()
