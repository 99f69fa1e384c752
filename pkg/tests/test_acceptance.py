"""Acceptance suite: one test per numbered criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
Criteria 1-6 train on MovieLens-1M; point ``GPREC_ML1M_DIR`` at the raw
``ml-1m`` directory (or a joined CSV) to run them. Without the data they fail
with an explanatory message. Trained replicate sets are cached under
``GPREC_ACCEPTANCE_DIR`` (default ``runs/acceptance``) so an interrupted
session resumes where it stopped.
"""
import itertools
import json
import os
from pathlib import Path

import numpy as np
import pytest
import torch
from scipy import sparse
from sklearn.linear_model import LogisticRegression

from gprec.config import ExperimentConfig, load_config
from gprec.construction import DynamicParameterStrategy
from gprec.data import SyntheticSpec, generate_synthetic, split
from gprec.evaluation import auc, evaluate, matched_accuracy, membership_codes, user_memberships
from gprec.experiment import load_split, run_replicates, with_overrides
from gprec.group import contrast_summary, group_representation, gumbel_mask
from gprec.layers import zero_
from gprec.losses import bce
from gprec.model import build_model
from gprec.seeding import torch_generator
from gprec.training import load_checkpoint, train

from acceptance_log import record
from conftest import tiny_config
from modelcheck import ABLATIONS, STRATEGIES, batch, model_gradient_errors, wired
from oracles import pairwise_auc, scalar_bce

ROOT = Path(__file__).resolve().parents[1]
ML1M_DIR = Path(os.environ.get("GPREC_ML1M_DIR", ROOT / "data" / "ml-1m"))
CACHE = Path(os.environ.get("GPREC_ACCEPTANCE_DIR", ROOT / "runs" / "acceptance"))


def check(number, title, passed, detail=""):
    record(number, title, passed, detail)
    assert passed, f"criterion {number} ({title}) failed: {detail}"


# --- property criteria ----------------------------------------------------------

def test_criterion_07_mask_identities():
    g = torch.Generator().manual_seed(0)
    s1 = torch.rand(64, 10, generator=g, dtype=torch.float64).clamp(1e-6, 1 - 1e-6)
    scores = torch.stack([s1, 1 - s1], 1)
    complement = True
    for noisy in (False, True):
        m1, m0 = gumbel_mask(scores, 0.5, noise_enabled=noisy, generator=torch_generator(0, "gumbel"))
        complement &= bool(torch.equal(m0, 1 - m1))
    model, _, _ = wired("input", "none")
    model.eval()
    x, _ = batch(16)
    a, b = model(x), model(x)
    deterministic = all(torch.equal(u, v) for u, v in
                        [(a.group.mask, b.group.mask), (a.group.r_group, b.group.r_group), (a.prob, b.prob)])
    m1, _ = gumbel_mask(torch.tensor([[[0.8]], [[0.2]]], dtype=torch.float64).transpose(0, 1), 0.5)
    closed = round(m1.item(), 4) == 0.9412
    check(7, "mask identities", complement and deterministic and closed,
          f"complement={complement} deterministic={deterministic} m1={m1.item():.4f}")


def test_criterion_08_stop_gradient():
    zero = True
    for seed, strategy in itertools.product(range(5), STRATEGIES):
        model, _, _ = wired(strategy, "none")
        x, y = batch(8, seed)
        t = model.losses(x, y, generator=torch_generator(seed, "gumbel"))
        grads = torch.autograd.grad(t.contrast, list(model.aux_head.parameters()), allow_unused=True)
        zero &= all(gr is None or torch.count_nonzero(gr) == 0 for gr in grads)
    check(8, "stop-gradient on the aux head", zero)


def test_criterion_09_gradient_suite():
    worst, where = 0.0, None
    for strategy, ablation in itertools.product(STRATEGIES, ABLATIONS):
        for group, err in model_gradient_errors(strategy, ablation).items():
            if err > worst:
                worst, where = err, f"{strategy}/{ablation}/{group}"
    for strategy in STRATEGIES:
        for group, err in model_gradient_errors(strategy, "none", "dcn").items():
            if err > worst:
                worst, where = err, f"dcn/{strategy}/{group}"
    check(9, "finite-difference gradient suite", worst < 1e-4, f"max rel err {worst:.2e} at {where}")


def test_criterion_10_oracle_equivalence():
    rng = np.random.default_rng(10)
    auc_ok = True
    for i in range(200):
        n = int(rng.integers(2, 1001))
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        s = rng.integers(0, 20, n) / 19 if i % 2 else rng.random(n)
        auc_ok &= auc(s, y) == pairwise_auc(s, y)
    p = torch.as_tensor(rng.random(1000))
    yy = torch.as_tensor(rng.integers(0, 2, 1000), dtype=torch.float64)
    gap = abs(bce(p, yy).item() - scalar_bce(p.tolist(), yy.tolist()))
    check(10, "metric oracle equivalence", auc_ok and gap < 1e-10, f"auc_exact={auc_ok} bce_gap={gap:.1e}")


def test_criterion_11_identities():
    # logged decomposition
    world = generate_synthetic(SyntheticSpec(n_interactions=3000, n_users=60, n_items=50))
    sp = split(world.dataset, seed=0)
    worst = 0.0
    for strategy in STRATEGIES:
        cfg = tiny_config(strategy)
        cfg.train.batch_size, cfg.train.max_epochs, cfg.train.log_every = 256, 1, 1
        res = train(build_model(sp.train.schema, cfg), sp, cfg)
        for r in res.step_log:
            l1, l2, l3 = r["lambdas"]
            worst = max(worst, abs(r["major"] + l1 * r["group"] - l2 * r["contrast"] + l3 * r["ortho"] - r["total"]))
    # zero delta
    dp = DynamicParameterStrategy(7, 6, 6, (6, 4, 1), "all", [5]).double()
    dp.reset_parameters(torch_generator(0, "dp"))
    zero_(dp.generator)
    g = torch.Generator().manual_seed(0)
    rb, rg, rp = (torch.randn(9, w, generator=g, dtype=torch.float64) for w in (7, 6, 6))
    dp_ok = torch.equal(dp(rb, rg, rp).prob, dp.head(rb))
    # ensemble mean
    model, _, _ = wired("ensemble", "none")
    out = model(batch(8)[0])
    ens_ok = torch.equal(out.prob, torch.stack(list(out.components.values())).mean(0))
    # r_G + r_G_con
    p, n = torch.randn(5, 3, dtype=torch.float64), torch.randn(5, 3, dtype=torch.float64)
    m1 = torch.rand(7, 5, dtype=torch.float64)
    r, rc = group_representation(m1, p, n)
    sum_ok = torch.allclose(r + rc, (p + n).flatten().expand_as(r), atol=1e-12, rtol=0)
    check(11, "loss / construction identities", worst < 1e-8 and dp_ok and ens_ok and sum_ok,
          f"decomp={worst:.1e} dp_zero={dp_ok} ensemble_mean={ens_ok} dual_sum={sum_ok}")


def test_criterion_12_representational_count():
    g = torch.Generator().manual_seed(12)
    p, n = torch.randn(3, 4, generator=g, dtype=torch.float64), torch.randn(3, 4, generator=g, dtype=torch.float64)
    masks = torch.tensor(list(itertools.product([0.0, 1.0], repeat=3)), dtype=torch.float64)
    r, _ = group_representation(masks, p, n)
    distinct = len({tuple(v.tolist()) for v in r})
    check(12, "2^G distinct group representations", distinct == 8, f"distinct={distinct}")


def logistic_oracle_auc(world, sp):
    """Logistic regression on user one-hot plus (true group x item) one-hot features."""
    spec = world.spec

    def design(ds):
        users = ds.indices[:, 0] - 1
        items = ds.indices[:, 3] - 1
        groups = world.user_groups[users]
        rows = np.arange(len(ds))
        cols = np.concatenate([users, spec.n_users + groups * spec.n_items + items])
        data = np.ones(2 * len(ds))
        shape = (len(ds), spec.n_users + spec.n_groups * spec.n_items)
        return sparse.csr_matrix((data, (np.concatenate([rows, rows]), cols)), shape=shape)

    clf = LogisticRegression(C=1.0, max_iter=2000).fit(design(sp.train), sp.train.labels)
    return auc(clf.predict_proba(design(sp.test))[:, 1], sp.test.labels)


@pytest.mark.slow
def test_criterion_13_planted_group_recovery():
    spec = SyntheticSpec(n_groups=4)
    world = generate_synthetic(spec)
    sp = split(world.dataset, seed=0)
    cfg = ExperimentConfig()
    cfg.group.count = 4
    cfg.train.batch_size = 256
    cfg.train.max_epochs = 40
    res = train(build_model(sp.train.schema, cfg, 0), sp, cfg)
    test_auc = evaluate(res.model, sp.test).auc
    _, first = np.unique(world.dataset.indices[:, 0], return_index=True)
    per_user = world.dataset.subset(first)
    memberships = user_memberships(res.model, per_user)
    accuracy = matched_accuracy(membership_codes(memberships), world.user_groups[per_user.indices[:, 0] - 1])
    oracle = logistic_oracle_auc(world, sp)
    check(13, "planted-group recovery", accuracy >= 0.90 and test_auc > oracle - 0.02,
          f"matched accuracy={accuracy:.3f} test auc={test_auc:.4f} oracle={oracle:.4f}")


# --- MovieLens-1M criteria --------------------------------------------------------

def ml1m_config(backbone="mlp", **overrides):
    cfg = load_config(ROOT / "configs" / f"ml1m_{backbone}.yaml")
    cfg.dataset.path = str(ML1M_DIR)
    return with_overrides(cfg, list(overrides.items())) if overrides else cfg


def _available():
    return ML1M_DIR.is_dir() and (ML1M_DIR / "ratings.dat").exists() or ML1M_DIR.suffix == ".csv" and ML1M_DIR.exists()


class ML1M:
    """Lazily trains and caches the replicate sets the ML1M criteria share."""

    split = None

    @classmethod
    def require(cls, number, title):
        if not _available():
            check(number, title, False, f"MovieLens-1M not found at {ML1M_DIR} (set GPREC_ML1M_DIR)")
        if cls.split is None:
            CACHE.mkdir(parents=True, exist_ok=True)
            cls.split, _ = load_split(ml1m_config(), CACHE)

    @classmethod
    def replicates(cls, name, cfg):
        out = CACHE / name
        path = out / "replicates.json"
        if path.exists():
            return json.loads(path.read_text())
        return run_replicates(cfg, cls.split, out_dir=out)

    @classmethod
    def base(cls, backbone):
        return cls.replicates(f"{backbone}-base", ml1m_config(backbone, **{"model.use_gprec": False}))

    @classmethod
    def gprec(cls, backbone, strategy, **extra):
        tag = "".join(f"-{k.split('.')[-1]}{v}" for k, v in extra.items())
        return cls.replicates(f"{backbone}-{strategy}{tag}",
                              ml1m_config(backbone, **{"construct.strategy": strategy, **extra}))

    @classmethod
    def best(cls, backbone):
        runs = {s: cls.gprec(backbone, s) for s in STRATEGIES}
        # chosen on validation AUC so the test partition stays untouched
        strategy = max(runs, key=lambda s: runs[s]["mean_valid_auc"])
        return strategy, runs[strategy]


@pytest.mark.ml1m
def test_criterion_01_base_mlp():
    title = "base MLP on ML1M"
    ML1M.require(1, title)
    s = ML1M.base("mlp")
    check(1, title, abs(s["mean_auc"] - 0.8081) <= 0.005 and s["mean_logloss"] <= 0.545,
          f"auc={s['mean_auc']:.4f} logloss={s['mean_logloss']:.4f}")


@pytest.mark.ml1m
def test_criterion_02_gprec_mlp():
    title = "GPRec(MLP) beats MLP on ML1M"
    ML1M.require(2, title)
    base = ML1M.base("mlp")
    strategy, s = ML1M.best("mlp")
    gain = s["mean_auc"] - base["mean_auc"]
    check(2, title, s["mean_auc"] >= 0.810 and gain >= 0.003, f"{strategy}: auc={s['mean_auc']:.4f} gain={gain:+.4f}")


@pytest.mark.ml1m
def test_criterion_03_gprec_dcn():
    title = "GPRec(DCN) beats DCN on ML1M"
    ML1M.require(3, title)
    base = ML1M.base("dcn")
    strategy, s = ML1M.best("dcn")
    gain = s["mean_auc"] - base["mean_auc"]
    drop = base["mean_logloss"] - s["mean_logloss"]
    check(3, title, gain >= 0.002 and drop >= 0.005, f"{strategy}: auc gain={gain:+.4f} logloss drop={drop:+.4f}")


@pytest.mark.ml1m
def test_criterion_04_ablation_ordering():
    title = "ablations underperform full GPRec(MLP)"
    ML1M.require(4, title)
    strategy, full = ML1M.best("mlp")
    means = {v: ML1M.gprec("mlp", strategy, **{"train.ablation": v})["mean_auc"] for v in ("v1", "v2", "v3", "v4", "v5")}
    ok = all(m <= full["mean_auc"] for m in means.values())
    check(4, title, ok, f"full={full['mean_auc']:.4f} " + " ".join(f"{k}={v:.4f}" for k, v in means.items()))


@pytest.mark.ml1m
def test_criterion_05_dual_embedding_contrast():
    title = "dual embeddings are dissimilar after training"
    ML1M.require(5, title)
    strategy, _ = ML1M.best("mlp")
    model, _ = load_checkpoint(CACHE / f"mlp-{strategy}" / "seed0" / "model.ckpt")
    s = contrast_summary(model.group.positive, model.group.negative)
    check(5, title, s["mean_pair_cosine"] <= 0.4 and s["mean_abs_similarity"] <= 0.7,
          f"mean cos(p,n)={s['mean_pair_cosine']:.3f} mean |sim|={s['mean_abs_similarity']:.3f}")


@pytest.mark.ml1m
def test_criterion_06_tau_interior_optimum():
    title = "temperature sweep peaks in the interior"
    ML1M.require(6, title)
    strategy, mid = ML1M.best("mlp")
    low = ML1M.gprec("mlp", strategy, **{"group.tau": 0.1})["mean_auc"]
    high = ML1M.gprec("mlp", strategy, **{"group.tau": 1.0})["mean_auc"]
    check(6, title, mid["mean_auc"] >= low and mid["mean_auc"] >= high,
          f"tau0.1={low:.4f} tau0.5={mid['mean_auc']:.4f} tau1.0={high:.4f}")
