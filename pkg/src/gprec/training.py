"""Objective composition, the seeded training loop and checkpoints."""
import copy
import json
import logging
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .config import from_dict
from .data import FeatureSchema
from .errors import CheckpointError, NumericError
from .evaluation import evaluate
from .io import load_arrays, save_arrays, write_json_atomic
from .model import build_model
from .seeding import torch_generator

log = logging.getLogger(__name__)

COMPONENTS = ("major", "group", "contrast", "ortho")


@dataclass
class LossBundle:
    major: torch.Tensor
    group: torch.Tensor
    contrast: torch.Tensor
    ortho: torch.Tensor
    lambdas: tuple
    total: torch.Tensor

    def values(self):
        out = {k: float(getattr(self, k).detach()) for k in COMPONENTS}
        out["total"] = float(self.total.detach())
        return out


def total_loss(major, group, contrast, ortho, lambdas):
    """``L_major + l1 * L_G - l2 * L_G^Con + l3 * L_O``, combined in float64.

    Raises :class:`NumericError` naming the first non-finite component.
    """
    parts = {}
    for name, value in zip(COMPONENTS, (major, group, contrast, ortho)):
        t = value if torch.is_tensor(value) else torch.tensor(float(value), dtype=torch.float64)
        if not torch.isfinite(t).all():
            raise NumericError(f"loss component {name!r} is not finite", component=name)
        parts[name] = t
    l1, l2, l3 = (float(v) for v in lambdas)
    total = (parts["major"].double() + l1 * parts["group"].double()
             - l2 * parts["contrast"].double() + l3 * parts["ortho"].double())
    return LossBundle(parts["major"], parts["group"], parts["contrast"], parts["ortho"], (l1, l2, l3), total)


def lambdas_of(cfg):
    return (cfg.train.lambda_group, cfg.train.lambda_con, cfg.train.lambda_ortho)


@dataclass
class TrainResult:
    model: torch.nn.Module
    manifest: dict
    step_log: list = field(default_factory=list)

    @property
    def best_valid(self):
        return self.manifest["best_valid"]


def platform_info():
    return {"python": platform.python_version(), "torch": torch.__version__, "numpy": np.__version__,
            "machine": platform.machine(), "gprec": __version__}


def _append_jsonl(path, record):
    with open(path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def train(model, split, cfg, out_dir=None, validator=None):
    """Mini-batch Adam with early stopping on validation AUC.

    ``validator(model) -> MetricReport`` replaces the default validation-set
    evaluation when given. Returns a :class:`TrainResult` whose model holds
    the best-validation parameters. With ``out_dir``, per-epoch metrics are
    appended to ``metrics.jsonl``, sampled step losses to ``steps.jsonl``,
    and the checkpoint and manifest are written on completion.
    """
    tc = cfg.train
    seed = tc.seed
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in ("metrics.jsonl", "steps.jsonl"):
            (out_dir / name).unlink(missing_ok=True)
    validator = validator or (lambda m: evaluate(m, split.valid, cfg.eval.batch_size, seed))
    lambdas = lambdas_of(cfg)
    params = [p for p in model.parameters() if p.requires_grad]
    opt = torch.optim.Adam(params, lr=tc.lr, weight_decay=tc.weight_decay)
    shuffle_gen = torch_generator(seed, "shuffle")
    noise_gen = torch_generator(seed, "gumbel")
    dtype = next(model.parameters()).dtype

    x_all = torch.as_tensor(split.train.indices)
    y_all = torch.as_tensor(split.train.labels).to(dtype)
    n = len(split.train)
    manifest = {
        "config": cfg.to_dict(), "seed": seed, "schema": split.train.schema.to_dict(),
        "dataset": split.digests(), "dataset_sizes": list(split.sizes()), "lambdas": list(lambdas),
        "platform": platform_info(), "epochs": [], "best_epoch": None, "best_valid": None,
        "stop_reason": None, "failure": None, "checkpoint": None,
    }
    step_log = []
    best_auc, best_state, bad = -math.inf, None, 0
    step = 0
    model.train()
    for epoch in range(1, tc.max_epochs + 1):
        perm = torch.randperm(n, generator=shuffle_gen)
        sums = dict.fromkeys(COMPONENTS + ("total",), 0.0)
        n_batches = 0
        degenerate = 0
        for start in range(0, n, tc.batch_size):
            idx = perm[start:start + tc.batch_size]
            try:
                terms = model.losses(x_all[idx], y_all[idx], generator=noise_gen)
                bundle = total_loss(terms.major, terms.group, terms.contrast, terms.ortho, lambdas)
            except NumericError as err:
                err.step = step
                manifest["failure"] = {"epoch": epoch, "step": step, "component": err.component, "message": str(err)}
                manifest["stop_reason"] = "diverged"
                if out_dir is not None:
                    write_json_atomic(out_dir / "manifest.json", manifest)
                err.manifest = manifest
                raise
            opt.zero_grad(set_to_none=True)
            bundle.total.backward()
            opt.step()
            values = bundle.values()
            for k in sums:
                sums[k] += values[k]
            degenerate += terms.degenerate
            n_batches += 1
            if step % tc.log_every == 0:
                record = {"epoch": epoch, "step": step, "lambdas": list(lambdas), **values}
                step_log.append(record)
                if out_dir is not None:
                    _append_jsonl(out_dir / "steps.jsonl", record)
            step += 1

        report = validator(model)
        model.train()
        improved = report.auc > best_auc
        entry = {"epoch": epoch, "valid_auc": report.auc, "valid_logloss": report.logloss,
                 "degenerate_ortho": degenerate, "improved": improved,
                 **{f"train_{k}": v / max(n_batches, 1) for k, v in sums.items()}}
        manifest["epochs"].append(entry)
        if out_dir is not None:
            _append_jsonl(out_dir / "metrics.jsonl", entry)
        log.info("epoch %d valid auc %.5f logloss %.5f", epoch, report.auc, report.logloss)
        if improved:
            best_auc, bad = report.auc, 0
            best_state = copy.deepcopy(model.state_dict())
            manifest["best_epoch"] = epoch
            manifest["best_valid"] = {"auc": report.auc, "logloss": report.logloss}
        else:
            bad += 1
            if bad >= tc.patience:
                manifest["stop_reason"] = f"no validation improvement for {bad} epoch(s)"
                break
    else:
        manifest["stop_reason"] = "max_epochs"

    model.load_state_dict(best_state)
    model.eval()
    if out_dir is not None:
        ckpt = save_checkpoint(out_dir / "model.ckpt", model, manifest)
        manifest["checkpoint"] = str(ckpt)
        write_json_atomic(out_dir / "manifest.json", manifest)
    return TrainResult(model, manifest, step_log)


def save_checkpoint(path, model, manifest=None):
    arrays = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    header = {"format": "gprec-checkpoint/1", "config": model.cfg.to_dict(), "schema": model.schema.to_dict(),
              "run": {k: v for k, v in (manifest or {}).items() if k not in ("config", "schema")}}
    return save_arrays(path, arrays, header)


def load_checkpoint(path):
    """Rebuild the model stored at ``path``; returns ``(model, header)``."""
    arrays, header = load_arrays(path)
    if header.get("format") != "gprec-checkpoint/1":
        raise CheckpointError(f"{path} is not a gprec checkpoint")
    cfg = from_dict(header["config"])
    schema = FeatureSchema.from_dict(header["schema"])
    model = build_model(schema, cfg)
    state = {k: torch.from_numpy(v) for k, v in arrays.items()}
    if arrays:
        model = model.to(next(iter(state.values())).dtype)
    model.load_state_dict(state)
    model.eval()
    return model, header
