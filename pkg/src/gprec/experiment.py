"""Glue between configuration, data, training and evaluation.

Used by the command-line interface, the demo scripts and the acceptance
suite so that all three run experiments the same way.
"""
import json
import logging
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import apply_ablation, apply_overrides, from_dict
from .data import (DatasetSplit, EncodedDataset, FeatureSchema, SyntheticSpec, convert_ml1m, generate_synthetic,
                   ml1m_schema, prepare_csv, split)
from .errors import ConfigError, DatasetNotFoundError
from .evaluation import compare, evaluate, write_rows
from .io import write_json_atomic
from .model import build_model
from .training import train

log = logging.getLogger(__name__)

ML1M_THRESHOLD = 4
PARAM_ALIASES = {"G": "group.count", "g": "group.count", "groups": "group.count", "tau": "group.tau"}


def _schema_from_config(dc):
    if not dc.fields:
        raise ConfigError("dataset.fields must list the schema for csv datasets", [("dataset.fields", "required")])
    fields = [dict(f) for f in dc.fields]
    if dc.personal:
        for f in fields:
            if f.get("role") != "item":
                f["role"] = "personal" if f["name"] in dc.personal else "other"
    return FeatureSchema(tuple(fields), dc.label)


def load_split(cfg, work_dir=None):
    """Build the train/valid/test split described by ``cfg.dataset``.

    Returns ``(split, info)``; ``info`` carries the category encoder or the
    synthetic world, whichever applies.
    """
    dc = cfg.dataset
    ratios = tuple(dc.ratios)
    if dc.kind == "synthetic":
        world = generate_synthetic(SyntheticSpec(**dc.synthetic))
        return split(world.dataset, ratios, dc.split_seed), {"synthetic": world}
    if dc.kind == "encoded":
        root = Path(dc.path)
        if not (root / "train.bin").exists():
            raise DatasetNotFoundError(f"no ingested dataset under {root}")
        parts = {name: EncodedDataset.load(root / f"{name}.bin") for name in ("train", "valid", "test")}
        return DatasetSplit(parts["train"], parts["valid"], parts["test"], dc.split_seed, ratios), {}
    path = Path(dc.path)
    threshold = dc.binarize_threshold
    if dc.kind == "ml1m":
        schema = ml1m_schema(tuple(dc.personal) or ("user_id",))
        threshold = ML1M_THRESHOLD if threshold is None else threshold
        if path.is_dir():
            csv_path = Path(work_dir or path) / "ml1m.csv"
            if not csv_path.exists():
                convert_ml1m(path, csv_path)
            path = csv_path
    else:
        schema = _schema_from_config(dc)
    if not path.exists():
        raise DatasetNotFoundError(f"dataset not found: {path}")
    sp, encoder = prepare_csv(path, schema, dc.split_seed, ratios, threshold)
    return sp, {"encoder": encoder, "csv": str(path), "binarize_threshold": threshold}


def ingest(cfg, out_dir):
    """Encode and split the configured dataset and persist it under ``out_dir``."""
    out_dir = Path(out_dir)
    sp, info = load_split(cfg, out_dir)
    for name in ("train", "valid", "test"):
        getattr(sp, name).save(out_dir / f"{name}.bin", {"partition": name, "split_seed": sp.seed})
    sp.write_manifest(out_dir / "split.csv")
    if "encoder" in info:
        info["encoder"].save(out_dir / "mapping.csv")
    if "synthetic" in info:
        info["synthetic"].save(out_dir / "synthetic.bin")
    manifest = {"config": cfg.to_dict(), "sizes": list(sp.sizes()), "digests": sp.digests(),
                "binarize_threshold": info.get("binarize_threshold")}
    write_json_atomic(out_dir / "ingest.json", manifest)
    return sp, manifest


def run_single(cfg, sp, seed, out_dir=None, dtype=None):
    """Train one seed of ``cfg`` (ablation applied) and evaluate on the test partition."""
    cfg = apply_ablation(cfg)
    cfg.train.seed = seed
    model = build_model(sp.train.schema, cfg, seed)
    if dtype is not None:
        model = model.to(dtype)
    result = train(model, sp, cfg, out_dir)
    test = evaluate(result.model, sp.test, cfg.eval.batch_size, seed)
    result.manifest["test"] = test.to_dict()
    if out_dir is not None:
        write_json_atomic(Path(out_dir) / "manifest.json", result.manifest)
    return result, test


def run_replicates(cfg, sp, seeds=None, out_dir=None):
    """Run every seed; returns a summary dict with per-seed test metrics."""
    seeds = list(cfg.eval.seeds if seeds is None else seeds)
    runs = []
    for seed in seeds:
        run_dir = Path(out_dir) / f"seed{seed}" if out_dir is not None else None
        result, test = run_single(cfg, sp, seed, run_dir)
        runs.append({"seed": seed, "auc": test.auc, "logloss": test.logloss,
                     "valid_auc": result.best_valid["auc"], "best_epoch": result.manifest["best_epoch"]})
        log.info("seed %d test auc %.5f logloss %.5f", seed, test.auc, test.logloss)
    aucs = np.array([r["auc"] for r in runs])
    losses = np.array([r["logloss"] for r in runs])
    summary = {"runs": runs, "mean_auc": float(aucs.mean()), "mean_logloss": float(losses.mean()),
               "std_auc": float(aucs.std(ddof=1)) if len(aucs) > 1 else 0.0,
               "mean_valid_auc": float(np.mean([r["valid_auc"] for r in runs])),
               "config": apply_ablation(cfg).to_dict()}
    if out_dir is not None:
        write_json_atomic(Path(out_dir) / "replicates.json", summary)
    return summary


def with_overrides(cfg, overrides):
    return from_dict(apply_overrides(cfg.to_dict(), overrides))


def sweep(param, grid, cfg, sp, seeds=None, out_csv=None):
    """One seed-averaged replicate set per grid value; rows ``(param, value, mean_auc, ...)``."""
    if not grid:
        raise ConfigError("sweep grid is empty", [("--grid", "non-empty list required")])
    key = PARAM_ALIASES.get(param, param)
    rows = []
    for value in grid:
        point = with_overrides(cfg, [(key, value)])
        summary = run_replicates(point, sp, seeds)
        rows.append({"param": key, "value": value, "mean_auc": summary["mean_auc"], "std_auc": summary["std_auc"],
                     "mean_logloss": summary["mean_logloss"], "n_seeds": len(summary["runs"])})
    if out_csv is not None:
        write_rows(out_csv, rows)
    return rows


def compare_summaries(summary_a, summary_b, alpha=0.05):
    auc_cmp = compare(summary_a["runs"], summary_b["runs"], "auc", alpha)
    ll_cmp = compare(summary_a["runs"], summary_b["runs"], "logloss", alpha, higher_is_better=False)
    return {"auc": asdict(auc_cmp), "logloss": asdict(ll_cmp)}


def load_summary(path):
    path = Path(path)
    if path.is_dir():
        path = path / "replicates.json"
    if not path.exists():
        raise DatasetNotFoundError(f"no replicate summary at {path}")
    return json.loads(path.read_text())
