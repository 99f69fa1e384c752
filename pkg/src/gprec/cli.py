"""Command-line entry point: ``gprec <subcommand> --config FILE [--set key=value ...]``."""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .config import apply_overrides, from_dict
from .errors import ConfigError, GPRecError
from .evaluation import evaluate
from .experiment import (compare_summaries, ingest, load_split, load_summary, run_replicates, run_single, sweep)
from .group import export_similarity
from .io import write_json_atomic
from .training import load_checkpoint

import yaml

OUTPUT_ROOT_ENV = "GPREC_OUTPUT_ROOT"
SUBCOMMANDS = ("ingest", "train", "evaluate", "ablate", "sweep", "compare", "export-similarity")


def _parse_list(text, cast):
    return [cast(v) for v in text.split(",") if v.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="gprec", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment configuration")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    common.add_argument("--seed", type=int, help="root seed (overrides train.seed)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", parents=[common], help="encode and split a dataset")
    t = sub.add_parser("train", parents=[common], help="train one seed, or every eval seed with --replicates")
    t.add_argument("--replicates", action="store_true")
    e = sub.add_parser("evaluate", parents=[common], help="evaluate a checkpoint on valid and test")
    e.add_argument("--checkpoint")
    a = sub.add_parser("ablate", parents=[common], help="train an ablation variant")
    a.add_argument("--variant", required=True, choices=["v1", "v2", "v3", "v4", "v5"])
    a.add_argument("--replicates", action="store_true")
    s = sub.add_parser("sweep", parents=[common], help="grid over one parameter")
    s.add_argument("--param", required=True, help="G, tau or any dotted config key")
    s.add_argument("--grid", required=True, help="comma-separated values")
    s.add_argument("--seeds", help="comma-separated seeds (default: eval.seeds)")
    c = sub.add_parser("compare", parents=[common], help="one-sided Welch t-test between two replicate sets")
    c.add_argument("--a", required=True, help="replicates.json (or its directory) of the candidate method")
    c.add_argument("--b", required=True, help="replicates.json (or its directory) of the reference method")
    x = sub.add_parser("export-similarity", parents=[common], help="cosine similarities of dual group embeddings")
    x.add_argument("--checkpoint")
    x.add_argument("--groups", default="0,1,2,3,4")
    return p


def resolve_config(args):
    data = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}", [("--config", "file not found")])
        data = yaml.safe_load(path.read_text()) or {}
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"train.seed={args.seed}")
    apply_overrides(data, overrides)
    cfg = from_dict(data)
    return cfg, overrides


def resolve_out(args, cfg):
    if args.out:
        return Path(args.out)
    out = Path(cfg.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def _checkpoint_path(args, out):
    return Path(args.checkpoint) if args.checkpoint else out / "model.ckpt"


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    cfg, overrides = resolve_config(args)
    out = resolve_out(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    invocation = {"command": args.command, "argv": list(argv if argv is not None else sys.argv[1:]),
                  "overrides": overrides, "config": cfg.to_dict(), "seed": cfg.train.seed}
    result = {}

    if args.command == "ingest":
        sp, manifest = ingest(cfg, out)
        result = {"sizes": manifest["sizes"]}

    elif args.command in ("train", "ablate"):
        if args.command == "ablate":
            cfg.train.ablation = args.variant
            invocation["config"] = cfg.to_dict()
        sp, _ = load_split(cfg, out)
        if args.replicates:
            summary = run_replicates(cfg, sp, out_dir=out)
            result = {"mean_auc": summary["mean_auc"], "mean_logloss": summary["mean_logloss"]}
        else:
            res, test = run_single(cfg, sp, cfg.train.seed, out)
            result = {"best_valid": res.best_valid, "test": test.to_dict(), "checkpoint": str(out / "model.ckpt")}

    elif args.command == "evaluate":
        model, header = load_checkpoint(_checkpoint_path(args, out))
        ckpt_cfg = from_dict(header["config"])
        sp, _ = load_split(ckpt_cfg, out)
        seed = header["run"].get("seed")
        valid = evaluate(model, sp.valid, ckpt_cfg.eval.batch_size, seed)
        test = evaluate(model, sp.test, ckpt_cfg.eval.batch_size, seed)
        result = {"valid": valid.to_dict(), "test": test.to_dict()}
        write_json_atomic(out / "evaluation.json", result)

    elif args.command == "sweep":
        sp, _ = load_split(cfg, out)
        seeds = _parse_list(args.seeds, int) if args.seeds else None
        grid = [yaml.safe_load(v) for v in args.grid.split(",") if v.strip()]
        rows = sweep(args.param, grid, cfg, sp, seeds, out / "sweep.csv")
        result = {"rows": rows, "csv": str(out / "sweep.csv")}

    elif args.command == "compare":
        result = compare_summaries(load_summary(args.a), load_summary(args.b), cfg.eval.alpha)
        write_json_atomic(out / "comparison.json", result)

    elif args.command == "export-similarity":
        model, _ = load_checkpoint(_checkpoint_path(args, out))
        if not model.use_gprec or not model.group.dual:
            raise ConfigError("checkpoint has no dual group embeddings", [("model.use_gprec", "dual groups required")])
        groups = _parse_list(args.groups, int)
        export_similarity(model.group.positive, model.group.negative, groups, out / "similarity.csv")
        result = {"csv": str(out / "similarity.csv")}

    invocation["result"] = result
    write_json_atomic(out / f"run-{args.command}.json", invocation)
    print(json.dumps({"status": "ok", "command": args.command, **result}, default=str))
    return 0


def main(argv=None):
    try:
        return run(argv)
    except GPRecError as err:
        report = {"status": "error", "error": type(err).__name__, "message": str(err)}
        problems = getattr(err, "problems", None)
        if problems:
            report["problems"] = [{"key": k, "message": m} for k, m in problems]
        print(json.dumps(report), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
