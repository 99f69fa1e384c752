"""Experiment configuration: typed sections, strict YAML loading, overrides.

Defaults follow the published ML1M setup: embedding width 16, prediction
heads ``[64, 32, 16, 1]``, group classifier ``[64, 32, 2]`` per group,
60 groups, temperature 0.5 and auxiliary weights ``(1.0, 0.001, 0.0001)``.
"""
import copy
import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError

STRATEGIES = ("input", "dp", "ensemble")
ABLATIONS = ("none", "v1", "v2", "v3", "v4", "v5")


@dataclass
class DatasetConfig:
    kind: str = "csv"                   # csv | ml1m | synthetic | encoded
    path: str = ""
    label: str = "label"
    fields: list = field(default_factory=list)   # [{name, role, cardinality}]
    personal: list = field(default_factory=list)  # overrides personal role when non-empty
    binarize_threshold: typing.Optional[float] = None
    split_seed: int = 0
    ratios: list = field(default_factory=lambda: [0.8, 0.1, 0.1])
    synthetic: dict = field(default_factory=dict)


@dataclass
class ModelConfig:
    embedding_dim: int = 16
    use_gprec: bool = True


@dataclass
class BackboneConfig:
    kind: str = "mlp"                   # mlp | dcn
    hidden: list = field(default_factory=lambda: [64, 32])
    cross_depth: int = 3


@dataclass
class GroupConfig:
    count: int = 60
    tau: float = 0.5
    dim: int = 16
    mode: str = "auto"                  # auto | concat | sum
    hard_inference: bool = False
    shared_trunk: bool = True
    trunk: list = field(default_factory=lambda: [64, 32])
    clamp_con: float = 10.0
    dual: bool = True
    aux_head: list = field(default_factory=lambda: [64, 32, 16, 1])

    def resolved_mode(self):
        if self.mode == "auto":
            return "concat" if self.count <= 64 else "sum"
        return self.mode

    def representation_width(self):
        if not self.dual:
            return self.dim
        return self.count * self.dim if self.resolved_mode() == "concat" else self.dim


@dataclass
class IndividualConfig:
    enabled: bool = True
    dim: typing.Optional[int] = None    # None: match the group representation width
    hidden: list = field(default_factory=lambda: [64])
    ortho_mode: str = "raw"             # raw | abs | square


@dataclass
class ConstructConfig:
    strategy: str = "input"
    head: list = field(default_factory=lambda: [64, 32, 16, 1])
    dp_target: str = "last"             # last | first | all | <layer index>
    dp_hidden: list = field(default_factory=lambda: [64])
    ensemble_space: str = "prob"        # prob | logit


@dataclass
class TrainConfig:
    batch_size: int = 1024
    lr: float = 1e-3
    weight_decay: float = 0.0
    max_epochs: int = 30
    patience: int = 3
    seed: int = 0
    ablation: str = "none"
    lambda_group: float = 1.0
    lambda_con: float = 0.001
    lambda_ortho: float = 0.0001
    log_every: int = 50


@dataclass
class EvalConfig:
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    batch_size: int = 8192
    alpha: float = 0.05


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    group: GroupConfig = field(default_factory=GroupConfig)
    individual: IndividualConfig = field(default_factory=IndividualConfig)
    construct: ConstructConfig = field(default_factory=ConstructConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = "runs"

    def to_dict(self):
        return dataclasses.asdict(self)

    def copy(self):
        return copy.deepcopy(self)


def _coerce(value, tp, path, problems):
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(value, args[0], path, problems)
    if tp is bool:
        if isinstance(value, bool):
            return value
        problems.append((path, f"expected a boolean, got {value!r}"))
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            problems.append((path, f"expected an integer, got {value!r}"))
            return value
        return int(value)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            problems.append((path, f"expected a number, got {value!r}"))
            return value
        return float(value)
    if tp is str:
        if not isinstance(value, (str, int, float)):
            problems.append((path, f"expected a string, got {value!r}"))
            return value
        return str(value)
    if tp is list:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return [value]
        if not isinstance(value, (list, tuple)):
            problems.append((path, f"expected a list, got {value!r}"))
            return value
        return list(value)
    if tp is dict:
        if not isinstance(value, dict):
            problems.append((path, f"expected a mapping, got {value!r}"))
        return dict(value) if isinstance(value, dict) else value
    return value


def _build(cls, data, prefix, problems):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        problems.append((prefix or "<root>", "expected a mapping"))
        return cls()
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            problems.append((f"{prefix}{key}", "unknown key"))
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        tp = hints[f.name]
        path = f"{prefix}{f.name}"
        if dataclasses.is_dataclass(tp):
            kwargs[f.name] = _build(tp, data[f.name], path + ".", problems)
        else:
            kwargs[f.name] = _coerce(data[f.name], tp, path, problems)
    return cls(**kwargs)


def validate(cfg):
    problems = []

    def need(cond, path, msg):
        if not cond:
            problems.append((path, msg))

    need(cfg.dataset.kind in ("csv", "ml1m", "synthetic", "encoded"), "dataset.kind", "must be csv, ml1m, synthetic or encoded")
    need(len(cfg.dataset.ratios) == 3 and abs(sum(cfg.dataset.ratios) - 1) < 1e-9, "dataset.ratios", "three ratios summing to 1")
    need(cfg.model.embedding_dim > 0, "model.embedding_dim", "must be positive")
    need(cfg.backbone.kind in ("mlp", "dcn"), "backbone.kind", "must be mlp or dcn")
    need(all(isinstance(h, int) and h > 0 for h in cfg.backbone.hidden) and cfg.backbone.hidden,
         "backbone.hidden", "positive integer widths")
    need(cfg.backbone.kind != "dcn" or cfg.backbone.cross_depth >= 1, "backbone.cross_depth", "must be >= 1 for dcn")
    need(cfg.group.count >= 1, "group.count", "must be >= 1")
    need(cfg.group.tau > 0, "group.tau", "must be > 0")
    need(cfg.group.dim > 0, "group.dim", "must be positive")
    need(cfg.group.mode in ("auto", "concat", "sum"), "group.mode", "must be auto, concat or sum")
    need(cfg.group.clamp_con > 0, "group.clamp_con", "must be > 0")
    need(cfg.group.aux_head and cfg.group.aux_head[-1] == 1, "group.aux_head", "last width must be 1")
    need(cfg.individual.ortho_mode in ("raw", "abs", "square"), "individual.ortho_mode", "must be raw, abs or square")
    need(cfg.individual.dim is None or cfg.individual.dim > 0, "individual.dim", "must be positive")
    need(cfg.construct.strategy in STRATEGIES, "construct.strategy", f"must be one of {STRATEGIES}")
    need(cfg.construct.head and cfg.construct.head[-1] == 1, "construct.head", "last width must be 1")
    need(cfg.construct.ensemble_space in ("prob", "logit"), "construct.ensemble_space", "must be prob or logit")
    dp = cfg.construct.dp_target
    need(dp in ("last", "first", "all") or str(dp).lstrip("-").isdigit(), "construct.dp_target",
         "must be last, first, all or a layer index")
    need(cfg.train.batch_size > 0, "train.batch_size", "must be positive")
    need(cfg.train.lr > 0, "train.lr", "must be positive")
    need(cfg.train.patience >= 1, "train.patience", "must be >= 1")
    need(cfg.train.max_epochs >= 1, "train.max_epochs", "must be >= 1")
    need(cfg.train.ablation in ABLATIONS, "train.ablation", f"must be one of {ABLATIONS}")
    need(len(cfg.eval.seeds) >= 1, "eval.seeds", "at least one seed")
    if problems:
        raise ConfigError("invalid configuration: " + "; ".join(f"{k}: {m}" for k, m in problems), problems)
    return cfg


def from_dict(data):
    problems = []
    cfg = _build(ExperimentConfig, data, "", problems)
    if problems:
        raise ConfigError("invalid configuration: " + "; ".join(f"{k}: {m}" for k, m in problems), problems)
    return validate(cfg)


def parse_override(text):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value", [(text, "expected key=value")])
    key, raw = text.split("=", 1)
    return key.strip(), yaml.safe_load(raw) if raw.strip() else ""


def apply_overrides(data, overrides):
    """Apply ``key.path=value`` strings to a nested dict (in place) and return it."""
    for text in overrides or []:
        key, value = parse_override(text) if isinstance(text, str) else text
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a scalar", [(key, "not a section")])
        node[parts[-1]] = value
    return data


def load_config(path=None, overrides=None):
    data = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}", [("--config", "file not found")])
        data = yaml.safe_load(path.read_text()) or {}
    return from_dict(apply_overrides(data, overrides))


def apply_ablation(cfg, variant=None):
    """Return a copy of ``cfg`` wired for ablation ``variant`` (default: ``cfg.train.ablation``).

    v1 single group embeddings with softmax division, no contrastive term;
    v2 no individual representation (and so no orthogonal term);
    v3/v4/v5 zero the group / contrastive / orthogonal weight.
    """
    variant = variant or cfg.train.ablation
    if variant not in ABLATIONS:
        raise ConfigError(f"unknown ablation {variant!r}", [("train.ablation", "unknown variant")])
    out = cfg.copy()
    out.train.ablation = variant
    if variant == "v1":
        out.group.dual = False
        out.train.lambda_con = 0.0
    elif variant == "v2":
        out.individual.enabled = False
        out.train.lambda_ortho = 0.0
    elif variant == "v3":
        out.train.lambda_group = 0.0
    elif variant == "v4":
        out.train.lambda_con = 0.0
    elif variant == "v5":
        out.train.lambda_ortho = 0.0
    return out
