"""Bi-level (group + individual) user modeling for deep CTR recommenders."""
__version__ = "0.1.0"

from .config import ExperimentConfig, apply_ablation, load_config  # noqa: E402
from .data import (  # noqa: E402
    DatasetSplit, EncodedDataset, FeatureSchema, Field, SyntheticSpec, generate_synthetic, load_csv, split,
)
from .evaluation import MetricReport, auc, compare, evaluate, logloss  # noqa: E402
from .model import CTRModel, build_model  # noqa: E402
from .training import load_checkpoint, save_checkpoint, total_loss, train  # noqa: E402

__all__ = [
    "ExperimentConfig", "apply_ablation", "load_config",
    "DatasetSplit", "EncodedDataset", "FeatureSchema", "Field", "SyntheticSpec", "generate_synthetic",
    "load_csv", "split",
    "MetricReport", "auc", "compare", "evaluate", "logloss",
    "CTRModel", "build_model",
    "load_checkpoint", "save_checkpoint", "total_loss", "train",
]
