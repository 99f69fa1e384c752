import numpy as np
import pytest
import torch

from gprec.config import ExperimentConfig
from gprec.data import EncodedDataset, FeatureSchema, Field

import acceptance_log


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance_log.RESULTS):
        title, passed, detail = acceptance_log.RESULTS[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}  {detail}")


@pytest.fixture
def tiny_schema():
    return FeatureSchema((
        Field("user_id", "personal", 7),
        Field("segment", "other", 4),
        Field("item_id", "item", 6),
        Field("genre", "item", 3),
    ))


def tiny_config(strategy="input", G=3, use_gprec=True):
    cfg = ExperimentConfig()
    cfg.model.embedding_dim = 4
    cfg.model.use_gprec = use_gprec
    cfg.backbone.hidden = [8, 6]
    cfg.group.count = G
    cfg.group.dim = 4
    cfg.group.trunk = [8, 6]
    cfg.group.aux_head = [8, 4, 1]
    cfg.individual.hidden = [6]
    cfg.construct.strategy = strategy
    cfg.construct.head = [8, 6, 4, 1]
    cfg.construct.dp_hidden = [6]
    return cfg


@pytest.fixture
def tiny_batch(tiny_schema):
    rng = np.random.default_rng(0)
    n = 6
    idx = np.column_stack([rng.integers(1, f.cardinality, n) for f in tiny_schema.fields])
    y = np.array([1, 0, 1, 1, 0, 0])
    return torch.as_tensor(idx), torch.as_tensor(y, dtype=torch.float64)


@pytest.fixture
def tiny_dataset(tiny_schema):
    rng = np.random.default_rng(1)
    n = 200
    idx = np.column_stack([rng.integers(0, f.cardinality, n) for f in tiny_schema.fields])
    return EncodedDataset(tiny_schema, idx, rng.integers(0, 2, n))
