"""Categorical interaction data: schema, encoding, splitting, synthetic worlds.

Samples are stored as integer category indices, one column per schema
field, which is equivalent to (and much cheaper than) the one-hot form.
Index 0 of every field is reserved for values unseen when the category
maps were built.
"""
import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import CardinalityError, ConfigError, DatasetNotFoundError, LabelError, SchemaError
from .io import load_arrays, save_arrays
from .seeding import numpy_rng

ROLES = ("personal", "other", "item")
_ROLE_ALIASES = {"other-user": "other", "other_user": "other", "user": "other"}
UNKNOWN_INDEX = 0


@dataclass(frozen=True)
class Field:
    name: str
    role: str
    cardinality: int


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature fields, each tagged personal / other-user / item."""

    fields: tuple
    label_name: str = "label"

    def __post_init__(self):
        fields = tuple(
            f if isinstance(f, Field) else Field(f["name"], f["role"], f["cardinality"])
            for f in self.fields
        )
        fields = tuple(Field(f.name, _ROLE_ALIASES.get(f.role, f.role), int(f.cardinality)) for f in fields)
        object.__setattr__(self, "fields", fields)
        names = [f.name for f in fields]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate field names in {names}")
        if self.label_name in names:
            raise SchemaError(f"label column {self.label_name!r} is also a feature field")
        for f in fields:
            if f.role not in ROLES:
                raise SchemaError(f"field {f.name!r}: unknown role {f.role!r}")
            if f.cardinality <= 0:
                raise SchemaError(f"field {f.name!r}: cardinality must be positive")
        for role in ROLES:
            if not any(f.role == role for f in fields):
                raise SchemaError(f"schema needs at least one {role!r} field")

    @property
    def names(self):
        return [f.name for f in self.fields]

    @property
    def cardinalities(self):
        return [f.cardinality for f in self.fields]

    def positions(self, role):
        return [i for i, f in enumerate(self.fields) if f.role == role]

    def count(self, role):
        return len(self.positions(role))

    def with_personal(self, personal):
        """Re-tag user fields so that exactly ``personal`` carry the personal role."""
        personal = set(personal)
        unknown = personal - set(self.names)
        if unknown:
            raise SchemaError(f"personal fields not in schema: {sorted(unknown)}")
        fields = []
        for f in self.fields:
            if f.role == "item":
                if f.name in personal:
                    raise SchemaError(f"item field {f.name!r} cannot be personal")
                fields.append(f)
            else:
                fields.append(Field(f.name, "personal" if f.name in personal else "other", f.cardinality))
        return FeatureSchema(tuple(fields), self.label_name)

    def to_dict(self):
        return {"label": self.label_name,
                "fields": [{"name": f.name, "role": f.role, "cardinality": f.cardinality} for f in self.fields]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["fields"]), d.get("label", "label"))


def ml1m_schema(personal=("user_id",)):
    """Schema for the joined MovieLens-1M table produced by :func:`convert_ml1m`.

    Cardinalities leave headroom over the observed distinct counts
    (6040 users, 3706 rated movies, 3439 zip codes, 301 genre strings) plus
    the reserved unknown slot.
    """
    user_fields = [("user_id", 6100), ("gender", 3), ("age", 8), ("occupation", 22), ("zip", 3500)]
    item_fields = [("movie_id", 4000), ("year", 100), ("genres", 400)]
    personal = set(personal)
    unknown = personal - {n for n, _ in user_fields}
    if unknown:
        raise SchemaError(f"personal fields must be user fields, got {sorted(unknown)}")
    fields = [Field(n, "personal" if n in personal else "other", c) for n, c in user_fields]
    fields += [Field(n, "item", c) for n, c in item_fields]
    return FeatureSchema(tuple(fields), "rating")


@dataclass(frozen=True)
class EncodedSample:
    indices: tuple
    label: int


@dataclass
class EncodedDataset:
    """A collection of encoded samples held as parallel arrays."""

    schema: FeatureSchema
    indices: np.ndarray
    labels: np.ndarray
    row_ids: np.ndarray = None

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.row_ids is None:
            self.row_ids = np.arange(len(self.labels), dtype=np.int64)
        self.row_ids = np.asarray(self.row_ids, dtype=np.int64)
        if self.indices.ndim != 2 or self.indices.shape[1] != len(self.schema.fields):
            raise SchemaError(f"indices shape {self.indices.shape} does not match {len(self.schema.fields)} fields")
        if not (len(self.indices) == len(self.labels) == len(self.row_ids)):
            raise SchemaError("indices, labels and row_ids differ in length")
        self.validate()

    def validate(self):
        if len(self.labels) and not np.isin(self.labels, (0, 1)).all():
            raise LabelError("labels must be exactly 0 or 1")
        card = np.asarray(self.schema.cardinalities)
        if len(self.indices) and ((self.indices < 0).any() or (self.indices >= card).any()):
            bad = np.where(((self.indices < 0) | (self.indices >= card)).any(axis=0))[0]
            raise CardinalityError(f"indices out of range for fields {[self.schema.names[i] for i in bad]}")

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        return EncodedSample(tuple(int(v) for v in self.indices[i]), int(self.labels[i]))

    def subset(self, positions):
        positions = np.asarray(positions, dtype=np.int64)
        return EncodedDataset(self.schema, self.indices[positions], self.labels[positions], self.row_ids[positions])

    def digest(self):
        h = hashlib.sha256()
        for arr in (self.indices, self.labels, self.row_ids):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def save(self, path, extra=None):
        manifest = {"schema": self.schema.to_dict(), "digest": self.digest()}
        manifest.update(extra or {})
        return save_arrays(path, {"indices": self.indices, "labels": self.labels, "row_ids": self.row_ids}, manifest)

    @classmethod
    def load(cls, path):
        arrays, manifest = load_arrays(path)
        return cls(FeatureSchema.from_dict(manifest["schema"]), arrays["indices"], arrays["labels"], arrays["row_ids"])


class CategoryEncoder:
    """Per-field value -> index maps.

    Known values get indices ``1..n`` in sorted order of their string form, so
    the mapping depends only on the set of values seen, not on row order.
    """

    def __init__(self, schema, maps=None):
        self.schema = schema
        self.maps = maps or {f.name: {} for f in schema.fields}

    def fit(self, frame):
        for f in self.schema.fields:
            values = sorted(set(frame[f.name].astype(str)))
            if len(values) + 1 > f.cardinality:
                raise CardinalityError(
                    f"field {f.name!r}: {len(values)} distinct values need cardinality >= {len(values) + 1}, "
                    f"declared {f.cardinality}")
            self.maps[f.name] = {v: i + 1 for i, v in enumerate(values)}
        return self

    def encode(self, frame):
        cols = []
        for f in self.schema.fields:
            mapping = self.maps[f.name]
            col = frame[f.name].astype(str).map(mapping).fillna(UNKNOWN_INDEX).to_numpy(dtype=np.int64)
            cols.append(col)
        return np.stack(cols, axis=1) if cols else np.zeros((len(frame), 0), dtype=np.int64)

    def decode(self, indices):
        """Inverse of :meth:`encode`; unknown slots decode to ``None``."""
        indices = np.atleast_2d(indices)
        out = []
        inverse = {name: {i: v for v, i in m.items()} for name, m in self.maps.items()}
        for row in indices:
            out.append([inverse[f.name].get(int(i)) for f, i in zip(self.schema.fields, row)])
        return out

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["field", "value", "index"])
            for f in self.schema.fields:
                for value, idx in sorted(self.maps[f.name].items(), key=lambda kv: kv[1]):
                    w.writerow([f.name, value, idx])
        return path

    @classmethod
    def load(cls, path, schema):
        maps = {f.name: {} for f in schema.fields}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                if row["field"] not in maps:
                    raise SchemaError(f"mapping file names unknown field {row['field']!r}")
                maps[row["field"]][row["value"]] = int(row["index"])
        return cls(schema, maps)


def binarize_labels(raw, threshold=None):
    """Map raw label values to {0, 1}; with a threshold, ``label = raw >= threshold``."""
    if threshold is not None:
        values = pd.to_numeric(pd.Series(raw), errors="coerce")
        if values.isna().any():
            raise LabelError("non-numeric label values cannot be binarized")
        return (values.to_numpy() >= threshold).astype(np.int8)
    values = pd.to_numeric(pd.Series(raw), errors="coerce").to_numpy()
    if np.isnan(values).any() or not np.isin(values, (0, 1)).all():
        raise LabelError("labels are not binary; set a binarization threshold")
    return values.astype(np.int8)


def read_raw_csv(path, schema):
    path = Path(path)
    if not path.exists():
        raise DatasetNotFoundError(f"dataset not found: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in schema.names + [schema.label_name] if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    return frame


def load_csv(path, schema, binarize_threshold=None, encoder=None, mapping_path="auto"):
    """Read a header-row CSV and encode it against ``schema``.

    When ``encoder`` is None a new one is fitted on the whole file. The
    mapping is written beside the file (``<stem>.mapping.csv``) unless
    ``mapping_path`` is None.

    Returns ``(dataset, encoder)``.
    """
    frame = read_raw_csv(path, schema)
    labels = binarize_labels(frame[schema.label_name], binarize_threshold)
    if encoder is None:
        encoder = CategoryEncoder(schema).fit(frame)
    ds = EncodedDataset(schema, encoder.encode(frame), labels, np.arange(len(frame)))
    if mapping_path == "auto":
        mapping_path = Path(path).with_suffix(".mapping.csv")
    if mapping_path is not None:
        encoder.save(mapping_path)
    return ds, encoder


@dataclass
class DatasetSplit:
    train: EncodedDataset
    valid: EncodedDataset
    test: EncodedDataset
    seed: int
    ratios: tuple = (0.8, 0.1, 0.1)

    def sizes(self):
        return len(self.train), len(self.valid), len(self.test)

    def digests(self):
        return {"train": self.train.digest(), "valid": self.valid.digest(), "test": self.test.digest()}

    def write_manifest(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["partition", "row_id"])
            for name in ("train", "valid", "test"):
                for rid in np.sort(getattr(self, name).row_ids):
                    w.writerow([name, int(rid)])
        return path


def _check_ratios(ratios):
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    return ratios


def partition_sizes(n, ratios=(0.8, 0.1, 0.1)):
    ratios = _check_ratios(ratios)
    n_train = int(round(ratios[0] * n))
    n_valid = min(int(round(ratios[1] * n)), n - n_train)
    return n_train, n_valid, n - n_train - n_valid


def split_positions(keys, ratios, seed):
    """Assign rows to train/valid/test from their content, not their position.

    ``keys`` is a 2-D array (rows x key columns). Rows are put in canonical
    (lexicographic) order before the seeded shuffle, so permuting the input
    rows permutes the output identically.
    """
    keys = np.asarray(keys)
    n = len(keys)
    if n == 0:
        raise ConfigError("cannot split an empty sample collection")
    sizes = partition_sizes(n, ratios)
    canonical = np.lexsort(keys.T[::-1]) if keys.ndim == 2 and keys.shape[1] else np.arange(n)
    perm = canonical[numpy_rng(seed, "split").permutation(n)]
    a, b = sizes[0], sizes[0] + sizes[1]
    return perm[:a], perm[a:b], perm[b:]


def split(samples, ratios=(0.8, 0.1, 0.1), seed=0):
    keys = np.column_stack([samples.indices, samples.labels])
    tr, va, te = split_positions(keys, ratios, seed)
    return DatasetSplit(samples.subset(tr), samples.subset(va), samples.subset(te), seed, tuple(ratios))


def prepare_csv(path, schema, seed=0, ratios=(0.8, 0.1, 0.1), binarize_threshold=None):
    """Leakage-free ingestion: split raw rows, fit category maps on train only, encode all.

    Returns ``(DatasetSplit, CategoryEncoder)``.
    """
    frame = read_raw_csv(path, schema)
    labels = binarize_labels(frame[schema.label_name], binarize_threshold)
    cols = schema.names + [schema.label_name]
    keys = np.column_stack([pd.factorize(frame[c], sort=True)[0] for c in cols])
    tr, va, te = split_positions(keys, ratios, seed)
    encoder = CategoryEncoder(schema).fit(frame.iloc[tr])
    ds = EncodedDataset(schema, encoder.encode(frame), labels, np.arange(len(frame)))
    return DatasetSplit(ds.subset(tr), ds.subset(va), ds.subset(te), seed, tuple(ratios)), encoder


def convert_ml1m(raw_dir, out_csv):
    """Join the raw ``ratings.dat``/``users.dat``/``movies.dat`` files into one CSV."""
    raw_dir = Path(raw_dir)
    for name in ("ratings.dat", "users.dat", "movies.dat"):
        if not (raw_dir / name).exists():
            raise DatasetNotFoundError(f"MovieLens-1M file missing: {raw_dir / name}")
    opts = dict(sep="::", engine="python", encoding="latin-1", header=None, dtype=str)
    ratings = pd.read_csv(raw_dir / "ratings.dat", names=["user_id", "movie_id", "rating", "timestamp"], **opts)
    users = pd.read_csv(raw_dir / "users.dat", names=["user_id", "gender", "age", "occupation", "zip"], **opts)
    movies = pd.read_csv(raw_dir / "movies.dat", names=["movie_id", "title", "genres"], **opts)
    movies["year"] = movies["title"].str.extract(r"\((\d{4})\)\s*$", expand=False).fillna("unknown")
    table = ratings.merge(users, on="user_id", how="left").merge(movies, on="movie_id", how="left")
    cols = ["user_id", "gender", "age", "occupation", "zip", "movie_id", "year", "genres", "rating"]
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    table[cols].to_csv(out_csv, index=False)
    return out_csv


# --- synthetic planted-group worlds ---------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    n_groups: int = 4
    n_users: int = 200
    n_items: int = 200
    n_interactions: int = 50_000
    contrast: float = 6.0
    latent_dim: int = 8
    offset_scale: float = 0.3
    # probability that the observable "segment" attribute equals the hidden group
    segment_agreement: float = 0.5
    n_regions: int = 5
    n_genres: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.n_groups < 2:
            raise ConfigError("synthetic worlds need at least 2 planted groups")
        if self.contrast < 0:
            raise ConfigError("contrast must be >= 0")


@dataclass
class SyntheticData:
    spec: SyntheticSpec
    dataset: EncodedDataset
    user_groups: np.ndarray      # hidden group per user (index = user_id - 1)
    group_vectors: np.ndarray
    item_vectors: np.ndarray
    user_offsets: np.ndarray
    extras: dict = field(default_factory=dict)

    def sample_groups(self, ds=None):
        """Ground-truth group of each sample's user (evaluation use only)."""
        ds = ds if ds is not None else self.dataset
        return self.user_groups[ds.indices[:, 0] - 1]

    def arrays(self):
        return {"indices": self.dataset.indices, "labels": self.dataset.labels,
                "row_ids": self.dataset.row_ids, "user_groups": self.user_groups,
                "group_vectors": self.group_vectors, "item_vectors": self.item_vectors,
                "user_offsets": self.user_offsets}

    def digest(self):
        h = hashlib.sha256()
        for name, arr in sorted(self.arrays().items()):
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def save(self, path):
        spec = {k: getattr(self.spec, k) for k in self.spec.__dataclass_fields__}
        return save_arrays(path, self.arrays(), {"spec": spec, "schema": self.dataset.schema.to_dict()})


def synthetic_schema(spec):
    return FeatureSchema((
        Field("user_id", "personal", spec.n_users + 1),
        Field("segment", "other", spec.n_groups + 1),
        Field("region", "other", spec.n_regions + 1),
        Field("item_id", "item", spec.n_items + 1),
        Field("genre", "item", spec.n_genres + 1),
    ), "label")


def generate_synthetic(spec):
    """Draw a planted-group CTR world.

    Each user belongs to one hidden group with preference vector ``g``; the
    click probability for (user, item) is
    ``sigmoid(contrast * <g_user, v_item> + offset_user)``. The only user
    attribute correlated with the hidden group is a noisy ``segment`` field.
    """
    rng = numpy_rng(spec.seed, "synthetic")
    k, r = spec.n_groups, spec.latent_dim
    user_groups = rng.integers(0, k, size=spec.n_users)
    group_vectors = rng.normal(size=(k, r))
    item_vectors = rng.normal(size=(spec.n_items, r)) / np.sqrt(r)
    user_offsets = rng.normal(scale=spec.offset_scale, size=spec.n_users)
    noisy = rng.random(spec.n_users) >= spec.segment_agreement
    segment = np.where(noisy, rng.integers(0, k, size=spec.n_users), user_groups)
    region = rng.integers(0, spec.n_regions, size=spec.n_users)
    genre = rng.integers(0, spec.n_genres, size=spec.n_items)

    users = rng.integers(0, spec.n_users, size=spec.n_interactions)
    items = rng.integers(0, spec.n_items, size=spec.n_interactions)
    affinity = np.einsum("nd,nd->n", group_vectors[user_groups[users]], item_vectors[items])
    logits = spec.contrast * affinity + user_offsets[users]
    labels = (rng.random(spec.n_interactions) < 1.0 / (1.0 + np.exp(-logits))).astype(np.int8)

    indices = np.column_stack([users + 1, segment[users] + 1, region[users] + 1, items + 1, genre[items] + 1])
    ds = EncodedDataset(synthetic_schema(spec), indices, labels)
    return SyntheticData(spec, ds, user_groups, group_vectors, item_vectors, user_offsets,
                         {"click_prob": 1.0 / (1.0 + np.exp(-logits))})
