"""Dataset ingestion and the one-class experimental protocol.

CSV in (header row, named binary label column), then: half of the
normal rows become the training set, everything else is the test set;
normalization is fitted on train rows only; optionally each row is
re-shaped into overlapping attribute windows; optionally a controlled
number of anomalies is moved from test into train to simulate a
contaminated training pool.

All operations are pure functions of (inputs, seed).
"""

import configparser
import csv
import math
import os
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DatasetError, ParseError, ShapeMismatchError

DATA_DIR_ENV = "TABDISENT_DATA_DIR"
NORMALIZATIONS = ("zscore", "minmax", "none")
PATCH_MODES = ("none", "patch_3xM2", "patch_2xM2", "patch_2x3M4", "patch_3xM3")

_SCALE_FLOOR = 1e-12


@dataclass
class TabularDataset:
    name: str
    features: np.ndarray  # (N, D) float64
    labels: np.ndarray  # (N,) int64, 0 normal / 1 anomaly


@dataclass
class NormalizationStats:
    """Per-attribute location/scale fitted on training rows only."""

    method: str
    loc: np.ndarray
    scale: np.ndarray

    def apply(self, features):
        if self.method == "none":
            return np.array(features, dtype=np.float64)
        degenerate = self.scale < _SCALE_FLOOR
        safe = np.where(degenerate, 1.0, self.scale)
        out = (features - self.loc) / safe
        out[:, degenerate] = 0.0
        return out


@dataclass
class DatasetSplit:
    """Train/test matrices plus provenance into the raw dataset rows."""

    train: np.ndarray
    test: np.ndarray
    test_labels: np.ndarray
    train_indices: np.ndarray
    test_indices: np.ndarray
    normalization_stats: NormalizationStats = None


def _parse_csv(path, label_column):
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        label_idx = None
        if label_column is not None:
            if label_column not in header:
                raise ParseError(f"{path}: no column named {label_column!r} in header {header}")
            label_idx = header.index(label_column)
        feature_cols = [i for i in range(len(header)) if i != label_idx]
        if not feature_cols:
            raise ParseError(f"{path}: no feature columns besides the label")
        features, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: line {line_no}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for i in feature_cols:
                try:
                    v = float(row[i])
                except ValueError:
                    raise ParseError(
                        f"{path}: line {line_no}, column {header[i]!r}: not numeric: {row[i]!r}"
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}: line {line_no}, column {header[i]!r}: non-finite value {row[i]!r}")
                vals.append(v)
            features.append(vals)
            if label_idx is not None:
                raw = row[label_idx].strip()
                try:
                    lv = float(raw)
                except ValueError:
                    lv = None
                if lv not in (0.0, 1.0):
                    raise ParseError(
                        f"{path}: line {line_no}, column {label_column!r}: label must be 0 or 1, got {raw!r}"
                    )
                labels.append(int(lv))
    if not features:
        raise ParseError(f"{path}: no data rows")
    feats = np.array(features, dtype=np.float64)
    labs = np.array(labels, dtype=np.int64) if label_idx is not None else None
    return feats, labs


def load_csv(path, label_column="label", name=None):
    """Strictly parsed labeled dataset; row order preserved."""
    feats, labs = _parse_csv(path, label_column)
    ds = TabularDataset(name=name or Path(path).stem, features=feats, labels=labs)
    if not ((labs == 0).any() and (labs == 1).any()):
        raise DatasetError(f"{path}: need at least one normal and one anomaly row")
    return ds


def load_features(path, label_column="label"):
    """Lenient loader for scoring: labels come back None when the column
    is absent."""
    try:
        return _parse_csv(path, label_column)
    except ParseError as exc:
        if "no column named" in str(exc):
            return _parse_csv(path, None)
        raise


def split_train_test(ds, seed):
    """Half the normals (rounded down) to train, the rest plus every
    anomaly to test; membership is seeded, row order is by original
    index."""
    normal_rows = np.flatnonzero(ds.labels == 0)
    anomaly_rows = np.flatnonzero(ds.labels == 1)
    if normal_rows.size < 2:
        raise DatasetError(f"{ds.name}: need at least 2 normal rows to split, got {normal_rows.size}")
    k = normal_rows.size // 2
    perm = np.random.default_rng(seed).permutation(normal_rows.size)
    train_idx = np.sort(normal_rows[perm[:k]])
    test_idx = np.sort(np.concatenate([normal_rows[perm[k:]], anomaly_rows]))
    return DatasetSplit(
        train=ds.features[train_idx],
        test=ds.features[test_idx],
        test_labels=ds.labels[test_idx],
        train_indices=train_idx,
        test_indices=test_idx,
    )


def normalize(split, method="zscore"):
    """Fit per-attribute stats on train only, transform both matrices.

    zscore uses population std; an attribute whose scale is below 1e-12
    maps to 0 everywhere. minmax maps the train range to [0, 1] with the
    same degenerate-attribute rule.
    """
    if method not in NORMALIZATIONS:
        raise ConfigError(f"normalization: unknown method {method!r}")
    if method == "zscore":
        stats = NormalizationStats("zscore", split.train.mean(axis=0), split.train.std(axis=0))
    elif method == "minmax":
        lo = split.train.min(axis=0)
        stats = NormalizationStats("minmax", lo, split.train.max(axis=0) - lo)
    else:
        d = split.train.shape[1]
        stats = NormalizationStats("none", np.zeros(d), np.ones(d))
    return replace(
        split,
        train=stats.apply(split.train),
        test=stats.apply(split.test),
        normalization_stats=stats,
    )


def patch_windows(num_attributes, mode="patch_3xM2"):
    """(start, length) of each overlapping window for a patch mode."""
    m = int(num_attributes)
    if m < 2:
        raise ShapeMismatchError(f"patch-splitting needs at least 2 attributes, got {m}")
    if mode == "patch_3xM2":
        count, length = 3, -(-m // 2)
    elif mode == "patch_2xM2":
        count, length = 2, -(-m // 2)
    elif mode == "patch_2x3M4":
        count, length = 2, -(-(3 * m) // 4)
    elif mode == "patch_3xM3":
        count, length = 3, -(-m // 3)
    else:
        raise ConfigError(f"preprocessing: unknown patch mode {mode!r}")
    if count == 2:
        starts = [0, m - length]
    else:
        starts = [0, (m - length) // 2, m - length]
    return [(s, length) for s in starts]


def patch_split(x_matrix, mode="patch_3xM2"):
    """(N, M) -> (N, windows, window-length); windows become the new
    attributes, their cells the new channels."""
    x = np.asarray(x_matrix)
    if x.ndim != 2:
        raise ShapeMismatchError(f"patch_split expects an (N, M) matrix, got shape {x.shape}")
    windows = patch_windows(x.shape[1], mode)
    return np.stack([x[:, s : s + length] for s, length in windows], axis=1)


def contaminate(split, ratio, seed):
    """Move floor(ratio*train/(1-ratio)) seeded anomalies from test into
    train (unlabeled there); ratio 0 is an exact no-op copy."""
    if not 0.0 <= ratio <= 0.05:
        raise ConfigError(f"contamination_ratio: must lie in [0, 0.05], got {ratio}")
    if ratio == 0.0:
        return replace(split)
    count = int(ratio * split.train.shape[0] / (1.0 - ratio))
    anomaly_pos = np.flatnonzero(split.test_labels == 1)
    if count > anomaly_pos.size:
        raise DatasetError(
            f"contamination needs {count} anomalies but the test set has only {anomaly_pos.size}"
        )
    chosen = np.sort(np.random.default_rng(seed).choice(anomaly_pos, size=count, replace=False))
    keep = np.setdiff1d(np.arange(split.test.shape[0]), chosen)
    return replace(
        split,
        train=np.concatenate([split.train, split.test[chosen]], axis=0),
        test=split.test[keep],
        test_labels=split.test_labels[keep],
        train_indices=np.concatenate([split.train_indices, split.test_indices[chosen]]),
        test_indices=split.test_indices[keep],
    )


@dataclass(frozen=True)
class DatasetDefaults:
    """One registry row: file location, validation stats, and the
    per-dataset training defaults."""

    name: str
    file: str
    label_column: str
    n: int
    d: int
    anomalies: int
    learning_rate: float
    epochs: int
    batch_size: int
    latent_channels: int
    preprocessing: str


def load_registry():
    """The bundled name -> DatasetDefaults registry."""
    parser = configparser.ConfigParser()
    with resources.files("tabdisent").joinpath("registry.ini").open("r", encoding="utf-8") as fh:
        parser.read_file(fh)
    registry = {}
    for section in parser.sections():
        s = parser[section]
        registry[section] = DatasetDefaults(
            name=section,
            file=s.get("file"),
            label_column=s.get("label_column", "label"),
            n=s.getint("n"),
            d=s.getint("d"),
            anomalies=s.getint("anomalies"),
            learning_rate=s.getfloat("learning_rate"),
            epochs=s.getint("epochs"),
            batch_size=s.getint("batch_size"),
            latent_channels=s.getint("latent_channels"),
            preprocessing=s.get("preprocessing", "none"),
        )
    return registry


def default_data_dir():
    return Path(os.environ.get(DATA_DIR_ENV) or "datasets")


def resolve_dataset(name_or_path, data_dir=None):
    """Registry name -> validated bundled dataset; anything else is
    treated as a CSV path and loaded without validation."""
    registry = load_registry()
    if name_or_path in registry:
        entry = registry[name_or_path]
        root = Path(data_dir) if data_dir is not None else default_data_dir()
        path = root / entry.file
        if not path.exists():
            raise DatasetError(
                f"dataset {name_or_path!r} expects {path}; place the CSV there "
                f"(scripts/fetch_datasets.py documents how to obtain and convert it) "
                f"or point {DATA_DIR_ENV} at the directory holding it"
            )
        ds = load_csv(path, label_column=entry.label_column, name=entry.name)
        n, d = ds.features.shape
        anomalies = int(ds.labels.sum())
        if (n, d, anomalies) != (entry.n, entry.d, entry.anomalies):
            raise DatasetError(
                f"{path}: expected N={entry.n}, D={entry.d}, anomalies={entry.anomalies} "
                f"for dataset {name_or_path!r}, found N={n}, D={d}, anomalies={anomalies}"
            )
        return ds
    path = Path(name_or_path)
    if not path.exists():
        raise DatasetError(
            f"{name_or_path!r} is neither a registered dataset name {sorted(registry)} nor an existing CSV path"
        )
    return load_csv(path)


def write_csv(ds, path):
    """Inverse of load_csv: x0..x{D-1} feature columns plus 'label'."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = ds.features.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(d)] + ["label"])
        for row, label in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
