"""Wine and Digits loaders, z-score normalization and stratified splits.

Both datasets ship as headerless CSV files (features first, integer label
last) inside the package. ``QEWO_DATA_DIR`` points the loader elsewhere.
"""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

SCHEMAS = {
    "wine": {"n_features": 13, "n_classes": 3, "file": "wine.csv"},
    "digits": {"n_features": 64, "n_classes": 10, "file": "digits.csv"},
}

CHECKSUMS = {
    "wine.csv": "43c3445899a22ab4fab43516c3f3fa54dbdaca7368b049590a9fb0117848e5e8",
    "digits.csv": "6ebb3d2fee246a4e99363262ddf8a00a3c41bee6014c373ed9d9216ba7f651b8",
}


class DataError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    n_classes: int
    feature_names: list | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError("X and y disagree on sample count")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.n_classes):
            raise DataError("labels outside [0, n_classes)")

    def __len__(self):
        return self.y.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return replace(self, X=self.X[idx], y=self.y[idx])

    def onehot(self) -> np.ndarray:
        return one_hot(self.y, self.n_classes)


@dataclass
class SplitDataset:
    train: Dataset
    test: Dataset
    seed: int
    train_index: np.ndarray | None = None
    test_index: np.ndarray | None = None


def data_dir() -> Path:
    override = os.environ.get("QEWO_DATA_DIR")
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "datasets"


def dataset_path(schema: str) -> Path:
    if schema not in SCHEMAS:
        raise DataError(f"unknown dataset schema {schema!r}")
    return data_dir() / SCHEMAS[schema]["file"]


def load_csv(path, schema: str) -> Dataset:
    if schema not in SCHEMAS:
        raise DataError(f"unknown dataset schema {schema!r}")
    spec = SCHEMAS[schema]
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"dataset file {path} not found; set QEWO_DATA_DIR to the directory "
            f"holding {spec['file']}"
        )
    raw = path.read_bytes()
    n_cols = spec["n_features"] + 1
    rows, labels = [], []
    text = raw.decode("utf-8").splitlines()
    for lineno, record in enumerate(csv.reader(text), start=1):
        if not record or all(not c.strip() for c in record):
            continue
        if len(record) != n_cols:
            raise DataError(
                f"{path}:{lineno}: expected {n_cols} columns for {schema}, got {len(record)}")
        try:
            values = [float(c) for c in record[:-1]]
            label = float(record[-1])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: malformed row ({exc})") from None
        if label != int(label):
            raise DataError(f"{path}:{lineno}: label {record[-1]!r} is not an integer")
        rows.append(values)
        labels.append(int(label))
    if not rows:
        raise DataError(f"{path}: no data rows")
    X = np.asarray(rows, dtype=float)
    y = np.asarray(labels, dtype=int)
    if np.isnan(X).any():
        raise DataError(f"{path}: NaN feature values")
    digest = hashlib.sha256(raw).hexdigest()
    prov = {"path": str(path), "sha256": digest, "verified": CHECKSUMS.get(path.name) == digest}
    return Dataset(X, y, spec["n_classes"], provenance=prov)


def load(schema: str) -> Dataset:
    return load_csv(dataset_path(schema), schema)


SCALINGS = ("zscore", "minmax")


def normalize(train: Dataset, test: Dataset, scaling: str = "zscore"):
    """Scale features with train statistics; constant features become 0.

    ``zscore`` centers and divides by the standard deviation, ``minmax`` maps
    the train range onto [0, 1].
    """
    if train.n_features != test.n_features:
        raise DataError("train and test feature counts differ")
    if scaling == "zscore":
        shift = train.X.mean(axis=0)
        scale = train.X.std(axis=0)
    elif scaling == "minmax":
        shift = train.X.min(axis=0)
        scale = train.X.max(axis=0) - shift
    else:
        raise DataError(f"unknown scaling {scaling!r}; choose from {SCALINGS}")
    safe = np.where(scale > 0, scale, 1.0)

    def apply(X):
        Z = (X - shift) / safe
        Z[:, scale == 0] = 0.0
        return Z

    stats = {"shift": shift, "scale": scale, "scaling": scaling}
    return replace(train, X=apply(train.X)), replace(test, X=apply(test.X)), stats


def one_hot(y, n_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=int)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"label outside [0, {n_classes})")
    out = np.zeros((y.size, n_classes))
    out[np.arange(y.size), y] = 1.0
    return out


def split(ds: Dataset, train_fraction: float = 0.8, seed: int = 0, rng=None) -> SplitDataset:
    """Stratified split.

    Each class contributes ``floor(fraction * class_size)`` training rows; the
    shortfall against ``floor(fraction * n)`` is filled one row at a time from
    the classes with the largest remainders (ties to the lower label).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    gen = rng if rng is not None else np.random.default_rng(seed)
    classes, counts = np.unique(ds.y, return_counts=True)
    if counts.min() < 2:
        raise DataError("every class needs at least 2 samples to stratify")
    target = int(np.floor(train_fraction * len(ds)))
    exact = train_fraction * counts
    per_class = np.floor(exact).astype(int)
    remainders = exact - per_class
    order = sorted(range(len(classes)), key=lambda c: (-remainders[c], classes[c]))
    short = target - per_class.sum()
    for c in order[:short]:
        per_class[c] += 1
    train_idx, test_idx = [], []
    for c, label in enumerate(classes):
        members = np.flatnonzero(ds.y == label)
        members = members[gen.permutation(members.size)]
        train_idx.append(members[:per_class[c]])
        test_idx.append(members[per_class[c]:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return SplitDataset(ds.subset(train_idx), ds.subset(test_idx), seed, train_idx, test_idx)


def prepare(schema: str, seed: int, subsample: int | None = None, scaling: str = "zscore"):
    """Load, optionally subsample (stratified), split 80/20 and normalize."""
    ds = load(schema)
    if subsample and subsample < len(ds):
        pick = split(ds, subsample / len(ds), seed=seed + 7919).train_index
        ds = ds.subset(pick)
    parts = split(ds, 0.8, seed=seed)
    train, test, _ = normalize(parts.train, parts.test, scaling)
    return SplitDataset(train, test, seed, parts.train_index, parts.test_index)
