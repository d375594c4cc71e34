"""Numeric dataset container, CSV loading, standardization, fold splitting.

A dataset is a dense float matrix with an observation mask, integer class
labels, and light metadata.  The mask is authoritative: cell values where
``mask`` is False are stored as NaN and must never be read.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "DataError",
    "DatasetMeta",
    "Dataset",
    "AttributeStats",
    "FoldSplit",
    "MISSING_TOKENS",
    "load_csv",
    "bundled_path",
    "attribute_stats",
    "standardize",
    "destandardize",
    "split_2fold",
]

# Tokens that mark an unobserved cell in CSV input (after whitespace strip).
MISSING_TOKENS = frozenset({"", "?"})


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass(frozen=True)
class DatasetMeta:
    """Names attached to a dataset; class names are in first-appearance order."""

    name: str
    attribute_names: tuple[str, ...]
    class_names: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass
class Dataset:
    """N x F numeric data with an observation mask and dense class labels.

    values : float64 array, shape (N, F); NaN where mask is False
    mask   : bool array, shape (N, F); True = observed
    labels : int64 array, shape (N,); values in [0, n_classes)
    """

    values: np.ndarray
    mask: np.ndarray
    labels: np.ndarray
    meta: DatasetMeta

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        self.mask = np.ascontiguousarray(self.mask, dtype=bool)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.values.ndim != 2:
            raise DataError("values must be a 2-d array")
        if self.mask.shape != self.values.shape:
            raise DataError("mask shape does not match values")
        if self.labels.shape != (self.values.shape[0],):
            raise DataError("labels length does not match record count")
        if len(self.meta.attribute_names) != self.values.shape[1]:
            raise DataError("attribute name count does not match columns")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= self.meta.n_classes
        ):
            raise DataError("labels out of range for declared classes")

    @property
    def n_records(self) -> int:
        return self.values.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.values.shape[1]

    def is_complete(self) -> bool:
        return bool(self.mask.all())

    def copy(self) -> "Dataset":
        return Dataset(self.values.copy(), self.mask.copy(), self.labels.copy(), self.meta)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        """New dataset holding the given records (shared metadata)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.values[idx], self.mask[idx], self.labels[idx], self.meta)


@dataclass(frozen=True)
class AttributeStats:
    """Observed-cell statistics of one attribute; sd uses the n-1 denominator."""

    mean: float
    sd: float
    observed_count: int


@dataclass(frozen=True)
class FoldSplit:
    """Index sets of one cross-validation fold."""

    train_indices: np.ndarray
    test_indices: np.ndarray


def load_csv(path: str | Path, label_column: str) -> Dataset:
    """Load a numeric CSV with a header row into a :class:`Dataset`.

    A cell is unobserved when it is empty or ``?``.  Every other cell outside
    the label column must parse as a float.  Class labels are mapped to dense
    indices in order of first appearance; a missing label is an error.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]  # drop blank lines
    if len(rows) < 2:
        raise DataError(f"{path}: need a header row and at least one record")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    try:
        label_idx = header.index(label_column)
    except ValueError:
        raise DataError(f"{path}: no column named {label_column!r}") from None

    attr_names = tuple(h for i, h in enumerate(header) if i != label_idx)
    n, f = len(rows) - 1, len(attr_names)
    values = np.full((n, f), np.nan)
    mask = np.zeros((n, f), dtype=bool)
    class_order: dict[str, int] = {}
    labels = np.empty(n, dtype=np.int64)

    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: line {r} has {len(row)} fields, expected {len(header)}")
        token = row[label_idx].strip()
        if token in MISSING_TOKENS:
            raise DataError(f"{path}: line {r}: missing class label")
        labels[r - 2] = class_order.setdefault(token, len(class_order))
        c = 0
        for i, cell in enumerate(row):
            if i == label_idx:
                continue
            cell = cell.strip()
            if cell not in MISSING_TOKENS:
                try:
                    values[r - 2, c] = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: line {r}, column {header[i]!r}: "
                        f"non-numeric value {cell!r}"
                    ) from None
                mask[r - 2, c] = True
            c += 1

    if len(class_order) < 2:
        raise DataError(f"{path}: need at least two classes, found {len(class_order)}")
    meta = DatasetMeta(path.stem, attr_names, tuple(class_order))
    return Dataset(values, mask, labels, meta)


def bundled_path(name: str) -> Path:
    """Filesystem path of one of the CSV tables shipped with the package."""
    p = Path(str(resources.files("baggimp").joinpath("data", f"{name}.csv")))
    if not p.is_file():
        raise DataError(f"no bundled dataset named {name!r}")
    return p


def attribute_stats(data: Dataset, attr: int) -> AttributeStats:
    """Mean and sample standard deviation of one attribute's observed cells."""
    obs = data.values[data.mask[:, attr], attr]
    if obs.size == 0:
        raise DataError(f"attribute {attr} has no observed values")
    # A single observation carries no spread information; define sd = 0.
    sd = float(np.std(obs, ddof=1)) if obs.size > 1 else 0.0
    return AttributeStats(float(np.mean(obs)), sd, int(obs.size))


def standardize(data: Dataset) -> tuple[Dataset, list[AttributeStats]]:
    """Shift/scale each attribute's observed cells to mean 0, sd 1.

    Constant attributes (sd 0) map to all zeros: they carry no information
    and must not produce NaNs.  Returns the stats needed to invert.
    """
    out = data.copy()
    stats = []
    for j in range(data.n_attributes):
        st = attribute_stats(data, j)
        stats.append(st)
        col = data.mask[:, j]
        if st.sd > 0.0:
            out.values[col, j] = (data.values[col, j] - st.mean) / st.sd
        else:
            out.values[col, j] = 0.0
    return out, stats


def destandardize(data: Dataset, stats: Sequence[AttributeStats]) -> Dataset:
    """Invert :func:`standardize` using the stats it returned."""
    if len(stats) != data.n_attributes:
        raise DataError("stats length does not match attribute count")
    out = data.copy()
    for j, st in enumerate(stats):
        col = data.mask[:, j]
        out.values[col, j] = data.values[col, j] * st.sd + st.mean
    return out


def split_2fold(data: Dataset, rng: np.random.Generator) -> tuple[FoldSplit, FoldSplit]:
    """Shuffle records into two halves; the second split swaps the roles.

    With odd N the first half is the larger one (N=11 gives 6 and 5).
    """
    n = data.n_records
    if n < 4:
        raise DataError(f"need at least 4 records to split, got {n}")
    perm = rng.permutation(n)
    half = (n + 1) // 2
    first = np.sort(perm[:half])
    second = np.sort(perm[half:])
    return FoldSplit(first, second), FoldSplit(second, first)
