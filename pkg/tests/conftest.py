"""Shared fixtures and builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from baggimp.dataset import Dataset, DatasetMeta


def make_dataset(values, labels, mask=None, name="test", class_names=None):
    """Dataset from plain lists; None cells become unobserved."""
    rows = [[np.nan if v is None else float(v) for v in row] for row in values]
    arr = np.asarray(rows, dtype=np.float64)
    if arr.size == 0:  # keep the attribute count of an empty record list
        arr = arr.reshape(np.shape(values))
    if mask is None:
        mask = ~np.isnan(arr)
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = int(labels.max()) + 1 if labels.size else 0
    if class_names is None:
        class_names = tuple(f"c{i}" for i in range(n_classes))
    meta = DatasetMeta(
        name=name,
        attribute_names=tuple(f"x{j}" for j in range(arr.shape[1])),
        class_names=tuple(class_names),
    )
    return Dataset(arr, np.asarray(mask, dtype=bool), labels, meta)


def random_complete(rng, n, f, n_classes, name="rand"):
    """Complete dataset with uniform values and random labels."""
    values = rng.random((n, f))
    labels = rng.integers(0, n_classes, size=n)
    if len(np.unique(labels)) < 2:  # degenerate draw: force two classes
        labels[0] = 0
        labels[1] = 1
    meta = DatasetMeta(
        name=name,
        attribute_names=tuple(f"x{j}" for j in range(f)),
        class_names=tuple(f"c{i}" for i in range(n_classes)),
    )
    return Dataset(values, np.ones((n, f), dtype=bool), labels, meta)


def gaussian_blobs(rng, n_per_class, f, centers, scale=1.0, name="blobs"):
    """Complete dataset of class-conditional spherical Gaussians."""
    parts, labels = [], []
    for c, center in enumerate(centers):
        parts.append(rng.normal(loc=center, scale=scale,
                                size=(n_per_class, f)))
        labels.extend([c] * n_per_class)
    values = np.vstack(parts)
    labels = np.asarray(labels, dtype=np.int64)
    perm = rng.permutation(len(labels))
    meta = DatasetMeta(
        name=name,
        attribute_names=tuple(f"x{j}" for j in range(f)),
        class_names=tuple(f"c{i}" for i in range(len(centers))),
    )
    return Dataset(values[perm], np.ones_like(values[perm], dtype=bool),
                   labels[perm], meta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
