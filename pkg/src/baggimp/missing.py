"""Missing-completely-at-random cell removal with exact per-attribute counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DataError, Dataset

__all__ = ["MissingnessSpec", "inject_mcar"]


@dataclass(frozen=True)
class MissingnessSpec:
    """Target missing ratio per attribute and the seed driving the removal."""

    ratio: float
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.ratio <= 0.5:
            raise DataError(f"missing ratio must be in [0, 0.5], got {self.ratio}")


def inject_mcar(data: Dataset, spec: MissingnessSpec) -> Dataset:
    """Remove exactly floor(N * ratio) cells from every attribute.

    Removal positions depend only on the seed, never on values or labels
    (the MCAR property).  No record is ever left fully unobserved: for each
    attribute a random record order is walked and a record whose removal
    would empty it is skipped, the removal falling to the next record in
    the order.  Skips are rare and index-blind, so per-record removal
    frequencies stay uniform.

    The input must be fully observed.
    """
    if not data.is_complete():
        raise DataError("inject_mcar requires fully observed input")
    n, f = data.n_records, data.n_attributes
    k = int(np.floor(n * spec.ratio))
    out = data.copy()
    if k == 0:
        return out
    if f == 1:
        raise DataError("cannot remove cells from a single-attribute dataset "
                        "without emptying records")

    rng = np.random.default_rng(spec.seed)
    obs_per_record = np.full(n, f, dtype=np.int64)
    for j in range(f):
        removed = 0
        for i in rng.permutation(n):
            if removed == k:
                break
            if obs_per_record[i] < 2:  # removal would empty record i: skip
                continue
            out.values[i, j] = np.nan
            out.mask[i, j] = False
            obs_per_record[i] -= 1
            removed += 1
        if removed != k:
            # Unreachable for ratio <= 0.5 with f >= 2; kept as a hard guard.
            raise DataError(f"could not place {k} removals in attribute {j}")
    return out
