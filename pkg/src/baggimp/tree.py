"""Gain-ratio decision tree for numeric data with missing values.

Splits are binary on numeric thresholds.  Records with the split attribute
unobserved are not discarded: they descend both children with their weight
scaled by the observed branch fractions, and prediction blends the two
child distributions with the same fractions.  The split criterion is the
gain ratio: information gain computed over records with the attribute
observed, scaled by the observed-weight fraction, divided by the split
information of the (left, right, missing) weight partition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .dataset import Dataset

__all__ = ["TreeConfig", "TreeNode", "gain_ratio", "train", "predict_dist",
           "predict_label", "dump_tree"]


@dataclass(frozen=True)
class TreeConfig:
    """Stopping controls; the tree is otherwise grown unpruned."""

    min_leaf_weight: float = 2.0
    min_split_gain: float = 1e-9
    max_depth: int | None = None

    def __post_init__(self) -> None:
        if self.min_leaf_weight < 1.0:
            raise ValueError("min_leaf_weight must be >= 1")
        if self.min_split_gain < 0.0:
            raise ValueError("min_split_gain must be >= 0")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 when set")


@dataclass
class TreeNode:
    """Leaf (distribution set) or internal node (attr/threshold/children set).

    ``branch_weights`` holds the observed-weight fractions routed (left,
    right); missing-valued records descend both sides with these factors.
    """

    distribution: np.ndarray | None = None
    attr: int | None = None
    threshold: float = float("nan")
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    branch_weights: tuple[float, float] = (0.0, 0.0)

    @property
    def is_leaf(self) -> bool:
        return self.attr is None

    def walk(self) -> Iterator["TreeNode"]:
        yield self
        if not self.is_leaf:
            yield from self.left.walk()
            yield from self.right.walk()


def _entropy_rows(counts: np.ndarray, totals: np.ndarray) -> np.ndarray:
    """Entropy in bits of each row of weighted class counts."""
    with np.errstate(divide="ignore", invalid="ignore"):
        p = counts / totals[:, None]
        terms = p * np.log2(p)
    terms[counts <= 0.0] = 0.0
    return -terms.sum(axis=1)


def gain_ratio(
    values: np.ndarray,
    mask: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    attr: int,
    threshold: float,
    n_classes: int,
) -> float:
    """Gain ratio of splitting the given weighted records at one threshold.

    Returns 0 when the split information is zero or fewer than two records
    observe the attribute.
    """
    obs = mask[:, attr]
    if int(obs.sum()) < 2:
        return 0.0
    w_total = float(weights.sum())
    wo = weights[obs]
    w_obs = float(wo.sum())
    w_miss = w_total - w_obs
    left = values[obs, attr] <= threshold
    w_left = float(wo[left].sum())
    w_right = w_obs - w_left

    def h(lab: np.ndarray, w: np.ndarray) -> float:
        counts = np.bincount(lab, weights=w, minlength=n_classes)
        total = counts.sum()
        if total <= 0.0:
            return 0.0
        return float(_entropy_rows(counts[None, :], np.array([total]))[0])

    lo = labels[obs]
    h_parent = h(lo, wo)
    h_left = h(lo[left], wo[left])
    h_right = h(lo[~left], wo[~left])
    gain = (w_obs / w_total) * (
        h_parent - (w_left * h_left + w_right * h_right) / w_obs
    )
    parts = np.array([w_left, w_right, w_miss])
    split_info = float(_entropy_rows(parts[None, :], np.array([w_total]))[0])
    if split_info <= 0.0:
        return 0.0
    return gain / split_info


def _best_split(
    values: np.ndarray,
    mask: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    n_classes: int,
    cfg: TreeConfig,
) -> tuple[float, int, float] | None:
    """Highest-gain-ratio (attr, threshold); ties go to the lowest attribute
    index, then the lowest threshold.  None when no candidate is valid."""
    w_total = float(weights.sum())
    best: tuple[float, int, float] | None = None
    for attr in range(values.shape[1]):
        obs = mask[:, attr]
        if int(obs.sum()) < 2:
            continue
        vo = values[obs, attr]
        order = np.argsort(vo, kind="stable")
        vs = vo[order]
        ws = weights[obs][order]
        ls = labels[obs][order]

        boundary = np.flatnonzero(vs[:-1] != vs[1:])
        if boundary.size == 0:
            continue  # all observed values equal: nothing to split on
        thr = (vs[boundary] + vs[boundary + 1]) / 2.0

        cls = np.zeros((vs.size, n_classes))
        cls[np.arange(vs.size), ls] = ws
        cum_cls = np.cumsum(cls, axis=0)
        cum_w = np.cumsum(ws)

        w_obs = float(cum_w[-1])
        w_miss = w_total - w_obs
        dist_obs = cum_cls[-1]

        left_cls = cum_cls[boundary]
        right_cls = dist_obs[None, :] - left_cls
        w_left = cum_w[boundary]
        w_right = w_obs - w_left

        h_parent = _entropy_rows(dist_obs[None, :], np.array([w_obs]))[0]
        h_left = _entropy_rows(left_cls, w_left)
        h_right = _entropy_rows(right_cls, w_right)
        gain = (w_obs / w_total) * (
            h_parent - (w_left * h_left + w_right * h_right) / w_obs
        )

        parts = np.stack([w_left, w_right, np.full_like(w_left, w_miss)], axis=1)
        split_info = _entropy_rows(parts, np.full(w_left.shape, w_total))

        frac_left = w_left / w_obs
        left_total = w_left + w_miss * frac_left
        right_total = w_right + w_miss * (1.0 - frac_left)
        valid = (
            (thr < vs[boundary + 1])  # midpoint may round up onto the next value
            & (left_total >= cfg.min_leaf_weight)
            & (right_total >= cfg.min_leaf_weight)
            & (split_info > 0.0)
        )
        if not valid.any():
            continue
        ratio = np.where(valid, gain / np.where(split_info > 0.0, split_info, 1.0),
                         -np.inf)
        pick = int(np.argmax(ratio))  # first maximum = lowest threshold
        cand = (float(ratio[pick]), attr, float(thr[pick]))
        if best is None or cand[0] > best[0]:
            best = cand
    return best


def train(data: Dataset, config: TreeConfig | None = None) -> TreeNode:
    """Grow an unpruned gain-ratio tree on (possibly incomplete) data."""
    cfg = config if config is not None else TreeConfig()
    n = data.n_records
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    weights = np.ones(n)
    return _build(
        data.values, data.mask, data.labels, weights,
        data.meta.n_classes, cfg, depth=0,
    )


def _build(
    values: np.ndarray,
    mask: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    n_classes: int,
    cfg: TreeConfig,
    depth: int,
) -> TreeNode:
    dist = np.bincount(labels, weights=weights, minlength=n_classes)
    total_w = float(weights.sum())
    if (
        np.count_nonzero(dist > 0.0) <= 1
        or total_w < 2.0 * cfg.min_leaf_weight
        or (cfg.max_depth is not None and depth >= cfg.max_depth)
    ):
        return TreeNode(distribution=dist)

    best = _best_split(values, mask, labels, weights, n_classes, cfg)
    if best is None or best[0] <= cfg.min_split_gain:
        return TreeNode(distribution=dist)
    _, attr, threshold = best

    obs = mask[:, attr]
    left_sel = obs & (values[:, attr] <= threshold)
    right_sel = obs & ~left_sel
    miss_sel = ~obs
    w_left_obs = float(weights[left_sel].sum())
    w_right_obs = float(weights[right_sel].sum())
    w_obs = w_left_obs + w_right_obs
    frac_left = w_left_obs / w_obs
    frac_right = 1.0 - frac_left

    def child(side_sel: np.ndarray, frac: float) -> TreeNode:
        idx = np.concatenate([np.flatnonzero(side_sel), np.flatnonzero(miss_sel)])
        cw = np.concatenate([weights[side_sel], weights[miss_sel] * frac])
        return _build(values[idx], mask[idx], labels[idx], cw,
                      n_classes, cfg, depth + 1)

    return TreeNode(
        attr=attr,
        threshold=threshold,
        left=child(left_sel, frac_left),
        right=child(right_sel, frac_right),
        branch_weights=(frac_left, frac_right),
    )


def predict_dist(node: TreeNode, values_row: np.ndarray, mask_row: np.ndarray) -> np.ndarray:
    """Class distribution for one record; sums to 1.

    An unobserved split attribute blends both children by the branch
    weights learned from training data.
    """
    if node.is_leaf:
        return node.distribution / node.distribution.sum()
    if mask_row[node.attr]:
        branch = node.left if values_row[node.attr] <= node.threshold else node.right
        return predict_dist(branch, values_row, mask_row)
    wl, wr = node.branch_weights
    return (
        wl * predict_dist(node.left, values_row, mask_row)
        + wr * predict_dist(node.right, values_row, mask_row)
    )


def predict_label(node: TreeNode, values_row: np.ndarray, mask_row: np.ndarray) -> int:
    """Most probable class index; ties go to the lowest index."""
    return int(np.argmax(predict_dist(node, values_row, mask_row)))


def dump_tree(node: TreeNode, attribute_names=None, indent: str = "") -> str:
    """Human-readable rendering of a tree."""
    if node.is_leaf:
        counts = ", ".join(f"{c:g}" for c in node.distribution)
        return f"{indent}leaf [{counts}]\n"
    name = (attribute_names[node.attr] if attribute_names is not None
            else f"x{node.attr}")
    wl, wr = node.branch_weights
    out = f"{indent}{name} <= {node.threshold:g}  (w {wl:.3f}/{wr:.3f})\n"
    out += dump_tree(node.left, attribute_names, indent + "  ")
    out += dump_tree(node.right, attribute_names, indent + "  ")
    return out
