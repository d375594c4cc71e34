"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written from first principles -- plain
Python loops, math.log2/erf, explicit rank walks -- and shares no code
with the package beyond its public call signatures.
"""

from __future__ import annotations

import math

import numpy as np


# --------------------------------------------------------------------------
# truncated standard normal moments

def std_normal_pdf(x: float) -> float:
    return math.exp(-x * x / 2.0) / math.sqrt(2.0 * math.pi)


def std_normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def truncated_normal_sd(z_bound: float) -> float:
    """sd of a standard normal truncated to [-z, z] (mean is 0 by symmetry)."""
    z = z_bound
    mass = 2.0 * std_normal_cdf(z) - 1.0
    variance = 1.0 - 2.0 * z * std_normal_pdf(z) / mass
    return math.sqrt(variance)


# --------------------------------------------------------------------------
# brute-force gain-ratio tree (complete, unit-weight data only)

def _entropy(counts: list[float], total: float) -> float:
    """Entropy in bits; terms with nonpositive count contribute zero.

    Mirrors the package's arithmetic exactly: p = count / total, term
    p * log2(p), accumulated in index order.
    """
    acc = 0.0
    for c in counts:
        if c > 0.0:
            p = c / total
            acc += p * math.log2(p)
    return -acc


def _class_counts(labels: list[int], n_classes: int) -> list[float]:
    counts = [0.0] * n_classes
    for lab in labels:
        counts[lab] += 1.0
    return counts


def _exhaustive_best_split(values, labels, n_classes, min_leaf, min_gain):
    """(ratio, attr, threshold) maximizing the gain ratio, or None.

    Candidates are midpoints of consecutive distinct sorted values per
    attribute.  Ties resolve to the lowest attribute index, then the lowest
    threshold, via a strictly-greater replacement scan.
    """
    n = len(labels)
    n_total = float(n)
    h_parent = _entropy(_class_counts(labels, n_classes), n_total)
    best = None
    for attr in range(values.shape[1]):
        col = [float(v) for v in values[:, attr]]
        distinct = sorted(set(col))
        for lo, hi in zip(distinct, distinct[1:]):
            thr = (lo + hi) / 2.0
            if not thr < hi:  # midpoint rounded up onto the next value
                continue
            left_labels = [lab for v, lab in zip(col, labels) if v <= thr]
            right_labels = [lab for v, lab in zip(col, labels) if v > thr]
            nl, nr = float(len(left_labels)), float(len(right_labels))
            if nl < min_leaf or nr < min_leaf:
                continue
            h_left = _entropy(_class_counts(left_labels, n_classes), nl)
            h_right = _entropy(_class_counts(right_labels, n_classes), nr)
            gain = (n_total / n_total) * (
                h_parent - (nl * h_left + nr * h_right) / n_total
            )
            split_info = _entropy([nl, nr, 0.0], n_total)
            if split_info <= 0.0:
                continue
            ratio = gain / split_info
            if best is None or ratio > best[0]:
                best = (ratio, attr, thr)
    return best


def brute_force_tree(values, labels, n_classes, *, min_leaf_weight=2.0,
                     min_split_gain=1e-9, max_depth=None, depth=0):
    """Reference tree as nested dicts; complete unit-weight data only.

    Leaf: {"dist": [...]}.  Internal: {"attr", "threshold", "bw",
    "left", "right"}.
    """
    values = np.asarray(values, dtype=np.float64)
    labels = [int(x) for x in labels]
    dist = _class_counts(labels, n_classes)
    total = float(len(labels))
    nonzero = sum(1 for c in dist if c > 0.0)
    if (nonzero <= 1 or total < 2.0 * min_leaf_weight
            or (max_depth is not None and depth >= max_depth)):
        return {"dist": dist}
    best = _exhaustive_best_split(values, labels, n_classes,
                                  min_leaf_weight, min_split_gain)
    if best is None or best[0] <= min_split_gain:
        return {"dist": dist}
    _, attr, thr = best
    left_sel = values[:, attr] <= thr
    nl = float(left_sel.sum())
    frac_left = nl / total
    kwargs = dict(min_leaf_weight=min_leaf_weight,
                  min_split_gain=min_split_gain, max_depth=max_depth,
                  depth=depth + 1)
    return {
        "attr": attr,
        "threshold": thr,
        "bw": (frac_left, 1.0 - frac_left),
        "left": brute_force_tree(values[left_sel],
                                 [l for l, s in zip(labels, left_sel) if s],
                                 n_classes, **kwargs),
        "right": brute_force_tree(values[~left_sel],
                                  [l for l, s in zip(labels, left_sel) if not s],
                                  n_classes, **kwargs),
    }


def assert_same_tree(node, ref, path="root"):
    """Structural equality of a package TreeNode and a reference dict."""
    if "dist" in ref:
        assert node.is_leaf, f"{path}: expected a leaf, got split on {node.attr}"
        assert list(node.distribution) == ref["dist"], (
            f"{path}: leaf distribution {list(node.distribution)} != {ref['dist']}"
        )
        return
    assert not node.is_leaf, f"{path}: expected a split, got a leaf"
    assert node.attr == ref["attr"], (
        f"{path}: split attribute {node.attr} != {ref['attr']}"
    )
    assert node.threshold == ref["threshold"], (
        f"{path}: threshold {node.threshold} != {ref['threshold']}"
    )
    assert node.branch_weights == ref["bw"], (
        f"{path}: branch weights {node.branch_weights} != {ref['bw']}"
    )
    assert_same_tree(node.left, ref["left"], path + ".L")
    assert_same_tree(node.right, ref["right"], path + ".R")


# --------------------------------------------------------------------------
# brute-force Friedman rank test

def _column_midranks(col: list[float]) -> list[float]:
    """Midranks with rank 1 for the largest value, by explicit group walk."""
    k = len(col)
    order = sorted(range(k), key=lambda i: -col[i])
    ranks = [0.0] * k
    pos = 0
    while pos < k:
        end = pos
        while end + 1 < k and col[order[end + 1]] == col[order[pos]]:
            end += 1
        avg = (pos + 1 + end + 1) / 2.0  # 1-based positions pos..end
        for t in range(pos, end + 1):
            ranks[order[t]] = avg
        pos = end + 1
    return ranks


def friedman_oracle(matrix) -> float:
    """Friedman chi-squared statistic via rank sums and the classical
    tie-corrected form; matrix rows are methods, columns datasets."""
    matrix = np.asarray(matrix, dtype=np.float64)
    k, n = matrix.shape
    rank_sums = [0.0] * k
    tie_term = 0.0
    for j in range(n):
        col = [float(x) for x in matrix[:, j]]
        ranks = _column_midranks(col)
        for i in range(k):
            rank_sums[i] += ranks[i]
        seen: dict[float, int] = {}
        for x in col:
            seen[x] = seen.get(x, 0) + 1
        for t in seen.values():
            tie_term += t ** 3 - t
    stat = (12.0 / (n * k * (k + 1))) * sum(r * r for r in rank_sums) \
        - 3.0 * n * (k + 1)
    correction = 1.0 - tie_term / (n * k * (k * k - 1))
    if correction <= 0.0:
        return 0.0
    return stat / correction


# --------------------------------------------------------------------------
# chi-squared uniformity of removal positions

def removal_uniformity_stat(hits: np.ndarray, draws: int, k: int) -> float:
    """Pearson chi-squared of per-record removal counts against uniformity.

    hits[i] = times record i lost a cell in one attribute over ``draws``
    injections that each remove ``k`` cells from that attribute.
    """
    n = hits.size
    expected = draws * k / n
    return float(((hits - expected) ** 2 / expected).sum())
