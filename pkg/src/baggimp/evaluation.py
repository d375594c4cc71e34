"""Experiment protocol, agreement statistics, rank tests, result export.

The grid is (dataset x missing-ratio x repetition).  Each repetition
injects missingness into the full dataset once, shuffles it into two
folds, and evaluates every method on both folds (train on one, test on
the other).  All seeds are derived from the master seed and the cell
coordinates, so any cell can be computed anywhere -- serially or in a
process pool -- with identical results.
"""

from __future__ import annotations

import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import chi2, rankdata

from .dataset import Dataset, split_2fold
from .ensemble import EnsembleConfig, Method, build, member_votes, plurality_vote
from .impute import EmConfig
from .missing import MissingnessSpec, inject_mcar
from .rng import derive_rng, derive_seed
from .tree import TreeConfig

__all__ = [
    "ExperimentGrid",
    "RunResult",
    "KappaErrorPoint",
    "RankTable",
    "accuracy",
    "kappa",
    "kappa_error_points",
    "friedman",
    "rank_table",
    "run_experiment",
    "summarize",
    "export_results",
]


@dataclass(frozen=True)
class ExperimentGrid:
    """Everything that defines one experiment run."""

    datasets: tuple[Dataset, ...]
    methods: tuple[Method, ...]
    ratios: tuple[float, ...]
    repetitions: int = 30
    b: int = 25
    m: int = 5
    tree: TreeConfig = field(default_factory=TreeConfig)
    em: EmConfig = field(default_factory=EmConfig)
    z_bound: float = 4.0
    master_seed: int = 0
    kappa_repetition: int = 0
    kappa_fold: int = 0

    def __post_init__(self) -> None:
        if not self.datasets:
            raise ValueError("no datasets given")
        names = [d.meta.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ValueError(f"dataset names must be unique, got {names}")
        if not self.methods:
            raise ValueError("no methods given")
        if not self.ratios:
            raise ValueError("no missing ratios given")
        for r in self.ratios:
            if not 0.0 <= r <= 0.5:
                raise ValueError(f"missing ratio {r} outside [0, 0.5]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not 0 <= self.kappa_repetition < self.repetitions:
            raise ValueError("kappa_repetition outside the repetition range")
        if self.kappa_fold not in (0, 1):
            raise ValueError("kappa_fold must be 0 or 1")
        # Fail before any work if the B/M contract cannot hold.
        from .ensemble import Family, dataset_count

        for method in self.methods:
            if method.family is Family.BAG_MI:
                dataset_count(method.family, self.b, self.m)

    def config(self, seed: int) -> EnsembleConfig:
        return EnsembleConfig(b=self.b, m=self.m, tree=self.tree, em=self.em,
                              z_bound=self.z_bound, seed=seed)


@dataclass(frozen=True)
class RunResult:
    """Accuracy of one (dataset, method, ratio, repetition, fold) cell."""

    dataset: str
    method: Method
    ratio: float
    repetition: int
    fold: int
    accuracy: float
    n_test: int


@dataclass(frozen=True)
class KappaErrorPoint:
    """One member pair of an ensemble's kappa-error cloud."""

    dataset: str
    method: Method
    ratio: float
    member_i: int
    member_j: int
    kappa: float
    mean_error: float


@dataclass(frozen=True)
class RankTable:
    """Per-dataset method ranks plus the Friedman test over them."""

    methods: tuple[str, ...]
    datasets: tuple[str, ...]
    accuracies: np.ndarray  # (k methods, n datasets)
    ranks: np.ndarray       # (k, n); rank 1 = highest accuracy, midranks on ties
    mean_ranks: np.ndarray  # (k,)
    statistic: float
    p_value: float


# --------------------------------------------------------------------------
# statistics

def accuracy(predictions: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of exact label matches."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ValueError("predictions and labels must be equal-length, non-empty")
    return float(np.mean(predictions == labels))


def kappa(pred_a: np.ndarray, pred_b: np.ndarray, n_classes: int) -> float:
    """Inter-rater agreement of two prediction vectors.

    theta1 is the observed agreement, theta2 the agreement expected from
    the marginal distributions; kappa = (theta1 - theta2) / (1 - theta2),
    defined as 1.0 when both predictors agree constantly (theta2 = 1).
    """
    a = np.asarray(pred_a, dtype=np.int64)
    b = np.asarray(pred_b, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("predictions must be equal-length 1-d, non-empty")
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if a.min() < 0 or b.min() < 0 or a.max() >= n_classes or b.max() >= n_classes:
        raise ValueError("prediction outside class range")
    m = a.size
    table = np.zeros((n_classes, n_classes))
    np.add.at(table, (a, b), 1.0)
    theta1 = float(np.trace(table)) / m
    p = table.sum(axis=1) / m
    q = table.sum(axis=0) / m
    theta2 = float(p @ q)
    if theta2 >= 1.0:
        return 1.0
    return (theta1 - theta2) / (1.0 - theta2)


def kappa_error_points(
    member_preds: np.ndarray, labels: np.ndarray, n_classes: int
) -> list[tuple[int, int, float, float]]:
    """(i, j, kappa, mean error) over all member pairs i < j.

    L members yield L*(L-1)/2 points; the mean error of a pair is the
    average of the two members' individual error rates.
    """
    preds = np.asarray(member_preds)
    if preds.ndim != 2 or preds.shape[0] < 2:
        raise ValueError("need a (L >= 2, N) member prediction matrix")
    errors = [1.0 - accuracy(row, labels) for row in preds]
    points = []
    for i in range(preds.shape[0]):
        for j in range(i + 1, preds.shape[0]):
            points.append((
                i, j,
                kappa(preds[i], preds[j], n_classes),
                (errors[i] + errors[j]) / 2.0,
            ))
    return points


def friedman(matrix: np.ndarray) -> tuple[float, float]:
    """Friedman rank test over a (methods x datasets) accuracy matrix.

    Per dataset, methods get midranks with rank 1 for the highest
    accuracy.  The statistic uses the classical tie correction; a matrix
    with every dataset fully tied carries no ranking information and
    yields statistic 0.  Returns (statistic, p_value) with k-1 degrees of
    freedom.
    """
    acc = np.asarray(matrix, dtype=np.float64)
    if acc.ndim != 2 or acc.shape[0] < 2 or acc.shape[1] < 1:
        raise ValueError("need a (k >= 2 methods, n >= 1 datasets) matrix")
    k, n = acc.shape
    ranks = _rank_columns(acc)
    mean_ranks = ranks.mean(axis=1)
    stat = 12.0 * n / (k * (k + 1)) * float(((mean_ranks - (k + 1) / 2.0) ** 2).sum())
    ties = 0.0
    for j in range(n):
        _, counts = np.unique(acc[:, j], return_counts=True)
        ties += float((counts.astype(np.float64) ** 3 - counts).sum())
    correction = 1.0 - ties / (n * k * (k * k - 1))
    if correction <= 0.0:
        return 0.0, 1.0
    stat /= correction
    return stat, float(chi2.sf(stat, k - 1))


def _rank_columns(acc: np.ndarray) -> np.ndarray:
    """Midranks per column; rank 1 = highest accuracy."""
    return np.stack(
        [rankdata(-acc[:, j], method="average") for j in range(acc.shape[1])],
        axis=1,
    )


def rank_table(
    method_names: Sequence[str], dataset_names: Sequence[str], matrix: np.ndarray
) -> RankTable:
    """Bundle ranks and the Friedman test for reporting."""
    acc = np.asarray(matrix, dtype=np.float64)
    if acc.shape != (len(method_names), len(dataset_names)):
        raise ValueError("matrix shape does not match the method/dataset names")
    ranks = _rank_columns(acc)
    stat, p = friedman(acc)
    return RankTable(
        methods=tuple(method_names),
        datasets=tuple(dataset_names),
        accuracies=acc,
        ranks=ranks,
        mean_ranks=ranks.mean(axis=1),
        statistic=stat,
        p_value=p,
    )


# --------------------------------------------------------------------------
# the experiment loop

def _cell_tasks(grid: ExperimentGrid) -> list[tuple[int, float, int, int, int]]:
    return [
        (di, ratio, rep, fold, mi)
        for di in range(len(grid.datasets))
        for ratio in grid.ratios
        for rep in range(grid.repetitions)
        for fold in (0, 1)
        for mi in range(len(grid.methods))
    ]


def _run_cell(
    grid: ExperimentGrid, task: tuple[int, float, int, int, int]
) -> tuple[RunResult, list[KappaErrorPoint]]:
    di, ratio, rep, fold, mi = task
    data = grid.datasets[di]
    method = grid.methods[mi]
    name = data.meta.name

    injected = inject_mcar(
        data, MissingnessSpec(ratio, derive_seed(grid.master_seed, "inject",
                                                 name, ratio, rep))
    )
    splits = split_2fold(
        injected, derive_rng(grid.master_seed, "split", name, ratio, rep)
    )
    split = splits[fold]
    train = injected.subset(split.train_indices)
    test = injected.subset(split.test_indices)

    # The model seed is shared by every method in this cell: methods whose
    # randomness is vacuous (e.g. all bagging variants at ratio 0) then
    # produce bit-identical models.
    cell_seed = derive_seed(grid.master_seed, "cell", name, ratio, rep, fold)
    model = build(method, train, grid.config(cell_seed))
    votes = member_votes(model, test)
    preds = plurality_vote(votes, model.n_classes)
    result = RunResult(name, method, ratio, rep, fold,
                       accuracy(preds, test.labels), test.n_records)

    points: list[KappaErrorPoint] = []
    if (rep == grid.kappa_repetition and fold == grid.kappa_fold
            and votes.shape[0] >= 2):
        points = [
            KappaErrorPoint(name, method, ratio, i, j, kap, err)
            for i, j, kap, err in kappa_error_points(votes, test.labels,
                                                     model.n_classes)
        ]
    return result, points


def run_experiment(
    grid: ExperimentGrid, workers: int = 1, progress: bool = False
) -> tuple[list[RunResult], list[KappaErrorPoint]]:
    """Evaluate the full grid; output order is canonical and worker-count
    independent."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    tasks = _cell_tasks(grid)
    results: list[RunResult] = []
    points: list[KappaErrorPoint] = []
    if workers == 1:
        outputs: Iterable = (_run_cell(grid, t) for t in tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        outputs = pool.map(_run_cell, [grid] * len(tasks), tasks)
    try:
        for i, (result, cell_points) in enumerate(outputs):
            results.append(result)
            points.extend(cell_points)
            if progress:
                print(
                    f"[{i + 1}/{len(tasks)}] {result.dataset} r={result.ratio:g} "
                    f"rep={result.repetition} fold={result.fold} "
                    f"{result.method.value}: {result.accuracy:.4f}",
                    file=sys.stderr,
                )
    finally:
        if workers > 1:
            pool.shutdown()
    return results, points


def summarize(
    results: Sequence[RunResult],
) -> dict[tuple[str, Method, float], tuple[float, float, int]]:
    """Mean and sample sd of accuracy per (dataset, method, ratio)."""
    groups: dict[tuple[str, Method, float], list[float]] = {}
    for r in results:
        groups.setdefault((r.dataset, r.method, r.ratio), []).append(r.accuracy)
    out = {}
    for key, vals in groups.items():
        arr = np.asarray(vals)
        sd = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
        out[key] = (float(arr.mean()), sd, int(arr.size))
    return out


# --------------------------------------------------------------------------
# export

def _fmt(x: float) -> str:
    """Shortest round-trip decimal; byte-stable for equal floats."""
    return repr(float(x))


def export_results(
    outdir: str | Path,
    grid: ExperimentGrid,
    results: Sequence[RunResult],
    points: Sequence[KappaErrorPoint],
) -> list[Path]:
    """Write run, accuracy, kappa-error, and rank CSVs; returns the paths.

    Output is byte-identical across reruns and worker counts: rows follow
    the canonical grid order and floats are serialized by repr.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def new_writer(path: Path, header: list[str]):
        fh = open(path, "w", newline="", encoding="utf-8")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        written.append(path)
        return fh, w

    fh, w = new_writer(outdir / "runs.csv",
                       ["dataset", "method", "ratio", "repetition", "fold",
                        "accuracy", "n_test"])
    with fh:
        for r in results:
            w.writerow([r.dataset, r.method.value, _fmt(r.ratio), r.repetition,
                        r.fold, _fmt(r.accuracy), r.n_test])

    stats = summarize(results)
    method_names = [m.value for m in grid.methods]
    dataset_names = [d.meta.name for d in grid.datasets]

    for name in dataset_names:
        fh, w = new_writer(outdir / f"accuracy_{name}.csv",
                           ["method"] + [_fmt(r) for r in grid.ratios])
        with fh:
            for method in grid.methods:
                row = [method.value]
                for ratio in grid.ratios:
                    mean, _, _ = stats[(name, method, ratio)]
                    row.append(_fmt(mean))
                w.writerow(row)

    if points:
        fh, w = new_writer(outdir / "kappa_error.csv",
                           ["dataset", "method", "ratio", "member_i", "member_j",
                            "kappa", "mean_error"])
        with fh:
            for p in points:
                w.writerow([p.dataset, p.method.value, _fmt(p.ratio), p.member_i,
                            p.member_j, _fmt(p.kappa), _fmt(p.mean_error)])

    if len(grid.methods) >= 2:
        fh, w = new_writer(outdir / "friedman.csv",
                           ["ratio", "statistic", "p_value"])
        rank_rows = []
        for ratio in grid.ratios:
            matrix = np.array([
                [stats[(name, method, ratio)][0] for name in dataset_names]
                for method in grid.methods
            ])
            table = rank_table(method_names, dataset_names, matrix)
            w.writerow([_fmt(ratio), _fmt(table.statistic), _fmt(table.p_value)])
            for mi, method in enumerate(method_names):
                rank_rows.append([_fmt(ratio), method, _fmt(table.mean_ranks[mi])])
        fh.close()
        fh, w = new_writer(outdir / "mean_ranks.csv", ["ratio", "method", "mean_rank"])
        with fh:
            w.writerows(rank_rows)

    return written
