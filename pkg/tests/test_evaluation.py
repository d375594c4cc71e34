"""Accuracy, kappa statistics, Friedman test, experiment loop, export."""

import numpy as np
import pytest

from baggimp.ensemble import Method
from baggimp.evaluation import (
    ExperimentGrid,
    accuracy,
    export_results,
    friedman,
    kappa,
    kappa_error_points,
    rank_table,
    run_experiment,
    summarize,
)
from baggimp.evaluation import _cell_tasks
from baggimp.rng import derive_rng
from conftest import gaussian_blobs
from _oracles import friedman_oracle


def _grid_dataset(seed=0, n_per_class=30, name="blobs"):
    rng = derive_rng(seed, "griddata")
    return gaussian_blobs(rng, n_per_class, 3,
                          centers=[[0.0] * 3, [2.5] * 3], name=name)


# --------------------------------------------------------------------------
# accuracy

def test_accuracy_trivial_values():
    assert accuracy(np.array([1, 0, 2]), np.array([1, 0, 2])) == 1.0
    assert accuracy(np.array([1, 1, 1]), np.array([0, 0, 0])) == 0.0
    assert accuracy(np.array([1, 0, 2, 2]), np.array([1, 0, 2, 0])) == 0.75


def test_accuracy_validates_lengths():
    with pytest.raises(ValueError):
        accuracy(np.array([1, 2]), np.array([1]))
    with pytest.raises(ValueError):
        accuracy(np.array([]), np.array([]))


# --------------------------------------------------------------------------
# kappa

def test_kappa_identical_predictions():
    p = np.array([0, 1, 2, 1, 0, 2])
    assert kappa(p, p, 3) == pytest.approx(1.0)


def test_kappa_constant_agreement_defined_as_one():
    p = np.zeros(10, dtype=int)
    assert kappa(p, p, 2) == 1.0  # theta2 = 1 edge case


def test_kappa_hand_contingency_example():
    # i = [A,A,B,B], j = [A,B,B,B]: theta1 = 0.75, theta2 = 0.5 -> 0.5.
    a = np.array([0, 0, 1, 1])
    b = np.array([0, 1, 1, 1])
    assert kappa(a, b, 2) == pytest.approx(0.5, abs=1e-12)


def test_kappa_independent_uniform_predictors_near_zero():
    rng = derive_rng(0, "kappa-mc")
    a = rng.integers(0, 3, 100_000)
    b = rng.integers(0, 3, 100_000)
    assert abs(kappa(a, b, 3)) < 0.02


def test_kappa_systematic_disagreement_is_negative():
    a = np.array([0, 1] * 50)
    b = np.array([1, 0] * 50)
    assert kappa(a, b, 2) < 0.0
    assert kappa(a, b, 2) >= -1.0


def test_kappa_validates_inputs():
    with pytest.raises(ValueError):
        kappa(np.array([0, 1]), np.array([0]), 2)
    with pytest.raises(ValueError):
        kappa(np.array([0, 2]), np.array([0, 1]), 2)  # class out of range
    with pytest.raises(ValueError):
        kappa(np.array([0, 1]), np.array([0, 1]), 1)


# --------------------------------------------------------------------------
# kappa-error points

def test_kappa_error_point_count_is_l_choose_2():
    rng = derive_rng(1, "points")
    labels = rng.integers(0, 2, 40)
    preds = rng.integers(0, 2, (25, 40))
    points = kappa_error_points(preds, labels, 2)
    assert len(points) == 300  # 25 * 24 / 2
    for i, j, kap, err in points:
        assert 0 <= i < j < 25
        assert -1.0 <= kap <= 1.0
        assert 0.0 <= err <= 1.0


def test_kappa_error_perfect_identical_members():
    labels = np.array([0, 1, 0, 1])
    preds = np.vstack([labels, labels])
    points = kappa_error_points(preds, labels, 2)
    assert len(points) == 1
    _, _, kap, err = points[0]
    assert kap == pytest.approx(1.0) and err == 0.0


def test_kappa_error_mean_error_is_pair_average():
    labels = np.array([0, 0, 0, 0])
    preds = np.array([[0, 0, 0, 0], [1, 1, 1, 1]])  # errors 0 and 1
    (_, _, _, err), = kappa_error_points(preds, labels, 2)
    assert err == 0.5


def test_kappa_error_requires_two_members():
    with pytest.raises(ValueError):
        kappa_error_points(np.array([[0, 1]]), np.array([0, 1]), 2)


# --------------------------------------------------------------------------
# Friedman test

def test_friedman_constant_matrix_is_zero():
    stat, p = friedman(np.full((4, 6), 0.5))
    assert stat == 0.0 and p == 1.0


def test_friedman_matches_brute_force_oracle():
    rng = derive_rng(3, "friedman")
    for trial in range(100):
        matrix = rng.random((5, 6))
        if trial % 3 == 0:  # exercise midranks with deliberate ties
            matrix = np.round(matrix, 1)
        stat, p = friedman(matrix)
        assert stat == pytest.approx(friedman_oracle(matrix), abs=1e-10)
        assert 0.0 <= p <= 1.0


def test_friedman_agrees_with_scipy_on_tie_free_data():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = derive_rng(4, "friedman-scipy")
    matrix = rng.random((4, 8))
    stat, p = friedman(matrix)
    ref = scipy_stats.friedmanchisquare(*[matrix[i] for i in range(4)])
    assert stat == pytest.approx(ref.statistic, abs=1e-10)
    assert p == pytest.approx(ref.pvalue, abs=1e-10)


def test_friedman_extreme_separation():
    # One method first everywhere, one last everywhere: ranks are constant
    # columns, the statistic is the analytic maximum for k=3, n=4.
    matrix = np.array([
        [0.9, 0.8, 0.95, 0.85],
        [0.5, 0.4, 0.55, 0.45],
        [0.1, 0.2, 0.15, 0.25],
    ])
    stat, p = friedman(matrix)
    assert stat == pytest.approx(friedman_oracle(matrix), abs=1e-12)
    assert stat == pytest.approx(8.0)  # 12*4/(3*4) * ((1-2)^2 + 0 + (3-2)^2)
    assert p < 0.05


def test_rank_table_ranks_sum_to_identity():
    rng = derive_rng(5, "ranks")
    k, n = 6, 5
    matrix = rng.random((k, n))
    table = rank_table([f"m{i}" for i in range(k)],
                       [f"d{j}" for j in range(n)], matrix)
    for j in range(n):
        assert table.ranks[:, j].sum() == pytest.approx(k * (k + 1) / 2)
    assert table.mean_ranks.shape == (k,)
    assert table.mean_ranks == pytest.approx(table.ranks.mean(axis=1))


def test_friedman_validates_shape():
    with pytest.raises(ValueError):
        friedman(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        friedman(np.zeros((1, 4)))


# --------------------------------------------------------------------------
# grid validation

def _tiny_grid(**overrides):
    defaults = dict(
        datasets=(_grid_dataset(),),
        methods=(Method.NO_IMP, Method.MEI),
        ratios=(0.0, 0.3),
        repetitions=2,
        b=3,
        m=1,
        master_seed=7,
    )
    defaults.update(overrides)
    return ExperimentGrid(**defaults)


def test_grid_validation():
    with pytest.raises(ValueError):
        _tiny_grid(datasets=())
    with pytest.raises(ValueError):
        _tiny_grid(methods=())
    with pytest.raises(ValueError):
        _tiny_grid(ratios=(0.7,))
    with pytest.raises(ValueError):
        _tiny_grid(repetitions=0)
    with pytest.raises(ValueError):
        _tiny_grid(datasets=(_grid_dataset(), _grid_dataset()))  # name clash
    with pytest.raises(ValueError):
        _tiny_grid(kappa_repetition=5)
    # BagMI divisibility fails fast, before any computation.
    with pytest.raises(ValueError, match="divisible"):
        _tiny_grid(methods=(Method.BAG_MI_EM,), b=25, m=4)


def test_cell_task_count_matches_report_convention():
    # 1 dataset x 12 methods x 7 ratios x T=30 x 2 folds = 5040 cells.
    grid = _tiny_grid(
        methods=tuple(Method),
        ratios=(0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3),
        repetitions=30,
        b=5, m=5,
    )
    assert len(_cell_tasks(grid)) == 5040


# --------------------------------------------------------------------------
# the experiment loop

def test_run_experiment_canonical_order_and_counts():
    grid = _tiny_grid()
    results, _ = run_experiment(grid)
    assert len(results) == 2 * 2 * 2 * 2  # ratios x reps x folds x methods
    expected_order = [
        (ratio, rep, fold, method.value)
        for ratio in (0.0, 0.3)
        for rep in (0, 1)
        for fold in (0, 1)
        for method in (Method.NO_IMP, Method.MEI)
    ]
    got_order = [(r.ratio, r.repetition, r.fold, r.method.value)
                 for r in results]
    assert got_order == expected_order
    for r in results:
        assert 0.0 <= r.accuracy <= 1.0
        assert r.n_test in (30, 30)  # both folds of 60 records


def test_noimp_equals_mei_at_ratio_zero():
    grid = _tiny_grid(ratios=(0.0,))
    results, _ = run_experiment(grid)
    by_cell = {}
    for r in results:
        by_cell.setdefault((r.repetition, r.fold), {})[r.method] = r.accuracy
    for cell in by_cell.values():
        assert cell[Method.NO_IMP] == cell[Method.MEI]  # exact equality


def test_worker_pool_reproduces_serial_results():
    grid = _tiny_grid()
    serial, serial_points = run_experiment(grid, workers=1)
    pooled, pooled_points = run_experiment(grid, workers=2)
    assert serial == pooled
    assert serial_points == pooled_points


def test_kappa_points_only_from_designated_cell():
    grid = _tiny_grid(methods=(Method.BAG_NO_IMP,), b=4,
                      kappa_repetition=1, kappa_fold=1)
    results, points = run_experiment(grid)
    assert points, "ensemble run must emit kappa-error points"
    assert {(p.member_i, p.member_j) for p in points if p.ratio == 0.0} == {
        (i, j) for i in range(4) for j in range(i + 1, 4)
    }
    # 2 ratios x C(4,2) pairs from exactly one (repetition, fold) each.
    assert len(points) == 2 * 6


def test_summarize_means_and_sd():
    grid = _tiny_grid(ratios=(0.0,))
    results, _ = run_experiment(grid)
    stats = summarize(results)
    key = ("blobs", Method.NO_IMP, 0.0)
    mean, sd, count = stats[key]
    vals = [r.accuracy for r in results if r.method is Method.NO_IMP]
    assert count == 4
    assert mean == pytest.approx(np.mean(vals))
    assert sd == pytest.approx(np.std(vals, ddof=1))


# --------------------------------------------------------------------------
# export

def test_export_results_files_and_rerun_bytes(tmp_path):
    grid = _tiny_grid(methods=(Method.NO_IMP, Method.BAG_NO_IMP), b=4)
    results, points = run_experiment(grid)

    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    paths1 = export_results(out1, grid, results, points)
    names = {p.name for p in paths1}
    assert {"runs.csv", "accuracy_blobs.csv", "kappa_error.csv",
            "friedman.csv", "mean_ranks.csv"} <= names

    results2, points2 = run_experiment(grid, workers=2)
    export_results(out2, grid, results2, points2)
    for p in paths1:
        assert (out2 / p.name).read_bytes() == p.read_bytes(), p.name

    # runs.csv carries one data row per cell.
    lines = (out1 / "runs.csv").read_text().splitlines()
    assert len(lines) == 1 + len(results)
    assert lines[0] == "dataset,method,ratio,repetition,fold,accuracy,n_test"


def test_export_accuracy_table_layout(tmp_path):
    grid = _tiny_grid()
    results, points = run_experiment(grid)
    export_results(tmp_path, grid, results, points)
    lines = (tmp_path / "accuracy_blobs.csv").read_text().splitlines()
    assert lines[0] == "method,0.0,0.3"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["NoImp", "MEI"]
