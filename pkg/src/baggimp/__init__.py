"""Bagging and multiple-imputation ensembles for incomplete numeric data.

The package reproduces a classification pipeline for data with values
missing completely at random: controlled cell removal, three imputers
(attribute mean, truncated random draws, EM-fitted Gaussian conditional
means), a gain-ratio decision tree able to consume incomplete records,
twelve single/ensemble classification methods built from those parts, and
a repeated two-fold evaluation harness with kappa-error and Friedman-rank
diagnostics.
"""

from .dataset import (
    AttributeStats,
    DataError,
    Dataset,
    DatasetMeta,
    FoldSplit,
    attribute_stats,
    bundled_path,
    destandardize,
    load_csv,
    split_2fold,
    standardize,
)
from .ensemble import (
    DatasetCount,
    EnsembleConfig,
    EnsembleModel,
    Family,
    Member,
    Method,
    bootstrap,
    build,
    dataset_count,
    load_model,
    member_votes,
    plurality_vote,
    predict,
    save_model,
)
from .evaluation import (
    ExperimentGrid,
    KappaErrorPoint,
    RankTable,
    RunResult,
    accuracy,
    export_results,
    friedman,
    kappa,
    kappa_error_points,
    rank_table,
    run_experiment,
    summarize,
)
from .impute import (
    EmConfig,
    FittedImputer,
    GaussianModel,
    ImputationError,
    ImputerKind,
    apply_em,
    average_imputations,
    fit_em,
    fit_imputer,
    impute_dataset,
    multiple_impute,
    truncated_standard_normal,
)
from .missing import MissingnessSpec, inject_mcar
from .rng import derive_rng, derive_seed
from .tree import TreeConfig, TreeNode, dump_tree, gain_ratio, predict_dist, predict_label
from .tree import train as train_tree

__version__ = "0.1.0"
