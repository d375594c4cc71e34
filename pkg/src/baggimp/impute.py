"""Single and multiple imputation of missing numeric cells.

Three imputers share one calling convention:

* MEI    -- each missing cell becomes its attribute's observed mean.
* GRandI -- each missing cell becomes mean + sd * z with z drawn from a
            standard normal truncated to [-z_bound, z_bound].
* EMI    -- a joint Gaussian is fitted by expectation-maximization and each
            record's missing block becomes its conditional mean given the
            observed block.

MEI and GRandI act per attribute, so they are applied in original units
(algebraically identical to standardizing first).  EMI is fitted in
standardized space -- its random covariance initialization assumes unit
scale -- and results are mapped back.  Fitted state is carried by
:class:`FittedImputer` so held-out records can be completed with the exact
parameters learned from training data.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .dataset import (
    AttributeStats,
    DataError,
    Dataset,
    attribute_stats,
    destandardize,
    standardize,
)

__all__ = [
    "ImputerKind",
    "ImputationError",
    "EmConfig",
    "GaussianModel",
    "FittedImputer",
    "truncated_standard_normal",
    "fit_imputer",
    "impute_dataset",
    "multiple_impute",
    "average_imputations",
    "fit_em",
    "apply_em",
]


class ImputerKind(enum.Enum):
    MEI = "mei"
    GRANDI = "grandi"
    EMI = "emi"


class ImputationError(RuntimeError):
    """Imputation could not be carried out on the given data."""


@dataclass(frozen=True)
class EmConfig:
    """Controls for the expectation-maximization fit."""

    max_iter: int = 100
    tol: float = 1e-5
    ridge: float = 1e-6
    init_range: float = 1.0
    eigen_floor: float = 1e-3

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.ridge < 0.0:
            raise ValueError("ridge must be >= 0")
        if not 0.0 < self.init_range <= 1.0:
            raise ValueError("init_range must be in (0, 1]")
        if self.eigen_floor <= 0.0:
            raise ValueError("eigen_floor must be positive")


@dataclass
class GaussianModel:
    """Mean vector and covariance matrix of a fitted joint Gaussian."""

    mean: np.ndarray
    cov: np.ndarray
    iterations: int
    converged: bool


@dataclass
class FittedImputer:
    """Everything needed to complete new records the way training data was.

    ``stats`` always holds the training data's per-attribute statistics.
    ``models`` is populated for EMI (one or more fits whose conditional
    means are averaged); ``n_draws`` tells GRandI how many truncated draws
    to average per cell (1 for a plain draw).
    """

    kind: ImputerKind
    stats: list[AttributeStats]
    z_bound: float = 4.0
    n_draws: int = 1
    models: tuple[GaussianModel, ...] = field(default_factory=tuple)


def truncated_standard_normal(
    rng: np.random.Generator, size, z_bound: float
) -> np.ndarray:
    """Standard normal draws truncated to [-z_bound, z_bound].

    Inverse-CDF sampling: exact, vectorized, and one uniform per draw, so
    the consumed stream length never depends on the draw values.
    """
    if z_bound <= 0.0:
        raise ValueError(f"z_bound must be positive, got {z_bound}")
    lo, hi = ndtr(-z_bound), ndtr(z_bound)
    return ndtri(rng.uniform(lo, hi, size))


# --------------------------------------------------------------------------
# fitting

def fit_imputer(
    kind: ImputerKind,
    train: Dataset,
    *,
    em: EmConfig | None = None,
    z_bound: float = 4.0,
    n_models: int = 1,
    n_draws: int = 1,
    rng: np.random.Generator | None = None,
) -> FittedImputer:
    """Fit imputation parameters on a training set.

    EMI fits ``n_models`` independent models (fresh random covariance
    initialization each); applying the imputer averages their conditional
    means, mirroring how averaged multiple imputations built the training
    data.
    """
    stats = [attribute_stats(train, j) for j in range(train.n_attributes)]
    if kind is ImputerKind.MEI:
        return FittedImputer(kind, stats)
    if kind is ImputerKind.GRANDI:
        return FittedImputer(kind, stats, z_bound=z_bound, n_draws=n_draws)
    if kind is ImputerKind.EMI:
        if rng is None:
            raise ValueError("EMI fitting needs a random generator")
        cfg = em if em is not None else EmConfig()
        std_train, _ = standardize(train)
        models = tuple(fit_em(std_train, cfg, rng) for _ in range(n_models))
        return FittedImputer(kind, stats, models=models)
    raise ValueError(f"unknown imputer kind: {kind!r}")


def fit_em(data: Dataset, config: EmConfig, rng: np.random.Generator) -> GaussianModel:
    """Fit a joint Gaussian to partially observed data by EM.

    Expects standardized data.  The mean starts at zero and the covariance
    at the identity plus symmetric uniform(-init_range, init_range) noise
    off the diagonal, repaired to eigenvalues >= eigen_floor.  Each E-step
    computes expected sufficient statistics record by record (grouped by
    missingness pattern); each M-step re-estimates mean and covariance.
    Stops when no parameter moves more than ``tol`` or after ``max_iter``
    sweeps.
    """
    n, f = data.n_records, data.n_attributes
    if n < 2:
        raise ImputationError("EM needs at least two records")
    counts = data.mask.sum(axis=0)
    if (counts < 2).any():
        bad = int(np.argmin(counts))
        raise ImputationError(
            f"EM needs every attribute observed at least twice; "
            f"attribute {bad} has {int(counts[bad])}"
        )
    if n <= f:
        warnings.warn(
            f"EM fit with {n} records and {f} attributes is weakly determined",
            stacklevel=2,
        )

    mean = np.zeros(f)
    noise = rng.uniform(-config.init_range, config.init_range, size=(f, f))
    upper = np.triu(noise, k=1)
    cov = np.eye(f) + upper + upper.T
    cov = _floor_eigenvalues(cov, config.eigen_floor)

    # Hoist everything that does not change across sweeps: the pattern
    # index arithmetic and the observed blocks of the filled matrix.
    values = np.nan_to_num(data.values, nan=0.0)  # unobserved entries never read
    filled = values.copy()
    incomplete = []
    for obs, rows in _pattern_groups(data.mask):
        if obs.all():
            continue
        o_idx = np.flatnonzero(obs)
        m_idx = np.flatnonzero(~obs)
        incomplete.append((
            rows, o_idx, m_idx,
            values[np.ix_(rows, o_idx)],          # observed block, constant
            np.ix_(o_idx, o_idx), np.ix_(o_idx, m_idx), np.ix_(m_idx, m_idx),
            np.ix_(rows, m_idx),
        ))
    ridge_eyes = {
        len(o): config.ridge * np.eye(len(o)) for _, o, *_ in incomplete
    }

    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        cc = np.zeros((f, f))  # summed conditional covariances
        for rows, o_idx, m_idx, y_obs, ix_oo, ix_om, ix_mm, ix_fill in incomplete:
            if o_idx.size == 0:  # nothing observed: fill with the mean
                filled[ix_fill] = mean[m_idx]
                cc[ix_mm] += len(rows) * cov[ix_mm]
                continue
            s_oo = cov[ix_oo]
            if config.ridge > 0.0:
                s_oo = s_oo + ridge_eyes[len(o_idx)]
            s_om = cov[ix_om]
            try:
                coef = np.linalg.solve(s_oo, s_om)  # (n_obs, n_miss)
            except np.linalg.LinAlgError as exc:
                raise ImputationError(
                    "singular observed-block covariance; increase the ridge"
                ) from exc
            filled[ix_fill] = mean[m_idx] + (y_obs - mean[o_idx]) @ coef
            cc[ix_mm] += len(rows) * (cov[ix_mm] - s_om.T @ coef)
        new_mean = filled.sum(axis=0) / n
        new_cov = (filled.T @ filled + cc) / n - np.outer(new_mean, new_mean)
        new_cov = (new_cov + new_cov.T) / 2.0
        if not (np.isfinite(new_mean).all() and np.isfinite(new_cov).all()):
            raise ImputationError(
                "EM produced non-finite parameters; the data may be "
                "degenerate (a larger ridge can help)"
            )
        delta = max(
            float(np.abs(new_mean - mean).max()),
            float(np.abs(new_cov - cov).max()),
        )
        mean, cov = new_mean, new_cov
        if delta < config.tol:
            converged = True
            break
    return GaussianModel(mean, cov, iterations, converged)


def _floor_eigenvalues(cov: np.ndarray, floor: float) -> np.ndarray:
    """Clamp eigenvalues from below so the matrix is safely positive definite."""
    w, v = np.linalg.eigh(cov)
    if w.min() >= floor:
        return cov
    w = np.maximum(w, floor)
    repaired = (v * w) @ v.T
    return (repaired + repaired.T) / 2.0


def _pattern_groups(mask: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Group record indices by identical observation pattern.

    Records sharing a pattern share the same conditional-Gaussian algebra,
    so each group costs one linear solve instead of one per record.
    """
    patterns, inverse = np.unique(mask, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    return [
        (patterns[p], np.flatnonzero(inverse == p)) for p in range(len(patterns))
    ]


def _conditional_fill(
    rows: np.ndarray,
    obs: np.ndarray,
    mean: np.ndarray,
    cov: np.ndarray,
    ridge: float,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Fill one pattern group's missing block with conditional means.

    Returns the filled rows and the conditional covariance of the missing
    block (None when nothing is missing).  ``rows`` must hold zeros at
    unobserved positions; they are overwritten, never read.
    """
    if obs.all():
        return rows.copy(), None
    miss = ~obs
    filled = np.empty_like(rows)
    if not obs.any():
        filled[:] = mean
        return filled, cov.copy()
    s_oo = cov[np.ix_(obs, obs)]
    if ridge > 0.0:
        s_oo = s_oo + ridge * np.eye(s_oo.shape[0])
    s_om = cov[np.ix_(obs, miss)]
    try:
        coef = np.linalg.solve(s_oo, s_om)  # (n_obs, n_miss)
    except np.linalg.LinAlgError as exc:
        raise ImputationError(
            "singular observed-block covariance; increase the ridge"
        ) from exc
    resid = rows[:, obs] - mean[obs]
    filled[:, obs] = rows[:, obs]
    filled[:, miss] = mean[miss] + resid @ coef
    cond_cov = cov[np.ix_(miss, miss)] - s_om.T @ coef
    return filled, cond_cov


def apply_em(model: GaussianModel, data: Dataset, ridge: float = 0.0) -> Dataset:
    """Complete a dataset with conditional means under a fitted Gaussian.

    The data must live in the same (standardized) space the model was
    fitted in.  Observed cells pass through untouched.
    """
    out = data.copy()
    if data.mask.all():
        return out
    values = np.nan_to_num(data.values, nan=0.0)
    for obs, rows in _pattern_groups(data.mask):
        if obs.all():
            continue
        filled, _ = _conditional_fill(values[rows], obs, model.mean, model.cov, ridge)
        out.values[rows] = filled
    out.mask[:] = True
    return out


# --------------------------------------------------------------------------
# application

def impute_dataset(
    imp: FittedImputer,
    data: Dataset,
    rng: np.random.Generator | None = None,
    em_ridge: float = 0.0,
) -> Dataset:
    """Complete every missing cell of ``data`` using fitted parameters.

    Observed cells are returned bit-identical.  GRandI is the only
    randomized application and requires ``rng``; its per-cell value is the
    mean of ``imp.n_draws`` truncated draws (exactly the attribute mean
    when the attribute's sd is zero).
    """
    if imp.kind is ImputerKind.MEI:
        return _fill_columns(data, {j: st.mean for j, st in enumerate(imp.stats)})
    if imp.kind is ImputerKind.GRANDI:
        if rng is None:
            raise ValueError("GRandI application needs a random generator")
        out = data.copy()
        for j, st in enumerate(imp.stats):
            gap = ~data.mask[:, j]
            if not gap.any():
                continue
            z = truncated_standard_normal(rng, (imp.n_draws, int(gap.sum())), imp.z_bound)
            out.values[gap, j] = st.mean + st.sd * z.mean(axis=0)
        out.mask[:] = True
        return out
    if imp.kind is ImputerKind.EMI:
        if not imp.models:
            raise ImputationError("EMI imputer carries no fitted model")
        std, _ = _standardize_with(data, imp.stats)
        fills = [apply_em(m, std, ridge=em_ridge) for m in imp.models]
        avg = average_imputations(fills, reference=std)
        out = destandardize(_as_complete(avg), imp.stats)
        out.values[data.mask] = data.values[data.mask]
        return out
    raise ValueError(f"unknown imputer kind: {imp.kind!r}")


def _fill_columns(data: Dataset, fill: dict[int, float]) -> Dataset:
    out = data.copy()
    for j, value in fill.items():
        gap = ~data.mask[:, j]
        out.values[gap, j] = value
    out.mask[:] = True
    return out


def _standardize_with(
    data: Dataset, stats: Sequence[AttributeStats]
) -> tuple[Dataset, Sequence[AttributeStats]]:
    """Standardize using externally supplied statistics (e.g. training-fold)."""
    out = data.copy()
    for j, st in enumerate(stats):
        col = data.mask[:, j]
        if st.sd > 0.0:
            out.values[col, j] = (data.values[col, j] - st.mean) / st.sd
        else:
            out.values[col, j] = 0.0
    return out, stats


def _as_complete(data: Dataset) -> Dataset:
    out = data.copy()
    out.mask[:] = True
    return out


def multiple_impute(
    kind: ImputerKind,
    data: Dataset,
    m: int,
    *,
    em: EmConfig | None = None,
    z_bound: float = 4.0,
    rng: np.random.Generator,
) -> list[Dataset]:
    """Produce ``m`` independently completed copies of ``data``.

    GRandI redraws every missing cell per copy; EMI refits the model per
    copy from a fresh random initialization.  MEI is deterministic, so
    asking it for multiple imputations is an error.
    """
    if m < 1:
        raise ValueError(f"need at least one imputation, got {m}")
    if kind is ImputerKind.MEI:
        raise ImputationError("MEI is deterministic; multiple imputation "
                              "would produce identical copies")
    copies = []
    if kind is ImputerKind.GRANDI:
        imp = fit_imputer(kind, data, z_bound=z_bound)
        for _ in range(m):
            copies.append(impute_dataset(imp, data, rng=rng))
        return copies
    if kind is ImputerKind.EMI:
        cfg = em if em is not None else EmConfig()
        for _ in range(m):
            imp = fit_imputer(kind, data, em=cfg, rng=rng)
            copies.append(impute_dataset(imp, data, em_ridge=cfg.ridge))
        return copies
    raise ValueError(f"unknown imputer kind: {kind!r}")


def average_imputations(copies: Sequence[Dataset], reference: Dataset) -> Dataset:
    """Cell-wise mean of several completed copies of one dataset.

    ``reference`` is the original (incomplete) dataset; its observed cells
    are restored verbatim so averaging cannot perturb them.
    """
    if not copies:
        raise ValueError("no imputed copies to average")
    shape = reference.values.shape
    for c in copies:
        if c.values.shape != shape:
            raise ValueError("imputed copies disagree on shape")
    out = reference.copy()
    stacked = np.stack([c.values for c in copies])
    out.values = stacked.mean(axis=0)
    out.values[reference.mask] = reference.values[reference.mask]
    out.mask = np.ones_like(reference.mask)
    return out
