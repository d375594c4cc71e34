"""The twelve classification methods: singles, bagging, multiple imputation.

Four families cover the grid of "how many bootstraps" x "how many
imputations":

* single        -- one tree on the training data (optionally imputed).
* bag-single    -- B bootstrap samples, each completed by one imputation
                   pass (the average of M copies for randomized imputers),
                   one tree per bootstrap.
* bag-MI        -- B/M bootstrap samples, each imputed M times, one tree
                   per (bootstrap, copy); members are bootstrap-major.
* MI-ensemble   -- B imputations of the un-bootstrapped training data,
                   one tree per copy.

Every randomized stage draws from a stream derived from the configured
seed plus structural coordinates (bootstrap index, copy index, member
index, record index), so equal seeds give bit-identical models wherever
the randomness is vacuous -- e.g. all bag-single methods share bootstrap
streams and collapse to the same trees on fully observed data.
"""

from __future__ import annotations

import enum
import typing
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, attribute_stats, destandardize, standardize
from .impute import (
    EmConfig,
    FittedImputer,
    ImputerKind,
    apply_em,
    average_imputations,
    fit_em,
    impute_dataset,
    truncated_standard_normal,
)
from .rng import derive_rng
from .tree import TreeConfig, TreeNode, predict_label
from .tree import train as train_tree

__all__ = [
    "Family",
    "Method",
    "DatasetCount",
    "EnsembleConfig",
    "Member",
    "EnsembleModel",
    "bootstrap",
    "dataset_count",
    "build",
    "member_votes",
    "plurality_vote",
    "predict",
    "save_model",
    "load_model",
]


class Family(enum.Enum):
    SINGLE = "single"
    BAG_SINGLE = "bag-single"
    BAG_MI = "bag-mi"
    MI_ENSEMBLE = "mi-ensemble"


class Method(enum.Enum):
    NO_IMP = "NoImp"
    MEI = "MEI"
    GRANDI = "GRandI"
    EM = "EM"
    BAG_NO_IMP = "BagNoImp"
    BAG_MEI = "BagMEI"
    BAG_GRANDI = "BagGRandI"
    BAG_EM = "BagEM"
    BAG_MI_GRANDI = "BagMIGRandI"
    BAG_MI_EM = "BagMIEM"
    MI_GRANDI = "MIGrandI"
    MI_EM = "MIEM"

    @property
    def family(self) -> Family:
        return _REGISTRY[self][0]

    @property
    def imputer_kind(self) -> ImputerKind | None:
        return _REGISTRY[self][1]

    @property
    def is_ensemble(self) -> bool:
        return self.family is not Family.SINGLE

    @classmethod
    def from_name(cls, name: str) -> "Method":
        for method in cls:
            if method.value.lower() == name.lower():
                return method
        known = ", ".join(m.value for m in cls)
        raise ValueError(f"unknown method {name!r}; known methods: {known}")


_REGISTRY: dict[Method, tuple[Family, ImputerKind | None]] = {
    Method.NO_IMP: (Family.SINGLE, None),
    Method.MEI: (Family.SINGLE, ImputerKind.MEI),
    Method.GRANDI: (Family.SINGLE, ImputerKind.GRANDI),
    Method.EM: (Family.SINGLE, ImputerKind.EMI),
    Method.BAG_NO_IMP: (Family.BAG_SINGLE, None),
    Method.BAG_MEI: (Family.BAG_SINGLE, ImputerKind.MEI),
    Method.BAG_GRANDI: (Family.BAG_SINGLE, ImputerKind.GRANDI),
    Method.BAG_EM: (Family.BAG_SINGLE, ImputerKind.EMI),
    Method.BAG_MI_GRANDI: (Family.BAG_MI, ImputerKind.GRANDI),
    Method.BAG_MI_EM: (Family.BAG_MI, ImputerKind.EMI),
    Method.MI_GRANDI: (Family.MI_ENSEMBLE, ImputerKind.GRANDI),
    Method.MI_EM: (Family.MI_ENSEMBLE, ImputerKind.EMI),
}


class DatasetCount(typing.NamedTuple):
    """How many intermediate datasets a family materializes.

    Compares equal to the plain (bootstraps, imputations, datasets) triple.
    """

    bootstraps: int
    imputations: int
    datasets: int


def dataset_count(family: Family, b: int, m: int) -> DatasetCount:
    """Bootstrap/imputation/dataset accounting for one ensemble family."""
    if b < 1 or m < 1:
        raise ValueError("b and m must be >= 1")
    if family is Family.BAG_SINGLE:
        return DatasetCount(b, b * m, b + b * m)
    if family is Family.BAG_MI:
        if b % m != 0:
            raise ValueError(f"bag-MI needs B divisible by M, got B={b}, M={m}")
        return DatasetCount(b // m, b, b + b // m)
    if family is Family.MI_ENSEMBLE:
        return DatasetCount(0, b, b)
    raise ValueError(f"no dataset accounting for family {family!r}")


@dataclass(frozen=True)
class EnsembleConfig:
    """Shared knobs for building any of the twelve methods."""

    b: int = 25
    m: int = 5
    tree: TreeConfig = field(default_factory=TreeConfig)
    em: EmConfig = field(default_factory=EmConfig)
    z_bound: float = 4.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.b < 1:
            raise ValueError("b must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.z_bound <= 0.0:
            raise ValueError("z_bound must be positive")


@dataclass
class Member:
    """One trained tree plus the imputation parameters it was built with."""

    index: int
    tree: TreeNode
    imputer: FittedImputer | None


@dataclass
class EnsembleModel:
    method: Method
    members: list[Member]
    n_classes: int
    n_attributes: int
    class_names: tuple[str, ...]
    seed: int
    em_ridge: float


def bootstrap(data: Dataset, rng: np.random.Generator) -> Dataset:
    """Sample N records with replacement."""
    n = data.n_records
    return data.subset(rng.integers(0, n, size=n))


def build(method: Method, train: Dataset, config: EnsembleConfig) -> EnsembleModel:
    """Train one of the twelve methods on a training set."""
    family = method.family
    kind = method.imputer_kind
    members: list[Member] = []

    if family is Family.SINGLE:
        members.append(_make_member(train, kind, config, boot_index=0,
                                    member_index=0, n_copies=config.m))
    elif family is Family.BAG_SINGLE:
        for b in range(config.b):
            sample = bootstrap(train, derive_rng(config.seed, "bootstrap", b))
            members.append(_make_member(sample, kind, config, boot_index=b,
                                        member_index=b, n_copies=config.m))
    elif family is Family.BAG_MI:
        if kind is None or kind is ImputerKind.MEI:
            raise ValueError(f"{method.value} needs a randomized imputer")
        counts = dataset_count(family, config.b, config.m)  # validates B % M
        for q in range(counts.bootstraps):
            sample = bootstrap(train, derive_rng(config.seed, "bootstrap", q))
            for c in range(config.m):
                members.append(
                    _mi_member(sample, kind, config, boot_index=q, copy_index=c,
                               member_index=q * config.m + c)
                )
    elif family is Family.MI_ENSEMBLE:
        if kind is None or kind is ImputerKind.MEI:
            raise ValueError(f"{method.value} needs a randomized imputer")
        for c in range(config.b):
            members.append(
                _mi_member(train, kind, config, boot_index=0, copy_index=c,
                           member_index=c)
            )
    else:  # pragma: no cover
        raise ValueError(f"unknown family {family!r}")

    return EnsembleModel(
        method=method,
        members=members,
        n_classes=train.meta.n_classes,
        n_attributes=train.n_attributes,
        class_names=train.meta.class_names,
        seed=config.seed,
        em_ridge=config.em.ridge,
    )


def _make_member(
    data: Dataset,
    kind: ImputerKind | None,
    config: EnsembleConfig,
    boot_index: int,
    member_index: int,
    n_copies: int,
) -> Member:
    """Member whose training set is one complete-ified dataset.

    Randomized imputers produce ``n_copies`` completions that are averaged
    (the conditional-mean / truncated-draw average is mirrored at predict
    time); MEI and no-imputation members need no copies.
    """
    if kind is None:
        return Member(member_index, train_tree(data, config.tree), None)

    if kind is ImputerKind.MEI:
        stats = [attribute_stats(data, j) for j in range(data.n_attributes)]
        imp = FittedImputer(ImputerKind.MEI, stats)
        return Member(member_index, train_tree(impute_dataset(imp, data), config.tree), imp)

    if kind is ImputerKind.GRANDI:
        stats = [attribute_stats(data, j) for j in range(data.n_attributes)]
        one_draw = FittedImputer(ImputerKind.GRANDI, stats,
                                 z_bound=config.z_bound, n_draws=1)
        copies = [
            impute_dataset(one_draw, data,
                           rng=derive_rng(config.seed, "impute", boot_index, c))
            for c in range(n_copies)
        ]
        complete = average_imputations(copies, reference=data)
        imp = FittedImputer(ImputerKind.GRANDI, stats,
                            z_bound=config.z_bound, n_draws=n_copies)
        return Member(member_index, train_tree(complete, config.tree), imp)

    # EMI: fit one model per copy, average the conditional-mean fills.
    stats = [attribute_stats(data, j) for j in range(data.n_attributes)]
    std, _ = standardize(data)
    models = []
    copies = []
    for c in range(n_copies):
        rng = derive_rng(config.seed, "impute", boot_index, c)
        model = fit_em(std, config.em, rng)
        models.append(model)
        copies.append(_complete_from_model(model, std, stats, data, config.em.ridge))
    complete = average_imputations(copies, reference=data)
    imp = FittedImputer(ImputerKind.EMI, stats, models=tuple(models))
    return Member(member_index, train_tree(complete, config.tree), imp)


def _mi_member(
    data: Dataset,
    kind: ImputerKind,
    config: EnsembleConfig,
    boot_index: int,
    copy_index: int,
    member_index: int,
) -> Member:
    """Member trained on a single (un-averaged) imputation of ``data``."""
    stats = [attribute_stats(data, j) for j in range(data.n_attributes)]
    rng = derive_rng(config.seed, "impute", boot_index, copy_index)
    if kind is ImputerKind.GRANDI:
        imp = FittedImputer(ImputerKind.GRANDI, stats,
                            z_bound=config.z_bound, n_draws=1)
        complete = impute_dataset(imp, data, rng=rng)
    else:
        std, _ = standardize(data)
        model = fit_em(std, config.em, rng)
        complete = _complete_from_model(model, std, stats, data, config.em.ridge)
        imp = FittedImputer(ImputerKind.EMI, stats, models=(model,))
    return Member(member_index, train_tree(complete, config.tree), imp)


def _complete_from_model(model, std: Dataset, stats, original: Dataset,
                         ridge: float) -> Dataset:
    """Conditional-mean completion mapped back to original units."""
    filled = apply_em(model, std, ridge=ridge)
    out = destandardize(filled, stats)
    out.values[original.mask] = original.values[original.mask]
    return out


def member_votes(model: EnsembleModel, data: Dataset) -> np.ndarray:
    """Hard vote of every member on every record, shape (L, N).

    Members that carry an imputer complete the record with their own fitted
    parameters before the tree sees it; members without one rely on the
    tree's fractional descent.  GRandI draws are derandomized per (member,
    record) so results never depend on evaluation order.
    """
    if data.n_attributes != model.n_attributes:
        raise ValueError(
            f"model expects {model.n_attributes} attributes, data has {data.n_attributes}"
        )
    n = data.n_records
    votes = np.empty((len(model.members), n), dtype=np.int64)
    all_obs = np.ones(data.n_attributes, dtype=bool)
    for row, member in enumerate(model.members):
        imp = member.imputer
        if imp is None:
            for r in range(n):
                votes[row, r] = predict_label(member.tree, data.values[r], data.mask[r])
        elif imp.kind is ImputerKind.GRANDI:
            filled = _grandi_fill_per_record(imp, data, model.seed, member.index)
            for r in range(n):
                votes[row, r] = predict_label(member.tree, filled[r], all_obs)
        else:
            completed = impute_dataset(imp, data, em_ridge=model.em_ridge)
            for r in range(n):
                votes[row, r] = predict_label(member.tree, completed.values[r], all_obs)
    return votes


def _grandi_fill_per_record(
    imp: FittedImputer, data: Dataset, seed: int, member_index: int
) -> np.ndarray:
    means = np.array([st.mean for st in imp.stats])
    sds = np.array([st.sd for st in imp.stats])
    filled = data.values.copy()
    for r in range(data.n_records):
        gaps = np.flatnonzero(~data.mask[r])
        if gaps.size == 0:
            continue
        rng = derive_rng(seed, "predict", member_index, r)
        z = truncated_standard_normal(rng, (imp.n_draws, gaps.size), imp.z_bound)
        filled[r, gaps] = means[gaps] + sds[gaps] * z.mean(axis=0)
    return filled


def plurality_vote(votes: np.ndarray, n_classes: int) -> np.ndarray:
    """Most-voted class per record; ties go to the lowest class index."""
    counts = np.zeros((votes.shape[1], n_classes), dtype=np.int64)
    for row in votes:
        counts[np.arange(votes.shape[1]), row] += 1
    return counts.argmax(axis=1)


def predict(model: EnsembleModel, data: Dataset) -> np.ndarray:
    """Ensemble prediction: member hard votes resolved by plurality."""
    return plurality_vote(member_votes(model, data), model.n_classes)


# --------------------------------------------------------------------------
# persistence

_MODEL_FORMAT = "baggimp-model"
_MODEL_VERSION = 1


def save_model(path, model: EnsembleModel) -> None:
    """Persist a model; :func:`load_model` restores it losslessly."""
    import pickle

    with open(path, "wb") as fh:
        pickle.dump(
            {"format": _MODEL_FORMAT, "version": _MODEL_VERSION, "model": model},
            fh,
            protocol=4,
        )


def load_model(path) -> EnsembleModel:
    """Load a model written by :func:`save_model`."""
    import pickle

    with open(path, "rb") as fh:
        try:
            payload = pickle.load(fh)
        except (pickle.UnpicklingError, EOFError, AttributeError,
                ImportError, IndexError) as exc:
            raise ValueError(f"{path}: not a model file") from exc
    if not isinstance(payload, dict) or payload.get("format") != _MODEL_FORMAT:
        raise ValueError(f"{path}: not a model file")
    if payload.get("version") != _MODEL_VERSION:
        raise ValueError(
            f"{path}: unsupported model version {payload.get('version')!r}"
        )
    return payload["model"]
