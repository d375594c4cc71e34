"""Command-line harness.

Subcommands::

    run      evaluate methods over a (dataset x ratio x repetition) grid
    inject   remove cells completely at random from a complete CSV
    impute   fill missing cells (single or multiple imputation)
    train    fit one method and persist the model
    predict  classify records with a persisted model
    kappa    kappa-error points of a persisted ensemble on a dataset
    report   human-readable summary of a results directory

Options can come from a flat ``key=value`` config file (``--config``);
explicit command-line flags win over the file, the file wins over
defaults.  Every subcommand is deterministic given its inputs and
``--seed``.  Exit status: 0 success, 1 invalid usage/inputs, 2 runtime
failure.  Progress and diagnostics go to stderr, data to files or stdout.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from .dataset import DataError, Dataset, bundled_path, load_csv
from .ensemble import (
    EnsembleConfig,
    Method,
    build,
    load_model,
    member_votes,
    plurality_vote,
    save_model,
)
from .evaluation import (
    ExperimentGrid,
    export_results,
    kappa_error_points,
    rank_table,
    run_experiment,
)
from .impute import EmConfig, ImputationError, ImputerKind, fit_imputer, impute_dataset, multiple_impute, average_imputations
from .missing import MissingnessSpec, inject_mcar
from .rng import derive_rng
from .tree import TreeConfig, dump_tree

__all__ = ["main", "entry"]

_ENV_OUT = "BAGGIMP_OUT"

_DEFAULTS = {
    "label_column": "class",
    "methods": ",".join(m.value for m in Method),
    "ratios": "0,0.05,0.1,0.15,0.2,0.25,0.3",
    "repetitions": "30",
    "b": "25",
    "m": "5",
    "z_bound": "4.0",
    "em_max_iter": "100",
    "em_tol": "1e-5",
    "em_ridge": "1e-6",
    "em_init_range": "1.0",
    "em_eigen_floor": "1e-3",
    "min_leaf_weight": "2.0",
    "min_split_gain": "1e-9",
    "max_depth": "",
    "seed": "0",
    "workers": "1",
    "kappa_repetition": "0",
    "kappa_fold": "0",
}


class CliError(Exception):
    """Invalid usage or inputs; maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit status 2
        raise CliError(message)


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "command", None) is None:
            raise CliError("no subcommand given (see --help)")
        args._config = (_read_config(args.config)
                        if getattr(args, "config", None) else {})
        return args.handler(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError) as exc:
        # Bad inputs discovered during option/data validation.
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ImputationError, OSError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


# --------------------------------------------------------------------------
# option plumbing

def _read_config(path: str) -> dict[str, str]:
    """Flat key=value file; blank lines and # comments ignored."""
    out: dict[str, str] = {}
    p = Path(path)
    if not p.is_file():
        raise CliError(f"config file not found: {path}")
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key in out:
            raise CliError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _resolve(args, key: str) -> str:
    """CLI flag > config file > built-in default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return str(flag)
    if key in args._config:
        return args._config[key]
    if key in _DEFAULTS:
        return _DEFAULTS[key]
    raise CliError(f"missing required option: {key}")


def _resolve_int(args, key: str) -> int:
    raw = _resolve(args, key)
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"option {key} must be an integer, got {raw!r}") from None


def _resolve_float(args, key: str) -> float:
    raw = _resolve(args, key)
    try:
        return float(raw)
    except ValueError:
        raise CliError(f"option {key} must be a number, got {raw!r}") from None


def _parse_ratios(raw: str) -> tuple[float, ...]:
    try:
        ratios = tuple(float(tok) for tok in raw.split(",") if tok.strip() != "")
    except ValueError:
        raise CliError(f"bad ratio list: {raw!r}") from None
    if not ratios:
        raise CliError("empty ratio list")
    for r in ratios:
        if not 0.0 <= r <= 0.5:
            raise CliError(f"missing ratio {r} outside [0, 0.5]")
    return ratios


def _parse_methods(raw: str) -> tuple[Method, ...]:
    names = [tok.strip() for tok in raw.split(",") if tok.strip()]
    if not names:
        raise CliError("empty method list")
    if len(names) == 1 and names[0].lower() == "all":
        return tuple(Method)
    try:
        methods = tuple(Method.from_name(n) for n in names)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if len(set(methods)) != len(methods):
        raise CliError("duplicate methods in list")
    return methods


def _load_dataset(token: str, label_column: str) -> Dataset:
    """A path to a CSV file, or the name of a bundled dataset."""
    p = Path(token)
    if p.is_file():
        return load_csv(p, label_column)
    try:
        return load_csv(bundled_path(token), label_column)
    except DataError:
        raise CliError(
            f"dataset {token!r}: no such file, and no bundled dataset of that name"
        ) from None


def _tree_config(args) -> TreeConfig:
    raw_depth = _resolve(args, "max_depth")
    depth = None if raw_depth.strip() in ("", "none") else int(raw_depth)
    try:
        return TreeConfig(
            min_leaf_weight=_resolve_float(args, "min_leaf_weight"),
            min_split_gain=_resolve_float(args, "min_split_gain"),
            max_depth=depth,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _em_config(args) -> EmConfig:
    try:
        return EmConfig(
            max_iter=_resolve_int(args, "em_max_iter"),
            tol=_resolve_float(args, "em_tol"),
            ridge=_resolve_float(args, "em_ridge"),
            init_range=_resolve_float(args, "em_init_range"),
            eigen_floor=_resolve_float(args, "em_eigen_floor"),
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _out_dir(args) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if "out" in args._config:
        return Path(args._config["out"])
    return Path(os.environ.get(_ENV_OUT, "results"))


def _write_csv(path_or_dash: str, header: list[str], rows) -> None:
    if path_or_dash == "-":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path_or_dash, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _dataset_rows(data: Dataset) -> tuple[list[str], list[list[str]]]:
    """CSV header and rows; missing cells become '?', labels keep their names."""
    header = list(data.meta.attribute_names) + ["class"]
    rows = []
    for i in range(data.n_records):
        row = [
            repr(float(v)) if m else "?"
            for v, m in zip(data.values[i], data.mask[i])
        ]
        row.append(data.meta.class_names[data.labels[i]])
        rows.append(row)
    return header, rows


# --------------------------------------------------------------------------
# subcommands

def _cmd_run(args) -> int:
    label = _resolve(args, "label_column")
    tokens = [t.strip() for t in _resolve(args, "data").split(",") if t.strip()]
    if not tokens:
        raise CliError("no datasets given")
    methods = _parse_methods(_resolve(args, "methods"))
    ratios = _parse_ratios(_resolve(args, "ratios"))
    workers = _resolve_int(args, "workers")
    if workers < 1:
        raise CliError("workers must be >= 1")

    datasets = []
    for token in tokens:
        try:
            datasets.append(_load_dataset(token, label))
        except DataError as exc:
            # A broken dataset skips itself, not the whole grid.
            print(f"skipping dataset {token!r}: {exc}", file=sys.stderr)
    if not datasets:
        raise CliError("no loadable datasets")

    try:
        grid = ExperimentGrid(
            datasets=tuple(datasets),
            methods=methods,
            ratios=ratios,
            repetitions=_resolve_int(args, "repetitions"),
            b=_resolve_int(args, "b"),
            m=_resolve_int(args, "m"),
            tree=_tree_config(args),
            em=_em_config(args),
            z_bound=_resolve_float(args, "z_bound"),
            master_seed=_resolve_int(args, "seed"),
            kappa_repetition=_resolve_int(args, "kappa_repetition"),
            kappa_fold=_resolve_int(args, "kappa_fold"),
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None

    results, points = run_experiment(grid, workers=workers,
                                     progress=not args.quiet)
    outdir = _out_dir(args)
    written = export_results(outdir, grid, results, points)
    print(f"wrote {len(written)} files under {outdir}", file=sys.stderr)
    return 0


def _cmd_inject(args) -> int:
    spec = MissingnessSpec(args.ratio, _resolve_int(args, "seed"))
    data = load_csv(args.input, _resolve(args, "label_column"))
    injected = inject_mcar(data, spec)
    header, rows = _dataset_rows(injected)
    _write_csv(args.output, header, rows)
    mask_out = args.mask_out or (args.output + ".mask.csv")
    if args.output != "-":
        _write_csv(
            mask_out,
            list(data.meta.attribute_names),
            [[int(v) for v in row] for row in injected.mask],
        )
    return 0


def _cmd_impute(args) -> int:
    kind = {"mei": ImputerKind.MEI, "grandi": ImputerKind.GRANDI,
            "em": ImputerKind.EMI}[args.method]
    data = load_csv(args.input, _resolve(args, "label_column"))
    em = _em_config(args)
    z = _resolve_float(args, "z_bound")
    copies = _resolve_int(args, "multiple")
    if copies < 1:
        raise CliError("--multiple must be >= 1")
    rng = derive_rng(_resolve_int(args, "seed"), "impute-cli")

    if copies == 1:
        imp = fit_imputer(kind, data, em=em, z_bound=z,
                          rng=rng if kind is ImputerKind.EMI else None)
        out = impute_dataset(imp, data, rng=rng, em_ridge=em.ridge)
        header, rows = _dataset_rows(out)
        _write_csv(args.output, header, rows)
        return 0

    filled = multiple_impute(kind, data, copies, em=em, z_bound=z, rng=rng)
    if args.average:
        out = average_imputations(filled, reference=data)
        header, rows = _dataset_rows(out)
        _write_csv(args.output, header, rows)
        return 0
    if args.output == "-":
        raise CliError("multiple un-averaged copies need a file output, not '-'")
    stem = Path(args.output)
    for i, copy in enumerate(filled, 1):
        header, rows = _dataset_rows(copy)
        _write_csv(str(stem.with_name(f"{stem.stem}_{i}{stem.suffix}")), header, rows)
    return 0


def _cmd_train(args) -> int:
    method = Method.from_name(args.method)
    data = load_csv(args.input, _resolve(args, "label_column"))
    config = EnsembleConfig(
        b=_resolve_int(args, "b"),
        m=_resolve_int(args, "m"),
        tree=_tree_config(args),
        em=_em_config(args),
        z_bound=_resolve_float(args, "z_bound"),
        seed=_resolve_int(args, "seed"),
    )
    model = build(method, data, config)
    save_model(args.model_out, model)
    if args.dump_tree:
        with open(args.dump_tree, "w", encoding="utf-8") as fh:
            for member in model.members:
                fh.write(f"member {member.index}\n")
                fh.write(dump_tree(member.tree, data.meta.attribute_names))
    print(f"trained {method.value} ({len(model.members)} members) "
          f"-> {args.model_out}", file=sys.stderr)
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    data = load_csv(args.input, _resolve(args, "label_column"))
    preds = plurality_vote(member_votes(model, data), model.n_classes)
    rows = [[i, model.class_names[p]] for i, p in enumerate(preds)]
    _write_csv(args.output, ["record", "prediction"], rows)
    return 0


def _cmd_kappa(args) -> int:
    model = load_model(args.model)
    if len(model.members) < 2:
        raise CliError("kappa-error points need an ensemble of >= 2 members")
    data = load_csv(args.input, _resolve(args, "label_column"))
    votes = member_votes(model, data)
    points = kappa_error_points(votes, data.labels, model.n_classes)
    rows = [[i, j, repr(k), repr(e)] for i, j, k, e in points]
    _write_csv(args.output, ["member_i", "member_j", "kappa", "mean_error"], rows)
    return 0


def _cmd_report(args) -> int:
    runs = Path(args.results) / "runs.csv"
    if not runs.is_file():
        raise CliError(f"no runs.csv under {args.results}")
    with open(runs, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise CliError(f"{runs}: empty")

    datasets = list(dict.fromkeys(r["dataset"] for r in rows))
    methods = list(dict.fromkeys(r["method"] for r in rows))
    ratios = list(dict.fromkeys(r["ratio"] for r in rows))
    acc: dict[tuple[str, str, str], list[float]] = {}
    for r in rows:
        acc.setdefault((r["dataset"], r["method"], r["ratio"]), []).append(
            float(r["accuracy"])
        )

    def mean(key):
        vals = acc.get(key)
        return sum(vals) / len(vals) if vals else float("nan")

    width = max(len(m) for m in methods) + 2
    for name in datasets:
        print(f"\n== {name} ==")
        print(" " * width + "".join(f"{float(r):>8.2f}" for r in ratios))
        for m in methods:
            cells = "".join(f"{mean((name, m, r)):>8.3f}" for r in ratios)
            print(f"{m:<{width}}{cells}")

    if len(methods) >= 2:
        print("\n== mean ranks (1 = best) ==")
        print(" " * width + "".join(f"{float(r):>8.2f}" for r in ratios))
        tables = {
            r: rank_table(methods, datasets,
                          np.array([[mean((d, m, r)) for d in datasets]
                                    for m in methods]))
            for r in ratios
        }
        for mi, m in enumerate(methods):
            cells = "".join(f"{tables[r].mean_ranks[mi]:>8.2f}" for r in ratios)
            print(f"{m:<{width}}{cells}")
        stats = "".join(f"{tables[r].statistic:>8.2f}" for r in ratios)
        pvals = "".join(f"{tables[r].p_value:>8.3f}" for r in ratios)
        print(f"{'friedman':<{width}}{stats}")
        print(f"{'p-value':<{width}}{pvals}")
    return 0


# --------------------------------------------------------------------------
# parser

def _add_common(sub, *, seed=True, label=True, em=False, tree=False, z=False):
    sub.add_argument("--config", help="flat key=value options file")
    if seed:
        sub.add_argument("--seed", help="master random seed (default 0)")
    if label:
        sub.add_argument("--label-column", dest="label_column",
                         help="name of the class column (default 'class')")
    if em:
        for opt in ("em-max-iter", "em-tol", "em-ridge", "em-init-range",
                    "em-eigen-floor"):
            sub.add_argument(f"--{opt}", dest=opt.replace("-", "_"))
    if tree:
        for opt in ("min-leaf-weight", "min-split-gain", "max-depth"):
            sub.add_argument(f"--{opt}", dest=opt.replace("-", "_"))
    if z:
        sub.add_argument("--z-bound", dest="z_bound",
                         help="truncation bound for random imputation draws")


def _build_parser() -> _Parser:
    parser = _Parser(prog="baggimp",
                     description="Imputation-ensemble classification harness")
    subs = parser.add_subparsers(dest="command")

    run = subs.add_parser("run", help="evaluate a method grid", add_help=True)
    run.add_argument("--data", help="comma-separated CSV paths or bundled names")
    run.add_argument("--methods", help="comma-separated method names or 'all'")
    run.add_argument("--ratios", help="comma-separated missing ratios")
    run.add_argument("--repetitions", help="cross-validation repetitions (default 30)")
    run.add_argument("--b", help="ensemble size B (default 25)")
    run.add_argument("--m", help="imputation count M (default 5)")
    run.add_argument("--workers", help="parallel worker processes (default 1)")
    run.add_argument("--out", help=f"output directory (default ${_ENV_OUT} or results/)")
    run.add_argument("--kappa-repetition", dest="kappa_repetition",
                     help="repetition exported to kappa-error points (default 0)")
    run.add_argument("--kappa-fold", dest="kappa_fold",
                     help="fold exported to kappa-error points (default 0)")
    run.add_argument("--quiet", action="store_true", help="suppress progress output")
    _add_common(run, em=True, tree=True, z=True)
    run.set_defaults(handler=_cmd_run)

    inject = subs.add_parser("inject", help="remove cells completely at random")
    inject.add_argument("input", help="complete CSV file")
    inject.add_argument("output", help="output CSV ('-' for stdout)")
    inject.add_argument("--ratio", type=float, required=True,
                        help="per-attribute missing ratio in [0, 0.5]")
    inject.add_argument("--mask-out", dest="mask_out",
                        help="sidecar mask CSV (default OUTPUT.mask.csv)")
    _add_common(inject)
    inject.set_defaults(handler=_cmd_inject)

    impute = subs.add_parser("impute", help="fill missing cells")
    impute.add_argument("input")
    impute.add_argument("output", help="output CSV ('-' for stdout)")
    impute.add_argument("--method", required=True, choices=["mei", "grandi", "em"])
    impute.add_argument("--multiple", default="1",
                        help="number of imputed copies (default 1)")
    impute.add_argument("--average", action="store_true",
                        help="average the copies into one dataset")
    _add_common(impute, em=True, z=True)
    impute.set_defaults(handler=_cmd_impute)

    train = subs.add_parser("train", help="fit one method, persist the model")
    train.add_argument("input")
    train.add_argument("--method", required=True, help="one of the twelve methods")
    train.add_argument("--model-out", dest="model_out", required=True)
    train.add_argument("--b", help="ensemble size B (default 25)")
    train.add_argument("--m", help="imputation count M (default 5)")
    train.add_argument("--dump-tree", dest="dump_tree",
                       help="write a text rendering of the member trees")
    _add_common(train, em=True, tree=True, z=True)
    train.set_defaults(handler=_cmd_train)

    predict = subs.add_parser("predict", help="classify records with a model")
    predict.add_argument("--model", required=True)
    predict.add_argument("--input", required=True)
    predict.add_argument("--output", default="-", help="CSV output (default stdout)")
    _add_common(predict, seed=False)
    predict.set_defaults(handler=_cmd_predict)

    kap = subs.add_parser("kappa", help="kappa-error points of an ensemble")
    kap.add_argument("--model", required=True)
    kap.add_argument("--input", required=True)
    kap.add_argument("--output", default="-", help="CSV output (default stdout)")
    _add_common(kap, seed=False)
    kap.set_defaults(handler=_cmd_kappa)

    report = subs.add_parser("report", help="summarize a results directory")
    report.add_argument("results", help="directory written by 'run'")
    report.set_defaults(handler=_cmd_report)

    return parser
