"""Regenerate the CSV tables bundled under src/baggimp/data/.

``wine.csv`` is the classic 178-record wine chemistry table re-exported
from scikit-learn's bundled copy.  The other seven tables are synthetic
stand-ins that keep the published record/attribute/class shapes of their
namesakes: each is drawn from class-conditional Gaussians with a shared
latent factor (so attributes are realistically correlated) and a
per-dataset separation tuned to land single-tree accuracy near the
accuracy its namesake shows in the literature.  Everything is seeded, so
the output is reproducible byte for byte.

Run from the repository root:  python3 tools/make_datasets.py
"""

from __future__ import annotations

import zlib
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "src" / "baggimp" / "data"

# name -> (class sizes, n attributes, separation, factor strength, noise sd,
#          class label names)
SPECS = {
    "breast_tissue": ([21, 15, 18, 16, 14, 22], 10, 3.9, 0.9, 1.0,
                      ["car", "fad", "mas", "gla", "con", "adi"]),
    "new_thyroid": ([150, 35, 30], 5, 4.5, 0.6, 1.0,
                    ["normal", "hyper", "hypo"]),
    "parkinsons": ([49, 148], 23, 3.65, 1.1, 1.0, ["healthy", "parkinsons"]),
    "pima": ([500, 268], 8, 1.55, 0.7, 1.0, ["neg", "pos"]),
    "column": ([60, 150, 100], 6, 2.9, 0.8, 1.0, ["DH", "SL", "NO"]),
    "glass": ([69, 76, 17, 13, 9, 26, 4], 10, 2.6, 0.8, 1.0,
              ["1", "2", "3", "4", "5", "6", "7"]),
    "seeds": ([70, 70, 70], 7, 4.0, 1.0, 1.0, ["1", "2", "3"]),
}

SEED_NAMES = ["area", "perimeter", "compactness", "kernel_length",
              "kernel_width", "asymmetry", "groove_length"]


def synth(name: str, sizes, f: int, sep: float, load: float, noise: float,
          class_names, seed: int) -> tuple[list[str], list[list[str]]]:
    rng = np.random.default_rng(seed)
    c = len(sizes)
    # Class centers: random directions scaled to the requested separation.
    centers = rng.normal(size=(c, f))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    centers *= sep
    loadings = rng.normal(size=f) * load  # shared latent factor
    scale = rng.uniform(0.5, 20.0, size=f)  # plausible physical units
    offset = rng.uniform(1.0, 100.0, size=f)

    rows = []
    for ci, size in enumerate(sizes):
        g = rng.normal(size=(size, 1))
        eps = rng.normal(size=(size, f)) * noise
        x = centers[ci] + g * loadings + eps
        x = x * scale + offset
        for record in x:
            rows.append([f"{v:.4f}" for v in record] + [class_names[ci]])

    if name == "seeds":
        header = SEED_NAMES + ["class"]
    else:
        header = [f"a{i + 1}" for i in range(f)] + ["class"]
    # Record order within a class is arbitrary; interleave classes so folds
    # look natural even without shuffling.
    order = rng.permutation(len(rows))
    return header, [rows[i] for i in order]


def wine() -> tuple[list[str], list[list[str]]]:
    from sklearn.datasets import load_wine

    bunch = load_wine()
    header = [n.replace("/", "_") for n in bunch.feature_names] + ["class"]
    rows = []
    for record, target in zip(bunch.data, bunch.target):
        rows.append([repr(float(v)) for v in record] + [str(target + 1)])
    return header, rows


def write(name: str, header, rows) -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    path = OUT / f"{name}.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    print(f"{path}: {len(rows)} records x {len(header) - 1} attributes")


def main() -> None:
    for name, (sizes, f, sep, load, noise, labels) in SPECS.items():
        header, rows = synth(name, sizes, f, sep, load, noise, labels,
                             seed=zlib.crc32(name.encode("ascii")))
        write(name, header, rows)
    header, rows = wine()
    write("wine", header, rows)


if __name__ == "__main__":
    main()
