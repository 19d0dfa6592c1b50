#!/usr/bin/env python3
"""Build datasets/wine.csv, the one-class variant of the UCI wine data.

The anomaly-detection benchmark form of this dataset keeps the two
majority cultivars (UCI classes 2 and 3, 71 + 48 = 119 rows) as normal
samples and downsamples the first cultivar (59 rows) to 10 anomalies:
129 rows, 13 attributes, 10 anomalies. The published variant does not
document which 10 rows were kept, so this script draws them with a
fixed seed; the detection task is unchanged (any class-1 subset breaks
the majority-class correlation structure the same way).

Needs scikit-learn for the raw UCI table (python3 -m pip install
scikit-learn), writes the CSV, then re-validates it against the
bundled registry stats.
"""

import argparse
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "src"))

from tabdisent.data import TabularDataset, resolve_dataset, write_csv  # noqa: E402

ANOMALY_COUNT = 10
SEED = 0


def build(seed=SEED):
    try:
        from sklearn.datasets import load_wine
    except ImportError:
        sys.exit("scikit-learn is required: python3 -m pip install scikit-learn")
    import numpy as np

    raw = load_wine()
    # sklearn target 0 is UCI class 1, the downsampled anomaly class.
    normal_rows = np.flatnonzero(raw.target != 0)
    candidate_rows = np.flatnonzero(raw.target == 0)
    rng = np.random.default_rng(seed)
    anomaly_rows = np.sort(rng.choice(candidate_rows, size=ANOMALY_COUNT, replace=False))
    features = np.concatenate([raw.data[normal_rows], raw.data[anomaly_rows]])
    labels = np.r_[
        np.zeros(normal_rows.size, dtype=np.int64),
        np.ones(anomaly_rows.size, dtype=np.int64),
    ]
    return TabularDataset(name="wine", features=features, labels=labels)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--output",
        type=Path,
        default=REPO_ROOT / "datasets" / "wine.csv",
        help="where to write the CSV (default: datasets/wine.csv)",
    )
    parser.add_argument("--seed", type=int, default=SEED, help="anomaly subsample seed")
    args = parser.parse_args()

    ds = build(args.seed)
    write_csv(ds, args.output)
    checked = resolve_dataset("wine", data_dir=args.output.parent)
    print(
        f"wrote {args.output}: N={checked.features.shape[0]} "
        f"D={checked.features.shape[1]} anomalies={int(checked.labels.sum())}"
    )


if __name__ == "__main__":
    main()
