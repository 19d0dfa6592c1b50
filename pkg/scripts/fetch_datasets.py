#!/usr/bin/env python3
"""Convert downloaded anomaly-detection benchmark files into datasets/.

This machine may not have network access, so the script does not
download anything itself. Fetch the raw files on any networked machine,
drop them into one directory, then run

    python3 scripts/fetch_datasets.py --from-dir ~/Downloads/odds

Every recognized file is converted to datasets/<name>.csv (x0..x{D-1}
feature columns plus a 0/1 'label' column) and validated against the
bundled registry (row count, attribute count, anomaly count must match
exactly). `--list` prints where each dataset comes from.

Accepted input formats, matched by file stem == dataset name:
  <name>.mat   ODDS MATLAB files with X (N x D) and y (N x 1) arrays
               (scipy.io for v5 files, h5py for v7.3 ones)
  <name>.npz   ADBench-style archives with X and y arrays
  <name>.csv   already-converted files; validated and copied
ADBench archives carry a numeric prefix (e.g. 38_thyroid.npz); the
prefix is ignored when matching names.
"""

import argparse
import shutil
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO_ROOT / "src"))

import numpy as np  # noqa: E402

from tabdisent.data import (  # noqa: E402
    TabularDataset,
    load_registry,
    resolve_dataset,
    write_csv,
)

# Where the raw files live. ODDS is https://odds.cs.stonybrook.edu/ ;
# ADBench mirrors most of the same tables as npz under
# https://github.com/Minqi824/ADBench (adbench/datasets/Classical/).
SOURCES = {
    "arrhythmia": "ODDS arrhythmia.mat or ADBench *_arrhythmia.npz",
    "breastw": "ODDS breastw.mat or ADBench *_breastw.npz",
    "cardio": "ODDS cardio.mat or ADBench *_cardio.npz",
    "census": "ADBench *_census.npz (UCI census-income KDD derivative)",
    "campaign": "ADBench *_campaign.npz (UCI bank-marketing derivative)",
    "cardiotocography": "ADBench *_cardiotocography.npz",
    "fraud": "ADBench *_fraud.npz (ULB credit-card fraud derivative)",
    "glass": "ODDS glass.mat or ADBench *_glass.npz",
    "ionosphere": "ODDS ionosphere.mat or ADBench *_Ionosphere.npz",
    "mammography": "ODDS mammography.mat or ADBench *_mammography.npz",
    "nslkdd": "NSL-KDD derivative; ADBench processed table",
    "optdigits": "ODDS optdigits.mat or ADBench *_optdigits.npz",
    "pima": "ODDS pima.mat or ADBench *_Pima.npz",
    "pendigits": "ODDS pendigits.mat or ADBench *_PenDigits.npz",
    "satellite": "ODDS satellite.mat or ADBench *_satellite.npz",
    "satimage2": "ODDS satimage-2.mat or ADBench *_satimage-2.npz",
    "shuttle": "ODDS shuttle.mat or ADBench *_shuttle.npz",
    "thyroid": "ODDS thyroid.mat or ADBench *_thyroid.npz",
    "wbc": "ODDS wbc.mat or ADBench *_WBC.npz",
    "wine": "built locally: python3 scripts/build_wine_csv.py",
}

# File-stem spellings that differ from the registry name.
ALIASES = {
    "satimage-2": "satimage2",
    "ionosphere": "ionosphere",
    "nsl-kdd": "nslkdd",
    "nslkdd": "nslkdd",
}


def _canonical_name(stem):
    stem = stem.lower()
    if "_" in stem and stem.split("_", 1)[0].isdigit():
        stem = stem.split("_", 1)[1]  # ADBench numeric prefix
    return ALIASES.get(stem, stem.replace("-", ""))


def _load_mat(path):
    try:
        from scipy.io import loadmat
    except ImportError:
        sys.exit("scipy is required for .mat files: python3 -m pip install scipy")
    try:
        blob = loadmat(path)
        return np.asarray(blob["X"], dtype=np.float64), np.asarray(blob["y"]).reshape(-1)
    except NotImplementedError:
        pass  # MATLAB v7.3: HDF5 container
    try:
        import h5py
    except ImportError:
        sys.exit(f"{path} is a v7.3 .mat file; h5py is required for it")
    with h5py.File(path, "r") as blob:
        x = np.asarray(blob["X"], dtype=np.float64).T  # HDF5 stores transposed
        y = np.asarray(blob["y"]).reshape(-1)
    return x, y


def _load_npz(path):
    with np.load(path, allow_pickle=False) as blob:
        return np.asarray(blob["X"], dtype=np.float64), np.asarray(blob["y"]).reshape(-1)


def convert(path, name, out_dir):
    if path.suffix == ".mat":
        x, y = _load_mat(path)
    elif path.suffix == ".npz":
        x, y = _load_npz(path)
    elif path.suffix == ".csv":
        shutil.copy(path, out_dir / f"{name}.csv")
        return
    else:
        raise ValueError(f"unsupported input format: {path}")
    ds = TabularDataset(name=name, features=x, labels=y.astype(np.int64))
    write_csv(ds, out_dir / f"{name}.csv")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--from-dir", type=Path, help="directory of downloaded raw files")
    parser.add_argument(
        "--out-dir", type=Path, default=REPO_ROOT / "datasets", help="target directory"
    )
    parser.add_argument("--list", action="store_true", help="print dataset provenance and exit")
    args = parser.parse_args()

    registry = load_registry()
    if args.list or not args.from_dir:
        width = max(len(n) for n in SOURCES)
        for name in sorted(registry):
            entry = registry[name]
            print(
                f"{name:<{width}}  N={entry.n:<6} D={entry.d:<3} "
                f"anomalies={entry.anomalies:<5} source: {SOURCES[name]}"
            )
        if not args.from_dir:
            print("\nrun again with --from-dir <dir> to convert downloaded files")
        return

    args.out_dir.mkdir(parents=True, exist_ok=True)
    converted, failed = [], []
    for path in sorted(args.from_dir.iterdir()):
        name = _canonical_name(path.stem)
        if name not in registry or path.suffix not in (".mat", ".npz", ".csv"):
            continue
        try:
            convert(path, name, args.out_dir)
            resolve_dataset(name, data_dir=args.out_dir)  # registry validation
            converted.append(name)
            print(f"ok       {name} <- {path.name}")
        except Exception as exc:  # keep going; report at the end
            failed.append(name)
            print(f"FAILED   {name} <- {path.name}: {exc}")
    missing = sorted(set(registry) - set(converted) - set(failed))
    print(f"\nconverted {len(converted)}, failed {len(failed)}, not found {len(missing)}")
    if missing:
        print("still missing:", ", ".join(missing))
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
