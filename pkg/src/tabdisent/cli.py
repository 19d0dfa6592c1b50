"""Command-line front end.

    run <config>                 train + evaluate an experiment INI
    score <checkpoint> <csv>     anomaly scores for new rows
    validate <config>            resolve defaults, report problems
    export-attn <ckpt> <csv> <out>  mean attention maps as CSV

Dataset files are looked up under TABDISENT_DATA_DIR (default:
./datasets). Exit code 0 means everything requested was written.
"""

import argparse
import sys
from dataclasses import replace

from .checkpoint import load_checkpoint
from .data import DATA_DIR_ENV, load_features, patch_split
from .errors import ConfigError
from .experiment import (
    config_to_ini,
    export_attention_maps,
    load_experiment_config,
    run_experiment,
    validate_config,
)
from .metrics import auc_pr, auc_roc
from .model import anomaly_scores


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="tabdisent",
        description="One-class tabular anomaly detection via attention-disentangled reconstruction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train and evaluate one experiment config")
    run.add_argument("config", help="experiment INI file")
    run.add_argument("--output-dir", help="override experiment.output_dir")
    run.add_argument(
        "--seed", type=int, help="override base_seed (drops any explicit trial_seeds)"
    )
    run.add_argument("--trials", type=int, help="override the number of trials")
    run.add_argument("--data-dir", help=f"dataset root (default: ${DATA_DIR_ENV} or ./datasets)")

    score = sub.add_parser("score", help="score CSV rows with a trained checkpoint")
    score.add_argument("checkpoint", help="npz checkpoint written by a run")
    score.add_argument("csv", help="rows to score; a label column enables metrics on stderr")
    score.add_argument("--output", help="write scores here instead of stdout")

    validate = sub.add_parser("validate", help="check a config and print its resolved form")
    validate.add_argument("config", help="experiment INI file")

    export = sub.add_parser("export-attn", help="write per-head mean attention maps")
    export.add_argument("checkpoint", help="npz checkpoint written by a run")
    export.add_argument("csv", help="rows to average the maps over")
    export.add_argument("out", help="base output path; files get a _head{i} suffix")
    return parser


def _load_with_overrides(args):
    config = load_experiment_config(args.config)
    if args.seed is not None:
        config = replace(config, base_seed=args.seed, trial_seeds=None)
    if args.trials is not None:
        config = replace(config, trials=args.trials)
    if args.output_dir is not None:
        config = replace(config, output_dir=args.output_dir)
    return config


def _prepared_features(bundle, csv_path):
    """Apply the checkpoint's stored preprocessing to raw CSV rows."""
    features, labels = load_features(csv_path)
    if bundle.normalization is not None:
        features = bundle.normalization.apply(features)
    if bundle.patch_mode != "none":
        features = patch_split(features, bundle.patch_mode)
    return features, labels


def _cmd_run(args):
    document = run_experiment(_load_with_overrides(args), data_dir=args.data_dir)
    print(
        f"auc_pr {document['auc_pr_mean']:.4f} +- {document['auc_pr_std']:.4f}  "
        f"auc_roc {document['auc_roc_mean']:.4f} +- {document['auc_roc_std']:.4f}  "
        f"({len(document['per_trial'])} trials)"
    )
    return 0


def _cmd_score(args):
    bundle = load_checkpoint(args.checkpoint)
    features, labels = _prepared_features(bundle, args.csv)
    scores = anomaly_scores(bundle.params, features)
    lines = "score\n" + "".join(f"{s!r}\n" for s in map(float, scores))
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(lines)
    else:
        sys.stdout.write(lines)
    if labels is not None and 0 < labels.sum() < labels.size:
        print(
            f"auc_pr {auc_pr(scores, labels):.4f}  auc_roc {auc_roc(scores, labels):.4f}",
            file=sys.stderr,
        )
    return 0


def _cmd_validate(args):
    try:
        resolved = validate_config(load_experiment_config(args.config))
    except ConfigError as exc:
        for problem in getattr(exc, "problems", [str(exc)]):
            print(problem, file=sys.stderr)
        return 1
    sys.stdout.write(config_to_ini(resolved))
    return 0


def _cmd_export_attn(args):
    bundle = load_checkpoint(args.checkpoint)
    features, _ = _prepared_features(bundle, args.csv)
    for path in export_attention_maps(bundle.params, features, args.out):
        print(path)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "score": _cmd_score,
    "validate": _cmd_validate,
    "export-attn": _cmd_export_attn,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
