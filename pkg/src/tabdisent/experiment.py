"""Config-driven experiment runner: data -> model -> metrics on disk.

An experiment is one flat INI file layered over the per-dataset
defaults registry. Each trial reuses its seed for every seeded stage
(split, init, shuffle, contamination), so a run is reproducible from
the config snapshot alone.
"""

import configparser
import csv
import hashlib
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .data import (
    NORMALIZATIONS,
    PATCH_MODES,
    contaminate,
    load_registry,
    normalize,
    patch_split,
    resolve_dataset,
    split_train_test,
)
from .errors import ConfigError, ParseError
from .metrics import aggregate_trials, make_report
from .model import ModelConfig, anomaly_scores, fit, mean_attention_maps
from .checkpoint import save_checkpoint

_PATH_DEFAULTS = dict(learning_rate=1e-4, epochs=100, batch_size=64, latent_channels=128)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment; None fields mean "take the dataset's default"."""

    dataset: str
    output_dir: str = None
    trials: int = 3
    base_seed: int = 0
    trial_seeds: tuple = None
    normalization: str = "none"
    preprocessing: str = None
    contamination_ratio: float = 0.0
    latent_channels: int = None
    num_heads: int = 2
    epochs: int = None
    batch_size: int = None
    learning_rate: float = None
    leaky_slope: float = 0.01
    ablation: str = "full"
    precision: str = "float64"
    save_checkpoints: bool = False


def _parse_bool(raw):
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(raw)


def _parse_seed_list(raw):
    return tuple(int(part.strip()) for part in raw.split(",") if part.strip())


_FIELD_PARSERS = {
    "dataset": str,
    "output_dir": str,
    "trials": int,
    "base_seed": int,
    "trial_seeds": _parse_seed_list,
    "normalization": str,
    "preprocessing": str,
    "contamination_ratio": float,
    "latent_channels": int,
    "num_heads": int,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "leaky_slope": float,
    "ablation": str,
    "precision": str,
    "save_checkpoints": _parse_bool,
}


def load_experiment_config(path):
    """Parse one [experiment] INI section into an ExperimentConfig."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"{path}: no such file")
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ParseError(f"{path}: {exc}") from None
    if "experiment" not in parser:
        raise ParseError(f"{path}: missing [experiment] section")
    kwargs = {}
    for key, raw in parser["experiment"].items():
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"experiment.{key}: unknown setting")
        try:
            kwargs[key] = _FIELD_PARSERS[key](raw)
        except ValueError:
            raise ConfigError(f"experiment.{key}: cannot parse {raw!r}") from None
    if "dataset" not in kwargs:
        raise ConfigError("experiment.dataset: required")
    return ExperimentConfig(**kwargs)


def validate_config(config):
    """Layer dataset defaults under the overrides and check everything.

    Returns the fully concrete config; raises one ConfigError whose
    .problems lists every violation with its field path.
    """
    problems = []
    entry = load_registry().get(config.dataset)

    def pick(name, registry_value):
        given = getattr(config, name)
        return registry_value if given is None else given

    if entry is not None:
        resolved = replace(
            config,
            learning_rate=pick("learning_rate", entry.learning_rate),
            epochs=pick("epochs", entry.epochs),
            batch_size=pick("batch_size", entry.batch_size),
            latent_channels=pick("latent_channels", entry.latent_channels),
            preprocessing=pick("preprocessing", entry.preprocessing),
        )
    else:
        resolved = replace(
            config,
            **{name: pick(name, value) for name, value in _PATH_DEFAULTS.items()},
            preprocessing=pick("preprocessing", "none"),
        )

    if resolved.trials < 1:
        problems.append("experiment.trials: must be at least 1")
    if resolved.base_seed < 0:
        problems.append("experiment.base_seed: must be nonnegative")
    seeds = resolved.trial_seeds
    if seeds is None and resolved.trials >= 1:
        seeds = tuple(resolved.base_seed + t for t in range(resolved.trials))
    if seeds is not None:
        if len(seeds) != resolved.trials:
            problems.append(
                f"experiment.trial_seeds: {len(seeds)} seeds for {resolved.trials} trials"
            )
        if any(s < 0 for s in seeds):
            problems.append("experiment.trial_seeds: seeds must be nonnegative")
    if resolved.normalization not in NORMALIZATIONS:
        problems.append(
            f"experiment.normalization: {resolved.normalization!r} is not one of {NORMALIZATIONS}"
        )
    if resolved.preprocessing not in PATCH_MODES:
        problems.append(
            f"experiment.preprocessing: {resolved.preprocessing!r} is not one of {PATCH_MODES}"
        )
    if not 0.0 <= resolved.contamination_ratio <= 0.05:
        problems.append("experiment.contamination_ratio: must lie in [0, 0.05]")

    # The model-side fields share ModelConfig's rules; probe with a
    # placeholder geometry so only the user-settable knobs can fail.
    try:
        ModelConfig(
            num_attributes=2,
            latent_channels=resolved.latent_channels,
            num_heads=resolved.num_heads,
            leaky_slope=resolved.leaky_slope,
            epochs=resolved.epochs,
            batch_size=resolved.batch_size,
            learning_rate=resolved.learning_rate,
            seed=0,
            ablation=resolved.ablation,
            precision=resolved.precision,
        ).validate()
    except ConfigError as exc:
        problems.extend(f"experiment.{p}" for p in str(exc).split("; "))

    if problems:
        err = ConfigError("; ".join(problems))
        err.problems = problems
        raise err
    out_dir = resolved.output_dir or f"runs/{Path(resolved.dataset).stem}"
    return replace(resolved, trial_seeds=seeds, output_dir=out_dir)


def config_hash(resolved):
    """Location-independent identity of a resolved experiment."""
    payload = {
        f.name: getattr(resolved, f.name)
        for f in fields(resolved)
        if f.name not in ("output_dir", "base_seed", "save_checkpoints")
    }
    payload["trial_seeds"] = list(payload["trial_seeds"])
    canonical = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def config_to_ini(config):
    """Render a config back to the INI text load_experiment_config reads."""
    lines = ["[experiment]"]
    for f in fields(config):
        value = getattr(config, f.name)
        if value is None:
            continue
        if f.name == "trial_seeds":
            value = ", ".join(str(s) for s in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def export_attention_maps(params, train_matrix, path):
    """Write each mean attention map as <stem>_head{i}.csv, row-major.

    One file per reconstruction path; the complement-mask variant's
    second file holds the derived 1 - w map.
    """
    path = Path(path)
    maps = mean_attention_maps(params, train_matrix)
    written = []
    for i, m in enumerate(maps, start=1):
        target = path.with_name(f"{path.stem}_head{i}{path.suffix or '.csv'}")
        with open(target, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            for row in m:
                writer.writerow([repr(float(v)) for v in row])
        written.append(target)
    return written


def _write_scores_csv(path, report):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["score", "label"])
        for s, y in zip(report.scores, report.labels):
            writer.writerow([repr(float(s)), int(y)])


def _write_loss_trace_csv(path, trace):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss_d", "loss_r", "loss_overall"])
        for epoch, (d, r, o) in enumerate(zip(trace.loss_d, trace.loss_r, trace.loss_overall)):
            writer.writerow([epoch, repr(float(d)), repr(float(r)), repr(float(o))])


def _json_bytes(document):
    return (json.dumps(document, sort_keys=True, indent=2) + "\n").encode()


def _prepare_trial_split(ds, resolved, seed):
    split = split_train_test(ds, seed)
    split = normalize(split, resolved.normalization)
    if resolved.preprocessing != "none":
        split = replace(
            split,
            train=patch_split(split.train, resolved.preprocessing),
            test=patch_split(split.test, resolved.preprocessing),
        )
    return contaminate(split, resolved.contamination_ratio, seed=[seed, 2])


def _trial_model_config(resolved, split, seed):
    channels_in = split.train.shape[2] if split.train.ndim == 3 else 1
    return ModelConfig(
        num_attributes=split.train.shape[1],
        latent_channels=resolved.latent_channels,
        channels_in=channels_in,
        num_heads=resolved.num_heads,
        leaky_slope=resolved.leaky_slope,
        epochs=resolved.epochs,
        batch_size=resolved.batch_size,
        learning_rate=resolved.learning_rate,
        seed=seed,
        ablation=resolved.ablation,
        precision=resolved.precision,
    )


def run_experiment(config, data_dir=None):
    """Run every trial and write the results bundle to output_dir.

    Files: config.ini snapshot, per-trial scores/loss-trace/attention
    CSVs, metrics.json, manifest.json (plus per-trial checkpoints when
    save_checkpoints is on). The manifest is written last and flags
    whether the run completed; an aborted run leaves complete=false
    behind and re-raises. Returns the metrics document.
    """
    resolved = validate_config(config)
    ds = resolve_dataset(resolved.dataset, data_dir=data_dir)
    out = Path(resolved.output_dir)

    n_maps = 2 if resolved.ablation == "complement_mask" else resolved.num_heads
    planned = {"config.ini", "metrics.json", "manifest.json"}
    for t in range(resolved.trials):
        planned.add(f"trial{t}_scores.csv")
        planned.add(f"trial{t}_loss_trace.csv")
        planned.update(f"trial{t}_attention_head{i}.csv" for i in range(1, n_maps + 1))
        if resolved.save_checkpoints:
            planned.add(f"trial{t}_model.npz")
    if out.exists():
        stray = {p.name for p in out.iterdir()} - planned
        if stray:
            raise ConfigError(
                f"experiment.output_dir: {out} already holds unrelated files {sorted(stray)}"
            )
    out.mkdir(parents=True, exist_ok=True)

    written = []

    def emit(name, data):
        (out / name).write_bytes(data if isinstance(data, bytes) else data.encode())
        written.append(name)

    emit("config.ini", config_to_ini(resolved))
    reports = []
    try:
        for t, seed in enumerate(resolved.trial_seeds):
            split = _prepare_trial_split(ds, resolved, seed)
            model_cfg = _trial_model_config(resolved, split, seed)
            params, trace = fit(model_cfg, split.train)
            scores = anomaly_scores(params, split.test)
            report = make_report(scores, split.test_labels, trial_seed=seed)
            reports.append(report)
            _write_scores_csv(out / f"trial{t}_scores.csv", report)
            written.append(f"trial{t}_scores.csv")
            _write_loss_trace_csv(out / f"trial{t}_loss_trace.csv", trace)
            written.append(f"trial{t}_loss_trace.csv")
            for p in export_attention_maps(params, split.train, out / f"trial{t}_attention.csv"):
                written.append(p.name)
            if resolved.save_checkpoints:
                save_checkpoint(
                    out / f"trial{t}_model.npz",
                    params,
                    normalization=split.normalization_stats,
                    patch_mode=resolved.preprocessing,
                )
                written.append(f"trial{t}_model.npz")
    except Exception:
        manifest = {"complete": False, "files": written}
        (out / "manifest.json").write_bytes(_json_bytes(manifest))
        raise

    document = {
        "dataset": resolved.dataset,
        "config_hash": config_hash(resolved),
        "per_trial": [
            {"seed": r.trial_seed, "auc_pr": r.auc_pr, "auc_roc": r.auc_roc}
            for r in reports
        ],
    }
    document.update(aggregate_trials(reports))
    emit("metrics.json", _json_bytes(document))
    manifest = {"complete": True, "files": written + ["manifest.json"]}
    (out / "manifest.json").write_bytes(_json_bytes(manifest))
    return document
