import json
from dataclasses import replace

import numpy as np
import pytest

from tabdisent.data import load_csv
from tabdisent.checkpoint import load_checkpoint
from tabdisent.errors import ConfigError, ParseError, TrainingDivergedError
from tabdisent.experiment import (
    ExperimentConfig,
    config_hash,
    config_to_ini,
    export_attention_maps,
    load_experiment_config,
    run_experiment,
    validate_config,
)
from tabdisent.model import ModelConfig, init_params


# ----------------------------------------------------------- config parsing


def test_load_config_minimal(tmp_path):
    p = tmp_path / "e.ini"
    p.write_text("[experiment]\ndataset = thyroid\n")
    cfg = load_experiment_config(p)
    assert cfg.dataset == "thyroid"
    assert cfg.trials == 3
    assert cfg.epochs is None  # filled later from the registry


def test_load_config_full_types(tmp_path):
    p = tmp_path / "e.ini"
    p.write_text(
        "[experiment]\ndataset = wine\ntrials = 2\ntrial_seeds = 5, 9\n"
        "contamination_ratio = 0.02\nsave_checkpoints = yes\nlearning_rate = 2e-4\n"
    )
    cfg = load_experiment_config(p)
    assert cfg.trial_seeds == (5, 9)
    assert cfg.contamination_ratio == 0.02
    assert cfg.save_checkpoints is True
    assert cfg.learning_rate == 2e-4


def test_load_config_errors(tmp_path):
    with pytest.raises(ParseError, match="no such file"):
        load_experiment_config(tmp_path / "missing.ini")
    p = tmp_path / "a.ini"
    p.write_text("dataset = thyroid\n")
    with pytest.raises(ParseError):
        load_experiment_config(p)
    p.write_text("[other]\nx = 1\n")
    with pytest.raises(ParseError, match="missing \\[experiment\\]"):
        load_experiment_config(p)
    p.write_text("[experiment]\ndataset = x\nturbo = on\n")
    with pytest.raises(ConfigError, match="experiment.turbo: unknown"):
        load_experiment_config(p)
    p.write_text("[experiment]\ndataset = x\ntrials = soon\n")
    with pytest.raises(ConfigError, match="experiment.trials: cannot parse"):
        load_experiment_config(p)
    p.write_text("[experiment]\ntrials = 1\n")
    with pytest.raises(ConfigError, match="experiment.dataset: required"):
        load_experiment_config(p)


# --------------------------------------------------------------- validation


def test_validate_fills_registry_defaults():
    resolved = validate_config(ExperimentConfig(dataset="thyroid"))
    assert resolved.normalization == "none"  # raw features are the default
    assert resolved.epochs == 100
    assert resolved.latent_channels == 128
    assert resolved.batch_size == 512
    assert resolved.learning_rate == 1e-4
    assert resolved.preprocessing == "none"
    assert resolved.trial_seeds == (0, 1, 2)
    assert resolved.output_dir == "runs/thyroid"

    satellite = validate_config(ExperimentConfig(dataset="satellite"))
    assert satellite.epochs == 200
    assert satellite.latent_channels == 512
    assert satellite.preprocessing == "patch_3xM2"


def test_validate_override_beats_registry():
    resolved = validate_config(ExperimentConfig(dataset="thyroid", epochs=7, base_seed=10))
    assert resolved.epochs == 7
    assert resolved.batch_size == 512
    assert resolved.trial_seeds == (10, 11, 12)


def test_validate_path_dataset_defaults(tmp_path):
    resolved = validate_config(ExperimentConfig(dataset=str(tmp_path / "mine.csv")))
    assert resolved.epochs == 100
    assert resolved.batch_size == 64
    assert resolved.latent_channels == 128
    assert resolved.preprocessing == "none"
    assert resolved.output_dir == "runs/mine"


def test_validate_rejects_contradictions():
    with pytest.raises(ConfigError) as err:
        validate_config(
            ExperimentConfig(dataset="thyroid", num_heads=3, ablation="complement_mask")
        )
    assert any("num_heads" in p for p in err.value.problems)

    with pytest.raises(ConfigError, match="experiment.learning_rate"):
        validate_config(ExperimentConfig(dataset="thyroid", learning_rate=-1e-4))


def test_validate_collects_every_problem():
    with pytest.raises(ConfigError) as err:
        validate_config(
            ExperimentConfig(
                dataset="thyroid",
                trials=0,
                normalization="sigmoid",
                contamination_ratio=0.5,
                learning_rate=0.0,
            )
        )
    joined = "\n".join(err.value.problems)
    for path in (
        "experiment.trials",
        "experiment.normalization",
        "experiment.contamination_ratio",
        "experiment.learning_rate",
    ):
        assert path in joined


def test_validate_seed_list_length():
    with pytest.raises(ConfigError, match="2 seeds for 3 trials"):
        validate_config(ExperimentConfig(dataset="thyroid", trial_seeds=(1, 2)))
    ok = validate_config(ExperimentConfig(dataset="thyroid", trials=2, trial_seeds=(4, 6)))
    assert ok.trial_seeds == (4, 6)


def test_validate_bad_preprocessing():
    with pytest.raises(ConfigError, match="experiment.preprocessing"):
        validate_config(ExperimentConfig(dataset="thyroid", preprocessing="patch_all"))


# ------------------------------------------------------- hash and roundtrip


def test_config_hash_identity():
    a = validate_config(ExperimentConfig(dataset="thyroid", output_dir="x"))
    b = validate_config(ExperimentConfig(dataset="thyroid", output_dir="y"))
    assert config_hash(a) == config_hash(b)
    # Explicit seeds spelling the derived ones give the same identity.
    c = validate_config(ExperimentConfig(dataset="thyroid", base_seed=0, trial_seeds=(0, 1, 2)))
    assert config_hash(c) == config_hash(a)
    d = validate_config(ExperimentConfig(dataset="thyroid", epochs=99))
    assert config_hash(d) != config_hash(a)


def test_config_ini_roundtrip(tmp_path):
    resolved = validate_config(ExperimentConfig(dataset="wine", trials=2, base_seed=3))
    p = tmp_path / "snap.ini"
    p.write_text(config_to_ini(resolved))
    again = validate_config(load_experiment_config(p))
    assert again == resolved


# ------------------------------------------------------------------ running


def _run(fast_ini, **overrides):
    config = replace(load_experiment_config(fast_ini), **overrides)
    return config, run_experiment(config)


def test_run_writes_exact_artifact_set(fast_ini, tmp_path):
    _, doc = _run(fast_ini)
    out = tmp_path / "run"
    expected = {
        "config.ini",
        "metrics.json",
        "manifest.json",
        "trial0_scores.csv",
        "trial0_loss_trace.csv",
        "trial0_attention_head1.csv",
        "trial0_attention_head2.csv",
        "trial1_scores.csv",
        "trial1_loss_trace.csv",
        "trial1_attention_head1.csv",
        "trial1_attention_head2.csv",
    }
    assert {p.name for p in out.iterdir()} == expected
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["complete"] is True
    assert set(manifest["files"]) == expected


def test_run_metrics_document_schema(fast_ini, tmp_path):
    _, doc = _run(fast_ini)
    on_disk = json.loads((tmp_path / "run" / "metrics.json").read_text())
    assert on_disk == doc
    assert set(doc) == {
        "dataset",
        "config_hash",
        "per_trial",
        "auc_pr_mean",
        "auc_pr_std",
        "auc_roc_mean",
        "auc_roc_std",
    }
    assert [t["seed"] for t in doc["per_trial"]] == [0, 1]
    for t in doc["per_trial"]:
        assert 0.0 <= t["auc_pr"] <= 1.0
        assert 0.0 <= t["auc_roc"] <= 1.0


def test_run_single_trial_has_zero_std(fast_ini):
    _, doc = _run(fast_ini, trials=1)
    assert doc["auc_pr_std"] == 0.0
    assert doc["auc_roc_std"] == 0.0
    assert len(doc["per_trial"]) == 1


def test_run_metrics_bitwise_deterministic(fast_ini, tmp_path):
    config = load_experiment_config(fast_ini)
    run_experiment(replace(config, output_dir=str(tmp_path / "a")))
    run_experiment(replace(config, output_dir=str(tmp_path / "b")))
    a = (tmp_path / "a" / "metrics.json").read_bytes()
    b = (tmp_path / "b" / "metrics.json").read_bytes()
    assert a == b


def test_run_score_rows_match_test_split(fast_ini, tmp_path, synthetic_csv):
    _run(fast_ini, trials=1)
    lines = (tmp_path / "run" / "trial0_scores.csv").read_text().splitlines()
    assert lines[0] == "score,label"
    ds = load_csv(synthetic_csv)
    n_normal = int((ds.labels == 0).sum())
    expected_rows = (n_normal - n_normal // 2) + int(ds.labels.sum())
    assert len(lines) - 1 == expected_rows
    labels = [int(line.split(",")[1]) for line in lines[1:]]
    assert sum(labels) == int(ds.labels.sum())


def test_run_loss_trace_rows(fast_ini, tmp_path):
    _run(fast_ini, trials=1)
    lines = (tmp_path / "run" / "trial0_loss_trace.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss_d,loss_r,loss_overall"
    assert len(lines) - 1 == 4  # epochs in the fast config
    for line in lines[1:]:
        _, d, r, o = line.split(",")
        assert float(o) == pytest.approx(float(d) + float(r), abs=1e-12)


def test_run_attention_files_are_square(fast_ini, tmp_path):
    _run(fast_ini, trials=1)
    rows = (tmp_path / "run" / "trial0_attention_head1.csv").read_text().splitlines()
    assert len(rows) == 6
    values = np.array([[float(v) for v in row.split(",")] for row in rows])
    assert values.shape == (6, 6)
    np.testing.assert_allclose(values.sum(axis=1), 1.0, atol=1e-8)


def test_run_patch_preprocessing_changes_geometry(fast_ini, tmp_path):
    _run(fast_ini, trials=1, preprocessing="patch_3xM2")
    rows = (tmp_path / "run" / "trial0_attention_head1.csv").read_text().splitlines()
    # 6 attributes -> 3 windows of width 3: maps are 3x3 now.
    assert len(rows) == 3
    assert len(rows[0].split(",")) == 3


def test_run_contaminated_completes(fast_ini):
    _, doc = _run(fast_ini, trials=1, contamination_ratio=0.05)
    assert 0.0 <= doc["auc_roc_mean"] <= 1.0


def test_run_refuses_dir_with_strangers(fast_ini, tmp_path):
    out = tmp_path / "run"
    out.mkdir()
    (out / "precious.txt").write_text("keep me")
    with pytest.raises(ConfigError, match="precious.txt"):
        _run(fast_ini)
    assert (out / "precious.txt").read_text() == "keep me"


def test_run_failure_leaves_incomplete_manifest(tmp_path):
    # Astronomic values make the very first training step non-finite.
    p = tmp_path / "huge.csv"
    rows = ["a,b,label"] + ["1e200,1e200,0"] * 8 + ["1e200,1e200,1"] * 2
    p.write_text("\n".join(rows) + "\n")
    config = ExperimentConfig(
        dataset=str(p),
        output_dir=str(tmp_path / "crash"),
        trials=1,
        epochs=2,
        batch_size=4,
        normalization="none",
        learning_rate=1e-3,
        latent_channels=4,
    )
    with pytest.raises(TrainingDivergedError):
        run_experiment(config)
    manifest = json.loads((tmp_path / "crash" / "manifest.json").read_text())
    assert manifest["complete"] is False
    assert manifest["files"] == ["config.ini"]


def test_run_with_checkpoints(fast_ini, tmp_path):
    _run(fast_ini, trials=1, save_checkpoints=True)
    out = tmp_path / "run"
    manifest = json.loads((out / "manifest.json").read_text())
    assert "trial0_model.npz" in manifest["files"]
    bundle = load_checkpoint(out / "trial0_model.npz")
    assert bundle.params.config.epochs == 4
    assert bundle.normalization.method == "zscore"
    assert bundle.normalization.loc.shape == (6,)
    assert bundle.patch_mode == "none"


# ------------------------------------------------------------- map export


def test_export_attention_three_heads(tmp_path):
    cfg = ModelConfig(num_attributes=4, latent_channels=6, num_heads=3, seed=0)
    params = init_params(cfg)
    x = np.random.default_rng(0).standard_normal((10, 4))
    paths = export_attention_maps(params, x, tmp_path / "maps.csv")
    assert [p.name for p in paths] == [
        "maps_head1.csv",
        "maps_head2.csv",
        "maps_head3.csv",
    ]
    for p in paths:
        grid = np.array(
            [[float(v) for v in line.split(",")] for line in p.read_text().splitlines()]
        )
        assert grid.shape == (4, 4)


def test_export_attention_uniform_for_zero_projections(tmp_path):
    cfg = ModelConfig(num_attributes=5, latent_channels=4, seed=0)
    params = init_params(cfg)
    for t in params.tensors.values():
        t.data[...] = 0.0
    x = np.random.default_rng(1).standard_normal((7, 5))
    paths = export_attention_maps(params, x, tmp_path / "u.csv")
    for p in paths:
        grid = np.array(
            [[float(v) for v in line.split(",")] for line in p.read_text().splitlines()]
        )
        np.testing.assert_allclose(grid, 0.2, atol=1e-15)
