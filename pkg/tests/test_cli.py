"""End-to-end tests for the command-line front end at toy scale."""

import json

import pytest

from edsurrogate.cli import main
from edsurrogate.evaluation import read_log_csv, read_metrics_csv, read_scatter_csv
from edsurrogate.synth_data import DatasetConfig, load_dataset

TINY = {
    "seed": 3,
    "dataset": {"corpus_size": 60, "noise_std": 0.3},
    "train": {
        "pretrain_iterations": 30,
        "i_a": 4,
        "i_b": 4,
        "epochs": 2,
        "batch_size": 4,
    },
    "surrogate": {"embedding_dim": 16, "channels": [8, 8, 8, 8, 8], "hidden": 16},
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One tiny gen-data + train-baseline + tune run shared by the module."""
    root = tmp_path_factory.mktemp("cli")
    config = root / "config.json"
    config.write_text(json.dumps(TINY), encoding="utf-8")
    cfg = str(config)
    assert main(["gen-data", "--config", cfg, "--out", str(root / "data")]) == 0
    assert main(["train-baseline", "--config", cfg, "--out", str(root / "base")]) == 0
    assert (
        main(
            [
                "tune",
                "--config",
                cfg,
                "--out",
                str(root / "tune"),
                "--checkpoint",
                str(root / "base" / "baseline.bin"),
            ]
        )
        == 0
    )
    return root


def test_gen_data_round_trip(workspace):
    images, cfg = load_dataset(workspace / "data")
    assert len(images) == TINY["dataset"]["corpus_size"]
    assert cfg.noise_std == TINY["dataset"]["noise_std"]
    assert cfg.seed == TINY["seed"]


def test_gen_data_is_deterministic(workspace, tmp_path):
    config = str(workspace / "config.json")
    assert main(["gen-data", "--config", config, "--out", str(tmp_path / "again")]) == 0
    for name in ("labels.tsv", "dataset.json", "img_00000.pgm"):
        assert (tmp_path / "again" / name).read_bytes() == (
            workspace / "data" / name
        ).read_bytes()


def test_train_baseline_outputs(workspace):
    out = workspace / "base"
    assert (out / "baseline.bin").exists()
    assert (out / "summary.txt").read_text(encoding="utf-8").startswith("dataset: test")
    rows = read_metrics_csv(out / "metrics.csv")
    assert len(rows) == 6
    records = read_log_csv(out / "log.csv")
    assert {r.phase for r in records} == {"pretrain"}


def test_tune_outputs(workspace):
    out = workspace / "tune"
    for epoch in (1, 2):
        assert (out / f"recognizer_epoch{epoch}.bin").exists()
        assert (out / f"surrogate_epoch{epoch}.bin").exists()
    records = read_log_csv(out / "log.csv")
    assert {r.phase for r in records} == {"surrogate", "recognizer"}
    assert "relative improvement" in (out / "summary.txt").read_text(encoding="utf-8")


def test_tune_is_deterministic(workspace, tmp_path):
    config = str(workspace / "config.json")
    args = ["--config", config, "--checkpoint", str(workspace / "base" / "baseline.bin")]
    assert main(["tune", "--out", str(tmp_path / "again"), *args]) == 0
    for name in ("log.csv", "metrics.csv", "recognizer_epoch2.bin"):
        assert (tmp_path / "again" / name).read_bytes() == (
            workspace / "tune" / name
        ).read_bytes()


def test_epochs_flag_wins_over_config(workspace, tmp_path):
    config = str(workspace / "config.json")
    out = tmp_path / "one"
    args = ["--config", config, "--checkpoint", str(workspace / "base" / "baseline.bin")]
    assert main(["tune", "--out", str(out), "--epochs", "1", *args]) == 0
    assert max(r.epoch for r in read_log_csv(out / "log.csv")) == 1
    assert not (out / "recognizer_epoch2.bin").exists()


def test_lsed_mode_keeps_every_gate_open(workspace, tmp_path):
    config = str(workspace / "config.json")
    out = tmp_path / "lsed"
    args = ["--config", config, "--checkpoint", str(workspace / "base" / "baseline.bin")]
    assert main(["tune", "--out", str(out), "--mode", "lsed", *args]) == 0
    records = [r for r in read_log_csv(out / "log.csv") if r.phase == "recognizer"]
    assert records and all(r.gate_open for r in records)


def test_seed_flag_wins_over_config(workspace, tmp_path):
    config = str(workspace / "config.json")
    assert main(["gen-data", "--config", config, "--seed", "9", "--out", str(tmp_path / "d")]) == 0
    _, cfg = load_dataset(tmp_path / "d")
    assert cfg.seed == 9


def test_evaluate_checkpoint(workspace, tmp_path):
    config = str(workspace / "config.json")
    out = tmp_path / "eval"
    code = main(
        [
            "evaluate",
            "--config",
            config,
            "--out",
            str(out),
            "--checkpoint",
            str(workspace / "tune" / "recognizer_epoch2.bin"),
            "--split",
            "val",
        ]
    )
    assert code == 0
    assert (out / "summary.txt").read_text(encoding="utf-8").startswith("dataset: val")
    assert len(read_metrics_csv(out / "metrics.csv")) == 6


def test_evaluate_missing_checkpoint_fails(workspace, tmp_path, capsys):
    config = str(workspace / "config.json")
    code = main(
        [
            "evaluate",
            "--config",
            config,
            "--out",
            str(tmp_path / "eval"),
            "--checkpoint",
            str(tmp_path / "absent.bin"),
        ]
    )
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_scatter_from_log(workspace, tmp_path):
    config = str(workspace / "config.json")
    out = tmp_path / "scatter"
    code = main(
        [
            "scatter",
            "--config",
            config,
            "--out",
            str(out),
            "--log",
            str(workspace / "tune" / "log.csv"),
            "--lambda",
            "0.5",
        ]
    )
    assert code == 0
    lam, rows = read_scatter_csv(out / "scatter.csv")
    assert lam == 0.5
    assert rows


def test_scatter_empty_epoch_range_fails(workspace, tmp_path, capsys):
    config = str(workspace / "config.json")
    code = main(
        [
            "scatter",
            "--config",
            config,
            "--out",
            str(tmp_path / "s"),
            "--log",
            str(workspace / "tune" / "log.csv"),
            "--first-epoch",
            "7",
        ]
    )
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_non_object_config_fails(tmp_path, capsys):
    config = tmp_path / "bad.json"
    config.write_text("[1, 2]", encoding="utf-8")
    code = main(["gen-data", "--config", str(config), "--out", str(tmp_path / "d")])
    assert code == 2
    assert "JSON object" in capsys.readouterr().err


def test_unknown_mode_is_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["tune", "--mode", "unfiltered", "--out", str(tmp_path / "t")])
