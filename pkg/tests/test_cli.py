"""End-to-end tests of the ``meshgnn`` command line."""

from __future__ import annotations

import io
import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from meshgnn.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, CliApp
from meshgnn.commands.predict import predict_meshes
from meshgnn.nn.checkpoint import load_checkpoint, save_checkpoint
from meshgnn.pipeline.evaluation import evaluate
from meshgnn.pipeline.manifest import load_manifest


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Synthetic dataset plus a two-epoch positional run, shared by this module."""
    root = tmp_path_factory.mktemp("cli")
    app = CliApp()
    assert (
        app.run(
            ["gen-synthetic", "--out", str(root / "data"), "--samples", "20",
             "--structures", "2", "--seed", "3"]
        )  # fmt: skip
        == EXIT_OK
    )
    assert (
        app.run(
            ["train", "--manifest", str(root / "data" / "manifest.csv"),
             "--conv", "graphconv", "--features", "positional", "--epochs", "2",
             "--batch", "8", "--hidden", "4", "--out", str(root / "run")]
        )  # fmt: skip
        == EXIT_OK
    )
    return root


# ---------------------------------------------------------------------------
# Usage errors
# ---------------------------------------------------------------------------


def test_help_exits_zero(capsys: pytest.CaptureFixture[str]) -> None:
    assert CliApp().run(["--help"]) == EXIT_OK
    assert "gen-synthetic" in capsys.readouterr().out


def test_missing_command_is_usage_error() -> None:
    assert CliApp().run([]) == EXIT_USAGE


def test_unknown_conv_is_usage_error(tmp_path: Path) -> None:
    argv = ["train", "--manifest", "m.csv", "--out", str(tmp_path), "--conv", "gat"]
    assert CliApp().run(argv) == EXIT_USAGE


def test_negative_aug_rejected(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    """Negative offsets fail at parse time, before any data is read."""
    argv = ["train", "--manifest", "m.csv", "--out", str(tmp_path), "--aug", "-0.5"]

    assert CliApp().run(argv) == EXIT_USAGE
    assert "aug must be ≥ 0" in capsys.readouterr().err


@pytest.mark.parametrize(
    ("flag", "value"),
    [
        ("--epochs", "-1"),
        ("--lr", "0"),
        ("--lr", "-0.01"),
        ("--lr", "nan"),
        ("--radius", "-5"),
        ("--radius", "0"),
        ("--seed", "-3"),
        ("--batch", "0"),
        ("--hidden", "0"),
        ("--max-neighbors", "0"),
        ("--epochs", "two"),
    ],
)
def test_out_of_range_numbers_are_usage_errors(
    tmp_path: Path, flag: str, value: str, capsys: pytest.CaptureFixture[str]
) -> None:
    argv = ["train", "--manifest", "m.csv", "--out", str(tmp_path), flag, value]

    assert CliApp().run(argv) == EXIT_USAGE
    assert flag in capsys.readouterr().err


def test_synthetic_numbers_validated_at_parse_time(tmp_path: Path) -> None:
    base = ["gen-synthetic", "--out", str(tmp_path)]
    assert CliApp().run([*base, "--samples", "0"]) == EXIT_USAGE
    assert CliApp().run([*base, "--class-effect", "-0.1"]) == EXIT_USAGE
    assert CliApp().run([*base, "--seed", "-1"]) == EXIT_USAGE


def test_invalid_synthetic_size_is_data_error(tmp_path: Path) -> None:
    argv = ["gen-synthetic", "--out", str(tmp_path), "--samples", "2"]
    assert CliApp().run(argv) == EXIT_DATA


def test_missing_manifest_is_data_error(tmp_path: Path) -> None:
    argv = ["train", "--manifest", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]
    assert CliApp().run(argv) == EXIT_DATA


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def test_gen_synthetic_prints_manifest_path(
    tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    argv = ["gen-synthetic", "--out", str(tmp_path), "--samples", "4"]

    assert CliApp().run(argv) == EXIT_OK

    printed = Path(capsys.readouterr().out.strip())
    assert printed == tmp_path / "manifest.csv"
    assert load_manifest(printed).n_structures == 4


def test_train_writes_checkpoint_and_splits(trained_run: Path) -> None:
    run = trained_run / "run"
    for name in ("checkpoint.json", "epochs.csv", "train.csv", "val.csv", "test.csv"):
        assert (run / name).is_file()
    header = json.loads((run / "checkpoint.json").read_text(encoding="utf-8"))
    assert header["model"]["conv_kind"] == "graphconv"
    assert header["features"]["mode"] == "positional"


def test_evaluate_csv_and_artifacts(
    trained_run: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    run = trained_run / "run"
    argv = [
        "evaluate", "--checkpoint", str(run / "checkpoint.json"),
        "--manifest", str(run / "test.csv"), "--out", str(tmp_path),
        "--format", "csv",
    ]  # fmt: skip

    assert CliApp().run(argv) == EXIT_OK

    table = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert table.loc[0, "field"] == "all"
    assert table.loc[0, "n_samples"] == 4
    assert set(table["field"]) >= {"all", "age", "sex", "group"}
    metrics = json.loads((tmp_path / "metrics.json").read_text(encoding="utf-8"))
    assert metrics["n_samples"] == 4
    predictions = pd.read_csv(tmp_path / "predictions.csv")
    assert list(predictions.columns) == ["sample_id", "p_0", "p_1", "predicted"]


def test_evaluate_feature_mismatch_is_data_error(trained_run: Path) -> None:
    run = trained_run / "run"
    argv = [
        "evaluate", "--checkpoint", str(run / "checkpoint.json"),
        "--manifest", str(run / "test.csv"), "--features", "fpfh",
    ]  # fmt: skip
    assert CliApp().run(argv) == EXIT_DATA


def test_predict_prints_probabilities(
    trained_run: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    sample = trained_run / "data" / "meshes" / "sub-00"
    argv = [
        "predict", "--checkpoint", str(trained_run / "run" / "checkpoint.json"),
        "--meshes", str(sample / "structure_00.off"), str(sample / "structure_01.off"),
    ]  # fmt: skip

    assert CliApp().run(argv) == EXIT_OK

    lines = capsys.readouterr().out.strip().splitlines()
    assert [line.split(":")[0] for line in lines] == ["class 0", "class 1"]
    total = sum(float(line.split(":")[1]) for line in lines)
    assert total == pytest.approx(1.0)


def test_predict_matches_evaluate(trained_run: Path) -> None:
    checkpoint = load_checkpoint(trained_run / "run" / "checkpoint.json")
    manifest = load_manifest(trained_run / "run" / "test.csv")

    _metrics, predictions = evaluate(checkpoint, manifest)

    for row, expected in enumerate(predictions):
        single = predict_meshes(checkpoint, manifest.mesh_paths(row))
        np.testing.assert_allclose(
            single.probabilities, expected.probabilities, rtol=0, atol=1e-12
        )


def test_zero_parameter_checkpoint_is_uniform(
    trained_run: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    checkpoint = load_checkpoint(trained_run / "run" / "checkpoint.json")
    zeros = {name: np.zeros_like(value) for name, value in checkpoint.params.items()}
    path = save_checkpoint(replace(checkpoint, params=zeros), tmp_path / "zero.json")
    sample = trained_run / "data" / "meshes" / "sub-00"
    argv = [
        "predict", "--checkpoint", str(path),
        "--meshes", str(sample / "structure_00.off"), str(sample / "structure_01.off"),
    ]  # fmt: skip

    assert CliApp().run(argv) == EXIT_OK

    lines = capsys.readouterr().out.strip().splitlines()
    assert lines == ["class 0: 0.5", "class 1: 0.5"]


def test_predict_wrong_mesh_count_is_data_error(trained_run: Path) -> None:
    mesh = trained_run / "data" / "meshes" / "sub-00" / "structure_00.off"
    argv = [
        "predict", "--checkpoint", str(trained_run / "run" / "checkpoint.json"),
        "--meshes", str(mesh),
    ]  # fmt: skip
    assert CliApp().run(argv) == EXIT_DATA


def test_extract_features_fills_cache(
    trained_run: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    argv = [
        "extract-features", "--manifest", str(trained_run / "run" / "test.csv"),
        "--features", "fpfh", "--cache-dir", str(tmp_path / "cache"),
        "--threads", "2",
    ]  # fmt: skip

    assert CliApp().run(argv) == EXIT_OK

    assert capsys.readouterr().out.startswith("8 meshes cached")
    assert len(list((tmp_path / "cache").glob("*.npz"))) == 8


def test_experiment_summary(
    trained_run: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    argv = [
        "experiment", "--manifest", str(trained_run / "data" / "manifest.csv"),
        "--conv", "gcn", "--features", "constant", "--aug", "0", "0.5",
        "--epochs", "1", "--batch", "8", "--hidden", "4",
        "--test-manifest", f"again={trained_run / 'run' / 'test.csv'}",
        "--out", str(tmp_path), "--format", "csv",
    ]  # fmt: skip

    assert CliApp().run(argv) == EXIT_OK

    summary = pd.read_csv(io.StringIO(capsys.readouterr().out))
    assert summary["run"].tolist() == [
        "gcn-constant-aug0", "gcn-constant-aug0",
        "gcn-constant-aug0.5", "gcn-constant-aug0.5",
    ]  # fmt: skip
    assert summary["test_set"].tolist() == ["test", "again"] * 2
    assert (tmp_path / "roc.csv").is_file()


def test_experiment_malformed_test_manifest(trained_run: Path, tmp_path: Path) -> None:
    argv = [
        "experiment", "--manifest", str(trained_run / "data" / "manifest.csv"),
        "--conv", "gcn", "--features", "constant", "--aug", "0",
        "--test-manifest", "no-equals-sign", "--out", str(tmp_path),
    ]  # fmt: skip
    assert CliApp().run(argv) == EXIT_DATA
