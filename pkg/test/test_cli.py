from __future__ import annotations

import io
import json
import re

import pandas as pd
import pytest

import mmdbn
import mmdbn._cli
from mmdbn._cli import main

SMALL_RUN = {
    "train": {
        "lr": 0.1,
        "batch_size": 20,
        "initial_hidden": 6,
        "max_layers": 2,
        "epoch_cap": 8,
        "head_epochs": 20,
        "growth": {"window": 3, "max_hidden": 12},
    },
    "modes": ["traditional", "multimodal"],
    "folds": 2,
}


@pytest.fixture
def workdir(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(SMALL_RUN))
    data = tmp_path / "data.h5"
    status = main(
        ["synth", "--out", str(data), "--n", "60", "--size", "4", "--seed", "1"]
    )
    assert status == 0
    return tmp_path


def train(workdir, out: str = "model.json", *extra: str) -> int:
    return main(
        [
            "train",
            "--config",
            str(workdir / "config.json"),
            "--data",
            str(workdir / "data.h5"),
            "--out",
            str(workdir / out),
            *extra,
        ]
    )


class TestSynth:
    def test_synth(self, workdir):
        dataset = mmdbn.load_dataset(workdir / "data.h5")
        assert len(dataset) == 60
        assert dataset.image_shape == (4, 4)
        assert dataset.schema.names == ["row0", "row1", "row2", "row3"]

    def test_reverse_pairing(self, tmp_path):
        out = tmp_path / "reversed.h5"
        args = ["synth", "--out", str(out), "--n", "10", "--size", "3"]
        assert main([*args, "--reverse-pairing"]) == 0
        dataset = mmdbn.load_dataset(out)
        assert dataset.schema.names == ["row2", "row1", "row0"]


class TestTrain:
    def test_train(self, workdir, capsys):
        csv = workdir / "report.csv"
        assert train(workdir, "model.json", "--seed", "3", "--csv", str(csv)) == 0

        out = capsys.readouterr().out
        assert "Mode: multimodal" in out
        assert "No. sorting process" in out

        model = mmdbn.load_model(workdir / "model.json")
        assert model.n_visible == 24
        assert model.classes == (0, 1)

        df = pd.read_csv(csv)
        assert list(df.columns) == mmdbn.REPORT_COLUMNS
        assert len(df) == len(model.layers) + 1

    def test_mode(self, workdir, capsys):
        assert train(workdir, "model.json", "--mode", "traditional") == 0
        assert "Mode: traditional" in capsys.readouterr().out
        model = mmdbn.load_model(workdir / "model.json")
        assert len(model.layers) == 2
        assert all(layer.stats.moves == 0 for layer in model.layers)

    def test_deterministic(self, workdir):
        assert train(workdir, "a.json", "--seed", "11") == 0
        assert train(workdir, "b.json", "--seed", "11") == 0
        a = (workdir / "a.json").read_bytes()
        b = (workdir / "b.json").read_bytes()
        assert a == b

    def test_training_error(self, workdir, monkeypatch):
        def fail(*args, **kwargs):
            raise mmdbn.TrainingError("weights diverged", epoch=4, layer=2)

        monkeypatch.setattr(mmdbn._cli, "train_dbn", fail)
        assert train(workdir) == 3
        assert not (workdir / "model.json").exists()

    def test_missing_data(self, tmp_path, capsys):
        status = main(
            [
                "train",
                "--data",
                str(tmp_path / "missing.h5"),
                "--out",
                str(tmp_path / "model.json"),
            ]
        )
        assert status == 2
        assert capsys.readouterr().err.startswith("mmdbn: error:")

    def test_bad_config(self, workdir, capsys):
        (workdir / "config.json").write_text(json.dumps({"folds": 1}))
        assert train(workdir) == 2
        assert "number of folds must be >= 2" in capsys.readouterr().err


class TestEval:
    def test_eval(self, workdir, capsys):
        assert train(workdir) == 0
        capsys.readouterr()
        csv = workdir / "classes.csv"
        status = main(
            [
                "eval",
                "--model",
                str(workdir / "model.json"),
                "--data",
                str(workdir / "data.h5"),
                "--csv",
                str(csv),
            ]
        )
        assert status == 0

        out = capsys.readouterr().out
        match = re.search(r"Accuracy: ([0-9.]+) \((\d+)/60\)", out)
        assert match is not None
        accuracy = float(match.group(1))
        assert 0.0 <= accuracy <= 1.0
        assert int(match.group(2)) == pytest.approx(60 * accuracy, abs=0.01)

        df = pd.read_csv(csv)
        assert list(df.columns) == ["Class", "Records", "Correct", "Accuracy"]
        assert df["Records"].sum() == 60

    def test_dimension_mismatch(self, workdir, capsys):
        assert train(workdir) == 0
        other = workdir / "other.h5"
        assert main(["synth", "--out", str(other), "--n", "10", "--size", "5"]) == 0
        capsys.readouterr()
        status = main(
            ["eval", "--model", str(workdir / "model.json"), "--data", str(other)]
        )
        assert status == 2
        assert "dimension mismatch" in capsys.readouterr().err

    def test_missing_model(self, workdir):
        status = main(
            [
                "eval",
                "--model",
                str(workdir / "missing.json"),
                "--data",
                str(workdir / "data.h5"),
            ]
        )
        assert status == 2


class TestBench:
    def test_bench(self, workdir, capsys):
        csv = workdir / "bench.csv"
        status = main(
            [
                "bench",
                "--config",
                str(workdir / "config.json"),
                "--data",
                str(workdir / "data.h5"),
                "--csv",
                str(csv),
            ]
        )
        assert status == 0
        out = capsys.readouterr().out
        assert "Mode: traditional" in out
        assert "Mode: multimodal" in out
        assert "Training time reduction (multimodal vs. traditional):" in out

        df = pd.read_csv(io.StringIO(csv.read_text()))
        assert set(df["Mode"]) == {"traditional", "multimodal"}

    def test_bad_folds(self, workdir, capsys):
        status = main(
            [
                "bench",
                "--config",
                str(workdir / "config.json"),
                "--data",
                str(workdir / "data.h5"),
                "--folds",
                "1",
            ]
        )
        assert status == 2
        assert "number of folds must be >= 2" in capsys.readouterr().err


class TestParser:
    def test_no_command(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_verbosity_conflict(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["-v", "-q", "synth", "--out", str(tmp_path / "x.h5")])
        assert excinfo.value.code == 2
