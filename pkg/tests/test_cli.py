"""Command-line entry points, exercised in-process via main(argv)."""

import json
import os

import pytest

from mavrnet.cli import _parse_frame_size, main
from mavrnet.metrics import parse_confusion


class TestFrameSizeParsing:
    def test_single_number_is_square(self):
        assert _parse_frame_size("64") == (64, 64)

    def test_hxw_order(self):
        assert _parse_frame_size("48x32") == (48, 32)

    def test_garbage_rejected(self):
        import argparse

        with pytest.raises(argparse.ArgumentTypeError):
            _parse_frame_size("tiny")


class TestUsageErrors:
    def test_missing_required_flag_exits_2(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["generate"])
        assert err.value.code == 2

    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 2


class TestPipeline:
    @pytest.fixture(scope="class")
    @staticmethod
    def corpus(tmp_path_factory):
        root = str(tmp_path_factory.mktemp("cli") / "data")
        code = main(
            ["generate", "--out", root, "--n", "3", "--frame-size", "32", "--seed", "5"]
        )
        assert code == 0
        return root

    @pytest.fixture(scope="class")
    @staticmethod
    def run_dir(corpus, tmp_path_factory):
        out = str(tmp_path_factory.mktemp("cli") / "run")
        code = main(
            ["train", "--data", corpus, "--out", out, "--epochs", "1", "--crop", "32"]
        )
        assert code == 0
        return out

    def test_generate_writes_manifest_and_config(self, corpus):
        with open(os.path.join(corpus, "manifest.json")) as fp:
            manifest = json.load(fp)
        assert len(manifest["clips"]) == 36
        with open(os.path.join(corpus, "config.json")) as fp:
            cfg = json.load(fp)
        assert cfg["render"]["frame_size"] == [32, 32]
        assert cfg["flow"]["levels"] == 2  # auto-resolved for 32x32 frames

    def test_train_writes_log_checkpoint_config(self, run_dir):
        assert os.path.exists(os.path.join(run_dir, "checkpoint.mavr"))
        assert os.path.exists(os.path.join(run_dir, "config.json"))
        with open(os.path.join(run_dir, "train_log.jsonl")) as fp:
            rows = [json.loads(line) for line in fp]
        assert len(rows) == 1

    def test_train_progress_goes_to_stdout(self, corpus, tmp_path, capsys):
        out = str(tmp_path / "run")
        assert main(["train", "--data", corpus, "--out", out, "--epochs", "1", "--crop", "32"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert json.loads(lines[0])["epoch"] == 0
        assert lines[-1].startswith("best test_acc")

    def test_eval_writes_report_and_confusions(self, corpus, run_dir, capsys):
        ckpt = os.path.join(run_dir, "checkpoint.mavr")
        assert main(["eval", "--ckpt", ckpt, "--data", corpus]) == 0
        with open(os.path.join(run_dir, "report.json")) as fp:
            report = json.load(fp)
        assert set(report) >= {"accuracy", "confusion", "per_class", "class_names"}
        matrix, names = parse_confusion(open(os.path.join(run_dir, "confusion.csv")).read())
        assert matrix.sum() == 12
        assert list(names) == report["class_names"]
        norm_path = os.path.join(run_dir, "confusion_normalized.csv")
        assert os.path.exists(norm_path)
        assert os.path.exists(os.path.join(run_dir, "eval_config.json"))
        assert "accuracy" in capsys.readouterr().out

    def test_report_groups_by_config(self, corpus, run_dir, tmp_path, capsys):
        other = str(tmp_path / "seeded")
        assert main(
            ["train", "--data", corpus, "--out", other, "--epochs", "1", "--crop", "32", "--seed", "9"]
        ) == 0
        assert main(["eval", "--ckpt", os.path.join(other, "checkpoint.mavr"), "--data", corpus]) == 0
        capsys.readouterr()
        assert main(["report", "--runs", run_dir, other]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("group,runs,accuracy_mean,accuracy_std")
        assert len(lines) == 2  # same arm, different seed: one group
        assert lines[1].split(",")[1] == "2"

    def test_report_rejects_run_without_eval(self, run_dir, tmp_path, capsys):
        bare = tmp_path / "bare"
        bare.mkdir()
        assert main(["report", "--runs", str(bare)]) == 1
        assert "config.json" in capsys.readouterr().err

    def test_eval_corrupt_checkpoint_exits_1_naming_file(self, corpus, tmp_path, capsys):
        bad = tmp_path / "bad.mavr"
        bad.write_bytes(b"garbagegarbage")
        assert main(["eval", "--ckpt", str(bad), "--data", corpus]) == 1
        assert "bad.mavr" in capsys.readouterr().err

    def test_train_rejects_unknown_view_before_loading_data(self, tmp_path, capsys):
        out = str(tmp_path / "run")
        code = main(["train", "--data", "/nonexistent", "--out", out, "--views", "rgb,bogus"])
        assert code == 1
        assert "bogus" in capsys.readouterr().err
