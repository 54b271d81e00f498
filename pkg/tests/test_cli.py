"""Command-line surface: subcommands, exit codes, pipeline composability."""

import json
import os

import numpy as np
import pytest

from respden.checkpoint import load_checkpoint, model_from_checkpoint
from respden.cli import main
from respden.config import RunConfig, validate_config
from respden.model import Model, seed_stream
from respden.train import evaluate_split, prepare_data

TINY = [
    "--dim", "32", "--heads", "4", "--layers", "1", "--mask-hidden", "4",
    "--train-per-class", "2", "--test-per-class", "1",
    "--train-subjects", "2", "--test-subjects", "1",
    "--batch", "4", "--seed", "3",
]


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSynthCommand:
    def test_writes_dataset(self, tmp_path, capsys):
        code, out, _ = run(["synth", "--out-dir", str(tmp_path / "ds"), *TINY], capsys)
        assert code == 0
        assert (tmp_path / "ds" / "split.txt").exists()
        wavs = [f for f in os.listdir(tmp_path / "ds") if f.endswith(".wav")]
        assert len(wavs) == 12  # (2 train + 1 test) per class x 4 classes


class TestTrainEvalCommands:
    def test_train_then_eval_roundtrip(self, tmp_path, capsys):
        out_dir = str(tmp_path / "run")
        code, out, err = run(["train", "--epochs", "1", "--out-dir", out_dir, *TINY], capsys)
        assert code == 0, err
        assert os.path.exists(os.path.join(out_dir, "checkpoint.bin"))
        log_path = os.path.join(out_dir, "metrics.jsonl")
        lines = open(log_path).read().strip().split("\n")
        assert json.loads(lines[0])["type"] == "header"
        assert len(lines) == 2  # header + one epoch

        code, out, err = run(["eval", "--checkpoint", os.path.join(out_dir, "checkpoint.bin"),
                              "--split", "test"], capsys)
        assert code == 0, err
        assert "Sp/Se/Score" in out

    def test_zero_epoch_train_eval_equals_fresh_init(self, tmp_path, capsys):
        out_dir = str(tmp_path / "run0")
        code, _, err = run(["train", "--epochs", "0", "--out-dir", out_dir, *TINY], capsys)
        assert code == 0, err
        ckpt = load_checkpoint(os.path.join(out_dir, "checkpoint.bin"))
        model = model_from_checkpoint(ckpt)
        cfg = model.cfg
        fresh = Model(cfg, rng=seed_stream(cfg.seed, "init"))
        for name, p in fresh.params.items():
            np.testing.assert_array_equal(model.params[name].data, p.data)
        data = prepare_data(cfg)
        a = evaluate_split(model, data, "test")
        b = evaluate_split(fresh, data, "test")
        np.testing.assert_array_equal(a.confusion, b.confusion)

    def test_train_on_disk_dataset(self, tmp_path, capsys):
        ds = str(tmp_path / "ds")
        code, _, _ = run(["synth", "--out-dir", ds, *TINY], capsys)
        assert code == 0
        out_dir = str(tmp_path / "run")
        code, _, err = run(["train", "--epochs", "1", "--dataset", ds,
                            "--out-dir", out_dir, *TINY], capsys)
        assert code == 0, err


class TestExitCodes:
    def test_usage_error_is_2(self, capsys):
        code, _, err = run(["train", "--beta", "1.5"], capsys)
        assert code == 2
        assert "beta" in err

    def test_unknown_flag_is_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--warp-speed", "9"])
        assert exc.value.code == 2

    def test_missing_checkpoint_is_3(self, capsys):
        code, _, err = run(["eval", "--checkpoint", "/no/such/file.bin"], capsys)
        assert code == 3

    def test_corrupt_checkpoint_is_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"JUNKJUNKJUNK")
        code, _, err = run(["eval", "--checkpoint", str(bad)], capsys)
        assert code == 3
        assert "magic" in err

    def test_config_file_precedence(self, tmp_path, capsys):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("epochs = 9\nbatch = 2\n")
        out_dir = str(tmp_path / "run")
        code, _, err = run(["train", "--config", str(cfg_file), "--epochs", "1",
                            "--out-dir", out_dir, *TINY], capsys)
        assert code == 0, err
        header = json.loads(open(os.path.join(out_dir, "metrics.jsonl")).readline())
        assert header["config"]["epochs"] == 1  # flag wins
        assert header["config"]["batch"] == 4   # TINY flag wins over file


class TestGradcheckCommand:
    def test_passes_with_exit_0(self, capsys):
        code, out, _ = run(["gradcheck", "--seed", "0", "--max-entries", "2"], capsys)
        assert code == 0
        assert "all checks passed" in out
        for group in ("aff", "lam", "wq", "phi"):
            assert group in out

    def test_corrupt_hook_fails_with_exit_1(self, capsys):
        code, out, _ = run(["gradcheck", "--seed", "0", "--max-entries", "2",
                            "--corrupt-param", "model.block0.wq"], capsys)
        assert code == 1
        assert "FAIL" in out and "model.block0.wq" in out


class TestReportCommand:
    def _write_log(self, path, flags, sp, se, score):
        cfg = validate_config(RunConfig(**flags)).snapshot()
        with open(path, "w") as fh:
            fh.write(json.dumps({"type": "header", "config": cfg}) + "\n")
            fh.write(json.dumps({"type": "epoch", "epoch": 0, "train_loss": 1.0,
                                 "se": se, "sp": sp, "score": score}) + "\n")

    def test_single_run_table(self, tmp_path, capsys):
        log = tmp_path / "full.jsonl"
        self._write_log(log, {}, 0.8513, 0.4594, 0.65535)
        code, out, _ = run(["report", str(log)], capsys)
        assert code == 0
        assert "full" in out
        assert "85.13" in out and "45.94" in out and "65.53" in out

    def test_two_runs_distinguished_by_flag(self, tmp_path, capsys):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        self._write_log(a, {}, 0.9, 0.5, 0.7)
        self._write_log(b, {"no_aff": True}, 0.8, 0.4, 0.6)
        code, out, _ = run(["report", str(a), str(b)], capsys)
        assert code == 0
        lines = out.strip().split("\n")
        assert any(line.startswith("full") for line in lines)
        assert any(line.startswith("no_aff") for line in lines)

    def test_missing_log_is_3(self, capsys):
        code, _, _ = run(["report", "/no/such.jsonl"], capsys)
        assert code == 3
