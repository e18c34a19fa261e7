import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

REPO = Path(__file__).resolve().parent.parent


def run_cli(*args, timeout=240):
    env = dict(os.environ)
    env["PYTHONPATH"] = str(REPO / "src") + os.pathsep + env.get("PYTHONPATH", "")
    return subprocess.run(
        [sys.executable, "-m", "relex", *args],
        capture_output=True,
        text=True,
        timeout=timeout,
        env=env,
    )


TINY_MODEL_FLAGS = [
    "--word-dim", "12", "--pos-dim", "6", "--tag-dim", "4", "--chunk-dim", "4",
    "--clip-window", "8", "--hidden", "8", "--attn-dim", "10",
    "--dep-hidden", "10", "--ff-dim", "10", "--lambda", "0.05",
]


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    res = run_cli(
        "synth", "--out", str(out), "--n", "80", "--n-dev", "30", "--n-test", "30",
        "--seed", "7",
    )
    assert res.returncode == 0, res.stderr
    return out


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, synth_dir):
    out = tmp_path_factory.mktemp("run")
    res = run_cli(
        "train", "--corpus", str(synth_dir / "train.jsonl"),
        "--dev", str(synth_dir / "dev.jsonl"), "--out", str(out),
        "--seed", "3", "--lr", "1e-3", "--batch", "20", "--epochs", "2",
        *TINY_MODEL_FLAGS,
    )
    assert res.returncode == 0, res.stderr
    return out


class TestSynth:
    def test_writes_three_splits_and_manifest(self, synth_dir):
        for name in ("train.jsonl", "dev.jsonl", "test.jsonl", "manifest.json"):
            assert (synth_dir / name).exists()

    def test_outputs_load_as_valid_corpora(self, synth_dir):
        sys.path.insert(0, str(REPO / "src"))
        from relex.data import load_corpus

        for name in ("train.jsonl", "dev.jsonl", "test.jsonl"):
            corpus = load_corpus(synth_dir / name)
            assert corpus.size > 0

    def test_rerun_is_byte_identical(self, synth_dir, tmp_path):
        res = run_cli(
            "synth", "--out", str(tmp_path), "--n", "80", "--n-dev", "30",
            "--n-test", "30", "--seed", "7",
        )
        assert res.returncode == 0
        for name in ("train.jsonl", "dev.jsonl", "test.jsonl"):
            assert (tmp_path / name).read_bytes() == (synth_dir / name).read_bytes()

    def test_shift_changes_test_split_only(self, synth_dir, tmp_path):
        res = run_cli(
            "synth", "--out", str(tmp_path), "--n", "80", "--n-dev", "30",
            "--n-test", "30", "--seed", "7", "--shift",
        )
        assert res.returncode == 0
        assert (tmp_path / "train.jsonl").read_bytes() == (synth_dir / "train.jsonl").read_bytes()
        assert (tmp_path / "test.jsonl").read_bytes() != (synth_dir / "test.jsonl").read_bytes()
        line = json.loads((tmp_path / "test.jsonl").read_text().splitlines()[0])
        assert line["domain"] == "web"


class TestTrain:
    def test_writes_checkpoint_log_manifest(self, run_dir):
        assert (run_dir / "checkpoint.bin").exists()
        assert (run_dir / "manifest.json").exists()
        lines = (run_dir / "log.jsonl").read_text().splitlines()
        assert len(lines) == 2
        rec = json.loads(lines[0])
        assert set(rec) == {"epoch", "loss_label", "loss_dep", "loss_total", "dev_f1"}

    def test_rerun_reproduces_bytes(self, synth_dir, run_dir, tmp_path):
        res = run_cli(
            "train", "--corpus", str(synth_dir / "train.jsonl"),
            "--dev", str(synth_dir / "dev.jsonl"), "--out", str(tmp_path),
            "--seed", "3", "--lr", "1e-3", "--batch", "20", "--epochs", "2",
            *TINY_MODEL_FLAGS,
        )
        assert res.returncode == 0, res.stderr
        assert (tmp_path / "checkpoint.bin").read_bytes() == (run_dir / "checkpoint.bin").read_bytes()
        assert (tmp_path / "log.jsonl").read_bytes() == (run_dir / "log.jsonl").read_bytes()

    def test_missing_corpus_flag_is_usage_error(self):
        res = run_cli("train", "--dev", "x.jsonl", "--out", "y")
        assert res.returncode == 2
        assert "usage" in res.stderr.lower()

    def test_nonexistent_corpus_is_runtime_error(self, tmp_path):
        res = run_cli(
            "train", "--corpus", str(tmp_path / "missing.jsonl"),
            "--dev", str(tmp_path / "missing.jsonl"), "--out", str(tmp_path),
        )
        assert res.returncode == 1
        assert "error" in res.stderr.lower()

    def test_ablation_recorded_in_manifest(self, synth_dir, tmp_path):
        res = run_cli(
            "train", "--corpus", str(synth_dir / "train.jsonl"),
            "--dev", str(synth_dir / "dev.jsonl"), "--out", str(tmp_path),
            "--seed", "3", "--lr", "1e-3", "--epochs", "1", "--ablation", "no_CM",
            *TINY_MODEL_FLAGS,
        )
        assert res.returncode == 0, res.stderr
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["resolved_config"]["ablation"] == "no_CM"


class TestEval:
    def test_report_is_valid_json(self, synth_dir, run_dir):
        res = run_cli(
            "eval", "--ckpt", str(run_dir / "checkpoint.bin"),
            "--corpus", str(synth_dir / "dev.jsonl"),
        )
        assert res.returncode == 0, res.stderr
        report = json.loads(res.stdout)
        assert 0.0 <= report["micro_f1"] <= 1.0
        assert "per_label" in report

    def test_domain_filter_matches(self, synth_dir, run_dir):
        res = run_cli(
            "eval", "--ckpt", str(run_dir / "checkpoint.bin"),
            "--corpus", str(synth_dir / "dev.jsonl"), "--domain", "news",
        )
        assert res.returncode == 0

    def test_domain_filter_without_matches_fails(self, synth_dir, run_dir):
        res = run_cli(
            "eval", "--ckpt", str(run_dir / "checkpoint.bin"),
            "--corpus", str(synth_dir / "dev.jsonl"), "--domain", "radio",
        )
        assert res.returncode == 1
        assert "radio" in res.stderr

    def test_rerun_report_is_identical(self, synth_dir, run_dir, tmp_path):
        args = (
            "eval", "--ckpt", str(run_dir / "checkpoint.bin"),
            "--corpus", str(synth_dir / "dev.jsonl"),
        )
        a = run_cli(*args, "--out", str(tmp_path / "r1.json"))
        b = run_cli(*args, "--out", str(tmp_path / "r2.json"))
        assert a.returncode == b.returncode == 0
        assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()


class TestGradcheck:
    def test_default_run_passes(self):
        res = run_cli("gradcheck")
        assert res.returncode == 0, res.stderr
        assert "PASS" in res.stdout

    def test_unattainable_tolerance_reports_failures(self):
        res = run_cli("gradcheck", "--tol", "1e-13")
        assert res.returncode == 1
        assert "FAIL" in res.stdout

    def test_ablation_restricts_groups(self):
        res = run_cli("gradcheck", "--ablation", "no_SA_DP_CM")
        assert res.returncode == 0, res.stderr
        assert "attn_Wk" not in res.stdout
        assert "dep_W1" not in res.stdout


class TestAnalyze:
    def test_similarity_report(self, synth_dir, run_dir):
        res = run_cli(
            "analyze", "similarity", "--ckpt", str(run_dir / "checkpoint.bin"),
            "--train", str(synth_dir / "train.jsonl"),
            "--test", str(synth_dir / "test.jsonl"),
        )
        assert res.returncode == 0, res.stderr
        report = json.loads(res.stdout)
        for stats in report["per_domain"].values():
            assert -1.0 <= stats["mean_cosine"] <= 1.0

    def test_sweep_csv(self, synth_dir, tmp_path):
        res = run_cli(
            "analyze", "sweep", "--corpus", str(synth_dir / "train.jsonl"),
            "--dev", str(synth_dir / "dev.jsonl"), "--ratios", "0.5,1.0",
            "--lr", "1e-3", "--epochs", "1", "--batch", "20", "--seed", "2",
            "--out", str(tmp_path / "sweep.csv"),
            *TINY_MODEL_FLAGS,
        )
        assert res.returncode == 0, res.stderr
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[0] == "ratio,f1"
        assert len(lines) == 3

    def test_empty_ratio_list_is_usage_error(self, synth_dir):
        res = run_cli(
            "analyze", "sweep", "--corpus", str(synth_dir / "train.jsonl"),
            "--dev", str(synth_dir / "dev.jsonl"), "--ratios", ",",
        )
        assert res.returncode == 2
        assert "ratio" in res.stderr

    def test_unknown_subcommand_is_usage_error(self):
        res = run_cli("analyze", "nonsense")
        assert res.returncode == 2
