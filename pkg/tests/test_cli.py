import hashlib
import json
from pathlib import Path

import pytest

from streambatch import BucketTree, BatchProfile, baseline_heuristic_profile
from streambatch.cli import main

from conftest import write_corpus


def sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def corpus(tmp_path: Path) -> Path:
    assert main(["gen-synthetic", "--preset", "demo", "--out", str(tmp_path / "corpus")]) == 0
    return tmp_path / "corpus" / "manifest.json"


def run_estimate(manifest: Path, out: Path, *extra: str) -> int:
    return main(
        [
            "estimate-buckets",
            "--manifest",
            str(manifest),
            "--out",
            str(out),
            "--num-buckets",
            "10",
            "--num-subbuckets",
            "10",
            "--sample-size",
            "1500",
            "--seed",
            "3",
            *extra,
        ]
    )


class TestGenSynthetic:
    def test_writes_corpus_and_config_echo(self, tmp_path, corpus):
        assert corpus.exists()
        config_echo = corpus.parent / "corpus_config.json"
        assert json.loads(config_echo.read_text())["seed"] == 2024
        shards = list((corpus.parent / "shards").glob("*.jsonl"))
        assert len(shards) == 6  # three demo datasets, two shards each

    def test_accepts_config_file(self, tmp_path):
        config = {
            "seed": 5,
            "datasets": [
                {
                    "source_id": "ds",
                    "modality": "audio",
                    "num_examples": 50,
                    "num_shards": 2,
                    "input_length": {"kind": "uniform", "low": 1.0, "high": 9.0},
                    "output_length": {"slope": 1.0, "offset": 0, "noise": 5},
                }
            ],
        }
        config_path = tmp_path / "gen.json"
        config_path.write_text(json.dumps(config), encoding="utf-8")
        out = tmp_path / "corpus"
        assert main(["gen-synthetic", "--config", str(config_path), "--out", str(out)]) == 0
        assert (out / "manifest.json").exists()

    def test_invalid_distribution_exits_2(self, tmp_path, capsys):
        config_path = tmp_path / "gen.json"
        config_path.write_text(
            json.dumps(
                {
                    "seed": 1,
                    "datasets": [
                        {
                            "source_id": "ds",
                            "modality": "audio",
                            "num_examples": 5,
                            "input_length": {"kind": "zipf"},
                        }
                    ],
                }
            ),
            encoding="utf-8",
        )
        assert main(["gen-synthetic", "--config", str(config_path), "--out", str(tmp_path / "o")]) == 2
        assert "error" in capsys.readouterr().err

    def test_determinism(self, tmp_path):
        main(["gen-synthetic", "--preset", "demo", "--out", str(tmp_path / "one")])
        main(["gen-synthetic", "--preset", "demo", "--out", str(tmp_path / "two")])
        one = sorted((tmp_path / "one").rglob("*.jsonl"))
        two = sorted((tmp_path / "two").rglob("*.jsonl"))
        assert [sha(p) for p in one] == [sha(p) for p in two]


class TestEstimateBuckets:
    def test_writes_tree_with_requested_shape(self, tmp_path, corpus):
        out = tmp_path / "tree.json"
        assert run_estimate(corpus, out) == 0
        payload = json.loads(out.read_text())
        assert len(payload["input_edges"]) == 10
        assert len(payload["output_edges"]) == 10
        assert all(len(row) == 10 for row in payload["output_edges"])
        BucketTree.load(out)  # parses back

    def test_sample_larger_than_corpus_warns_and_wraps(self, tmp_path, corpus, capsys):
        out = tmp_path / "tree.json"
        code = main(
            [
                "estimate-buckets",
                "--manifest",
                str(corpus),
                "--out",
                str(out),
                "--sample-size",
                "3000",
                "--num-buckets",
                "4",
                "--num-subbuckets",
                "4",
                "--seed",
                "3",
            ]
        )
        assert code == 0
        assert "exceeds corpus size" in capsys.readouterr().err
        assert out.exists()

    def test_rerun_is_byte_identical(self, tmp_path, corpus):
        one, two = tmp_path / "one.json", tmp_path / "two.json"
        assert run_estimate(corpus, one) == 0
        assert run_estimate(corpus, two) == 0
        assert sha(one) == sha(two)

    def test_modality_filter(self, tmp_path, corpus):
        out = tmp_path / "tree.json"
        assert run_estimate(corpus, out, "--modality", "text") == 0
        assert run_estimate(corpus, out, "--modality", "audio") == 0

    def test_degenerate_corpus_warns(self, tmp_path, capsys):
        manifest = write_corpus(
            tmp_path / "flat",
            [
                {
                    "source_id": "flat",
                    "modality": "audio",
                    "examples": [(5.0, 5)] * 200,
                }
            ],
        )
        out = tmp_path / "tree.json"
        code = main(
            [
                "estimate-buckets",
                "--manifest",
                str(manifest),
                "--out",
                str(out),
                "--sample-size",
                "200",
                "--num-buckets",
                "2",
                "--num-subbuckets",
                "2",
            ]
        )
        assert code == 0
        assert "degenerate" in capsys.readouterr().err
        assert json.loads(out.read_text())["degenerate"] is True


class TestOomptimize:
    def make_tree(self, corpus, tmp_path) -> Path:
        tree = tmp_path / "tree.json"
        assert run_estimate(corpus, tree) == 0
        return tree

    def test_writes_profile(self, tmp_path, corpus):
        tree = self.make_tree(corpus, tmp_path)
        out = tmp_path / "profile.json"
        code = main(
            ["oomptimize", "--tree", str(tree), "--model-preset", "quadratic", "--out", str(out)]
        )
        assert code == 0
        profile = BatchProfile.load(out)
        assert profile.shape == (10, 10)
        assert profile.probe_logs  # search trail persisted

    def test_rerun_is_byte_identical(self, tmp_path, corpus):
        tree = self.make_tree(corpus, tmp_path)
        one, two = tmp_path / "one.json", tmp_path / "two.json"
        for out in (one, two):
            assert (
                main(
                    [
                        "oomptimize",
                        "--tree",
                        str(tree),
                        "--model-preset",
                        "quadratic",
                        "--out",
                        str(out),
                    ]
                )
                == 0
            )
        assert sha(one) == sha(two)

    def test_unsatisfiable_cell_exits_2_naming_cell(self, tmp_path, corpus, capsys):
        tree = self.make_tree(corpus, tmp_path)
        model_path = tmp_path / "model.json"
        model_path.write_text(
            json.dumps(
                {
                    "format_version": 1,
                    "coefficients": [0, 1e12, 0, 0, 0, 0],
                    "capacity_bytes": 1.0,
                }
            ),
            encoding="utf-8",
        )
        code = main(
            [
                "oomptimize",
                "--tree",
                str(tree),
                "--model",
                str(model_path),
                "--out",
                str(tmp_path / "p.json"),
            ]
        )
        assert code == 2
        assert "bucket (" in capsys.readouterr().err


class TestSimulate:
    @pytest.fixture
    def artifacts(self, tmp_path, corpus):
        tree = tmp_path / "tree.json"
        profile = tmp_path / "profile.json"
        assert run_estimate(corpus, tree) == 0
        assert (
            main(
                [
                    "oomptimize",
                    "--tree",
                    str(tree),
                    "--model-preset",
                    "quadratic",
                    "--out",
                    str(profile),
                ]
            )
            == 0
        )
        return corpus, tree, profile

    def run_simulate(self, artifacts, out_dir, *extra):
        corpus, tree, profile = artifacts
        return main(
            [
                "simulate",
                "--manifest",
                str(corpus),
                "--tree",
                str(tree),
                "--profile",
                str(profile),
                "--steps",
                "60",
                "--window",
                "20",
                "--seed",
                "11",
                "--out-dir",
                str(out_dir),
                *extra,
            ]
        )

    def test_single_step_report(self, tmp_path, artifacts, capsys):
        corpus, tree, profile = artifacts
        out_dir = tmp_path / "single"
        code = main(
            [
                "simulate",
                "--manifest",
                str(corpus),
                "--tree",
                str(tree),
                "--profile",
                str(profile),
                "--steps",
                "1",
                "--out-dir",
                str(out_dir),
            ]
        )
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["steps_simulated"] == 1

    def test_artifacts_written_and_deterministic(self, tmp_path, artifacts):
        one, two = tmp_path / "one", tmp_path / "two"
        assert self.run_simulate(artifacts, one) == 0
        assert self.run_simulate(artifacts, two) == 0
        names = [
            "report.json",
            "summary.csv",
            "tv_series.csv",
            "tv_series.png",
            "bucket_source_skew.png",
            "mean_batch_size.png",
        ]
        for name in names:
            assert (one / name).exists(), name
            assert sha(one / name) == sha(two / name), name

    def test_zip_strategy(self, tmp_path, artifacts):
        out_dir = tmp_path / "zip"
        assert self.run_simulate(artifacts, out_dir, "--strategy", "zip") == 0
        report = json.loads((out_dir / "report.json").read_text())
        # One batch per modality per step.
        assert report["batches_per_modality"]["audio"] == 60
        assert report["batches_per_modality"]["text"] == 60

    def test_modality_probs_flag(self, tmp_path, artifacts):
        out_dir = tmp_path / "skew"
        code = self.run_simulate(
            artifacts, out_dir, "--modality-probs", "audio=0.25,text=0.75"
        )
        assert code == 0
        report = json.loads((out_dir / "report.json").read_text())
        assert report["batches_per_modality"]["text"] > report["batches_per_modality"]["audio"]

    def test_baseline_profile_yields_smaller_batches(self, tmp_path, artifacts):
        corpus, tree_path, profile = artifacts
        tree = BucketTree.load(tree_path)
        baseline = baseline_heuristic_profile(tree, 300.0, 0.01)
        baseline_path = tmp_path / "baseline.json"
        baseline.save(baseline_path)
        opt_dir, base_dir = tmp_path / "opt", tmp_path / "base"
        assert self.run_simulate(artifacts, opt_dir) == 0
        assert self.run_simulate((corpus, tree_path, baseline_path), base_dir) == 0
        opt = json.loads((opt_dir / "report.json").read_text())
        base = json.loads((base_dir / "report.json").read_text())
        for modality in ("audio", "text"):
            assert (
                opt["mean_batch_size_per_modality"][modality]
                > base["mean_batch_size_per_modality"][modality]
            )


class TestExitCodes:
    def test_usage_error_is_1(self):
        with pytest.raises(SystemExit) as exit_info:
            main(["estimate-buckets"])  # missing required flags
        assert exit_info.value.code == 1

    def test_unknown_command_is_1(self):
        with pytest.raises(SystemExit) as exit_info:
            main(["frobnicate"])
        assert exit_info.value.code == 1

    def test_runtime_error_is_2(self, tmp_path, capsys):
        code = main(
            [
                "estimate-buckets",
                "--manifest",
                str(tmp_path / "missing.json"),
                "--out",
                str(tmp_path / "t.json"),
            ]
        )
        assert code == 2
        assert "error" in capsys.readouterr().err
