"""Tiny stand-in fine-tuned on 10 instances, then scored by the C++ evaluator
against this package's own server."""

import json
import subprocess

import pytest

from cwescan_trainer.serve import CompletionServer
from cwescan_trainer.train import TrainConfig, train

from conftest import HERE


def config(toy_file, out):
    doc = json.loads((HERE.parent / "configs" / "toy.json").read_text())
    doc.update(train_file=str(toy_file), output_dir=str(out))
    return TrainConfig.from_dict(doc)


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    from conftest import toy_rows, write_jsonl

    toy = root / "toy-train.jsonl"
    write_jsonl(toy, toy_rows())
    first = train(config(toy, root / "a"), log=lambda m: None)
    second = train(config(toy, root / "b"), log=lambda m: None)
    return toy, root, first, second


def test_training_is_deterministic(runs):
    _, _, first, second = runs
    assert abs(first["final_loss"] - second["final_loss"]) < 1e-4
    assert first["data_digest"] == second["data_digest"]
    for key in ("learning_rate", "batch_size", "epochs", "seed", "base_model"):
        assert key in first["config"]


def test_served_model_echoes_gold_labels_through_evaluator(runs, cli, tmp_path):
    toy, root, _, _ = runs
    server = CompletionServer(root / "a").start()
    try:
        proc = subprocess.run(
            # one token per byte here, so the longest label needs more than the default budget
            [cli, "--backend-url", f"http://127.0.0.1:{server.port}/complete", "--set", "eval.max_new_tokens=32",
             "eval", str(toy), "--out", str(tmp_path / "ev")],
            capture_output=True,
            text=True,
            timeout=300,
        )
    finally:
        server.stop()
    assert proc.returncode == 0, proc.stderr
    report = json.loads((tmp_path / "ev" / "report.json").read_text())
    exact = report["secure"]["exact_matches"] + sum(c["exact_matches"] for c in report["per_cwe"].values())
    assert report["evaluated"] == 10
    assert exact == 10
    assert report["metrics"]["accuracy"] == 1.0
