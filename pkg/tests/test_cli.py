import json
import subprocess
import sys

import numpy as np
import pytest

from hybridseg import cli
from hybridseg.harness import checks
from hybridseg.harness.checks import CheckResult
from hybridseg.tensorio import read_pgm


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert cli.main(["gen", "--seed", "0", "--count", "6", "--size", "32x32", "--classes", "2",
                     "--out", str(root / "data")]) == 0
    (root / "micro.json").write_text(json.dumps({"preset": "micro", "num_classes": 2, "dtype": "float32"}))
    return root


def test_gen_writes_samples(workspace):
    names = sorted(p.name for p in (workspace / "data").iterdir())
    assert "dataset.json" in names and sum(n.endswith(".ppm") for n in names) == 6


def test_train_eval_erf_roundtrip(workspace, capsys):
    ck = workspace / "ck"
    assert cli.main(["train", "--config", str(workspace / "micro.json"), "--data", str(workspace / "data"),
                     "--steps", "2", "--lr", "1e-3", "--seed", "0", "--out", str(ck)]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert np.isfinite(summary["final_loss"]) and (ck / "manifest.json").exists()
    assert cli.main(["eval", "--ckpt", str(ck), "--data", str(workspace / "data")]) == 0
    scores = json.loads(capsys.readouterr().out)
    assert scores["samples"] == 6 and 0 <= scores["mean_iou"] <= 1
    out = workspace / "erf.pgm"
    assert cli.main(["erf", "--ckpt", str(ck), "--size", "64x64", "--samples", "1", "--out", str(out)]) == 0
    assert read_pgm(out).shape == (64, 64)


def test_erf_from_config(workspace):
    out = workspace / "erf_cfg.pgm"
    assert cli.main(["erf", "--config", str(workspace / "micro.json"), "--size", "64x64",
                     "--samples", "1", "--out", str(out)]) == 0
    assert read_pgm(out).max() == 255


def test_bench_writes_csv(workspace):
    out = workspace / "b.csv"
    assert cli.main(["bench", "--block", "natten", "--channels", "8", "--sizes", "8,16",
                     "--reps", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "side,tokens,seconds" and len(lines) == 3


@pytest.mark.parametrize("payload", [
    {"preset": "micro", "learning_rate_typo": 1},
    {"stage_channels": [8, 16, 24]},
    {"preset": "micro", "mixer": "conv"},
    "not an object",
])
def test_bad_config_exits_2(workspace, payload):
    path = workspace / "bad.json"
    path.write_text(json.dumps(payload))
    assert cli.main(["train", "--config", str(path), "--data", str(workspace / "data"),
                     "--steps", "1", "--out", str(workspace / "x")]) == 2


@pytest.mark.parametrize("argv", [
    ["gen", "--count", "1", "--size", "32by32", "--out", "unused"],
    ["gen", "--count", "1", "--size", "30x32", "--out", "unused"],
    ["bench", "--block", "conv", "--out", "unused"],
    ["bench", "--block", "natten", "--sizes", "8,x", "--out", "unused"],
    ["erf", "--size", "64x64", "--out", "unused"],
    ["eval", "--ckpt", "/nonexistent", "--data", "/nonexistent"],
])
def test_bad_arguments_exit_2(argv):
    assert cli.main(argv) == 2


def test_divergent_training_exits_3(workspace):
    with np.errstate(all="ignore"):
        rc = cli.main(["train", "--config", str(workspace / "micro.json"), "--data", str(workspace / "data"),
                       "--steps", "3", "--lr", "1e30", "--out", str(workspace / "nan")])
    assert rc == 3


def test_failing_check_exits_4(monkeypatch):
    monkeypatch.setitem(checks.SUITES, "io", lambda: [CheckResult("always_fails", False, "forced", 0.0)])
    assert cli.main(["check", "--suite", "io"]) == 4


def test_passing_check_exits_0():
    assert cli.main(["check", "--suite", "io"]) == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hybridseg", "check", "--suite", "io"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0 and "passed" in proc.stdout
