import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from wavecast import __version__
from wavecast.checkpoint import Checkpoint
from wavecast.cli import main
from wavecast.model import HEAD_NAMES

SMALL = """\
sim.duration=40.0
model.l=8
model.h=4
model.d=8
model.n_heads=2
model.d_head=4
model.n_layers=1
train.max_epochs=2
train.patience=2
"""


def tree_bytes(root: Path) -> dict:
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "small.cfg"
    cfg.write_text(SMALL)
    assert main(["simulate", "--config", str(cfg), "--out", str(root / "sim")]) == 0
    (data,) = (root / "sim").glob("*.csv")
    assert main(["train", "--config", str(cfg), "--data", str(data), "--out", str(root / "train")]) == 0
    return root, cfg, data


def test_simulate_writes_the_record_and_stamps(work):
    root, _, data = work
    rows = read_rows(data)
    assert rows[0] == ["time"] + [f"wg{i}" for i in range(1, 10)] + ["surge", "heave", "pitch"]
    assert len(rows) == 1 + 801 and all(len(r) == 13 for r in rows)
    assert data.with_suffix(".meta").exists()
    for d in ("sim", "train"):
        assert (root / d / "config.resolved").read_text().startswith("# wavecast")
        assert (root / d / "VERSION").read_text().strip() == f"wavecast {__version__}"


def test_simulate_with_same_seed_is_byte_identical(work, tmp_path):
    _, cfg, _ = work
    for d in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--seed", "7", "--out", str(tmp_path / d)]) == 0
    a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
    assert a == b and any(k.endswith("_seed7.csv") for k in a)


def test_unknown_config_key_exits_2_naming_it(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("wave.hs=0.1\nwave.tpp=2\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "wave.tpp" in capsys.readouterr().err


def test_invalid_physical_value_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("wave.hs=-0.1\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_missing_column_exits_3_naming_it(work, tmp_path, capsys):
    _, cfg, data = work
    rows = read_rows(data)
    cut = tmp_path / "nopitch.csv"
    cut.write_text("\n".join(",".join(r[:-1]) for r in rows) + "\n")
    assert main(["train", "--config", str(cfg), "--data", str(cut), "--out", str(tmp_path / "o")]) == 3
    assert "pitch" in capsys.readouterr().err


def test_missing_files_exit_3(work, tmp_path):
    _, cfg, data = work
    assert main(["train", "--config", str(cfg), "--data", str(tmp_path / "none.csv"), "--out", str(tmp_path / "o")]) == 3
    args = ["eval", "--config", str(cfg), "--data", str(data), "--checkpoint", str(tmp_path / "x.bin")]
    assert main(args + ["--out", str(tmp_path / "o")]) == 3


def test_damaged_checkpoint_exits_3(work, tmp_path):
    root, cfg, data = work
    broken = tmp_path / "broken.bin"
    broken.write_bytes((root / "train" / "checkpoint.bin").read_bytes()[:-16])
    args = ["eval", "--config", str(cfg), "--data", str(data), "--checkpoint", str(broken), "--out", str(tmp_path / "o")]
    assert main(args) == 3


def test_unstable_simulation_exits_4_and_reports_last_time(tmp_path, capsys):
    cfg = tmp_path / "stiff.cfg"
    cfg.write_text("sim.duration=20.0\nmooring.elastic_modulus=1e9\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4
    err = capsys.readouterr().err
    assert "numerical failure" in err and "after t=" in err
    # the stiff line fails while settling, before any row is recorded
    assert not list((tmp_path / "o").glob("*.csv"))


def test_train_outputs_and_rerun_is_byte_identical(work, tmp_path):
    root, cfg, data = work
    first = tree_bytes(root / "train")
    assert {"checkpoint.bin", "loss.csv", "report.json", "config.resolved", "VERSION"} <= first.keys()
    loss = read_rows(root / "train" / "loss.csv")
    assert loss[0] == ["epoch", "train_loss", "val_loss"] and loss[1][0] == "0"
    assert main(["train", "--config", str(cfg), "--data", str(data), "--out", str(tmp_path / "again")]) == 0
    assert tree_bytes(tmp_path / "again") == first


def test_eval_reproduces_the_training_report(work, tmp_path):
    root, cfg, data = work
    ck = root / "train" / "checkpoint.bin"
    out = tmp_path / "eval"
    assert main(["eval", "--config", str(cfg), "--data", str(data), "--checkpoint", str(ck), "--out", str(out)]) == 0
    trained = json.loads((root / "train" / "report.json").read_text())
    evaluated = json.loads((out / "report.json").read_text())
    for key in ("aggregate", "per_gauge", "per_horizon", "cumulative_abs_error", "fingerprint"):
        assert evaluated[key] == trained[key]
    base = json.loads((out / "persistence.json").read_text())
    assert base.keys() == evaluated.keys()
    assert [r[0] for r in read_rows(out / "comparison.csv")] == ["predictor", "model", "persistence"]
    pred = read_rows(out / "predictions.csv")
    assert pred[0] == ["window_index", "gauge", "step", "measured", "predicted"]
    assert {r[1] for r in pred[1:]} == {"wg6", "wg7", "wg8", "wg9"}

    heat = read_rows(out / "attention.csv")
    assert heat[0] == ["gauge", "surge", "heave", "pitch"]
    weights = np.array([[float(v) for v in r[1:]] for r in heat[1:]])
    assert weights.shape == (9, 3)
    assert np.allclose(weights.sum(axis=1), 1.0, atol=1e-9, rtol=0)

    again = tmp_path / "eval2"
    assert main(["eval", "--config", str(cfg), "--data", str(data), "--checkpoint", str(ck), "--out", str(again)]) == 0
    assert tree_bytes(again) == tree_bytes(out)


def test_eval_on_another_condition_needs_no_retraining(work, tmp_path):
    root, cfg, _ = work
    other_cfg = tmp_path / "other.cfg"
    other_cfg.write_text(SMALL + "wave.hs=0.12\nwave.tp=1.5\nbody.rw=0.8\n")
    assert main(["simulate", "--config", str(other_cfg), "--out", str(tmp_path / "sim")]) == 0
    (other,) = (tmp_path / "sim").glob("*.csv")
    assert other.name.startswith("hs0.12_tp1.5_rw0.8")
    ck = root / "train" / "checkpoint.bin"
    out = tmp_path / "eval"
    assert main(["eval", "--config", str(cfg), "--data", str(other), "--checkpoint", str(ck), "--out", str(out)]) == 0
    assert json.loads((out / "report.json").read_text())["provenance"]["evaluated_on"] == other.stem


def test_ablate_writes_four_rows(work, tmp_path):
    _, cfg, data = work
    assert main(["ablate", "--config", str(cfg), "--data", str(data), "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "comparison.csv")
    assert rows[0][:5] == ["configuration", "mse", "mae", "rmse", "mape"]
    assert [r[0] for r in rows[1:]] == ["e2eca", "ta-e2eca", "dbfm-e2eca", "full"]
    assert all((tmp_path / n / "checkpoint.bin").exists() for n in ("e2eca", "full"))


@pytest.mark.parametrize("axis,n", [("layers", 4), ("exo", 3)])
def test_sweep_row_counts(work, tmp_path, axis, n):
    _, cfg, data = work
    assert main(["sweep", "--config", str(cfg), "--data", str(data), "--axis", axis, "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "comparison.csv")
    assert len(rows) == 1 + n
    prints = {json.loads((tmp_path / r[0] / "report.json").read_text())["fingerprint"] for r in rows[1:]}
    assert len(prints) == n


def test_finetune_freezes_everything_but_the_head(work, tmp_path):
    root, cfg, data = work
    ck = root / "train" / "checkpoint.bin"
    out = tmp_path / "ft"
    assert main(["finetune", "--config", str(cfg), "--data", str(data), "--checkpoint", str(ck), "--out", str(out)]) == 0
    check = dict(line.split("=") for line in (out / "freeze_check.txt").read_text().split())
    assert check["frozen_bit_identical"] == "true" and check["head_changed"] == "true"
    before, after = Checkpoint.load(ck), Checkpoint.load(out / "checkpoint.bin")
    for k in before.params:
        same = before.params[k].tobytes() == after.params[k].tobytes()
        assert same != (k in HEAD_NAMES)


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "wavecast.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout
    bad = subprocess.run([sys.executable, "-m", "wavecast.cli", "frobnicate", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert bad.returncode == 2
