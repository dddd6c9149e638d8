import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from backdoorlab.cli import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from backdoorlab.config import (
    DatasetConfig,
    ExperimentConfig,
    TargetConfig,
    load_config,
    parse_config,
    serialize_config,
)
from backdoorlab.backdoor import PoisonRecord, poison_count
from backdoorlab.data import LabeledDataset, export_idx, load_mnist
from backdoorlab.errors import ConfigError
from backdoorlab.experiment.training import TrainConfig


@pytest.fixture(scope="module")
def tiny_idx(tmp_path_factory):
    root = tmp_path_factory.mktemp("idx")
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(10), 8)
    images = rng.integers(0, 60, (80, 28, 28, 1), dtype=np.uint8)
    for i, l in enumerate(labels):  # a class-dependent bright row makes the task learnable
        images[i, 2 + 2 * l, 4:24] = 230
    export_idx(LabeledDataset(images, labels, 10), root, "train")
    export_idx(LabeledDataset(images[::4], labels[::4], 10), root, "t10k")
    return root


def _write_config(tmp_path, idx_root, fraction=0.3, extra=""):
    text = f"""
schema_version = 1
name = "tiny"
seed = 3
architecture = "mnist_cnn"

[dataset]
kind = "idx"
train_images = "{idx_root}/train-images-idx3-ubyte"
train_labels = "{idx_root}/train-labels-idx1-ubyte"
test_images = "{idx_root}/t10k-images-idx3-ubyte"
test_labels = "{idx_root}/t10k-labels-idx1-ubyte"

[train]
epochs = 1
batch_size = 16

[poison]
fraction = {fraction}

[[poison.targets]]
target = 2
kind = "ramp"
delta = 30

[eval]
deltas_ts = [0, 30, 60]
topk = 3

[arch_options]
conv_widths = [4, 4]
dense_width = 16
{extra}
"""
    path = tmp_path / "exp.toml"
    path.write_text(text)
    return path


def _config():
    return ExperimentConfig(
        name="demo",
        dataset=DatasetConfig(kind="synthetic", per_class=10, test_per_class=5, num_classes=5),
        architecture="lenet5",
        seed=4,
        train=TrainConfig(epochs=3),
        fraction=0.4,
        targets=(TargetConfig(1, "ramp", 30.0), TargetConfig(3, "sinusoid", 20.0, 6)),
        deltas_ts=(0.0, 30.0),
        topk=3,
        arch_options={"conv_widths": (4, 8)},
    )


def test_config_round_trip():
    cfg = _config()
    assert parse_config(serialize_config(cfg)) == cfg
    text = serialize_config(cfg)
    assert serialize_config(parse_config(text)) == text


def test_config_rejects_bad_values():
    base = serialize_config(_config())
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(base.replace("schema_version = 1", "schema_version = 9"))
    with pytest.raises(ConfigError, match="fraction"):
        parse_config(base.replace("fraction = 0.4", "fraction = 1.4"))
    with pytest.raises(ConfigError, match="deltas_ts"):
        parse_config(base.replace("deltas_ts = [\n    0.0,\n    30.0,\n]", "deltas_ts = []"))
    with pytest.raises(ConfigError, match="unknown"):
        parse_config(base + "\n[extra]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config("not = [valid")
    with pytest.raises(ConfigError, match="distinct"):
        replace(_config(), targets=(TargetConfig(1), TargetConfig(1)))


def test_config_paths_must_exist(tmp_path):
    path = _write_config(tmp_path, tmp_path / "nowhere")
    with pytest.raises(ConfigError, match="do not exist"):
        load_config(path)
    assert main(["train", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_seed_override_reaches_training():
    cfg = _config().with_seed(11)
    assert cfg.seed == 11 and cfg.train.seed == 11 and cfg.plan().seed == 11


def test_poison_writes_reloadable_export(tmp_path, tiny_idx):
    cfg_path = _write_config(tmp_path, tiny_idx)
    assert main(["poison", "--config", str(cfg_path), "--out", str(tmp_path / "out")]) == EXIT_OK
    exp = tmp_path / "out" / "tiny"
    record = PoisonRecord.from_json((exp / "poison_record.json").read_text())
    clean = load_mnist(tiny_idx / "train-images-idx3-ubyte", tiny_idx / "train-labels-idx1-ubyte")
    assert record.indices[2].size == poison_count(0.3, 8)
    back = load_mnist(exp / "poisoned" / "train-images-idx3-ubyte", exp / "poisoned" / "train-labels-idx1-ubyte")
    assert back.labels.tobytes() == clean.labels.tobytes()
    changed = np.flatnonzero((back.images != clean.images).any(axis=(1, 2, 3)))
    np.testing.assert_array_equal(changed, record.indices[2])
    assert parse_config((exp / "config.toml").read_text()) == load_config(cfg_path)


def test_poison_alpha_zero_is_byte_identical(tmp_path, tiny_idx):
    cfg_path = _write_config(tmp_path, tiny_idx, fraction=0.0)
    assert main(["poison", "--config", str(cfg_path), "--out", str(tmp_path)]) == EXIT_OK
    for part in ("images-idx3", "labels-idx1"):
        exported = (tmp_path / "tiny" / "poisoned" / f"train-{part}-ubyte").read_bytes()
        assert exported == (tiny_idx / f"train-{part}-ubyte").read_bytes()


def test_train_eval_render_pipeline_is_idempotent(tmp_path, tiny_idx):
    cfg_path = _write_config(tmp_path, tiny_idx)
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["train", "--config", str(cfg_path), "--out", str(out)]) == EXIT_OK
        assert main(["eval", "--config", str(cfg_path), "--out", str(out)]) == EXIT_OK
        exp = out / "tiny"
        names = ["config.toml", "poison_record.json", "checkpoint.bin", "history.csv", "report.json",
                 "report.csv", "summary.txt"]
        for name in names:
            assert (exp / name).exists(), name
        outputs.append({n: (exp / n).read_bytes() for n in names})
    assert outputs[0] == outputs[1]

    exp = tmp_path / "a" / "tiny"
    report = json.loads((exp / "report.json").read_text())
    assert [r["delta_ts"] for r in report["reports"]] == [0.0, 30.0, 60.0]
    assert sum(map(sum, report["confusion"])) == 20
    assert "target 2" in (exp / "summary.txt").read_text()

    assert main(["render", "--report", str(exp / "report.json"), "--delta-ts", "30"]) == EXIT_OK
    svg = (exp / "render.svg").read_text()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert "clean accuracy" in (exp / "render.txt").read_text()


def test_eval_without_checkpoint_is_config_error(tmp_path, tiny_idx):
    cfg_path = _write_config(tmp_path, tiny_idx)
    assert main(["eval", "--config", str(cfg_path), "--out", str(tmp_path / "empty")]) == EXIT_CONFIG


def test_corrupt_idx_is_data_error(tmp_path, tiny_idx):
    bad = tmp_path / "bad"
    bad.mkdir()
    for f in Path(tiny_idx).iterdir():
        (bad / f.name).write_bytes(f.read_bytes())
    data = (bad / "train-images-idx3-ubyte").read_bytes()
    (bad / "train-images-idx3-ubyte").write_bytes(data[:-100])
    cfg_path = _write_config(tmp_path, bad)
    assert main(["poison", "--config", str(cfg_path), "--out", str(tmp_path)]) == EXIT_DATA


def test_sweep_writes_grid(tmp_path, tiny_idx):
    extra = "\n[sweep]\ntargets = [2]\nfractions = [0.0, 0.5]\ndeltas_tr = [30]\n"
    cfg_path = _write_config(tmp_path, tiny_idx, extra=extra)
    assert main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path)]) == EXIT_OK
    exp = tmp_path / "tiny"
    grid = (exp / "grid_t2_dtr30.csv").read_text().splitlines()
    assert grid[0] == "alpha,0,30,60"
    assert [line.split(",")[0] for line in grid[1:]] == ["0", "0.5"]
    assert (exp / "cells" / "t2_a0.5_dtr30" / "checkpoint.bin").exists()
    assert len((exp / "sweep.csv").read_text().splitlines()) == 1 + 2 * 3


def test_sweep_worker_count_does_not_change_results(tmp_path, tiny_idx):
    extra = "\n[sweep]\nfractions = [0.0, 0.5]\n"
    cfg_path = _write_config(tmp_path, tiny_idx, extra=extra)
    assert main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "w1")]) == EXIT_OK
    assert main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "w2"), "--workers", "2"]) == EXIT_OK
    a = (tmp_path / "w1" / "tiny" / "sweep.csv").read_bytes()
    b = (tmp_path / "w2" / "tiny" / "sweep.csv").read_bytes()
    assert a == b


def test_gradcheck_exit_codes(capsys):
    assert main(["gradcheck", "--arch", "lenet5", "--seeds", "1"]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out
    assert main(["gradcheck", "--arch", "lenet5", "--seeds", "1", "--corrupt"]) == EXIT_CHECK_FAILED
    assert "FAIL" in capsys.readouterr().out


def test_missing_config_flag():
    assert main(["train"]) == EXIT_CONFIG
