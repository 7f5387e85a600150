import csv
import struct

import numpy as np
import pytest

from amga.checkpoint import MAGIC, checkpoint_bytes, layers_from_bytes, load_checkpoint, save_checkpoint
from amga.cli import ABLATIONS, csv_columns, main, run_ablate, run_eval, run_train
from amga.config import Toggles, config_from_text, parse_config, preset_names
from amga.data import load_split, write_idx
from amga.engine import FFLayer, accuracy, build_layers, predict
from amga.errors import ConfigError, FormatError
from oracles import PlainFF

CONFIG = """\
name = "tiny"

[dataset]
name = "mnist"
dir = "{data}"

[model]
architecture = [784, 16, 12]

[training]
theta0 = 2.0
eta0 = 0.01
epochs = 4
batch_size = 25
seed = 9
eval_every = 2
"""


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("idx")
    rng = np.random.default_rng(0)
    for split, n in (("train", 60), ("t10k", 20)):
        px = rng.integers(0, 256, size=(n, 28, 28), dtype=np.uint8)
        write_idx(d / f"{split}-images-idx3-ubyte", d / f"{split}-labels-idx1-ubyte", px, rng.integers(0, 10, n))
    return d


@pytest.fixture
def config_file(tmp_path, data_dir):
    p = tmp_path / "tiny.toml"
    p.write_text(CONFIG.format(data=data_dir))
    return p


# --- config ---------------------------------------------------------------


def test_presets_shipped():
    assert {"mnist_amga", "mnist_baseline", "fashion_amga", "fashion_baseline"} <= set(preset_names())


def test_mnist_preset_values():
    c = parse_config("mnist_amga")
    assert (c.theta0, c.eta0, c.architecture, c.epochs) == (2.0, 0.04, (784, 600, 600, 500), 1500)
    assert c.batch_size == 50_000 and c.toggles == Toggles()


def test_fashion_preset_values():
    c = parse_config("fashion_amga")
    assert (c.theta0, c.eta0, c.architecture, c.epochs) == (2.5, 0.05, (784, 700, 700, 600), 2500)
    assert c.dataset == "fashion_mnist"


def test_baseline_presets_disable_all_components():
    for name in ("mnist_baseline", "fashion_baseline", "mnist_desk_baseline"):
        assert parse_config(name).toggles == Toggles.baseline()


def test_unknown_key_names_key_and_line(tmp_path):
    text = CONFIG.format(data="x").replace("seed = 9", "seed = 9\nsede = 3")
    with pytest.raises(ConfigError, match=r"training\.sede.*line 16"):
        config_from_text(text)
    with pytest.raises(ConfigError, match="bogus"):
        config_from_text("bogus = 1\n" + text)


def test_empty_architecture_rejected():
    with pytest.raises(ConfigError, match="architecture"):
        config_from_text(CONFIG.format(data="x").replace("[784, 16, 12]", "[]"))


@pytest.mark.parametrize(
    "old, new, match",
    [
        ("[784, 16, 12]", "[783, 16]", "784"),
        ("[784, 16, 12]", "[784, 0]", ">= 1"),
        ("epochs = 4", "epochs = 0", "epochs"),
        ("eta0 = 0.01", "eta0 = 'fast'", "eta0"),
        ("eta0 = 0.01\n", "", "eta0"),
        ("batch_size = 25", "batch_size = 0", "batch_size"),
    ],
)
def test_invalid_values(old, new, match):
    with pytest.raises(ConfigError, match=match):
        config_from_text(CONFIG.format(data="x").replace(old, new))


def test_seed_env_override(config_file, monkeypatch):
    monkeypatch.setenv("AMGA_SEED", "123")
    assert parse_config(config_file).seed == 123
    monkeypatch.setenv("AMGA_SEED", "abc")
    with pytest.raises(ConfigError):
        parse_config(config_file)


# --- checkpoint -----------------------------------------------------------


def _layers():
    return build_layers((784, 20, 10), np.random.default_rng(0))


def test_checkpoint_round_trip_bit_identical(tmp_path):
    layers = _layers()
    save_checkpoint(layers, tmp_path / "c.amga")
    back = load_checkpoint(tmp_path / "c.amga")
    for a, b in zip(layers, back):
        assert a.weights.tobytes() == b.weights.tobytes() and a.bias.tobytes() == b.bias.tobytes()
    x = np.random.default_rng(1).random((6, 784)).astype(np.float32)
    p1, p2 = predict(layers, x, 10), predict(back, x, 10)
    assert np.array_equal(p1.labels, p2.labels) and np.array_equal(p1.scores, p2.scores)


def test_checkpoint_layout():
    layer = FFLayer.from_params(np.array([[1.0, 2.0]], dtype=np.float32), np.array([0.5], dtype=np.float32), 0)
    raw = checkpoint_bytes([layer])
    assert raw == MAGIC + struct.pack("<IIII", 1, 1, 2, 1) + struct.pack("<3f", 1.0, 2.0, 0.5)


def test_checkpoint_errors():
    raw = checkpoint_bytes(_layers())
    for bad, match in (
        (raw[:-1], "truncated"),
        (raw[:5], "truncated"),
        (b"XXXX" + raw[4:], "magic"),
        (raw[:4] + struct.pack("<I", 2) + raw[8:], "version"),
        (raw + b"\0", "trailing"),
    ):
        with pytest.raises(FormatError, match=match):
            layers_from_bytes(bad)


def test_paper_architecture_checkpoint_accepts_784_inputs():
    layers = build_layers((784, 600, 600, 500), np.random.default_rng(0))
    back = layers_from_bytes(checkpoint_bytes(layers))
    assert [(la.in_dim, la.out_dim) for la in back] == [(784, 600), (600, 600), (600, 500)]
    assert predict(back, np.zeros((2, 784), dtype=np.float32), 10).labels.shape == (2,)


# --- runs -----------------------------------------------------------------


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_train_outputs(config_file, tmp_path):
    cfg = parse_config(config_file)
    summary = run_train(cfg, tmp_path / "run")
    rows = _read_csv(tmp_path / "run" / "metrics.csv")
    assert list(rows[0].keys()) == csv_columns(cfg)
    assert len(rows) == 4
    assert rows[0]["test_acc"] == "" and rows[1]["test_acc"] != "" and rows[-1]["test_acc"] != ""
    assert all(0.6 <= float(r["selected_fraction"]) <= 1.0 for r in rows)
    assert float(rows[-1]["test_acc"]) == summary.test_acc
    assert load_checkpoint(tmp_path / "run" / "checkpoint.amga")[1].out_dim == 12


def test_csv_columns_depend_on_config_only(config_file):
    cfg = parse_config(config_file)
    assert csv_columns(cfg) == csv_columns(cfg.with_toggles(curriculum=False))
    assert len(csv_columns(cfg.replace(architecture=(784, 5, 5, 5)))) == len(csv_columns(cfg)) + 4


def test_run_train_deterministic(config_file, tmp_path):
    cfg = parse_config(config_file)
    run_train(cfg, tmp_path / "a")
    run_train(cfg, tmp_path / "b")

    def strip(path):
        return [{k: v for k, v in r.items() if k != "wall_seconds"} for r in _read_csv(path)]

    assert strip(tmp_path / "a" / "metrics.csv") == strip(tmp_path / "b" / "metrics.csv")
    assert (tmp_path / "a" / "checkpoint.amga").read_bytes() == (tmp_path / "b" / "checkpoint.amga").read_bytes()


def test_baseline_run_matches_plain_reference_accuracy(config_file, data_dir, tmp_path):
    cfg = parse_config(config_file).replace(toggles=Toggles.baseline())
    summary = run_train(cfg, tmp_path / "base")
    train_data, test_data = load_split(data_dir, "train"), load_split(data_dir, "test")
    ref = PlainFF(cfg.architecture, cfg.theta0, cfg.eta0, cfg.seed)
    for _ in range(cfg.epochs):
        ref.epoch(train_data.images, train_data.labels, 10, cfg.batch_size)
    layers = [FFLayer.from_params(w, b, i) for i, (w, b) in enumerate(zip(ref.W, ref.b))]
    assert abs(accuracy(layers, test_data, cfg) - summary.test_acc) <= 1e-6


def test_ablate_rows_and_deltas(config_file, tmp_path):
    cfg = parse_config(config_file).replace(epochs=2)
    rows = run_ablate(cfg, tmp_path / "abl")
    table = _read_csv(tmp_path / "abl" / "ablation.csv")
    assert [r["variant"] for r in table] == list(ABLATIONS) == [
        "full", "no_multiscale", "no_curriculum", "no_adaptive_threshold", "no_lr_schedule",
    ]
    full = float(table[0]["test_acc"])
    for r in table:
        assert float(r["delta"]) == full - float(r["test_acc"])
    no_ms = run_train(cfg.with_toggles(multiscale=False), tmp_path / "single")
    assert rows[1]["test_acc"] == no_ms.test_acc


# --- command line ---------------------------------------------------------


def test_main_train_and_eval(config_file, data_dir, tmp_path, capsys):
    out = tmp_path / "cli"
    assert main(["train", "--config", str(config_file), "--out-dir", str(out)]) == 0
    ckpt = out / "checkpoint.amga"
    before = ckpt.read_bytes()
    mtime = ckpt.stat().st_mtime_ns
    assert main(["eval", "--checkpoint", str(ckpt), "--data", str(data_dir), "--config", str(config_file)]) == 0
    assert "accuracy" in capsys.readouterr().out
    assert ckpt.read_bytes() == before and ckpt.stat().st_mtime_ns == mtime
    acc = run_eval(ckpt, data_dir, parse_config(config_file))
    assert 0.0 <= acc <= 1.0


def test_exit_codes(config_file, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 1

    bad = tmp_path / "bad.toml"
    bad.write_text(config_file.read_text().replace("seed = 9", "colour = 1"))
    assert main(["train", "--config", str(bad)]) == 1
    assert main(["train", "--config", "no_such_preset"]) == 1

    missing = tmp_path / "missing.toml"
    missing.write_text(config_file.read_text().replace('dir = "', 'dir = "/nonexistent'))
    assert main(["train", "--config", str(missing), "--out-dir", str(tmp_path / "m")]) == 2

    junk = tmp_path / "junk.amga"
    junk.write_bytes(b"nope")
    assert main(["eval", "--checkpoint", str(junk), "--data", str(tmp_path)]) == 2

    huge = tmp_path / "huge.toml"
    huge.write_text(config_file.read_text().replace("eta0 = 0.01", "eta0 = 1e300").replace("theta0 = 2.0", "theta0 = 1e300"))
    assert main(["train", "--config", str(huge), "--out-dir", str(tmp_path / "h")]) == 3
    assert "numeric" in capsys.readouterr().err
