import numpy as np
import pytest
import torch
from torch import nn

from advexbridge.cli import export_dataset_main, export_weights_main, parity_check_main
from advexbridge.data import DATASET_NAMES, export_dataset
from advexbridge.export import ExportSpec, TORCH_ARCHS, UnsupportedLayerError, export_weights, torch_cnn, torch_mlp
from advexbridge.parity import parity_check

from advexplain.formats import load_labels, load_tensor
from advexplain.models import load_weights


def random_inputs(shape, n=10, seed=0):
    return np.random.default_rng(seed).uniform(0.0, 1.0, (n, *shape))


# ---------------------------------------------------------------------------
# weight export and parity (acceptance criterion 11)
# ---------------------------------------------------------------------------

def test_c11_mlp_parity_within_1e5(tmp_path):
    source = torch_mlp(seed=1)
    path = tmp_path / "mlp.axw1"
    export_weights(ExportSpec(source, path))
    worst = parity_check(source, path, random_inputs((64,), n=10, seed=1))
    assert worst <= 1e-5, f"max logit diff {worst:.2e}"


def test_c11_cnn_parity_within_1e5(tmp_path):
    source = torch_cnn(seed=2)
    path = tmp_path / "cnn.axw1"
    export_weights(ExportSpec(source, path))
    worst = parity_check(source, path, random_inputs((1, 8, 8), n=12, seed=2))
    assert worst <= 1e-5, f"max logit diff {worst:.2e}"


def test_c11_corrupted_file_detected(tmp_path):
    source = torch_mlp(seed=3)
    path = tmp_path / "mlp.axw1"
    export_weights(ExportSpec(source, path))
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF  # high byte of the last stored float
    bad = tmp_path / "corrupt.axw1"
    bad.write_bytes(bytes(raw))
    try:
        worst = parity_check(source, bad, random_inputs((64,), n=10, seed=3))
    except ValueError:
        return  # loader rejected the file: also a detection
    assert worst > 1e-5


def test_export_twice_is_byte_identical(tmp_path):
    source = torch_cnn(seed=4)
    a, b = tmp_path / "a.axw1", tmp_path / "b.axw1"
    export_weights(ExportSpec(source, a))
    export_weights(ExportSpec(source, b))
    assert a.read_bytes() == b.read_bytes()


def test_unsupported_layer_aborts_naming_the_layer(tmp_path):
    model = nn.Sequential(nn.Flatten(), nn.Linear(8, 8), nn.BatchNorm1d(8), nn.Linear(8, 2))
    with pytest.raises(UnsupportedLayerError, match="layer 2.*BatchNorm1d"):
        export_weights(ExportSpec(model, tmp_path / "x.axw1"))


def test_conv_with_padding_aborts(tmp_path):
    model = nn.Sequential(nn.Conv2d(1, 2, 3, padding=1), nn.Flatten(), nn.Linear(128, 2))
    with pytest.raises(UnsupportedLayerError, match="Conv2d"):
        export_weights(ExportSpec(model, tmp_path / "x.axw1"))


def test_embedding_layer_round_trips(tmp_path):
    torch.manual_seed(5)
    model = nn.Sequential(nn.Embedding(12, 4), nn.Flatten(), nn.Linear(24, 2))
    path = tmp_path / "text.axw1"
    export_weights(ExportSpec(model, path))
    loaded = load_weights(path)
    assert loaded.input_plane == "post_embedding"
    assert loaded.class_count == 2


def test_parity_requires_ten_inputs(tmp_path):
    source = torch_mlp(seed=6)
    path = tmp_path / "m.axw1"
    export_weights(ExportSpec(source, path))
    with pytest.raises(ValueError, match="at least 10"):
        parity_check(source, path, random_inputs((64,), n=4))


def test_parity_on_zero_inputs_is_finite(tmp_path):
    source = torch_mlp(seed=7)
    path = tmp_path / "m.axw1"
    export_weights(ExportSpec(source, path))
    worst = parity_check(source, path, np.zeros((10, 64)))
    assert np.isfinite(worst) and worst <= 1e-5


# ---------------------------------------------------------------------------
# dataset export
# ---------------------------------------------------------------------------

def test_digits_export_shape_and_range(tmp_path):
    batch_path, labels_path = export_dataset("digits8x8", tmp_path / "digits")
    batch = load_tensor(batch_path)
    labels = load_labels(labels_path)
    assert batch.shape[1:] == (1, 8, 8)
    assert batch.shape[0] == len(labels)
    assert 0.0 <= batch.data.min() and batch.data.max() <= 1.0


def test_two_moons_export_range(tmp_path):
    batch_path, labels_path = export_dataset("two-moons", tmp_path / "moons", seed=1)
    batch = load_tensor(batch_path)
    assert batch.shape == (400, 2)
    assert 0.0 <= batch.data.min() and batch.data.max() <= 1.0
    assert len(load_labels(labels_path)) == 400


def test_tiny_speech_grid_export(tmp_path):
    batch_path, labels_path = export_dataset("tiny-speech-grid", tmp_path / "speech")
    batch = load_tensor(batch_path)
    assert batch.shape[1:] == (1, 16, 16)
    assert 0.0 <= batch.data.min() and batch.data.max() <= 1.0
    assert set(load_labels(labels_path)) == {0, 1, 2}


def test_tiny_polarity_export_keeps_integral_ids(tmp_path):
    batch_path, labels_path = export_dataset("tiny-polarity", tmp_path / "pol")
    batch = load_tensor(batch_path)
    assert batch.shape[1:] == (8,)
    ids = batch.data
    assert np.array_equal(ids, np.rint(ids))
    assert ids.min() >= 0 and ids.max() < 24
    assert set(load_labels(labels_path)) == {0, 1}


def test_unknown_dataset_name_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown dataset"):
        export_dataset("imagenet", tmp_path)


def test_all_names_declared():
    assert DATASET_NAMES == ("digits8x8", "two-moons", "tiny-speech-grid", "tiny-polarity")


# ---------------------------------------------------------------------------
# command-line entry points and cross-package consumption
# ---------------------------------------------------------------------------

def test_export_weights_cli_and_parity_cli(tmp_path, capsys):
    out = tmp_path / "m.axw1"
    assert export_weights_main(["--arch", "cnn", "--seed", "9", "--out", str(out)]) == 0
    assert out.is_file()
    assert parity_check_main(["--arch", "cnn", "--seed", "9", "--axw1", str(out),
                              "--inputs", "10", "--tol", "1e-5"]) == 0
    assert "max_abs_logit_diff" in capsys.readouterr().out


def test_parity_cli_detects_corruption(tmp_path, capsys):
    out = tmp_path / "m.axw1"
    assert export_weights_main(["--arch", "mlp", "--seed", "11", "--out", str(out)]) == 0
    raw = bytearray(out.read_bytes())
    raw[-1] ^= 0xFF
    out.write_bytes(bytes(raw))
    code = parity_check_main(["--arch", "mlp", "--seed", "11", "--axw1", str(out),
                              "--inputs", "10", "--tol", "1e-5"])
    assert code in (1, 2)


def test_export_dataset_cli_unknown_name(tmp_path, capsys):
    assert export_dataset_main(["--name", "nope", "--out", str(tmp_path)]) == 2
    assert "unknown dataset" in capsys.readouterr().err


def test_exported_dataset_feeds_primary_cli(tmp_path):
    # wire-format round trip: bridge writes the dataset, the primary trains on it
    from advexplain.cli import main as primary_main
    data_dir = tmp_path / "digits"
    assert export_dataset_main(["--name", "digits8x8", "--out", str(data_dir)]) == 0
    out = tmp_path / "trained"
    code = primary_main(["train", "--arch", "mlp", "--dataset", str(data_dir),
                         "--epochs", "2", "--lr", "0.3", "--seed", "0", "--out", str(out)])
    assert code == 0
    assert (out / "model.axw1").is_file()


def test_exported_model_feeds_primary_explain(tmp_path):
    from advexplain.cli import main as primary_main
    from advexplain.formats import save_tensor
    from advexplain.tensor import Tensor

    model_path = tmp_path / "m.axw1"
    assert export_weights_main(["--arch", "cnn", "--seed", "3", "--out", str(model_path)]) == 0
    x = np.random.default_rng(0).uniform(0.0, 1.0, (1, 8, 8))
    x_path = tmp_path / "x.axt1"
    save_tensor(x_path, Tensor(x), dtype="f32")
    out = tmp_path / "expl"
    code = primary_main(["explain", "--model", str(model_path), "--input", str(x_path),
                         "--eps", "1.0", "--iters", "10", "--segmenter", "grid",
                         "--rows", "2", "--cols", "2", "--k", "2", "--out", str(out)])
    assert code == 0
    assert (out / "explanation.json").is_file()
