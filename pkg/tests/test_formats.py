import struct

import numpy as np
import pytest

from advexplain.formats import (
    AXT1_MAGIC, load_image, load_labels, load_tensor, save_image, save_labels, save_tensor,
)
from advexplain.tensor import Tensor


def test_axt1_round_trip_f64(tmp_path):
    t = Tensor(np.random.default_rng(0).normal(size=(2, 3, 4)))
    path = tmp_path / "t.axt1"
    save_tensor(path, t, dtype="f64")
    back = load_tensor(path)
    assert back.shape == t.shape
    assert np.array_equal(back.data, t.data)


def test_axt1_round_trip_f32_quantizes(tmp_path):
    t = Tensor(np.random.default_rng(1).normal(size=(5,)))
    path = tmp_path / "t.axt1"
    save_tensor(path, t, dtype="f32")
    back = load_tensor(path)
    assert np.array_equal(back.data, t.data.astype(np.float32).astype(np.float64))


def test_axt1_header_layout(tmp_path):
    path = tmp_path / "t.axt1"
    save_tensor(path, Tensor([[1.0, 2.0]]), dtype="f32")
    raw = path.read_bytes()
    assert raw[:4] == AXT1_MAGIC
    code, rank = struct.unpack_from("<BB", raw, 4)
    assert (code, rank) == (1, 2)
    assert struct.unpack_from("<2Q", raw, 6) == (1, 2)
    assert len(raw) == 6 + 16 + 2 * 4


def test_axt1_bad_magic(tmp_path):
    path = tmp_path / "bad.axt1"
    path.write_bytes(b"NOPE" + bytes(10))
    with pytest.raises(ValueError, match="not an AXT1"):
        load_tensor(path)


def test_axt1_truncated_payload(tmp_path):
    path = tmp_path / "t.axt1"
    save_tensor(path, Tensor([1.0, 2.0, 3.0]), dtype="f64")
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(ValueError, match="truncated"):
        load_tensor(path)


def test_axt1_unknown_dtype_code(tmp_path):
    path = tmp_path / "t.axt1"
    path.write_bytes(AXT1_MAGIC + struct.pack("<BB", 9, 1) + struct.pack("<Q", 1) + bytes(8))
    with pytest.raises(ValueError, match="dtype code"):
        load_tensor(path)


def test_pgm_round_trip(tmp_path):
    img = Tensor(np.linspace(0.0, 1.0, 12).reshape(3, 4))
    path = tmp_path / "img.pgm"
    save_image(path, img)
    back = load_image(path)
    assert back.shape == (1, 3, 4)
    assert np.max(np.abs(back.data[0] - img.data)) <= 0.5 / 255 + 1e-9


def test_ppm_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    img = Tensor(rng.uniform(0.0, 1.0, (3, 5, 6)))
    path = tmp_path / "img.ppm"
    save_image(path, img)
    back = load_image(path)
    assert back.shape == (3, 5, 6)
    assert np.max(np.abs(back.data - img.data)) <= 0.5 / 255 + 1e-9


def test_save_image_rejects_bad_shape(tmp_path):
    with pytest.raises(ValueError):
        save_image(tmp_path / "x.pgm", Tensor(np.zeros((2, 3, 3))))


def test_load_image_rejects_other_files(tmp_path):
    path = tmp_path / "x.ppm"
    path.write_bytes(b"GIF89a")
    with pytest.raises(ValueError, match="PGM/PPM"):
        load_image(path)


def test_labels_round_trip(tmp_path):
    path = tmp_path / "labels.csv"
    save_labels(path, [3, 1, 0, 2])
    assert load_labels(path) == [3, 1, 0, 2]
    assert path.read_text().startswith("index,label\n")


def test_labels_bad_header(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("a,b\n0,1\n")
    with pytest.raises(ValueError, match="header"):
        load_labels(path)
