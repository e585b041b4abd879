"""Binary interchange formats: AXT1 tensors, PGM/PPM images, label CSVs.

AXT1 layout: magic b"AXT1" | u8 dtype code (1=f32, 2=f64) | u8 rank |
rank x u64 little-endian dims | little-endian element payload.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .tensor import Tensor

AXT1_MAGIC = b"AXT1"
DTYPE_F32 = 1
DTYPE_F64 = 2
_DTYPE_TO_NP = {DTYPE_F32: np.dtype("<f4"), DTYPE_F64: np.dtype("<f8")}


def save_tensor(path, t: Tensor, dtype: str = "f32") -> None:
    """Write a tensor as AXT1. dtype is "f32" or "f64"."""
    code = {"f32": DTYPE_F32, "f64": DTYPE_F64}.get(dtype)
    if code is None:
        raise ValueError(f"unknown dtype {dtype!r}, expected f32 or f64")
    a = t.data
    header = AXT1_MAGIC + struct.pack("<BB", code, a.ndim)
    header += struct.pack(f"<{a.ndim}Q", *a.shape)
    payload = np.ascontiguousarray(a, dtype=_DTYPE_TO_NP[code]).tobytes()
    Path(path).write_bytes(header + payload)


def load_tensor(path) -> Tensor:
    """Read an AXT1 file back into a float64 tensor."""
    raw = Path(path).read_bytes()
    if len(raw) < 6 or raw[:4] != AXT1_MAGIC:
        raise ValueError(f"not an AXT1 file: {path}")
    code, rank = struct.unpack_from("<BB", raw, 4)
    np_dtype = _DTYPE_TO_NP.get(code)
    if np_dtype is None:
        raise ValueError(f"unknown AXT1 dtype code {code} in {path}")
    dims = struct.unpack_from(f"<{rank}Q", raw, 6)
    offset = 6 + 8 * rank
    count = int(np.prod(dims)) if rank else 1
    expected = offset + count * np_dtype.itemsize
    if len(raw) != expected:
        raise ValueError(f"truncated AXT1 payload in {path}: {len(raw)} != {expected} bytes")
    a = np.frombuffer(raw, dtype=np_dtype, count=count, offset=offset)
    return Tensor(a.astype(np.float64).reshape(dims))


def save_image(path, t: Tensor) -> None:
    """Write a (H,W) tensor as binary PGM or a (3,H,W) tensor as binary PPM.

    Values are clipped to [0,1] and quantized to maxval 255.
    """
    a = t.data
    if a.ndim == 3 and a.shape[0] == 1:
        a = a[0]
    q = np.clip(np.rint(np.clip(a, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    if q.ndim == 2:
        h, w = q.shape
        Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + q.tobytes())
    elif q.ndim == 3 and q.shape[0] == 3:
        _, h, w = q.shape
        interleaved = np.ascontiguousarray(np.moveaxis(q, 0, 2))
        Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + interleaved.tobytes())
    else:
        raise ValueError(f"cannot render shape {t.shape} as PGM/PPM")


def load_image(path) -> Tensor:
    """Read a binary PGM (P5) or PPM (P6) into [0,1] with shape (1,H,W) or (3,H,W)."""
    raw = Path(path).read_bytes()
    magic = raw[:2]
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"not a binary PGM/PPM file: {path}")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(raw[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    channels = 1 if magic == b"P5" else 3
    pixels = np.frombuffer(raw, dtype=np.uint8, count=h * w * channels, offset=pos)
    a = pixels.astype(np.float64).reshape(h, w, channels) / float(maxval)
    return Tensor(np.moveaxis(a, 2, 0))


def save_labels(path, labels, class_names=None) -> None:
    """Write the `index,label` CSV aligned to a dataset batch."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["index", "label"])
        for i, y in enumerate(labels):
            writer.writerow([i, int(y)])
    if class_names is not None:
        names_path = Path(path).with_suffix(".names.csv")
        with open(names_path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["label", "name"])
            for i, name in enumerate(class_names):
                writer.writerow([i, name])


def load_labels(path) -> list[int]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][:2] != ["index", "label"]:
        raise ValueError(f"bad labels CSV header in {path}")
    labels = [0] * (len(rows) - 1)
    for row in rows[1:]:
        labels[int(row[0])] = int(row[1])
    return labels
