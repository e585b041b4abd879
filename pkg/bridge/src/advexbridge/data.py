"""Standard small datasets exported as AXT1 batches plus label CSVs, in the
directory layout the primary CLI consumes (inputs.axt1 + labels.csv).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits, make_moons

from advexplain.formats import save_labels, save_tensor
from advexplain.tensor import Tensor

DATASET_NAMES = ("digits8x8", "two-moons", "tiny-speech-grid", "tiny-polarity")


def _digits():
    bunch = load_digits()
    images = bunch.images.astype(np.float64) / 16.0  # (n, 8, 8) in [0, 1]
    return images[:, None, :, :], bunch.target.astype(int)


def _two_moons(seed: int):
    x, y = make_moons(n_samples=400, noise=0.15, random_state=seed)
    lo, hi = x.min(axis=0), x.max(axis=0)
    return (x - lo) / (hi - lo), y.astype(int)


def _tiny_speech_grid(seed: int, n: int = 240, size: int = 16):
    # spectrogram-like grids: one energy ridge whose time-frequency placement
    # fixes the spoken-command class
    rng = np.random.default_rng(seed)
    rows = np.arange(size)[:, None]
    cols = np.arange(size)[None, :]
    batch = np.zeros((n, 1, size, size))
    labels = np.zeros(n, dtype=int)
    anchors = [(0.75, 0.2), (0.2, 0.75), (0.5, 0.5)]
    for i in range(n):
        cls = int(rng.integers(0, 3))
        r0 = anchors[cls][0] * size + rng.uniform(-1.0, 1.0)
        c0 = anchors[cls][1] * size + rng.uniform(-1.0, 1.0)
        bump = np.exp(-(((rows - r0) ** 2) + ((cols - c0) ** 2)) / 8.0)
        batch[i, 0] = np.clip(0.8 * bump + rng.uniform(0.0, 0.2, (size, size)), 0.0, 1.0)
        labels[i] = cls
    return batch, labels


def _tiny_polarity(seed: int, n: int = 240, tokens: int = 8, vocab: int = 24):
    # token ids stay integral (the embedding lookup needs them); sentiment
    # words 20-21 positive, 22-23 negative, filler 1-19
    rng = np.random.default_rng(seed)
    batch = np.zeros((n, tokens))
    labels = np.zeros(n, dtype=int)
    for i in range(n):
        seq = rng.integers(1, 20, size=tokens).astype(np.float64)
        label = int(rng.integers(0, 2))
        word = (20, 21) if label == 1 else (22, 23)
        seq[int(rng.integers(0, tokens))] = word[int(rng.integers(0, 2))]
        batch[i] = seq
        labels[i] = label
    return batch, labels


def export_dataset(name: str, out_dir, seed: int = 0) -> tuple[Path, Path]:
    """Write inputs.axt1 and labels.csv for one of the known datasets."""
    if name == "digits8x8":
        batch, labels = _digits()
    elif name == "two-moons":
        batch, labels = _two_moons(seed)
    elif name == "tiny-speech-grid":
        batch, labels = _tiny_speech_grid(seed)
    elif name == "tiny-polarity":
        batch, labels = _tiny_polarity(seed)
    else:
        raise ValueError(f"unknown dataset {name!r}; expected one of {DATASET_NAMES}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    batch_path, labels_path = out / "inputs.axt1", out / "labels.csv"
    save_tensor(batch_path, Tensor(batch), dtype="f32")
    save_labels(labels_path, labels)
    return batch_path, labels_path
