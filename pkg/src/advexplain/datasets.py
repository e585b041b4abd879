"""Builtin desk-scale datasets, synthesized deterministically from a seed so
the repo trains and evaluates without downloads.
"""

from __future__ import annotations

import numpy as np

from .models import LabeledDataset
from .tensor import Tensor

__all__ = ["make_xor", "make_blobs", "make_digits", "make_textures", "make_spectro",
           "make_polarity", "builtin_dataset", "split_dataset", "BUILTIN_NAMES",
           "POLARITY_TOKENS", "POLARITY_VOCAB"]


def make_xor() -> LabeledDataset:
    points = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]
    labels = [0, 1, 1, 0]
    return LabeledDataset([Tensor(p) for p in points], labels, ["same", "different"])


def make_blobs(n: int = 200, seed: int = 0) -> LabeledDataset:
    rng = np.random.default_rng(seed)
    half = n // 2
    a = rng.normal(loc=(-1.5, -1.5), scale=0.6, size=(half, 2))
    b = rng.normal(loc=(1.5, 1.5), scale=0.6, size=(n - half, 2))
    inputs = [Tensor(row) for row in np.concatenate([a, b])]
    labels = [0] * half + [1] * (n - half)
    order = rng.permutation(n)
    return LabeledDataset([inputs[i] for i in order], [labels[i] for i in order],
                          ["low", "high"])


_DIGIT_CLASSES = ["bars", "pillar", "slash", "frame"]


def _digit_template(cls: int) -> np.ndarray:
    t = np.zeros((8, 8))
    if cls == 0:      # two horizontal bars
        t[2, 1:7] = 1.0
        t[5, 1:7] = 1.0
    elif cls == 1:    # vertical bar
        t[1:7, 3:5] = 1.0
    elif cls == 2:    # diagonal stroke
        for i in range(1, 7):
            t[i, i] = 1.0
            t[i, min(i + 1, 7)] = 0.7
    else:             # hollow frame
        t[1, 1:7] = 1.0
        t[6, 1:7] = 1.0
        t[1:7, 1] = 1.0
        t[1:7, 6] = 1.0
    return t


def make_digits(n: int = 400, seed: int = 0) -> LabeledDataset:
    """1x8x8 glyphs in four shape classes with shift, gain, and noise jitter."""
    rng = np.random.default_rng(seed)
    inputs, labels = [], []
    templates = [_digit_template(c) for c in range(4)]
    for i in range(n):
        cls = int(rng.integers(0, 4))
        img = templates[cls]
        img = np.roll(img, (int(rng.integers(-1, 2)), int(rng.integers(-1, 2))), axis=(0, 1))
        gain = rng.uniform(0.7, 1.0)
        noise = rng.uniform(0.0, 0.15, size=(8, 8))
        img = np.clip(img * gain + noise, 0.0, 1.0)
        inputs.append(Tensor(img[None]))
        labels.append(cls)
    return LabeledDataset(inputs, labels, _DIGIT_CLASSES)


_SPECTRO_CLASSES = ["low_early", "high_late", "mid_sweep"]


def make_spectro(n: int = 240, seed: int = 0, size: int = 16) -> LabeledDataset:
    """Toy 1xHxW spectrograms: a localized energy bump whose time-frequency
    position fixes the class, over a noisy floor."""
    rng = np.random.default_rng(seed)
    rows = np.arange(size)[:, None]
    cols = np.arange(size)[None, :]
    inputs, labels = [], []
    for i in range(n):
        cls = int(rng.integers(0, 3))
        if cls == 0:
            r0, c0 = size * 0.75, size * 0.2   # low frequency, early
        elif cls == 1:
            r0, c0 = size * 0.2, size * 0.75   # high frequency, late
        else:
            r0, c0 = size * 0.5, size * 0.5    # mid band
        r0 += rng.uniform(-1.0, 1.0)
        c0 += rng.uniform(-1.0, 1.0)
        bump = np.exp(-(((rows - r0) ** 2) + ((cols - c0) ** 2)) / (2 * 2.0 ** 2))
        if cls == 2:
            bump = bump + np.exp(-(((rows - r0) ** 2) + ((cols - c0 - 4) ** 2)) / (2 * 2.0 ** 2))
        img = np.clip(0.8 * bump + rng.uniform(0.0, 0.2, size=(size, size)), 0.0, 1.0)
        inputs.append(Tensor(img[None]))
        labels.append(cls)
    return LabeledDataset(inputs, labels, _SPECTRO_CLASSES)


_TEXTURE_CLASSES = ["horizontal", "vertical", "diag_down", "diag_up"]
_TEXTURE_DIRS = [(1.0, 0.0), (0.0, 1.0), (0.70710678, 0.70710678), (0.70710678, -0.70710678)]


def make_textures(n: int = 600, seed: int = 0, size: int = 16, patch: int = 8,
                  amplitude: float = 0.35, noise: float = 0.08) -> LabeledDataset:
    """1xHxW images with an oriented sinusoidal texture patch (random phase,
    one of four corner slots) on a noisy mid-gray background; the class is the
    patch orientation. Dense two-sided structure makes attack fields behave
    like they do on natural images."""
    rng = np.random.default_rng(seed)
    margin = size - patch - 1
    slots = [(1, 1), (1, margin), (margin, 1), (margin, margin)]
    freq = 2.0 * np.pi / 3.0
    rows, cols = np.meshgrid(np.arange(patch), np.arange(patch), indexing="ij")
    inputs, labels = [], []
    for i in range(n):
        cls = int(rng.integers(0, 4))
        img = np.clip(rng.normal(0.5, noise, (size, size)), 0.0, 1.0)
        r0, c0 = slots[int(rng.integers(0, 4))]
        a, b = _TEXTURE_DIRS[cls]
        wave = np.sin(freq * (a * rows + b * cols) + rng.uniform(0.0, 2.0 * np.pi))
        tex = 0.5 + amplitude * wave + rng.normal(0.0, 0.05, (patch, patch))
        img[r0 : r0 + patch, c0 : c0 + patch] = np.clip(tex, 0.0, 1.0)
        inputs.append(Tensor(img[None]))
        labels.append(cls)
    return LabeledDataset(inputs, labels, _TEXTURE_CLASSES)


POLARITY_TOKENS = 8
POLARITY_VOCAB = 24
_POSITIVE_IDS = (20, 21)
_NEGATIVE_IDS = (22, 23)


def make_polarity(n: int = 240, seed: int = 0) -> LabeledDataset:
    """Token sequences of neutral filler plus one sentiment word; the label is
    the word's polarity."""
    rng = np.random.default_rng(seed)
    inputs, labels = [], []
    for i in range(n):
        seq = rng.integers(1, 20, size=POLARITY_TOKENS).astype(np.float64)
        label = int(rng.integers(0, 2))
        word = _POSITIVE_IDS if label == 1 else _NEGATIVE_IDS
        seq[int(rng.integers(0, POLARITY_TOKENS))] = word[int(rng.integers(0, 2))]
        inputs.append(Tensor(seq))
        labels.append(label)
    return LabeledDataset(inputs, labels, ["negative", "positive"])


BUILTIN_NAMES = ("xor", "blobs", "digits8x8", "textures16", "spectro16", "polarity")


def builtin_dataset(name: str, seed: int = 0) -> LabeledDataset:
    if name == "xor":
        return make_xor()
    if name == "blobs":
        return make_blobs(seed=seed)
    if name == "digits8x8":
        return make_digits(seed=seed)
    if name == "textures16":
        return make_textures(seed=seed)
    if name == "spectro16":
        return make_spectro(seed=seed)
    if name == "polarity":
        return make_polarity(seed=seed)
    raise ValueError(f"unknown builtin dataset {name!r}; expected one of {BUILTIN_NAMES}")


def split_dataset(data: LabeledDataset, train_fraction: float = 0.75, seed: int = 0):
    """Deterministic shuffled train/test split."""
    n = len(data)
    order = np.random.default_rng(seed).permutation(n)
    cut = int(round(train_fraction * n))
    return data.subset(order[:cut]), data.subset(order[cut:])
