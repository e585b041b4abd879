"""Segment maps over input extents: QuickShift mode seeking for images,
rectangular grids for spectrograms, per-token rows for embeddings.

QuickShift embeds each pixel as (lam*r, lam*g, lam*b, row, col), estimates a
Parzen density with a Gaussian kernel of width sigma over a window of radius
ceil(3*sigma), then links every pixel to its nearest strictly-higher-density
neighbor within feature distance tau. Link trees are the segments.

Tie rules (part of the definition, mirrored by the test oracle): a pixel with
no strictly denser neighbor in range is a root; among equally distant denser
neighbors the first in row-major scan order wins; segment ids are assigned in
scan order of each tree's first pixel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor

__all__ = ["SegmentMap", "QuickShiftParams", "quickshift", "grid_segments", "token_segments",
           "default_quickshift_params"]


@dataclass
class SegmentMap:
    labels: np.ndarray  # integer labels over the spatial extent
    p: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        present = np.unique(self.labels)
        if self.p <= 0 or present[0] != 0 or present[-1] != self.p - 1 or len(present) != self.p:
            raise ValueError("labels must cover consecutive ids 0..p-1 with no empty segment")

    @property
    def extent(self) -> tuple[int, ...]:
        return self.labels.shape

    def to_tensor(self) -> Tensor:
        """Integer-valued tensor for AXT1 serialization."""
        return Tensor(self.labels.astype(np.float64))


@dataclass
class QuickShiftParams:
    ratio: float = 0.2       # color-space weight, in (0, 1]
    kernel_size: float = 4.0  # Parzen kernel width
    max_dist: float = 200.0   # link length bound in the 5-D embedding

    def __post_init__(self):
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError("ratio must be in (0, 1]")
        if self.kernel_size <= 0 or self.max_dist <= 0:
            raise ValueError("kernel_size and max_dist must be > 0")


def default_quickshift_params(height: int, width: int) -> QuickShiftParams:
    """LIME-style defaults; small kernels for low-resolution inputs."""
    sigma = 4.0 if min(height, width) >= 64 else 1.0
    return QuickShiftParams(ratio=0.2, kernel_size=sigma, max_dist=200.0)


def _pair_sq_dist(ca, cb, dr: int, dc: int, lam2: float):
    """Canonical squared 5-D distance; the oracle uses the same expression so
    exact ties reproduce."""
    d0 = ca[0] - cb[0]
    d1 = ca[1] - cb[1]
    d2 = ca[2] - cb[2]
    color = (d0 * d0 + d1 * d1) + d2 * d2
    return lam2 * color + float(dr * dr + dc * dc)


def quickshift(image: Tensor, params: QuickShiftParams) -> SegmentMap:
    img = image.data
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"quickshift expects a (3,H,W) image, got {image.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("channel values must lie in [0, 1]")
    _, h, w = img.shape
    lam2 = params.ratio * params.ratio
    two_sigma_sq = 2.0 * params.kernel_size * params.kernel_size
    tau_sq = params.max_dist * params.max_dist

    def offset_slices(dr, dc):
        # overlap of the image with itself shifted by (dr, dc)
        r0, r1 = max(0, -dr), min(h, h - dr)
        c0, c1 = max(0, -dc), min(w, w - dc)
        if r0 >= r1 or c0 >= c1:
            return None
        here = (slice(r0, r1), slice(c0, c1))
        there = (slice(r0 + dr, r1 + dr), slice(c0 + dc, c1 + dc))
        return here, there

    # Parzen density, accumulated per offset in row-major order so that the
    # per-pixel term sequence matches a direct scan-order summation exactly.
    wd = math.ceil(3.0 * params.kernel_size)
    density = np.zeros((h, w))
    for dr in range(-wd, wd + 1):
        for dc in range(-wd, wd + 1):
            sl = offset_slices(dr, dc)
            if sl is None:
                continue
            here, there = sl
            d_sq = _pair_sq_dist(
                img[(slice(None),) + here], img[(slice(None),) + there], dr, dc, lam2
            )
            density[here] += np.exp(-d_sq / two_sigma_sq)

    # Link each pixel to its nearest strictly denser neighbor within tau.
    wl = min(math.ceil(params.max_dist), max(h, w) - 1) if max(h, w) > 1 else 0
    best_sq = np.full((h, w), np.inf)
    parent = np.full((h, w), -1, dtype=np.int64)  # flat index, -1 for roots
    flat_index = np.arange(h * w, dtype=np.int64).reshape(h, w)
    for dr in range(-wl, wl + 1):
        for dc in range(-wl, wl + 1):
            if dr == 0 and dc == 0:
                continue
            sl = offset_slices(dr, dc)
            if sl is None:
                continue
            here, there = sl
            d_sq = _pair_sq_dist(
                img[(slice(None),) + here], img[(slice(None),) + there], dr, dc, lam2
            )
            better = (
                (density[there] > density[here])
                & (d_sq <= tau_sq)
                & (d_sq < best_sq[here])
            )
            best_sq[here][better] = d_sq[better]
            parent[here][better] = flat_index[there][better]

    return SegmentMap(*_label_forest(parent.ravel(), (h, w)))


def _label_forest(parent_flat: np.ndarray, shape) -> tuple[np.ndarray, int]:
    """Label connected parent-pointer trees, ids in scan order of first pixel."""
    n = parent_flat.size
    root = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        chain = []
        j = i
        while root[j] < 0:
            chain.append(j)
            if parent_flat[j] < 0:
                root[j] = j
                break
            j = parent_flat[j]
        r = root[j]
        for k in chain:
            root[k] = r
    label_of_root: dict[int, int] = {}
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        r = int(root[i])
        if r not in label_of_root:
            label_of_root[r] = len(label_of_root)
        labels[i] = label_of_root[r]
    return labels.reshape(shape), len(label_of_root)


def grid_segments(height: int, width: int, rows: int, cols: int) -> SegmentMap:
    """rows x cols rectangular blocks; the last row/column of blocks absorbs
    any remainder."""
    if min(height, width, rows, cols) < 1:
        raise ValueError("all grid dimensions must be positive")
    if rows > height or cols > width:
        raise ValueError(f"grid {rows}x{cols} exceeds extent {height}x{width}")
    bh, bw = height // rows, width // cols
    r_idx = np.minimum(np.arange(height) // bh, rows - 1)
    c_idx = np.minimum(np.arange(width) // bw, cols - 1)
    labels = r_idx[:, None] * cols + c_idx[None, :]
    return SegmentMap(labels, rows * cols)


def token_segments(tokens: int, embed_dim: int) -> SegmentMap:
    """One segment per token row of the embedding matrix."""
    if tokens < 1 or embed_dim < 1:
        raise ValueError("tokens and embed_dim must be >= 1")
    labels = np.repeat(np.arange(tokens, dtype=np.int64)[:, None], embed_dim, axis=1)
    return SegmentMap(labels, tokens)
