"""End-to-end explanation pipeline: attack the input, flag the perturbation
field's two alpha-tails, map flags onto segments, rank segments by flagged
density, keep the top K.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackConfig, pgd_l2
from .models import DifferentiableModel, plane_value, predict
from .segment import SegmentMap, QuickShiftParams, grid_segments, quickshift, token_segments
from .stats import quantile
from .tensor import Tensor

__all__ = ["ExplainConfig", "Explanation", "threshold_diff", "segment_density", "top_k",
           "explain", "render_mask"]

DEFAULT_ALPHA = 15.0
DEFAULT_K = 10


@dataclass
class ExplainConfig:
    attack: AttackConfig
    alpha: float = DEFAULT_ALPHA
    k: int = DEFAULT_K
    segmenter: str = "quickshift"          # quickshift | grid | tokens
    segmenter_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.alpha = float(self.alpha)
        self.k = int(self.k)
        if not 0.0 <= self.alpha <= 50.0:
            raise ValueError("alpha must be in [0, 50]")
        if self.k < 1:
            raise ValueError("K must be >= 1")
        if self.segmenter not in ("quickshift", "grid", "tokens"):
            raise ValueError(f"unknown segmenter {self.segmenter!r}")


@dataclass
class Explanation:
    ranked: list              # (segment_id, density), density descending
    alpha: float
    k: int
    flag_map: Tensor          # 0/1 over the attack plane
    mask: Tensor              # input with non-top-K segments zeroed
    segments: SegmentMap
    diff: Tensor
    label: int
    predicted: int


def threshold_diff(diff: Tensor, alpha: float) -> Tensor:
    """Flag elements in the two alpha-percent tails of the signed diff values.

    alpha = 0 flags nothing; alpha = 50 flags everything (the tails meet at
    the median). Quantiles are linear-interpolation order statistics of this
    input's own diff.
    """
    if not 0.0 <= alpha <= 50.0:
        raise ValueError("alpha must be in [0, 50]")
    values = diff.data
    if alpha == 0.0:
        return Tensor(np.zeros(values.shape))
    flat = values.ravel().tolist()
    if np.min(values) == np.max(values):
        raise ValueError("degenerate attack distribution")
    q_lo = quantile(flat, alpha / 100.0)
    q_hi = quantile(flat, 1.0 - alpha / 100.0)
    flags = (values <= q_lo) | (values >= q_hi)
    return Tensor(flags.astype(np.float64))


def _flags_per_position(flags, extent):
    """Collapse an optional leading channel axis; returns (per-position counts,
    channel multiplicity)."""
    a = flags.data if isinstance(flags, Tensor) else np.asarray(flags)
    a = a.astype(np.float64)
    if a.shape == tuple(extent):
        return a, 1
    if a.ndim == len(extent) + 1 and a.shape[1:] == tuple(extent):
        return a.sum(axis=0), a.shape[0]
    raise ValueError(f"flag extent {a.shape} does not match segment extent {tuple(extent)}")


def segment_density(flags, seg: SegmentMap) -> list[float]:
    """Fraction of each segment's elements that are flagged."""
    per_pos, channels = _flags_per_position(flags, seg.extent)
    labels = seg.labels.ravel()
    flagged = np.bincount(labels, weights=per_pos.ravel(), minlength=seg.p)
    cardinality = np.bincount(labels, minlength=seg.p) * channels
    return (flagged / cardinality).tolist()


def top_k(densities, k: int) -> list[int]:
    """Ids of the k largest densities, descending; ties go to the lower id."""
    if k < 1:
        raise ValueError("K must be >= 1")
    order = sorted(range(len(densities)), key=lambda i: (-densities[i], i))
    return order[: min(k, len(densities))]


def build_segments(cfg: ExplainConfig, x: Tensor, plane_shape) -> SegmentMap:
    params = dict(cfg.segmenter_params)
    if cfg.segmenter == "quickshift":
        qs = params.get("quickshift")
        if qs is None:
            qs = QuickShiftParams(
                ratio=params.get("ratio", 0.2),
                kernel_size=params.get("kernel_size", 4.0 if min(x.shape[-2:]) >= 64 else 1.0),
                max_dist=params.get("max_dist", 200.0),
            )
        image = x
        if len(x.shape) == 3 and x.shape[0] == 1:
            image = Tensor(np.repeat(x.data, 3, axis=0))  # grayscale to rgb
        return quickshift(image, qs)
    if cfg.segmenter == "grid":
        h, w = plane_shape[-2], plane_shape[-1]
        return grid_segments(h, w, int(params.get("rows", 4)), int(params.get("cols", 4)))
    if len(plane_shape) == 1:  # flat feature vector: one segment per element
        return SegmentMap(np.arange(plane_shape[0], dtype=np.int64), plane_shape[0])
    tokens, embed_dim = plane_shape[-2], plane_shape[-1]
    return token_segments(tokens, embed_dim)


def explain(model: DifferentiableModel, x: Tensor, cfg: ExplainConfig, y: int | None = None) -> Explanation:
    """Run the full pipeline for one input. Deterministic: same arguments give
    a bit-identical Explanation."""
    predicted = predict(model, x)
    label = predicted if y is None else int(y)
    outcome = pgd_l2(model, x, label, cfg.attack)
    plane = plane_value(model, x)
    seg = build_segments(cfg, x, plane.shape)

    values = outcome.x_diff.data
    if cfg.alpha > 0.0 and float(values.min()) == float(values.max()):
        # the attack could not move anything; no element stands out
        flag_map = Tensor(np.zeros(values.shape))
    else:
        flag_map = threshold_diff(outcome.x_diff, cfg.alpha)
    densities = segment_density(flag_map, seg)
    ids = top_k(densities, cfg.k)
    ranked = [(i, densities[i]) for i in ids]

    mask = _apply_segment_mask(Tensor(plane), seg, ids)
    return Explanation(ranked=ranked, alpha=cfg.alpha, k=cfg.k, flag_map=flag_map,
                       mask=mask, segments=seg, diff=outcome.x_diff,
                       label=label, predicted=predicted)


def _apply_segment_mask(x: Tensor, seg: SegmentMap, keep_ids) -> Tensor:
    a = x.data
    member = np.isin(seg.labels, np.asarray(list(keep_ids), dtype=np.int64))
    if a.shape == seg.extent:
        return Tensor(np.where(member, a, 0.0))
    if a.ndim == len(seg.extent) + 1 and a.shape[1:] == seg.extent:
        return Tensor(np.where(member[None], a, 0.0))
    raise ValueError(f"input extent {a.shape} does not match segment extent {seg.extent}")


def render_mask(expl: Explanation, seg: SegmentMap, x: Tensor) -> Tensor:
    """Copy of x with every segment outside the ranked top-K zeroed."""
    return _apply_segment_mask(x, seg, [i for i, _ in expl.ranked])
