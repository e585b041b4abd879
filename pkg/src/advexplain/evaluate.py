"""Validation protocols: the re-attack threshold search, percentile-band
adversarial accuracy, and segment-ablation studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackConfig, masked_attack, pgd_l2
from .explainer import ExplainConfig, Explanation, explain, threshold_diff
from .models import DifferentiableModel, LabeledDataset, forward_from_plane, plane_value, predict
from .stats import quantile
from .tensor import Tensor

__all__ = ["BandSpec", "EvalReport", "reattack_alpha", "alpha_distribution",
           "band_accuracy", "ablate_segments", "ablation_study", "band_mask"]

ALPHA_GRID_MAX = 50


@dataclass
class BandSpec:
    lo: float
    hi: float
    mode: str = "tails"  # tails = [0,lo] U [hi,100]; middle = [lo,hi]

    def __post_init__(self):
        if self.mode not in ("tails", "middle"):
            raise ValueError(f"unknown band mode {self.mode!r}")
        if not 0.0 <= self.lo <= self.hi <= 100.0:
            raise ValueError(f"need 0 <= lo <= hi <= 100, got [{self.lo}, {self.hi}]")

    def describe(self) -> str:
        if self.mode == "middle":
            return f"{self.lo:g}%-{self.hi:g}%"
        return f"0%-{self.lo:g}% & {self.hi:g}%-100%"


@dataclass
class EvalReport:
    band_accuracies: list = field(default_factory=list)   # (band label, accuracy)
    alphas: list = field(default_factory=list)
    no_flip_count: int = 0
    clean_accuracy: float | None = None
    blur_top_accuracy: float | None = None
    blur_next_accuracy: float | None = None


def band_mask(diff: Tensor, band: BandSpec) -> np.ndarray:
    """Boolean mask of diff values inside the band of its own quantiles.

    Empty-band conventions: middle with lo == hi selects nothing; a tails side
    at the extreme (lo == 0, hi == 100) contributes nothing.
    """
    values = diff.data
    degenerate = float(values.min()) == float(values.max())
    if band.mode == "middle":
        if band.lo == band.hi:
            return np.zeros(values.shape, dtype=bool)
        if degenerate:
            return np.ones(values.shape, dtype=bool)
        q_lo = quantile(values.ravel(), band.lo / 100.0)
        q_hi = quantile(values.ravel(), band.hi / 100.0)
        return (values >= q_lo) & (values <= q_hi)
    mask = np.zeros(values.shape, dtype=bool)
    if degenerate:
        return mask
    if band.lo > 0.0:
        mask |= values <= quantile(values.ravel(), band.lo / 100.0)
    if band.hi < 100.0:
        mask |= values >= quantile(values.ravel(), band.hi / 100.0)
    return mask


def _predict_plane(model: DifferentiableModel, plane: np.ndarray) -> int:
    return int(np.argmax(forward_from_plane(model, plane)))


def reattack_alpha(model: DifferentiableModel, x: Tensor, y: int, cfg: AttackConfig):
    """Smallest integer alpha in 0..50 whose two-tail re-attack flips the
    prediction; 0 if the clean input is already misclassified; None when no
    alpha flips it."""
    if predict(model, x) != y:
        return 0
    base = pgd_l2(model, x, y, cfg)
    values = base.x_diff.data
    if float(values.min()) == float(values.max()):
        return None  # attack could not move this input at all
    for alpha in range(1, ALPHA_GRID_MAX + 1):
        flags = threshold_diff(base.x_diff, float(alpha))
        trial = masked_attack(model, x, y, _with_mask(cfg, flags.data.astype(bool)))
        if trial.success:
            return alpha
    return None


def _with_mask(cfg: AttackConfig, mask: np.ndarray) -> AttackConfig:
    return AttackConfig(epsilon=cfg.epsilon, iterations=cfg.iterations,
                        step_size=cfg.step_size, mask=mask, seed=cfg.seed)


def alpha_distribution(model: DifferentiableModel, data: LabeledDataset, cfg: AttackConfig) -> EvalReport:
    """reattack_alpha over a dataset; NoFlip inputs are excluded from the
    sample and counted separately."""
    if not len(data):
        raise ValueError("empty dataset")
    report = EvalReport()
    for x, y in zip(data.inputs, data.labels):
        alpha = reattack_alpha(model, x, int(y), cfg)
        if alpha is None:
            report.no_flip_count += 1
        else:
            report.alphas.append(float(alpha))
    return report


def band_accuracy(model: DifferentiableModel, data: LabeledDataset, band: BandSpec,
                  cfg: AttackConfig) -> float:
    """Adversarial test accuracy when only features inside the band (of each
    input's own unrestricted-attack diff) may be attacked."""
    if not len(data):
        raise ValueError("empty dataset")
    hits = 0
    for x, y in zip(data.inputs, data.labels):
        base = pgd_l2(model, x, int(y), cfg)
        mask = band_mask(base.x_diff, band)
        if not mask.any():
            pred = predict(model, x)
        else:
            trial = masked_attack(model, x, int(y), _with_mask(cfg, mask))
            pred = _predict_plane(model, trial.x_adv.data)
        hits += pred == int(y)
    return hits / len(data)


def _fill_segments(plane: np.ndarray, labels: np.ndarray, ids) -> np.ndarray:
    """Replace each selected segment by its per-channel mean."""
    out = plane.copy()
    channelled = out.ndim == labels.ndim + 1
    for seg_id in ids:
        member = labels == seg_id
        if channelled:
            for c in range(out.shape[0]):
                out[c][member] = out[c][member].mean()
        else:
            out[member] = out[member].mean()
    return out


def ablate_segments(model: DifferentiableModel, x: Tensor, expl: Explanation, ranks) -> int:
    """Mean-fill the segments at the given 1-based ranks and return the new
    prediction."""
    ranks = list(ranks)
    if any(r < 1 or r > len(expl.ranked) for r in ranks):
        raise ValueError(f"rank out of range 1..{len(expl.ranked)}")
    plane = plane_value(model, x)
    if not ranks:
        return _predict_plane(model, plane)
    ids = [expl.ranked[r - 1][0] for r in ranks]
    return _predict_plane(model, _fill_segments(plane, expl.segments.labels, ids))


def ablation_study(model: DifferentiableModel, data: LabeledDataset, cfg: ExplainConfig) -> EvalReport:
    """Accuracy with the top 1-5 ranked segments mean-filled, and separately
    with ranks 6-10 filled, against the clean accuracy."""
    if not len(data):
        raise ValueError("empty dataset")
    clean = top = nxt = 0
    for x, y in zip(data.inputs, data.labels):
        y = int(y)
        expl = explain(model, x, cfg)
        n = len(expl.ranked)
        clean += predict(model, x) == y
        top += ablate_segments(model, x, expl, range(1, min(5, n) + 1)) == y
        nxt += ablate_segments(model, x, expl, range(6, min(10, n) + 1)) == y
    n_data = len(data)
    return EvalReport(clean_accuracy=clean / n_data,
                      blur_top_accuracy=top / n_data,
                      blur_next_accuracy=nxt / n_data)
