"""l2 gradient attacks: one-step FGM, iterative PGD with ball projection,
and the masked re-attack restricted to a feature subset.

All attacks operate on the model's attack plane (raw input values, or the
embedding output for token models) and are fully deterministic: no random
start, no noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import (
    DifferentiableModel,
    forward_from_plane,
    loss_and_grad_from_plane,
    plane_value,
)
from .tensor import Tensor

__all__ = ["AttackConfig", "AttackOutcome", "project_l2_ball", "fgm_l2", "pgd_l2", "masked_attack"]


@dataclass
class AttackConfig:
    epsilon: float
    iterations: int = 20
    step_size: float | None = None  # defaults to 2.5 * epsilon / iterations
    mask: object | None = None      # boolean array over the attack plane
    seed: int = 0

    def __post_init__(self):
        self.epsilon = float(self.epsilon)
        self.iterations = int(self.iterations)
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.step_size is None:
            self.step_size = 2.5 * self.epsilon / self.iterations
        self.step_size = float(self.step_size)
        if self.step_size <= 0:
            raise ValueError("step_size must be > 0")

    def resolved_mask(self, plane_shape) -> np.ndarray | None:
        if self.mask is None:
            return None
        m = self.mask.data if isinstance(self.mask, Tensor) else np.asarray(self.mask)
        if m.shape != tuple(plane_shape):
            raise ValueError(f"mask shape {m.shape} does not match attack plane {tuple(plane_shape)}")
        return m.astype(bool)


@dataclass
class AttackOutcome:
    x_adv: Tensor
    x_diff: Tensor
    success: bool
    iterations_run: int


def project_l2_ball(delta: Tensor, epsilon: float) -> Tensor:
    """Return delta unchanged inside the ball, else rescaled to norm epsilon."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    norm = float(np.sqrt(np.sum(delta.data ** 2)))
    if norm <= epsilon:
        return delta
    return Tensor(delta.data * (epsilon / norm))


def pgd_l2(model: DifferentiableModel, x: Tensor, y: int | None, cfg: AttackConfig) -> AttackOutcome:
    """Iterate unit-normalized gradient steps, projecting the accumulated
    perturbation onto the epsilon ball around the clean plane values."""
    p0 = plane_value(model, x)
    clean_pred = int(np.argmax(forward_from_plane(model, p0)))
    label = clean_pred if y is None else int(y)
    mask = cfg.resolved_mask(p0.shape)

    p = p0.copy()
    iterations_run = 0
    for _ in range(cfg.iterations):
        _, g = loss_and_grad_from_plane(model, p, label)
        if mask is not None:
            g = np.where(mask, g, 0.0)
        g_norm = float(np.sqrt(np.sum(g ** 2)))
        if g_norm == 0.0:
            break
        delta = (p + (cfg.step_size / g_norm) * g) - p0
        d_norm = float(np.sqrt(np.sum(delta ** 2)))
        if d_norm > cfg.epsilon:
            delta = delta * (cfg.epsilon / d_norm)
        if mask is not None:
            delta = np.where(mask, delta, 0.0)
        p = p0 + delta
        iterations_run += 1

    adv_pred = int(np.argmax(forward_from_plane(model, p)))
    return AttackOutcome(
        x_adv=Tensor(p),
        x_diff=Tensor(p - p0),
        success=adv_pred != clean_pred,
        iterations_run=iterations_run,
    )


def fgm_l2(model: DifferentiableModel, x: Tensor, y: int | None, epsilon: float) -> AttackOutcome:
    """One full-budget step along the normalized gradient: PGD with T=1 and
    step_size=epsilon, bit for bit."""
    return pgd_l2(model, x, y, AttackConfig(epsilon=epsilon, iterations=1, step_size=epsilon))


def masked_attack(model: DifferentiableModel, x: Tensor, y: int | None, cfg: AttackConfig) -> AttackOutcome:
    """PGD with the gradient zeroed outside cfg.mask; the perturbation support
    stays inside the mask exactly."""
    if cfg.mask is None:
        raise ValueError("masked_attack requires cfg.mask")
    return pgd_l2(model, x, y, cfg)
