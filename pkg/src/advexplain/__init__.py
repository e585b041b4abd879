"""Attack-driven segment explanations for small differentiable classifiers."""

from .attacks import AttackConfig, AttackOutcome, fgm_l2, masked_attack, pgd_l2, project_l2_ball
from .explainer import ExplainConfig, Explanation, explain, render_mask, segment_density, threshold_diff, top_k
from .models import (
    DifferentiableModel, LabeledDataset, build_cnn, build_mlp, build_textcnn,
    forward, load_weights, loss_and_input_grad, predict, save_weights, train_sgd,
)
from .segment import QuickShiftParams, SegmentMap, grid_segments, quickshift, token_segments
from .tensor import Tensor, argmax, l2_norm

__version__ = "0.1.0"
