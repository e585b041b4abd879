"""Forward parity between a torch source model and its AXW1 export."""

from __future__ import annotations

import copy

import numpy as np
import torch

from advexplain.models import forward, load_weights
from advexplain.tensor import Tensor


def parity_check(source_model, axw1_path, inputs) -> float:
    """Max absolute logit difference between the source forward pass and the
    AXW1 file loaded through the primary toolkit.

    The source is evaluated in float64 so the comparison isolates what the
    file carries rather than torch's float32 accumulation order.
    """
    batch = np.asarray(inputs, dtype=np.float64)
    if batch.shape[0] < 10:
        raise ValueError(f"need at least 10 inputs, got {batch.shape[0]}")
    exported = load_weights(axw1_path)

    torch_model = copy.deepcopy(source_model).double().eval()
    with torch.no_grad():
        torch_logits = torch_model(torch.from_numpy(batch)).numpy()

    worst = 0.0
    for i in range(batch.shape[0]):
        ours = forward(exported, Tensor(batch[i])).data
        if ours.shape != torch_logits[i].shape:
            raise ValueError(f"logit shapes disagree: {ours.shape} vs {torch_logits[i].shape}")
        if not (np.all(np.isfinite(ours)) and np.all(np.isfinite(torch_logits[i]))):
            raise ValueError("non-finite logits during parity check")
        worst = max(worst, float(np.max(np.abs(ours - torch_logits[i]))))
    return worst
