"""Convert torch modules into the AXW1 layer stack written by the primary
toolkit's serializer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from advexplain.models import (
    Conv2D, Dense, DifferentiableModel, Embedding, Flatten, MaxPool2D, ReLU,
    SoftmaxOutput, save_weights,
)

# framework layer -> AXW1 kind code
DEFAULT_LAYER_MAPPING = {
    nn.Linear: 1,
    nn.Conv2d: 2,
    nn.ReLU: 3,
    nn.MaxPool2d: 4,
    nn.Flatten: 5,
    nn.Embedding: 6,
    nn.Softmax: 7,
}


class UnsupportedLayerError(ValueError):
    pass


@dataclass
class ExportSpec:
    model: nn.Module
    out_path: str
    mapping: dict = field(default_factory=lambda: dict(DEFAULT_LAYER_MAPPING))
    dtype: str = "f32"


def _pair(value) -> tuple[int, int]:
    if isinstance(value, (tuple, list)):
        return int(value[0]), int(value[1])
    return int(value), int(value)


def _convert_module(index: int, module: nn.Module, mapping: dict):
    if type(module) not in mapping:
        raise UnsupportedLayerError(
            f"layer {index} ({type(module).__name__}) has no AXW1 mapping"
        )
    if isinstance(module, nn.Linear):
        return Dense(module.weight.detach().numpy().astype("float64"),
                     module.bias.detach().numpy().astype("float64"))
    if isinstance(module, nn.Conv2d):
        sh, sw = _pair(module.stride)
        ph, pw = _pair(module.padding)
        dh, dw = _pair(module.dilation)
        if sh != sw or (ph, pw) != (0, 0) or (dh, dw) != (1, 1) or module.groups != 1:
            raise UnsupportedLayerError(
                f"layer {index} (Conv2d) uses padding/dilation/groups or a "
                f"non-square stride the AXW1 format does not carry"
            )
        return Conv2D(module.weight.detach().numpy().astype("float64"),
                      module.bias.detach().numpy().astype("float64"), sh)
    if isinstance(module, nn.MaxPool2d):
        kh, kw = _pair(module.kernel_size)
        sh, sw = _pair(module.stride if module.stride is not None else module.kernel_size)
        if sh != sw or _pair(module.padding) != (0, 0):
            raise UnsupportedLayerError(f"layer {index} (MaxPool2d) uses padding or non-square stride")
        return MaxPool2D(kh, kw, sh)
    if isinstance(module, nn.ReLU):
        return ReLU()
    if isinstance(module, nn.Flatten):
        return Flatten()
    if isinstance(module, nn.Embedding):
        return Embedding(module.weight.detach().numpy().astype("float64"))
    return None  # nn.Softmax: replaced by the terminal marker below


def to_layer_stack(model: nn.Module, mapping: dict | None = None) -> DifferentiableModel:
    """Flatten a torch Sequential (or module list) into primary-layer objects."""
    mapping = dict(DEFAULT_LAYER_MAPPING) if mapping is None else mapping
    modules = list(model.children()) if isinstance(model, nn.Sequential) else list(model)
    if not modules:
        raise UnsupportedLayerError("source model has no layers")
    layers = []
    for i, module in enumerate(modules):
        converted = _convert_module(i, module, mapping)
        if converted is not None:
            layers.append(converted)
    classes = None
    for layer in reversed(layers):
        if isinstance(layer, Dense):
            classes = layer.weight.shape[0]
            break
    if classes is None:
        raise UnsupportedLayerError("source model has no Linear output layer")
    layers.append(SoftmaxOutput(classes))
    plane = "post_embedding" if isinstance(layers[0], Embedding) else "raw"
    return DifferentiableModel(layers, plane, classes)


def export_weights(spec: ExportSpec) -> str:
    """Write the source model as AXW1; byte-deterministic for fixed weights."""
    converted = to_layer_stack(spec.model, spec.mapping)
    save_weights(spec.out_path, converted, dtype=spec.dtype)
    return str(spec.out_path)


# reference desk architectures, batch-first for the torch side
def torch_mlp(in_features: int = 64, hidden: int = 32, classes: int = 4, seed: int = 0) -> nn.Sequential:
    torch.manual_seed(seed)
    return nn.Sequential(nn.Flatten(), nn.Linear(in_features, hidden), nn.ReLU(),
                         nn.Linear(hidden, classes))


def torch_cnn(in_ch: int = 1, size: int = 8, filters: int = 4, classes: int = 4,
              seed: int = 0) -> nn.Sequential:
    torch.manual_seed(seed)
    conv_out = size - 2
    pooled = conv_out // 2
    return nn.Sequential(
        nn.Conv2d(in_ch, filters, 3), nn.ReLU(), nn.MaxPool2d(2),
        nn.Flatten(), nn.Linear(filters * pooled * pooled, classes),
    )


TORCH_ARCHS = {"mlp": torch_mlp, "cnn": torch_cnn}
