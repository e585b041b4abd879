"""Desk-scale differentiable classifiers: layers, forward, input gradients,
SGD training, and the AXW1 weight format.

Layers implement explicit forward/backward pairs over float64 ndarrays.
Forward never mutates layer state; everything backward needs travels in an
explicit cache, so one model can serve many inputs concurrently.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor import Tensor

RAW_INPUT = "raw"
POST_EMBEDDING = "post_embedding"

AXW1_MAGIC = b"AXW1"
_DTYPE_TO_NP = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_DTYPE_CODE = {"f32": 1, "f64": 2}


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------

class Dense:
    kind = "Dense"
    kind_code = 1

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        self.weight = np.asarray(weight, dtype=np.float64)  # (out, in)
        self.bias = np.asarray(bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("inconsistent Dense parameter shapes")

    @classmethod
    def create(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "Dense":
        s = np.sqrt(6.0 / (n_in + n_out))
        return cls(rng.uniform(-s, s, size=(n_out, n_in)), np.zeros(n_out))

    @property
    def dims(self):
        return (self.weight.shape[1], self.weight.shape[0])

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        if x.ndim != 1 or x.shape[0] != self.weight.shape[1]:
            raise ValueError(
                f"Dense expects ({self.weight.shape[1]},), got {x.shape}"
            )
        return self.weight @ x + self.bias, x

    def backward(self, cache, gy):
        x = cache
        return self.weight.T @ gy, [np.outer(gy, x), gy.copy()]


class Conv2D:
    kind = "Conv2D"
    kind_code = 2

    def __init__(self, weight: np.ndarray, bias: np.ndarray, stride: int = 1):
        self.weight = np.asarray(weight, dtype=np.float64)  # (out, in, kh, kw)
        self.bias = np.asarray(bias, dtype=np.float64)
        self.stride = int(stride)
        if self.weight.ndim != 4 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("inconsistent Conv2D parameter shapes")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @classmethod
    def create(cls, in_ch, out_ch, kh, kw, rng, stride=1) -> "Conv2D":
        fan_in, fan_out = in_ch * kh * kw, out_ch * kh * kw
        s = np.sqrt(6.0 / (fan_in + fan_out))
        return cls(rng.uniform(-s, s, size=(out_ch, in_ch, kh, kw)), np.zeros(out_ch), stride)

    @property
    def dims(self):
        o, i, kh, kw = self.weight.shape
        return (i, o, kh, kw, self.stride)

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]  # single-channel plane, e.g. an embedding matrix
        o, i, kh, kw = self.weight.shape
        if x.ndim != 3 or x.shape[0] != i:
            raise ValueError(f"Conv2D expects ({i},H,W), got {x.shape}")
        if x.shape[1] < kh or x.shape[2] < kw:
            raise ValueError(f"Conv2D kernel {kh}x{kw} larger than input {x.shape}")
        s = self.stride
        win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
        win = win[:, ::s, ::s]  # (in, OH, OW, kh, kw)
        y = np.einsum("oiuv,ijkuv->ojk", self.weight, win) + self.bias[:, None, None]
        return y, (x, win, squeeze)

    def backward(self, cache, gy):
        x, win, squeeze = cache
        o, i, kh, kw = self.weight.shape
        s = self.stride
        oh, ow = gy.shape[1], gy.shape[2]
        g_w = np.einsum("ojk,ijkuv->oiuv", gy, win)
        g_b = gy.sum(axis=(1, 2))
        gx = np.zeros_like(x)
        for u in range(kh):
            for v in range(kw):
                patch = np.einsum("ojk,oi->ijk", gy, self.weight[:, :, u, v])
                gx[:, u : u + oh * s : s, v : v + ow * s : s] += patch
        if squeeze:
            gx = gx[0]
        return gx, [g_w, g_b]


class ReLU:
    kind = "ReLU"
    kind_code = 3
    dims = ()

    def params(self):
        return []

    def forward(self, x):
        return np.maximum(x, 0.0), x

    def backward(self, cache, gy):
        return gy * (cache > 0.0), []


class MaxPool2D:
    kind = "MaxPool2D"
    kind_code = 4

    def __init__(self, ph: int, pw: int, stride: int | None = None):
        self.ph, self.pw = int(ph), int(pw)
        self.stride = int(stride) if stride is not None else self.ph
        if min(self.ph, self.pw, self.stride) < 1:
            raise ValueError("pool dims and stride must be >= 1")

    @property
    def dims(self):
        return (self.ph, self.pw, self.stride)

    def params(self):
        return []

    def forward(self, x):
        if x.ndim != 3:
            raise ValueError(f"MaxPool2D expects (C,H,W), got {x.shape}")
        s = self.stride
        win = np.lib.stride_tricks.sliding_window_view(x, (self.ph, self.pw), axis=(1, 2))
        win = win[:, ::s, ::s]
        c, oh, ow = win.shape[:3]
        flat = win.reshape(c, oh, ow, self.ph * self.pw)
        idx = flat.argmax(axis=-1)  # first maximal element on ties
        y = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        return y, (x.shape, idx, oh, ow)

    def backward(self, cache, gy):
        in_shape, idx, oh, ow = cache
        s = self.stride
        gx = np.zeros(in_shape)
        u, v = np.divmod(idx, self.pw)
        ci, ii, ji = np.indices(idx.shape)
        np.add.at(gx, (ci, ii * s + u, ji * s + v), gy)
        return gx, []


class Flatten:
    kind = "Flatten"
    kind_code = 5
    dims = ()

    def params(self):
        return []

    def forward(self, x):
        return x.reshape(-1), x.shape

    def backward(self, cache, gy):
        return gy.reshape(cache), []


class Embedding:
    kind = "Embedding"
    kind_code = 6

    def __init__(self, table: np.ndarray):
        self.table = np.asarray(table, dtype=np.float64)  # (vocab, dim)
        if self.table.ndim != 2:
            raise ValueError("embedding table must be (vocab, dim)")

    @classmethod
    def create(cls, vocab: int, dim: int, rng: np.random.Generator) -> "Embedding":
        s = np.sqrt(6.0 / (vocab + dim))
        return cls(rng.uniform(-s, s, size=(vocab, dim)))

    @property
    def dims(self):
        return self.table.shape

    def params(self):
        return [self.table]

    def _ids(self, x):
        ids = np.rint(x).astype(np.int64)
        if x.ndim != 1 or not np.array_equal(ids, x):
            raise ValueError("Embedding expects a rank-1 vector of integral token ids")
        if ids.min() < 0 or ids.max() >= self.table.shape[0]:
            raise ValueError(f"token id out of range [0, {self.table.shape[0]})")
        return ids

    def forward(self, x):
        ids = self._ids(x)
        return self.table[ids].copy(), ids

    def backward(self, cache, gy):
        g_t = np.zeros_like(self.table)
        np.add.at(g_t, cache, gy)
        return None, [g_t]  # token ids themselves carry no gradient


class SoftmaxOutput:
    """Terminal marker recording the class count; identity in forward.

    The softmax itself lives in the cross-entropy loss, so forward outputs
    stay logits.
    """

    kind = "SoftmaxOutput"
    kind_code = 7

    def __init__(self, class_count: int):
        self.class_count = int(class_count)

    @property
    def dims(self):
        return (self.class_count,)

    def params(self):
        return []

    def forward(self, x):
        if x.shape != (self.class_count,):
            raise ValueError(f"expected {self.class_count} logits, got shape {x.shape}")
        return x, None

    def backward(self, cache, gy):
        return gy, []


_KIND_BY_CODE = {
    1: Dense, 2: Conv2D, 3: ReLU, 4: MaxPool2D, 5: Flatten, 6: Embedding, 7: SoftmaxOutput,
}


# ---------------------------------------------------------------------------
# model and dataset containers
# ---------------------------------------------------------------------------

@dataclass
class DifferentiableModel:
    layers: list
    input_plane: str = RAW_INPUT
    class_count: int = 0

    def __post_init__(self):
        if self.input_plane not in (RAW_INPUT, POST_EMBEDDING):
            raise ValueError(f"unknown input plane {self.input_plane!r}")
        if self.input_plane == POST_EMBEDDING:
            if not self.layers or self.layers[0].kind != "Embedding":
                raise ValueError("post-embedding models must start with an Embedding layer")
        if self.class_count <= 0:
            raise ValueError("class_count must be positive")

    @property
    def plane_layers(self):
        """Layers applied after the attack plane."""
        return self.layers[1:] if self.input_plane == POST_EMBEDDING else self.layers


@dataclass
class LabeledDataset:
    inputs: list
    labels: list
    class_names: list | None = None

    def __post_init__(self):
        if len(self.inputs) != len(self.labels):
            raise ValueError("inputs and labels lengths differ")

    def __len__(self):
        return len(self.inputs)

    def subset(self, indices) -> "LabeledDataset":
        return LabeledDataset(
            [self.inputs[i] for i in indices],
            [self.labels[i] for i in indices],
            self.class_names,
        )


# ---------------------------------------------------------------------------
# forward / gradients
# ---------------------------------------------------------------------------

def _softmax_ce(logits: np.ndarray, y: int):
    z = logits - logits.max()
    log_z = np.log(np.sum(np.exp(z)))
    loss = float(log_z - z[y])
    probs = np.exp(z - log_z)
    probs[y] -= 1.0
    return loss, probs


def plane_value(model: DifferentiableModel, x: Tensor) -> np.ndarray:
    """Project an input onto the model's attack plane (raw values, or the
    embedding output for post-embedding models)."""
    a = x.data.astype(np.float64)
    if model.input_plane == POST_EMBEDDING:
        a, _ = model.layers[0].forward(a)
    return a


def forward_from_plane(model: DifferentiableModel, plane: np.ndarray) -> np.ndarray:
    y = np.asarray(plane, dtype=np.float64)
    for layer in model.plane_layers:
        y, _ = layer.forward(y)
    return y


def loss_and_grad_from_plane(model: DifferentiableModel, plane: np.ndarray, y: int):
    """Softmax cross-entropy loss and its gradient w.r.t. the plane values."""
    if not 0 <= y < model.class_count:
        raise ValueError(f"label {y} outside [0, {model.class_count})")
    caches, out = [], np.asarray(plane, dtype=np.float64)
    for layer in model.plane_layers:
        out, cache = layer.forward(out)
        caches.append(cache)
    loss, g = _softmax_ce(out, y)
    for layer, cache in zip(reversed(model.plane_layers), reversed(caches)):
        g, _ = layer.backward(cache, g)
    return loss, g


def forward(model: DifferentiableModel, x: Tensor) -> Tensor:
    logits = forward_from_plane(model, plane_value(model, x))
    if logits.shape != (model.class_count,):
        raise ValueError(f"model produced {logits.shape}, expected ({model.class_count},)")
    return Tensor(logits)


def predict(model: DifferentiableModel, x: Tensor) -> int:
    return int(np.argmax(forward(model, x).data))


def loss_and_input_grad(model: DifferentiableModel, x: Tensor, y: int):
    """Loss and gradient with respect to the attack plane of input x."""
    plane = plane_value(model, x)
    loss, g = loss_and_grad_from_plane(model, plane, y)
    return loss, Tensor(g)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _clone(model: DifferentiableModel) -> DifferentiableModel:
    layers = []
    for layer in model.layers:
        if isinstance(layer, Dense):
            layers.append(Dense(layer.weight.copy(), layer.bias.copy()))
        elif isinstance(layer, Conv2D):
            layers.append(Conv2D(layer.weight.copy(), layer.bias.copy(), layer.stride))
        elif isinstance(layer, Embedding):
            layers.append(Embedding(layer.table.copy()))
        elif isinstance(layer, MaxPool2D):
            layers.append(MaxPool2D(layer.ph, layer.pw, layer.stride))
        elif isinstance(layer, SoftmaxOutput):
            layers.append(SoftmaxOutput(layer.class_count))
        else:
            layers.append(type(layer)())
    return DifferentiableModel(layers, model.input_plane, model.class_count)


def _sample_grads(model, x: Tensor, y: int):
    a = x.data.astype(np.float64)
    caches, out = [], a
    for layer in model.layers:
        out, cache = layer.forward(out)
        caches.append(cache)
    loss, g = _softmax_ce(out, y)
    grads = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        g, pg = model.layers[i].backward(caches[i], g)
        grads[i] = pg
        if g is None:
            break
    return loss, grads


def train_sgd(model: DifferentiableModel, data: LabeledDataset, cfg: dict) -> DifferentiableModel:
    """Plain minibatch SGD on softmax cross-entropy, deterministic given seed."""
    lr = float(cfg.get("lr", 0.1))
    epochs = int(cfg.get("epochs", 10))
    batch = int(cfg.get("batch", 16))
    seed = int(cfg.get("seed", 0))
    if lr <= 0:
        raise ValueError("lr must be > 0")
    if not len(data):
        raise ValueError("empty dataset")
    if any(not 0 <= y < model.class_count for y in data.labels):
        raise ValueError("label outside model class range")

    trained = _clone(model)
    rng = np.random.default_rng(seed)
    n = len(data)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            acc = [[np.zeros_like(p) for p in layer.params()] for layer in trained.layers]
            for i in idx:
                _, grads = _sample_grads(trained, data.inputs[i], data.labels[i])
                for slot, pg in zip(acc, grads):
                    if pg:
                        for s, g in zip(slot, pg):
                            s += g
            scale = lr / len(idx)
            for layer, slot in zip(trained.layers, acc):
                for p, s in zip(layer.params(), slot):
                    p -= scale * s
    return trained


def accuracy(model: DifferentiableModel, data: LabeledDataset) -> float:
    if not len(data):
        raise ValueError("empty dataset")
    hits = sum(predict(model, x) == y for x, y in zip(data.inputs, data.labels))
    return hits / len(data)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_mlp(input_size: int, hidden: list[int], classes: int, seed: int = 0) -> DifferentiableModel:
    rng = np.random.default_rng(seed)
    layers, width = [Flatten()], input_size
    for h in hidden:
        layers += [Dense.create(width, h, rng), ReLU()]
        width = h
    layers += [Dense.create(width, classes, rng), SoftmaxOutput(classes)]
    return DifferentiableModel(layers, RAW_INPUT, classes)


def build_cnn(in_shape: tuple[int, int, int], classes: int, seed: int = 0,
              filters: int = 8, kernel: int = 3, hidden: int = 32,
              pool: bool = True) -> DifferentiableModel:
    c, h, w = in_shape
    rng = np.random.default_rng(seed)
    conv = Conv2D.create(c, filters, kernel, kernel, rng)
    oh, ow = h - kernel + 1, w - kernel + 1
    layers = [conv, ReLU()]
    if pool:
        layers.append(MaxPool2D(2, 2))
        oh, ow = (oh - 2) // 2 + 1, (ow - 2) // 2 + 1
    layers += [Flatten(),
               Dense.create(filters * oh * ow, hidden, rng), ReLU(),
               Dense.create(hidden, classes, rng), SoftmaxOutput(classes)]
    return DifferentiableModel(layers, RAW_INPUT, classes)


def build_textcnn(vocab: int, tokens: int, embed_dim: int, classes: int, seed: int = 0,
                  filters: int = 8, window: int = 3) -> DifferentiableModel:
    rng = np.random.default_rng(seed)
    emb = Embedding.create(vocab, embed_dim, rng)
    conv = Conv2D.create(1, filters, window, embed_dim, rng)
    pool = MaxPool2D(tokens - window + 1, 1)
    layers = [emb, conv, ReLU(), pool, Flatten(),
              Dense.create(filters, classes, rng), SoftmaxOutput(classes)]
    return DifferentiableModel(layers, POST_EMBEDDING, classes)


# ---------------------------------------------------------------------------
# AXW1 weight format
# ---------------------------------------------------------------------------

def save_weights(path, model: DifferentiableModel, dtype: str = "f32") -> None:
    """AXW1: magic | u32 layer count | per layer u8 kind, u8 dtype,
    kind-specific u32 dims, raw little-endian parameter payloads."""
    code = _DTYPE_CODE.get(dtype)
    if code is None:
        raise ValueError(f"unknown dtype {dtype!r}")
    np_dtype = _DTYPE_TO_NP[code]
    blob = bytearray(AXW1_MAGIC + struct.pack("<I", len(model.layers)))
    for layer in model.layers:
        dims = tuple(int(d) for d in layer.dims)
        blob += struct.pack("<BB", layer.kind_code, code)
        blob += struct.pack(f"<{len(dims)}I", *dims)
        for p in layer.params():
            blob += np.ascontiguousarray(p, dtype=np_dtype).tobytes()
    Path(path).write_bytes(bytes(blob))


def load_weights(path) -> DifferentiableModel:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != AXW1_MAGIC:
        raise ValueError(f"not an AXW1 file: {path}")
    (n_layers,) = struct.unpack_from("<I", raw, 4)
    pos, layers = 8, []

    def take(fmt):
        nonlocal pos
        size = struct.calcsize(fmt)
        if pos + size > len(raw):
            raise ValueError(f"truncated AXW1 file: {path}")
        vals = struct.unpack_from(fmt, raw, pos)
        pos += size
        return vals

    def take_array(shape, np_dtype):
        nonlocal pos
        count = int(np.prod(shape))
        size = count * np_dtype.itemsize
        if pos + size > len(raw):
            raise ValueError(f"truncated AXW1 payload: {path}")
        a = np.frombuffer(raw, dtype=np_dtype, count=count, offset=pos)
        pos += size
        return a.astype(np.float64).reshape(shape)

    for _ in range(n_layers):
        kind_code, dtype_code = take("<BB")
        cls = _KIND_BY_CODE.get(kind_code)
        np_dtype = _DTYPE_TO_NP.get(dtype_code)
        if cls is None or np_dtype is None:
            raise ValueError(f"unknown layer kind/dtype code in {path}")
        if cls is Dense:
            n_in, n_out = take("<2I")
            layers.append(Dense(take_array((n_out, n_in), np_dtype), take_array((n_out,), np_dtype)))
        elif cls is Conv2D:
            i, o, kh, kw, stride = take("<5I")
            layers.append(Conv2D(take_array((o, i, kh, kw), np_dtype), take_array((o,), np_dtype), stride))
        elif cls is MaxPool2D:
            ph, pw, stride = take("<3I")
            layers.append(MaxPool2D(ph, pw, stride))
        elif cls is Embedding:
            vocab, dim = take("<2I")
            layers.append(Embedding(take_array((vocab, dim), np_dtype)))
        elif cls is SoftmaxOutput:
            (classes,) = take("<I")
            layers.append(SoftmaxOutput(classes))
        else:
            layers.append(cls())
    if pos != len(raw):
        raise ValueError(f"trailing bytes in AXW1 file: {path}")

    classes = _infer_class_count(layers)
    plane = POST_EMBEDDING if layers and layers[0].kind == "Embedding" else RAW_INPUT
    return DifferentiableModel(layers, plane, classes)


def _infer_class_count(layers) -> int:
    for layer in reversed(layers):
        if isinstance(layer, SoftmaxOutput):
            return layer.class_count
        if isinstance(layer, Dense):
            return layer.weight.shape[0]
    raise ValueError("cannot infer class count: no SoftmaxOutput or Dense layer")
