"""Minimal dense tensor the whole pipeline is expressed over.

Row-major, no broadcasting, no views. Values are float64 in memory; the
on-disk dtype is chosen at serialization time (see formats.py).
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "l2_norm", "argmax", "add", "sub", "mul", "scale"]


class Tensor:
    """Immutable rank-N real array.

    Wraps a read-only float64 ndarray. All public operations check that every
    element stays finite.
    """

    __slots__ = ("_a",)

    def __init__(self, values):
        a = np.asarray(values, dtype=np.float64)
        if a.size == 0:
            raise ValueError("empty input")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite element in tensor")
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        self._a = a

    @property
    def shape(self) -> tuple[int, ...]:
        return self._a.shape

    @property
    def size(self) -> int:
        return self._a.size

    @property
    def data(self) -> np.ndarray:
        """Read-only ndarray backing this tensor."""
        return self._a

    def ravel(self) -> np.ndarray:
        return self._a.ravel()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Tensor) and self.shape == other.shape and bool(
            np.array_equal(self._a, other._a)
        )

    def __hash__(self):
        return hash((self.shape, self._a.tobytes()))

    # arithmetic sugar; the named functions below are the contract
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else scale(self, other)


def _check_same_shape(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def l2_norm(t: Tensor) -> float:
    """Euclidean norm of all elements."""
    return float(np.sqrt(np.sum(t.data.astype(np.float64) ** 2)))


def argmax(t: Tensor) -> int:
    """Index of the maximum of a rank-1 tensor; ties go to the lowest index."""
    if len(t.shape) != 1:
        raise ValueError(f"argmax expects rank 1, got shape {t.shape}")
    return int(np.argmax(t.data))


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b)
    return Tensor(a.data + b.data)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b)
    return Tensor(a.data - b.data)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b)
    return Tensor(a.data * b.data)


def scale(a: Tensor, c: float) -> Tensor:
    return Tensor(a.data * float(c))
