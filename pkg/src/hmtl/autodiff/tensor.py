"""Dense float64 tensors and the tape that records operations on them.

Operations only record while a :class:`Tape` is active (``with Tape() as
tape:``) and at least one input requires a gradient. Outside a tape the same
functions run as plain numpy, which is what evaluation uses.
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

from hmtl.errors import DimensionError, UsageError

_local = threading.local()


class Tensor:
    """A dense array of 64-bit floats, optionally tracked for gradients.

    ``data`` is a C-contiguous float64 ndarray, so ``values`` (the flat
    row-major view) always has ``prod(shape)`` entries.
    """

    __slots__ = ("data", "requires_grad", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.ascontiguousarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        return self.data.reshape(-1)

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar; implementations live in hmtl.autodiff.ops
    def __add__(self, other):
        from hmtl.autodiff import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from hmtl.autodiff import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from hmtl.autodiff import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from hmtl.autodiff import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from hmtl.autodiff import ops

        return ops.neg(self)

    def __matmul__(self, other):
        from hmtl.autodiff import ops

        return ops.matmul(self, other)


class Node:
    __slots__ = ("inputs", "outputs", "backward")

    def __init__(self, inputs, outputs, backward):
        self.inputs = inputs
        self.outputs = outputs
        self.backward = backward


class Tape:
    """Ordered record of operations; appending keeps it topologically sorted."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Tape":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _local.stack.pop()
        return False

    def __len__(self):
        return len(self.nodes)

    def backward(self, root: Tensor) -> dict[int, np.ndarray]:
        return graph_backward(self, root)

    def gradients(self, root: Tensor, params: Sequence[Tensor]) -> list[np.ndarray]:
        """Gradients of ``root`` for each tensor in ``params`` (zeros if unreached)."""
        grads = graph_backward(self, root)
        return [grads.get(id(p), np.zeros_like(p.data)) for p in params]


def active_tape() -> Tape | None:
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


def record(inputs: Sequence, outputs: Sequence[Tensor], backward: Callable) -> None:
    """Attach ``outputs`` to the active tape if any tensor input needs a gradient.

    ``backward(grad_outputs)`` receives one array per output (zeros filled in
    for outputs that received no gradient) and returns one array or ``None``
    per input.
    """
    tape = active_tape()
    if tape is None:
        return
    if not any(isinstance(x, Tensor) and x.requires_grad for x in inputs):
        return
    for out in outputs:
        out.requires_grad = True
    tape.nodes.append(Node(tuple(inputs), tuple(outputs), backward))


def graph_backward(tape: Tape, root: Tensor) -> dict[int, np.ndarray]:
    """Reverse sweep over ``tape``; returns ``{id(tensor): d root / d tensor}``.

    A fresh accumulator dict is built on every call, so repeated calls on the
    same tape give the same result.
    """
    if root.data.size != 1:
        raise UsageError(f"backward needs a scalar root, got shape {root.shape}")
    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    for node in reversed(tape.nodes):
        gouts = [grads.get(id(o)) for o in node.outputs]
        if all(g is None for g in gouts):
            continue
        gouts = [np.zeros_like(o.data) if g is None else g for o, g in zip(node.outputs, gouts)]
        gins = node.backward(gouts)
        for inp, g in zip(node.inputs, gins):
            if g is None or not isinstance(inp, Tensor) or not inp.requires_grad:
                continue
            key = id(inp)
            prev = grads.get(key)
            grads[key] = g if prev is None else prev + g
    return grads


def as_array(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
