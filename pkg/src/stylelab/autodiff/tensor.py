"""Dense tensor with a reverse-mode gradient tape.

Every primitive in :mod:`stylelab.autodiff.ops` returns a :class:`Tensor`
holding references to its inputs and a closure mapping the output gradient
to input gradients. :func:`backward` topologically sorts that graph and
replays it in reverse.
"""

from __future__ import annotations

import contextlib
import threading

import numpy as np

from ..errors import ShapeError

_state = threading.local()

DEFAULT_DTYPE = np.float64


def set_default_dtype(dtype) -> None:
    """Select the floating precision used for newly created tensors."""
    global DEFAULT_DTYPE
    DEFAULT_DTYPE = np.dtype(dtype).type


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording within the block (for decoding/evaluation)."""
    prev = is_grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    # -- construction helpers -------------------------------------------------
    @classmethod
    def _make(cls, data, parents, backward):
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # -- operator sugar (implemented in ops) ----------------------------------
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops
        return ops.div(other, self)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    @property
    def T(self):
        from . import ops
        return ops.transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def topological_order(root: Tensor) -> list[Tensor]:
    """Nodes reachable from ``root`` that require grad, inputs before outputs."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(root: Tensor, grad=None) -> None:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every leaf that requires grad.

    ``root`` must be a scalar unless an explicit upstream ``grad`` is given.
    Interior nodes do not keep their gradient.
    """
    if not root.requires_grad:
        return
    if grad is None:
        if root.data.size != 1:
            raise ShapeError("backward() without an explicit gradient needs a scalar root")
        grad = np.ones_like(root.data)
    grads = {id(root): np.asarray(grad, dtype=root.data.dtype)}
    for node in reversed(topological_order(root)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


def grad(root: Tensor, wrt: list[Tensor]) -> list[np.ndarray]:
    """Return d(root)/d(w) for each ``w`` without disturbing existing ``.grad`` fields."""
    saved = [w.grad for w in wrt]
    for w in wrt:
        w.grad = None
    backward(root)
    out = [np.zeros_like(w.data) if w.grad is None else w.grad for w in wrt]
    for w, g in zip(wrt, saved):
        w.grad = g
    return out
