"""Adam and global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from .tensor import Tensor


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads if g is not None)))


def clip_grad_norm(grads, max_norm: float):
    """Scale ``grads`` so their joint L2 norm is at most ``max_norm``.

    Returns a new list; the inputs are not modified. Gradients already within
    the bound are returned unchanged.
    """
    if max_norm <= 0:
        raise ContractError("max_norm must be positive")
    grads = list(grads)
    norm = global_norm(grads)
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return [None if g is None else g * scale for g in grads]


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0


def adam_step(params, grads, state: AdamState, lr, beta1=0.5, beta2=0.999, eps=1e-8, weight_decay=0.0):
    """Bias-corrected Adam update applied in place to ``params`` (arrays or Tensors).

    ``weight_decay`` adds an L2 term to the gradient (off by default).
    Returns the list of parameter arrays.
    """
    arrays = [p.data if isinstance(p, Tensor) else p for p in params]
    if len(arrays) != len(grads):
        raise ContractError("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(a) for a in arrays]
        state.v = [np.zeros_like(a) for a in arrays]
    if len(state.m) != len(arrays):
        raise ContractError("Adam state does not match the parameter list")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(a)
        if g.shape != a.shape or m.shape != a.shape:
            raise ContractError(f"gradient shape {g.shape} does not match parameter {a.shape}")
        if weight_decay:
            g = g + weight_decay * a
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        a -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return arrays


class Adam:
    """Adam bound to a fixed, ordered list of parameter tensors."""

    def __init__(self, params, lr=1e-4, betas=(0.5, 0.999), eps=1e-8, clip=None, weight_decay=0.0):
        self.params = list(params)
        self.weight_decay = weight_decay
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.clip = clip
        self.state = AdamState()

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        grads = [p.grad for p in self.params]
        if self.clip is not None:
            grads = clip_grad_norm(grads, self.clip)
        adam_step(self.params, grads, self.state, self.lr, *self.betas, eps=self.eps,
                  weight_decay=self.weight_decay)
