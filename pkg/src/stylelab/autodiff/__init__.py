"""Minimal reverse-mode autodiff over numpy arrays."""

from . import ops
from .gradcheck import grad_check
from .optim import Adam, AdamState, adam_step, clip_grad_norm, global_norm
from .tensor import Tensor, as_tensor, backward, grad, is_grad_enabled, no_grad, set_default_dtype

__all__ = [
    "Adam",
    "AdamState",
    "Tensor",
    "adam_step",
    "as_tensor",
    "backward",
    "clip_grad_norm",
    "global_norm",
    "grad",
    "grad_check",
    "is_grad_enabled",
    "no_grad",
    "ops",
    "set_default_dtype",
]
