"""Finite-difference validation of analytic gradients."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from .tensor import Tensor, grad


def grad_check(fn, point, epsilon=1e-5):
    """Max relative error between tape gradients and central differences.

    ``fn`` maps a list of Tensors to a scalar Tensor; ``point`` is a list of
    arrays or Tensors (or a single one). The error per coordinate is
    ``|analytic - numeric| / max(1, |analytic|)``.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ContractError("epsilon must lie in [1e-6, 1e-3]")
    if isinstance(point, (np.ndarray, Tensor)) or np.isscalar(point):
        point = [point]
    arrays = [np.array(p.data if isinstance(p, Tensor) else p, dtype=np.float64) for p in point]
    inputs = [Tensor(a, requires_grad=True) for a in arrays]
    out = fn(inputs)
    if not isinstance(out, Tensor) or out.data.size != 1:
        raise ContractError("grad_check needs a scalar-valued function")
    analytic = grad(out, inputs)

    def value(arrs):
        return float(fn([Tensor(a) for a in arrs]).data.reshape(()))

    worst = 0.0
    for k, a in enumerate(arrays):
        flat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            plus = value(arrays)
            flat[i] = orig - epsilon
            minus = value(arrays)
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * epsilon)
            an = analytic[k].reshape(-1)[i]
            worst = max(worst, abs(an - numeric) / max(1.0, abs(an)))
    return worst
