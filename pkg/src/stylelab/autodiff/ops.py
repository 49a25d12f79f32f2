"""Differentiable primitives.

Each function takes tensors (or array-likes, treated as constants) and
returns a new :class:`Tensor` whose backward closure returns one gradient
per parent, in parent order.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, as_tensor


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (reverses numpy broadcasting)."""
    if g.shape == shape:
        return g
    ndim_extra = g.ndim - len(shape)
    if ndim_extra > 0:
        g = g.sum(axis=tuple(range(ndim_extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- elementwise -------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return Tensor._make(a.data + b.data, (a, b),
                        lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return Tensor._make(a.data - b.data, (a, b),
                        lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return Tensor._make(ad * bd, (a, b),
                        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    out = ad / bd

    def back(g):
        return _unbroadcast(g / bd, ad.shape), _unbroadcast(-g * out / bd, bd.shape)

    return Tensor._make(out, (a, b), back)


def neg(a):
    a = as_tensor(a)
    return Tensor._make(-a.data, (a,), lambda g: (-g,))


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return Tensor._make(out, (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    ad = a.data
    return Tensor._make(np.log(ad), (a,), lambda g: (g / ad,))


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return Tensor._make(out, (a,), lambda g: (g * (1.0 - out * out),))


def _sigmoid(x):
    # tanh form never overflows and avoids masked indexing
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a):
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return Tensor._make(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    return Tensor._make(a.data * mask, (a,), lambda g: (g * mask,))


# -- reductions and shape ----------------------------------------------------

def sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    shape = a.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor._make(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), back)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        n = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([a.shape[i] for i in axes]))
    return sum(a, axis=axis, keepdims=keepdims) * (1.0 / n)


def reshape(a, shape):
    a = as_tensor(a)
    old = a.shape
    return Tensor._make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a, axes=None):
    a = as_tensor(a)
    inv = None if axes is None else tuple(np.argsort(axes))
    return Tensor._make(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def getitem(a, index):
    a = as_tensor(a)
    shape, dtype = a.shape, a.data.dtype

    def back(g):
        out = np.zeros(shape, dtype=dtype)
        np.add.at(out, index, g)
        return (out,)

    return Tensor._make(a.data[index], (a,), back)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), back)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def back(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor._make(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), back)


def repeat_rows(a, repeats):
    """Repeat each leading-axis slice ``repeats`` times (``np.repeat`` on axis 0)."""
    a = as_tensor(a)
    shape = a.shape

    def back(g):
        return (g.reshape((shape[0], repeats) + shape[1:]).sum(axis=1),)

    return Tensor._make(np.repeat(a.data, repeats, axis=0), (a,), back)


# -- linear algebra ----------------------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise ShapeError("matmul needs operands with at least 2 dimensions")
    if ad.shape[-1] != bd.shape[-2]:
        raise ShapeError(f"matmul shape mismatch {ad.shape} @ {bd.shape}")

    def back(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(bd, -1, -2)), ad.shape)
        gb = _unbroadcast(np.matmul(np.swapaxes(ad, -1, -2), g), bd.shape)
        return ga, gb

    return Tensor._make(np.matmul(ad, bd), (a, b), back)


def embedding(table, ids):
    """Row lookup ``table[ids]``; gradient is scatter-added into the table."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    vocab, dim = table.shape
    if ids.size and (ids.min() < 0 or ids.max() >= vocab):
        raise IndexError("embedding id out of range")

    def back(g):
        out = np.zeros((vocab, dim), dtype=g.dtype)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, dim))
        return (out,)

    return Tensor._make(table.data[ids], (table,), back)


# -- softmax family ----------------------------------------------------------

def _log_softmax(x, axis=-1):
    m = np.max(x, axis=axis, keepdims=True)
    shifted = x - m
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def log_softmax(a, axis=-1):
    a = as_tensor(a)
    out = _log_softmax(a.data, axis)
    sm = np.exp(out)

    def back(g):
        return (g - sm * np.sum(g, axis=axis, keepdims=True),)

    return Tensor._make(out, (a,), back)


def softmax(a, axis=-1):
    a = as_tensor(a)
    out = np.exp(_log_softmax(a.data, axis))

    def back(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return Tensor._make(out, (a,), back)


def softmax_cross_entropy(logits, target):
    """``-log softmax(logits)[target]`` for a single logit vector."""
    logits = as_tensor(logits)
    if logits.ndim != 1 or logits.shape[0] == 0:
        raise ShapeError("softmax_cross_entropy needs a non-empty 1-D logit vector")
    n = logits.shape[0]
    if n < 2:
        raise ShapeError("softmax_cross_entropy needs at least 2 classes")
    if not 0 <= int(target) < n:
        raise IndexError(f"target {target} out of range for {n} classes")
    return -token_log_probs(logits.reshape((1, n)), np.array([int(target)])).reshape(())


def token_log_probs(logits, targets):
    """Gather ``log_softmax(logits)[..., target]`` over the last axis.

    ``logits`` has shape ``(..., C)`` and ``targets`` the leading shape.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != logits.shape[:-1]:
        raise ShapeError(f"targets shape {targets.shape} does not match logits {logits.shape}")
    n_classes = logits.shape[-1]
    if targets.size and (targets.min() < 0 or targets.max() >= n_classes):
        raise IndexError("target class out of range")
    lsm = _log_softmax(logits.data, -1)
    picked = np.take_along_axis(lsm, targets[..., None], axis=-1)[..., 0]

    def back(g):
        grad = -np.exp(lsm) * g[..., None]
        np.put_along_axis(grad, targets[..., None],
                          np.take_along_axis(grad, targets[..., None], axis=-1) + g[..., None], axis=-1)
        return (grad,)

    return Tensor._make(picked, (logits,), back)


# -- recurrent / pooling -----------------------------------------------------

def gru_cell(x, h, w_x, w_h, b_x, b_h, mask=None):
    """One GRU step (reset-gate-after-matmul variant, gate order r, z, n).

    ``x``: (B, I), ``h``: (B, H), ``w_x``: (I, 3H), ``w_h``: (H, 3H),
    biases (3H,). ``mask`` (B,) of 0/1 keeps the previous state where 0.
    """
    x, h, w_x, w_h, b_x, b_h = (as_tensor(t) for t in (x, h, w_x, w_h, b_x, b_h))
    xd, hd, wx, wh = x.data, h.data, w_x.data, w_h.data
    hid = hd.shape[1]
    if wx.shape[1] != 3 * hid or wh.shape != (hid, 3 * hid) or xd.shape[1] != wx.shape[0]:
        raise ShapeError("gru_cell weight shapes inconsistent with input/state")
    gx = xd @ wx + b_x.data
    gh = hd @ wh + b_h.data
    rz = _sigmoid(gx[:, :2 * hid] + gh[:, :2 * hid])
    r, z = rz[:, :hid], rz[:, hid:]
    ghn = gh[:, 2 * hid:]
    n = np.tanh(gx[:, 2 * hid:] + r * ghn)
    h_new = (1.0 - z) * n + z * hd
    if mask is not None:
        m = np.asarray(mask, dtype=hd.dtype).reshape(-1, 1)
        out = m * h_new + (1.0 - m) * hd
    else:
        m = None
        out = h_new

    def back(g):
        if m is None:
            dh_new, dh_keep = g, 0.0
        else:
            dh_new, dh_keep = g * m, g * (1.0 - m)
        dz = dh_new * (hd - n)
        dn = dh_new * (1.0 - z)
        da_n = dn * (1.0 - n * n)
        dr = da_n * ghn
        da_r = dr * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)
        dgx = np.concatenate([da_r, da_z, da_n], axis=1)
        dgh = np.concatenate([da_r, da_z, da_n * r], axis=1)
        dx = dgx @ wx.T
        dh = dgh @ wh.T + dh_new * z + dh_keep
        return dx, dh, xd.T @ dgx, hd.T @ dgh, dgx.sum(0), dgh.sum(0)

    return Tensor._make(out, (x, h, w_x, w_h, b_x, b_h), back)


def max_pool_time(x, mask, window):
    """Non-overlapping temporal max-pool over axis 1 of ``x`` (B, T, D).

    Positions where ``mask`` (B, T) is 0 are ignored; the final partial
    window is pooled as-is. Returns the pooled tensor (B, ceil(T/window), D)
    and the window mask; windows without any valid position are zero.
    """
    x = as_tensor(x)
    b, t, d = x.shape
    mask = np.asarray(mask, dtype=bool)
    n_win = -(-t // window)
    pad = n_win * window - t
    xd = np.where(mask[:, :, None], x.data, -np.inf)
    if pad:
        xd = np.concatenate([xd, np.full((b, pad, d), -np.inf)], axis=1)
    blocks = xd.reshape(b, n_win, window, d)
    arg = np.argmax(blocks, axis=2)
    win_mask = np.pad(mask, ((0, 0), (0, pad))).reshape(b, n_win, window).any(axis=2)
    out = np.take_along_axis(blocks, arg[:, :, None, :], axis=2)[:, :, 0, :]
    out = np.where(win_mask[:, :, None], out, 0.0)
    src = arg + (np.arange(n_win) * window)[None, :, None]

    def back(g):
        grad = np.zeros((b, n_win * window, d), dtype=g.dtype)
        g = np.where(win_mask[:, :, None], g, 0.0)
        bi = np.arange(b)[:, None, None]
        di = np.arange(d)[None, None, :]
        np.add.at(grad, (bi, src, di), g)
        return (grad[:, :t],)

    return Tensor._make(out, (x,), back), win_mask


def dropout(x, rate, rng):
    """Inverted dropout; identity when ``rng`` is None (evaluation) or rate is 0."""
    x = as_tensor(x)
    if rng is None or rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, keep)


def linear(x, w, b=None):
    out = matmul(x, w)
    return out if b is None else add(out, b)


def where_const(cond, a, value):
    """``a`` where ``cond`` else the constant ``value`` (no gradient there)."""
    a = as_tensor(a)
    cond = np.asarray(cond, dtype=bool)
    return Tensor._make(np.where(cond, a.data, value), (a,), lambda g: (np.where(cond, g, 0.0),))

