"""Numpy implementations of the hot kernels.

This module mirrors the interface of the compiled extension
(``mmfusion._ckernels``) and is used whenever the extension is missing or
``MMFUSION_BACKEND=pure`` is set.  All kernels take C-contiguous float64
arrays; row kernels operate on 2-D views whose last axis is the reduced one.
"""

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT2PI = 0.3989422804014327


def softmax_fwd(x):
    shifted = x - x.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted


def softmax_bwd(y, g):
    dot = (g * y).sum(axis=1, keepdims=True)
    return (g - dot) * y


def log_softmax_fwd(x):
    shifted = x - x.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return shifted - lse


def log_softmax_bwd(y, g):
    return g - np.exp(y) * g.sum(axis=1, keepdims=True)


def layer_norm_fwd(x, gain, bias, eps):
    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    var = (centered * centered).mean(axis=1)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std[:, None]
    return xhat * gain + bias, xhat, inv_std


def layer_norm_bwd(g, xhat, inv_std, gain):
    gxhat = g * gain
    m1 = gxhat.mean(axis=1, keepdims=True)
    m2 = (gxhat * xhat).mean(axis=1, keepdims=True)
    gx = (gxhat - m1 - xhat * m2) * inv_std[:, None]
    return gx, (g * xhat).sum(axis=0), g.sum(axis=0)


def gelu_fwd(x):
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def gelu_bwd(x, g):
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
    return g * (cdf + x * pdf)


def adamw_update(p, g, m, v, lr, beta1, beta2, eps, weight_decay, bc1, bc2):
    """One fused optimizer step, in place on flat float64 buffers.

    ``bc1``/``bc2`` are the bias corrections ``1 - beta^t`` for the current
    step.  Weight decay is decoupled: it never touches the moment buffers,
    and a zero decay adds no term at all (so the update is bitwise identical
    to plain adaptive-moment descent).
    """
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    update = (m / bc1) / (np.sqrt(v / bc2) + eps)
    if weight_decay != 0.0:
        update = update + weight_decay * p
    p -= lr * update
