"""Shared test utilities: finite-difference oracles and error measures."""

import numpy as np

from mmfusion.tensor import Tape


def analytic_grads(fn, tensors):
    """Backward-pass gradients of the scalar ``fn()`` w.r.t. ``tensors``."""
    for t in tensors:
        t.requires_grad = True
        t.grad = None
    with Tape() as tape:
        loss = fn()
        tape.backward(loss)
    return [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]


def finite_diff_grads(fn, tensors, h=1e-5):
    """Central-difference gradients of the scalar ``fn().item()``.

    Perturbs tensor data in place; runs outside any tape so nothing records.
    """
    grads = []
    for t in tensors:
        grad = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        grad_flat = grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            f_plus = fn().item()
            flat[i] = original - h
            f_minus = fn().item()
            flat[i] = original
            grad_flat[i] = (f_plus - f_minus) / (2.0 * h)
        grads.append(grad)
    return grads


def max_rel_err(analytic, reference):
    """Largest elementwise error of ``analytic`` relative to ``reference``."""
    analytic = np.asarray(analytic)
    reference = np.asarray(reference)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(reference)), 1.0)
    return float(np.max(np.abs(analytic - reference) / denom)) if analytic.size else 0.0


def assert_grads_close(fn, tensors, h=1e-5, rtol=1e-4, atol=1e-6):
    exact = analytic_grads(fn, tensors)
    approx = finite_diff_grads(fn, tensors, h=h)
    for got, want in zip(exact, approx):
        np.testing.assert_allclose(got, want, rtol=rtol, atol=atol)
    return max(max_rel_err(g, w) for g, w in zip(exact, approx))
