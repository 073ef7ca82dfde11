"""Classification objectives.

Both losses accept a single logit vector ``[C]`` or a batch ``[B, C]`` and
return a scalar (batch losses are averaged).
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .errors import InvariantError, ShapeError
from .tensor import Tensor


def smoothed_targets(labels: np.ndarray, epsilon: float, num_classes: int) -> np.ndarray:
    """Mix one-hot targets with the uniform distribution.

    The uniform mass ``epsilon / K`` covers every class including the true
    one, so the true class keeps the arg-max for any ``epsilon < (K-1)/K``.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise InvariantError(f"label smoothing must be in [0, 1], got {epsilon}")
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise InvariantError(f"label out of range for {num_classes} classes: {labels}")
    targets = np.full((labels.shape[0], num_classes), epsilon / num_classes)
    targets[np.arange(labels.shape[0]), labels] += 1.0 - epsilon
    return targets


def _as_batch(logits: Tensor) -> Tensor:
    if logits.ndim == 1:
        return T.reshape(logits, (1, logits.shape[0]))
    if logits.ndim == 2:
        return logits
    raise ShapeError(f"expected [C] or [B, C] logits, got {logits.shape}")


def label_smoothed_ce(logits: Tensor, labels, epsilon: float, num_classes: int) -> Tensor:
    """Cross entropy against smoothed one-hot targets, averaged over the batch."""
    logits = _as_batch(logits)
    if logits.shape[1] != num_classes:
        raise ShapeError(f"logits have {logits.shape[1]} classes, expected {num_classes}")
    targets = smoothed_targets(labels, epsilon, num_classes)
    if targets.shape[0] != logits.shape[0]:
        raise ShapeError(f"batch mismatch: {logits.shape[0]} logits vs {targets.shape[0]} labels")
    log_probs = T.log_softmax(logits, axis=-1)
    per_sample = T.tsum(T.mul(log_probs, Tensor(-targets)), axis=1)
    return T.mean(per_sample)


def nll_of_probs(probs: Tensor, labels, epsilon: float, num_classes: int) -> Tensor:
    """Smoothed-target negative log likelihood of an explicit distribution.

    Used where a model emits probabilities directly (fused predictions)
    rather than logits.
    """
    probs = _as_batch(probs)
    targets = smoothed_targets(labels, epsilon, num_classes)
    per_sample = T.tsum(T.mul(T.log(probs), Tensor(-targets)), axis=1)
    return T.mean(per_sample)


def kl_of_probs(probs: Tensor, target) -> Tensor:
    """KL(target ‖ probs) for a model that emits probabilities directly."""
    probs = _as_batch(probs)
    target = _validate_distribution(target)
    if target.shape != probs.shape:
        raise ShapeError(f"target shape {target.shape} does not match probs {probs.shape}")
    with np.errstate(divide="ignore"):
        log_t = np.where(target > 0, np.log(np.where(target > 0, target, 1.0)), 0.0)
    entropy_term = float((target * log_t).sum(axis=1).mean())
    cross = T.mean(T.tsum(T.mul(T.log(probs), Tensor(-target)), axis=1))
    return cross + Tensor(entropy_term)


def _validate_distribution(target: np.ndarray) -> np.ndarray:
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if (target < 0).any():
        raise InvariantError("target distribution has negative entries")
    sums = target.sum(axis=1)
    if not np.allclose(sums, 1.0, atol=1e-9):
        raise InvariantError(f"target distribution rows must sum to 1, got {sums}")
    return target


def kl_to_annotator(logits: Tensor, target, reverse: bool = False) -> Tensor:
    """Divergence between the softmax of ``logits`` and a target distribution.

    Default direction treats the target as the reference: KL(target ‖ model),
    with the 0·log(0/q) = 0 convention.  ``reverse=True`` computes
    KL(model ‖ target) instead, which requires a strictly positive target.
    """
    logits = _as_batch(logits)
    target = _validate_distribution(target)
    if target.shape != logits.shape:
        raise ShapeError(f"target shape {target.shape} does not match logits {logits.shape}")
    log_probs = T.log_softmax(logits, axis=-1)
    if not reverse:
        with np.errstate(divide="ignore"):
            log_t = np.where(target > 0, np.log(np.where(target > 0, target, 1.0)), 0.0)
        entropy_term = float((target * log_t).sum(axis=1).mean())
        cross = T.mean(T.tsum(T.mul(log_probs, Tensor(-target)), axis=1))
        return cross + Tensor(entropy_term)
    if (target <= 0).any():
        raise InvariantError("reverse KL needs a strictly positive target distribution")
    probs = T.softmax(logits, axis=-1)
    diff = T.sub(log_probs, Tensor(np.log(target)))
    return T.mean(T.tsum(T.mul(probs, diff), axis=1))
