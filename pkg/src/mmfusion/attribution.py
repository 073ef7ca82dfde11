"""Gradient-based importance of individual image regions.

For a chosen class, each region's importance is |gradient · features|: the
first-order estimate of how much the class score changes when the region is
taken away (``grad_l2`` — the plain gradient norm — is offered as an
alternative, but it saturates on trained classifiers and goes flat on
average-pooled ones).  Scores are normalized by the maximum importance, so
the strongest region reads exactly 1; the top-3 regions are reported with
their boxes.

``occlusion_importance`` is the independent cross-check: it actually leaves
one region out and measures the score change.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import MultimodalSample, batch_from_samples
from .errors import ConfigError, InvariantError
from .models import EmotionClassifier, build_model
from .tensor import Tape, Tensor

METHODS = ("grad_x_input", "grad_l2")


@dataclass
class AttributionReport:
    sample_id: str
    target_class: int
    method: str
    raw: np.ndarray  # [k] nonnegative importance scores
    normalized: np.ndarray  # [k], max entry exactly 1 unless all_zero
    top3: list[dict] = field(default_factory=list)  # {index, box, normalized}
    all_zero: bool = False

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "target_class": self.target_class,
            "method": self.method,
            "raw": [float(x) for x in self.raw],
            "normalized": [float(x) for x in self.normalized],
            "top3": self.top3,
            "all_zero": self.all_zero,
        }


def region_attribution(
    model: EmotionClassifier,
    sample: MultimodalSample,
    target_class: int,
    method: str = "grad_x_input",
) -> AttributionReport:
    if method not in METHODS:
        raise ConfigError(f"unknown attribution method {method!r}, expected one of {METHODS}")
    if model.config.num_regions == 0:
        raise InvariantError("model consumes no region features; nothing to attribute")
    if not 0 <= target_class < model.config.num_classes:
        raise InvariantError(
            f"target class {target_class} out of range for {model.config.num_classes} classes"
        )

    batch = batch_from_samples([sample], model.config.num_classes)
    regions = Tensor(batch.regions, requires_grad=True)
    with Tape() as tape:
        score = model.attribution_scalar(batch, target_class, regions)
        tape.backward(score)
    grad = regions.grad[0] if regions.grad is not None else np.zeros_like(batch.regions[0])

    if method == "grad_x_input":
        raw = np.abs((grad * batch.regions[0]).sum(axis=1))
    else:
        raw = np.sqrt((grad * grad).sum(axis=1))

    peak = float(raw.max()) if raw.size else 0.0
    all_zero = peak <= 0.0
    normalized = np.zeros_like(raw) if all_zero else raw / peak
    # order by importance, ties broken by lowest region index
    order = np.lexsort((np.arange(raw.size), -raw))
    top3 = [
        {
            "index": int(i),
            "box": [float(x) for x in sample.region_boxes[i]],
            "normalized": float(normalized[i]),
        }
        for i in order[:3]
    ]
    return AttributionReport(
        sample_id=sample.sample_id,
        target_class=target_class,
        method=method,
        raw=raw,
        normalized=normalized,
        top3=top3,
        all_zero=all_zero,
    )


def occlusion_importance(model: EmotionClassifier, sample: MultimodalSample,
                         target_class: int) -> np.ndarray:
    """Leave-one-region-out importance: |score change| when region i is removed.

    Runs the same weights over the remaining k-1 regions (region tokens carry
    no positional order, so the parameter set is untouched by the change).
    """
    k = model.config.num_regions
    if k < 2:
        raise InvariantError("leave-one-out needs at least two regions")
    batch = batch_from_samples([sample], model.config.num_classes)
    base = model.attribution_scalar(batch, target_class, Tensor(batch.regions)).item()

    reduced = build_model(replace(model.config, num_regions=k - 1), seed=model.seed)
    for name, p in reduced.parameters().items():
        p.data = model.parameters()[name].data

    changes = np.zeros(k)
    for i in range(k):
        kept = np.delete(batch.regions, i, axis=1)
        score = reduced.attribution_scalar(batch, target_class, Tensor(kept)).item()
        changes[i] = abs(base - score)
    return changes


def pairwise_order_agreement(a: np.ndarray, b: np.ndarray) -> float:
    """Fraction of index pairs ordered the same way by both score vectors."""
    n = len(a)
    if n < 2:
        return 1.0
    agree = 0
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += 1
            if np.sign(a[i] - a[j]) == np.sign(b[i] - b[j]):
                agree += 1
    return agree / total
