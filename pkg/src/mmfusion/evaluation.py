"""Accuracy, per-class precision/recall/F1, macro-F1 and confusion matrices.

Conventions: confusion rows are true classes, columns predictions; classes
with zero support and zero predictions contribute F1 = 0 to the macro
average (they are not skipped).
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import MultimodalSample, batch_iterator
from .errors import InvariantError


@dataclass
class EvalReport:
    class_names: list[str]
    confusion: np.ndarray  # [C, C] int64, rows = true class
    accuracy: float
    macro_f1: float
    precision: list[float]
    recall: list[float]
    f1: list[float]
    support: list[int]
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "class_names": self.class_names,
            "confusion": self.confusion.tolist(),
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
            "n_samples": self.n_samples,
        }


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, num_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise InvariantError(f"prediction count {y_pred.shape} != truth count {y_true.shape}")
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(matrix, (y_true, y_pred), 1)
    return matrix


def report_from_confusion(confusion: np.ndarray, class_names: Sequence[str]) -> EvalReport:
    confusion = np.asarray(confusion, dtype=np.int64)
    C = confusion.shape[0]
    if confusion.shape != (C, C) or C != len(class_names):
        raise InvariantError(
            f"confusion shape {confusion.shape} does not match {len(class_names)} classes"
        )
    total = int(confusion.sum())
    if total == 0:
        raise InvariantError("cannot evaluate an empty split")
    tp = np.diag(confusion).astype(np.float64)
    predicted = confusion.sum(axis=0).astype(np.float64)
    actual = confusion.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, predicted, out=np.zeros(C), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros(C), where=actual > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(C), where=denom > 0)
    return EvalReport(
        class_names=list(class_names),
        confusion=confusion,
        accuracy=float(tp.sum() / total),
        macro_f1=float(f1.mean()),
        precision=[float(x) for x in precision],
        recall=[float(x) for x in recall],
        f1=[float(x) for x in f1],
        support=[int(x) for x in actual],
        n_samples=total,
    )


def report_from_predictions(y_true, y_pred, class_names: Sequence[str]) -> EvalReport:
    return report_from_confusion(confusion_matrix(y_true, y_pred, len(class_names)), class_names)


def predict_labels(model, samples: Sequence[MultimodalSample], num_classes: int,
                   batch_size: int = 64) -> np.ndarray:
    preds = []
    for batch in batch_iterator(samples, num_classes, batch_size):
        probs = model.predict_proba(batch)
        preds.append(np.argmax(probs, axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def evaluate(model, samples: Sequence[MultimodalSample], class_names: Sequence[str],
             batch_size: int = 64, workers: int = 1) -> EvalReport:
    """Run the model over a split and summarize; optionally sharded across
    threads, with per-shard confusion counts merged additively."""
    samples = list(samples)
    if not samples:
        raise InvariantError("cannot evaluate an empty split")
    C = len(class_names)
    y_true = np.array([s.label for s in samples], dtype=np.int64)
    if workers <= 1 or len(samples) < 2 * workers:
        y_pred = predict_labels(model, samples, C, batch_size)
        return report_from_confusion(confusion_matrix(y_true, y_pred, C), class_names)
    shards = [samples[i::workers] for i in range(workers)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        pred_shards = list(pool.map(lambda sh: predict_labels(model, sh, C, batch_size), shards))
    confusion = np.zeros((C, C), dtype=np.int64)
    for shard, preds in zip(shards, pred_shards):
        truth = np.array([s.label for s in shard], dtype=np.int64)
        confusion += confusion_matrix(truth, preds, C)
    return report_from_confusion(confusion, class_names)


def mean_loss(model, samples: Sequence[MultimodalSample], num_classes: int,
              loss: str = "auto", batch_size: int = 64) -> float:
    """Average training objective over a split, evaluated without dropout."""
    samples = list(samples)
    if not samples:
        raise InvariantError("cannot evaluate an empty split")
    total = 0.0
    for batch in batch_iterator(samples, num_classes, batch_size):
        total += model.training_loss(batch, training=False, loss=loss).item() * len(batch)
    return total / len(samples)


def export_confusion_csv(report: EvalReport, path: str) -> None:
    """Confusion counts with class-name header row and column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred"] + report.class_names)
        for name, row in zip(report.class_names, report.confusion):
            writer.writerow([name] + [int(x) for x in row])


def export_report_json(report: EvalReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


def load_confusion_csv(path: str) -> tuple[list[str], np.ndarray]:
    """Inverse of :func:`export_confusion_csv`."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    names = rows[0][1:]
    matrix = np.array([[int(x) for x in row[1:]] for row in rows[1:]], dtype=np.int64)
    return names, matrix
