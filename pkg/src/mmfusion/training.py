"""Run configuration and the single-thread training loop."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .data import Dataset, batch_iterator
from .errors import ConfigError
from .evaluation import evaluate, mean_loss
from .models import EmotionClassifier, ModelConfig
from .optim import AdamW, ScheduleConfig, clip_grad_norm, lr_at
from .rng import substream
from .tensor import Tape

log = logging.getLogger(__name__)

LOSS_CHOICES = ("auto", "label_smoothed_ce", "kl")


@dataclass
class OptimizerConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass
class RunConfig:
    """Everything a training run needs besides the dataset itself."""

    model: ModelConfig
    schedule: ScheduleConfig
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    loss: str = "auto"
    seed: int = 0
    batch_size: int = 32
    eval_every: int = 100
    clip_norm: Optional[float] = None

    def __post_init__(self):
        if self.loss not in LOSS_CHOICES:
            raise ConfigError(f"loss must be one of {LOSS_CHOICES}, got {self.loss!r}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.eval_every < 1:
            raise ConfigError(f"eval_every must be >= 1, got {self.eval_every}")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        """Build from a plain JSON document, rejecting unknown keys."""
        raw = dict(raw)
        _reject_unknown(raw, ("model", "schedule", "optimizer", "loss", "seed",
                              "batch_size", "eval_every", "clip_norm"), "run config")
        model_raw = raw.pop("model", None)
        if not isinstance(model_raw, dict):
            raise ConfigError("run config needs a 'model' object")
        schedule_raw = raw.pop("schedule", None)
        if not isinstance(schedule_raw, dict):
            raise ConfigError("run config needs a 'schedule' object")
        optimizer_raw = raw.pop("optimizer", {})
        _reject_unknown(model_raw, _dataclass_keys(ModelConfig), "model config")
        _reject_unknown(schedule_raw, _dataclass_keys(ScheduleConfig), "schedule config")
        _reject_unknown(optimizer_raw, _dataclass_keys(OptimizerConfig), "optimizer config")
        try:
            model = ModelConfig(**model_raw)
            schedule = ScheduleConfig(**schedule_raw)
            optimizer = OptimizerConfig(**optimizer_raw)
            return cls(model=model, schedule=schedule, optimizer=optimizer, **raw)
        except TypeError as exc:
            raise ConfigError(f"invalid run config: {exc}") from None

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)


def _dataclass_keys(cls) -> tuple:
    return tuple(cls.__dataclass_fields__.keys())


def _reject_unknown(raw: dict, allowed: Sequence[str], where: str) -> None:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def load_run_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return RunConfig.from_dict(raw)


def train_model(
    model: EmotionClassifier,
    dataset: Dataset,
    run: RunConfig,
    metrics_path: Optional[str] = None,
) -> list[dict]:
    """Train for ``schedule.total_steps`` optimizer steps.

    Every ``eval_every`` steps (and at the end) the model is scored on the
    train split and, when present, the validation split; one JSON line per
    (step, split) goes to ``metrics_path``.  Deterministic given (seed,
    config, dataset).
    """
    train_samples = dataset.split("train")
    if not train_samples:
        raise ConfigError("dataset has no train split")
    val_samples = dataset.split("val")
    C = dataset.num_classes

    optimizer = AdamW(
        model.parameters(),
        beta1=run.optimizer.beta1,
        beta2=run.optimizer.beta2,
        eps=run.optimizer.eps,
        weight_decay=run.optimizer.weight_decay,
    )
    dropout_rng = substream(run.seed, "dropout")

    history: list[dict] = []
    sink = open(metrics_path, "w", encoding="utf-8") if metrics_path else None

    def record(step: int) -> None:
        lr = lr_at(step, run.schedule)
        rows = [("train", train_samples)]
        if val_samples:
            rows.append(("val", val_samples))
        for split_name, samples in rows:
            report = evaluate(model, samples, dataset.class_names, run.batch_size)
            row = {
                "step": step,
                "split": split_name,
                "loss": mean_loss(model, samples, C, run.loss, run.batch_size),
                "accuracy": report.accuracy,
                "macro_f1": report.macro_f1,
                "lr": lr,
            }
            history.append(row)
            if sink:
                sink.write(json.dumps(row) + "\n")
                sink.flush()
            log.info(
                "step %d %s: loss=%.4f acc=%.4f f1=%.4f lr=%.2e",
                step, split_name, row["loss"], row["accuracy"], row["macro_f1"], lr,
            )

    try:
        step = 0
        epoch = 0
        total = run.schedule.total_steps
        while step < total:
            epoch_seed = int(substream(run.seed, f"shuffle-epoch-{epoch}").integers(0, 2**62))
            for batch in batch_iterator(train_samples, C, run.batch_size, shuffle_seed=epoch_seed):
                step += 1
                with Tape() as tape:
                    loss = model.training_loss(batch, training=True, rng=dropout_rng, loss=run.loss)
                    tape.backward(loss)
                if run.clip_norm is not None:
                    clip_grad_norm(model.parameters(), run.clip_norm)
                optimizer.step(lr_at(step, run.schedule))
                optimizer.zero_grad()
                if step % run.eval_every == 0 or step == total:
                    record(step)
                if step >= total:
                    break
            epoch += 1
    finally:
        if sink:
            sink.close()
    return history
