"""Decoupled-weight-decay adaptive optimizer and the warmup/decay schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .errors import ConfigError, InvariantError
from .tensor import Tensor


@dataclass
class ScheduleConfig:
    """Linear ramp from 0 to ``peak_lr`` over ``warmup_steps``, then linear
    decay back to 0 at ``total_steps``."""

    peak_lr: float
    warmup_steps: int
    total_steps: int

    def __post_init__(self):
        if not 0 < self.warmup_steps <= self.total_steps:
            raise ConfigError(
                f"need 0 < warmup_steps <= total_steps, got {self.warmup_steps}/{self.total_steps}"
            )
        if self.peak_lr <= 0:
            raise ConfigError(f"peak_lr must be positive, got {self.peak_lr}")


def lr_at(step: int, schedule: ScheduleConfig) -> float:
    """Learning rate at an optimizer step; exact peak at the warmup boundary."""
    if step < 0:
        raise ConfigError(f"step must be nonnegative, got {step}")
    if step <= schedule.warmup_steps:
        return schedule.peak_lr * (step / schedule.warmup_steps)
    if step >= schedule.total_steps:
        return 0.0
    remaining = schedule.total_steps - step
    return schedule.peak_lr * (remaining / (schedule.total_steps - schedule.warmup_steps))


@dataclass
class OptimizerState:
    """Per-parameter moment buffers plus the shared step counter."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


class AdamW:
    """Adam with bias correction and decoupled weight decay.

    With ``weight_decay=0`` the update is bitwise identical to plain Adam
    (the decay term is skipped, not multiplied by zero in a different order).
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        self.params = dict(params)
        for p in self.params.values():
            # updates run on flat views, which require contiguous storage
            if not p.data.flags.c_contiguous:
                p.data = np.ascontiguousarray(p.data)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = OptimizerState(
            m={name: np.zeros_like(p.data) for name, p in self.params.items()},
            v={name: np.zeros_like(p.data) for name, p in self.params.items()},
        )

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr: float | None = None) -> None:
        """Apply one update using every parameter's accumulated gradient."""
        lr = self.lr if lr is None else lr
        self.state.step += 1
        bc1 = 1.0 - self.beta1 ** self.state.step
        bc2 = 1.0 - self.beta2 ** self.state.step
        for name, p in self.params.items():
            if p.grad is None:
                raise InvariantError(f"parameter {name!r} has no gradient")
            kernels.adamw_update(
                p.data.reshape(-1),
                np.ascontiguousarray(p.grad.reshape(-1)),
                self.state.m[name].reshape(-1),
                self.state.v[name].reshape(-1),
                lr,
                self.beta1,
                self.beta2,
                self.eps,
                self.weight_decay,
                bc1,
                bc2,
            )


def clip_grad_norm(params: dict[str, Tensor], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    total = 0.0
    for name, p in params.items():
        if p.grad is None:
            raise InvariantError(f"parameter {name!r} has no gradient")
        total += float((p.grad * p.grad).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0:
        factor = max_norm / norm
        for p in params.values():
            p.grad *= factor
    return norm
