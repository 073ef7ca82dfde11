"""Dense float64 tensors with tape-based reverse-mode differentiation.

A :class:`Tape` records every differentiable op executed while it is active
(one tape per thread; execution order is topological by construction).
``backward`` replays the record once in reverse, accumulating gradients into
the ``grad`` buffer of every leaf tensor that requires them.  Everything is
double precision; hot row kernels are dispatched through
:mod:`mmfusion.backend`.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional, Sequence

import numpy as np

from .backend import kernels
from .errors import InvariantError, ShapeError

_STATE = threading.local()


def _tape_stack() -> list:
    stack = getattr(_STATE, "stack", None)
    if stack is None:
        stack = []
        _STATE.stack = stack
    return stack


def active_tape() -> Optional["Tape"]:
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """A dense float64 array with an optional same-shape gradient buffer."""

    __slots__ = ("data", "requires_grad", "grad", "_tape")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._tape: Optional[Tape] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        if self._tape is None:
            raise InvariantError("tensor was not produced on an active tape")
        self._tape.backward(self)

    def __repr__(self) -> str:
        grad = ", grad" if self.grad is not None else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{grad})"

    # arithmetic sugar; scalars are folded in as constants
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / float(other))
        return NotImplemented

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def _coerce(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(np.asarray(value, dtype=np.float64))


class _Record:
    __slots__ = ("out", "parents", "backward_fn")

    def __init__(self, out, parents, backward_fn):
        self.out = out
        self.parents = parents
        self.backward_fn = backward_fn


class Tape(object):
    """Execution-ordered op record; confined to the thread that opened it."""

    def __init__(self):
        self._records: list[_Record] = []
        self._out_ids: set[int] = set()

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc_info) -> None:
        stack = _tape_stack()
        if not stack or stack[-1] is not self:
            raise InvariantError("tape context exited out of order")
        stack.pop()

    def __len__(self) -> int:
        return len(self._records)

    def _record(self, out: Tensor, parents: Sequence[Tensor], backward_fn: Callable) -> None:
        out.requires_grad = True
        out._tape = self
        self._records.append(_Record(out, tuple(parents), backward_fn))
        self._out_ids.add(id(out))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``."""
        if loss.data.shape != ():
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
        if loss._tape is not self:
            raise InvariantError("loss was not recorded on this tape")
        flowing: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
        for rec in reversed(self._records):
            grad_out = flowing.pop(id(rec.out), None)
            if grad_out is None:
                continue
            parent_grads = rec.backward_fn(grad_out)
            for parent, grad in zip(rec.parents, parent_grads):
                if grad is None or not parent.requires_grad:
                    continue
                if id(parent) in self._out_ids:
                    pid = id(parent)
                    if pid in flowing:
                        flowing[pid] = flowing[pid] + grad
                    else:
                        flowing[pid] = grad
                else:
                    if parent.grad is None:
                        parent.grad = np.zeros_like(parent.data)
                    parent.grad += grad


def backward(loss: Tensor) -> None:
    """Run reverse-mode differentiation from a scalar loss."""
    loss.backward()


def _make(out_data, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    out = Tensor(out_data)
    tape = active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        tape._record(out, parents, backward_fn)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_op(a: Tensor, b: Tensor, fn, name: str):
    try:
        return fn(a.data, b.data)
    except ValueError:
        raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a: Tensor, b: Tensor) -> Tensor:
    out = _broadcast_op(a, b, np.add, "add")

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(out, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = _broadcast_op(a, b, np.subtract, "sub")

    def bwd(g):
        return _unbroadcast(g, a.data.shape), -_unbroadcast(g, b.data.shape)

    return _make(out, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = _broadcast_op(a, b, np.multiply, "mul")

    def bwd(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _make(out, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    return _make(a.data * c, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs 2-D (or batched) operands, got {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    try:
        out = a.data @ b.data
    except ValueError:
        raise ShapeError(f"matmul batch dimensions disagree: {a.shape} x {b.shape}") from None

    def bwd(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape)
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)
        return ga, gb

    return _make(out, (a, b), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),))


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _make(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),))


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        g_expanded = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g_expanded, a.data.shape).copy(),)

    return _make(out, (a,), bwd)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = list(tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        slicer = [slice(None)] * g.ndim
        grads = []
        for i in range(len(tensors)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(slicer)])
        return tuple(grads)

    return _make(out, tensors, bwd)


def select(a: Tensor, index: int, axis: int) -> Tensor:
    """Pick one slice along ``axis`` (the axis disappears)."""
    if a.shape[axis] == 0:
        raise ShapeError(f"select on empty axis {axis} of shape {a.shape}")
    out = np.take(a.data, index, axis=axis)

    def bwd(g):
        full = np.zeros_like(a.data)
        slicer = [slice(None)] * a.ndim
        slicer[axis] = index
        full[tuple(slicer)] = g
        return (full,)

    return _make(out, (a,), bwd)


def embedding_lookup(table: Tensor, ids: np.ndarray, table_name: str = "embedding") -> Tensor:
    ids = np.asarray(ids)
    vocab = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= vocab):
        bad = int(ids.min()) if ids.min() < 0 else int(ids.max())
        raise IndexError(f"id {bad} out of range for {table_name} table of size {vocab}")
    out = table.data[ids]

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _make(out, (table,), bwd)


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)
    return _make(out, (a,), lambda g: (g * (a.data > 0.0),))


def gelu(a: Tensor) -> Tensor:
    flat = np.ascontiguousarray(a.data.reshape(-1))
    out = kernels.gelu_fwd(flat).reshape(a.shape)

    def bwd(g):
        gflat = np.ascontiguousarray(g.reshape(-1))
        return (kernels.gelu_bwd(flat, gflat).reshape(a.data.shape),)

    return _make(out, (a,), bwd)


def _rows_view(data: np.ndarray, axis: int):
    """C-contiguous 2-D view with ``axis`` last, plus the undo function."""
    moved = np.moveaxis(data, axis, -1)
    rows = np.ascontiguousarray(moved.reshape(-1, moved.shape[-1]))

    def restore(rows2d: np.ndarray) -> np.ndarray:
        return np.moveaxis(rows2d.reshape(moved.shape), -1, axis)

    return rows, restore


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    if a.shape[axis] == 0:
        raise ShapeError(f"softmax over empty axis {axis} of shape {a.shape}")
    rows, restore = _rows_view(a.data, axis)
    y_rows = kernels.softmax_fwd(rows)
    out = restore(y_rows)

    def bwd(g):
        g_rows, _ = _rows_view(g, axis)
        return (restore(kernels.softmax_bwd(y_rows, g_rows)),)

    return _make(out, (a,), bwd)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    if a.shape[axis] == 0:
        raise ShapeError(f"log_softmax over empty axis {axis} of shape {a.shape}")
    rows, restore = _rows_view(a.data, axis)
    y_rows = kernels.log_softmax_fwd(rows)
    out = restore(y_rows)

    def bwd(g):
        g_rows, _ = _rows_view(g, axis)
        return (restore(kernels.log_softmax_bwd(y_rows, g_rows)),)

    return _make(out, (a,), bwd)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    d = a.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(
            f"layer_norm affine shapes {gain.shape}/{bias.shape} do not match feature dim ({d},)"
        )
    rows, restore = _rows_view(a.data, -1)
    y_rows, xhat, inv_std = kernels.layer_norm_fwd(
        rows, np.ascontiguousarray(gain.data), np.ascontiguousarray(bias.data), eps
    )
    out = restore(y_rows)

    def bwd(g):
        g_rows, _ = _rows_view(g, -1)
        gx, ggain, gbias = kernels.layer_norm_bwd(
            g_rows, xhat, inv_std, np.ascontiguousarray(gain.data)
        )
        return restore(gx), ggain, gbias

    return _make(out, (a, gain, bias), bwd)


def dropout(a: Tensor, p: float, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    if not 0.0 <= p < 1.0:
        raise InvariantError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    if rng is None:
        raise InvariantError("training-mode dropout needs an explicit generator")
    keep = (rng.random(a.shape) >= p) / (1.0 - p)
    out = a.data * keep
    return _make(out, (a,), lambda g: (g * keep,))
