"""Reusable network components: embeddings, attention, encoder layers, pooling.

Parameter-holding classes expose ``parameters(prefix)`` returning an ordered
``{name: Tensor}`` map; that naming is what checkpoints and the optimizer
key on.  Parameters are read-shared across threads during inference and are
mutated only by the optimizer on the training thread.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import tensor as T
from .errors import InvariantError, ShapeError
from .tensor import Tensor

SEGMENT_IMAGE = 0
SEGMENT_TEXT = 1

MASKED_SCORE = -1e9


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def normal_param(rng: np.random.Generator, shape, std: float = 0.02) -> Tensor:
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)


class Linear:
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int):
        self.weight = xavier_uniform(rng, d_in, d_out, (d_in, d_out))
        self.bias = Tensor(np.zeros(d_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return T.matmul(x, self.weight) + self.bias

    def parameters(self, prefix: str) -> dict:
        return {f"{prefix}.weight": self.weight, f"{prefix}.bias": self.bias}


class EmbeddingTable:
    """Lookup table; out-of-range ids raise an IndexError naming the table."""

    def __init__(self, rng: np.random.Generator, vocab_size: int, dim: int, name: str):
        self.name = name
        self.vocab_size = vocab_size
        self.weights = normal_param(rng, (vocab_size, dim))

    def lookup(self, ids: np.ndarray) -> Tensor:
        return T.embedding_lookup(self.weights, ids, table_name=self.name)

    def parameters(self, prefix: str) -> dict:
        return {f"{prefix}.weights": self.weights}


def embed_sequence(
    token_ids: np.ndarray,
    position_ids: np.ndarray,
    segment_ids: np.ndarray,
    token_table: EmbeddingTable,
    position_table: EmbeddingTable,
    segment_table: EmbeddingTable,
) -> Tensor:
    """Sum of token, position and segment lookups for equal-length id arrays."""
    token_ids = np.asarray(token_ids)
    position_ids = np.asarray(position_ids)
    segment_ids = np.asarray(segment_ids)
    if not (token_ids.shape == position_ids.shape == segment_ids.shape):
        raise ShapeError(
            "id arrays must agree: "
            f"tokens {token_ids.shape}, positions {position_ids.shape}, segments {segment_ids.shape}"
        )
    if segment_ids.size and not np.isin(segment_ids, (SEGMENT_IMAGE, SEGMENT_TEXT)).all():
        raise IndexError(f"segment ids must be {SEGMENT_IMAGE} (image) or {SEGMENT_TEXT} (text)")
    return (
        token_table.lookup(token_ids)
        + position_table.lookup(position_ids)
        + segment_table.lookup(segment_ids)
    )


class AttentionMask:
    """Boolean keep flags per (query, key) position.

    ``keep`` is either ``[batch, n_keys]`` (key padding, broadcast over
    queries) or ``[batch, n_queries, n_keys]``.
    """

    def __init__(self, keep: np.ndarray):
        keep = np.asarray(keep, dtype=bool)
        if keep.ndim not in (2, 3):
            raise ShapeError(f"mask must be [batch, keys] or [batch, queries, keys], got {keep.shape}")
        self.keep = keep

    @classmethod
    def from_key_padding(cls, keep_keys: np.ndarray) -> "AttentionMask":
        return cls(np.asarray(keep_keys, dtype=bool))

    def additive(self, batch: int, n_queries: int, n_keys: int) -> np.ndarray:
        """Bias for pre-softmax scores, shaped to broadcast over heads."""
        keep = self.keep
        if keep.shape[0] != batch or keep.shape[-1] != n_keys:
            raise ShapeError(
                f"mask shape {keep.shape} does not match batch {batch} x keys {n_keys}"
            )
        if keep.ndim == 2:
            keep = keep[:, None, None, :]
        else:
            if keep.shape[1] != n_queries:
                raise ShapeError(
                    f"mask shape {self.keep.shape} does not match queries {n_queries}"
                )
            keep = keep[:, None, :, :]
        return np.where(keep, 0.0, MASKED_SCORE)


class MultiHeadAttention:
    """Scaled dot-product attention with ``heads`` parallel heads.

    Self-attention when queries and keys/values come from the same tensor;
    cross-attention otherwise.  Output length always equals query length.
    """

    def __init__(self, rng: np.random.Generator, model_dim: int, heads: int, dropout: float = 0.0):
        if model_dim % heads != 0:
            raise InvariantError(f"model_dim {model_dim} must be divisible by heads {heads}")
        self.model_dim = model_dim
        self.heads = heads
        self.head_dim = model_dim // heads
        self.dropout = dropout
        self.wq = Linear(rng, model_dim, model_dim)
        self.wk = Linear(rng, model_dim, model_dim)
        self.wv = Linear(rng, model_dim, model_dim)
        self.wo = Linear(rng, model_dim, model_dim)

    def _split_heads(self, x: Tensor, batch: int, length: int) -> Tensor:
        x = T.reshape(x, (batch, length, self.heads, self.head_dim))
        return T.transpose(x, (0, 2, 1, 3))

    def __call__(
        self,
        q_input: Tensor,
        kv_input: Tensor,
        mask: Optional[AttentionMask] = None,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
        return_weights: bool = False,
    ):
        batch, n_q, _ = q_input.shape
        n_k = kv_input.shape[1]
        q = self._split_heads(self.wq(q_input), batch, n_q)
        k = self._split_heads(self.wk(kv_input), batch, n_k)
        v = self._split_heads(self.wv(kv_input), batch, n_k)

        scores = T.matmul(q, T.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(self.head_dim))
        if mask is not None:
            scores = scores + Tensor(mask.additive(batch, n_q, n_k))
        weights = T.softmax(scores, axis=-1)
        weights = T.dropout(weights, self.dropout, training, rng)

        context = T.matmul(weights, v)
        context = T.transpose(context, (0, 2, 1, 3))
        context = T.reshape(context, (batch, n_q, self.model_dim))
        out = self.wo(context)
        if return_weights:
            return out, weights.data
        return out

    def parameters(self, prefix: str) -> dict:
        params = {}
        for name, block in (("q", self.wq), ("k", self.wk), ("v", self.wv), ("o", self.wo)):
            params.update(block.parameters(f"{prefix}.{name}"))
        return params


class FeedForward:
    def __init__(self, rng: np.random.Generator, model_dim: int, ff_dim: int):
        self.inner = Linear(rng, model_dim, ff_dim)
        self.outer = Linear(rng, ff_dim, model_dim)

    def __call__(self, x: Tensor) -> Tensor:
        return self.outer(T.gelu(self.inner(x)))

    def parameters(self, prefix: str) -> dict:
        return {
            **self.inner.parameters(f"{prefix}.inner"),
            **self.outer.parameters(f"{prefix}.outer"),
        }


class LayerNorm:
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.bias = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gain, self.bias, self.eps)

    def parameters(self, prefix: str) -> dict:
        return {f"{prefix}.gain": self.gain, f"{prefix}.bias": self.bias}


class EncoderLayer:
    """Post-norm transformer block: attention and feed-forward sublayers,
    each wrapped in residual + layer norm.  Output shape equals input shape.
    """

    def __init__(self, rng: np.random.Generator, model_dim: int, heads: int, ff_dim: int,
                 dropout: float = 0.0):
        self.attn = MultiHeadAttention(rng, model_dim, heads, dropout)
        self.ff = FeedForward(rng, model_dim, ff_dim)
        self.ln1 = LayerNorm(model_dim)
        self.ln2 = LayerNorm(model_dim)
        self.dropout = dropout

    def __call__(
        self,
        x: Tensor,
        kv: Optional[Tensor] = None,
        kv_mask: Optional[AttentionMask] = None,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        kv_input = x if kv is None else kv
        attended = self.attn(x, kv_input, kv_mask, training, rng)
        h = self.ln1(x + T.dropout(attended, self.dropout, training, rng))
        return self.ln2(h + T.dropout(self.ff(h), self.dropout, training, rng))

    def parameters(self, prefix: str) -> dict:
        return {
            **self.attn.parameters(f"{prefix}.attn"),
            **self.ff.parameters(f"{prefix}.ff"),
            **self.ln1.parameters(f"{prefix}.ln1"),
            **self.ln2.parameters(f"{prefix}.ln2"),
        }


class ClassifierHead:
    """FC classification stack: one hidden layer with ReLU, then the output."""

    def __init__(self, rng: np.random.Generator, d_in: int, hidden: int, n_out: int):
        self.hidden = Linear(rng, d_in, hidden)
        self.out = Linear(rng, hidden, n_out)

    def __call__(self, x: Tensor) -> Tensor:
        return self.out(T.relu(self.hidden(x)))

    def parameters(self, prefix: str) -> dict:
        return {
            **self.hidden.parameters(f"{prefix}.hidden"),
            **self.out.parameters(f"{prefix}.out"),
        }


def pool_average(x: Tensor, keep: Optional[np.ndarray] = None) -> Tensor:
    """Mean over sequence positions, restricted to unmasked ones."""
    batch, length, _ = x.shape
    if keep is None:
        keep = np.ones((batch, length), dtype=bool)
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != (batch, length):
        raise ShapeError(f"pool mask shape {keep.shape} does not match sequence {(batch, length)}")
    counts = keep.sum(axis=1)
    if (counts == 0).any():
        raise InvariantError("cannot average-pool a fully masked sequence")
    weighted = T.mul(x, Tensor(keep[:, :, None].astype(np.float64)))
    summed = T.tsum(weighted, axis=1)
    return T.mul(summed, Tensor(1.0 / counts[:, None]))


def pool_first_token(x: Tensor) -> Tensor:
    """The first sequence position (classification-token pooling)."""
    if x.shape[1] == 0:
        raise ShapeError(f"cannot pool first token of empty sequence, shape {x.shape}")
    return T.select(x, 0, axis=1)
