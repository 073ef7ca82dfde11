"""The four classifier families behind one train/predict interface.

* ``early_fusion_avg`` / ``early_fusion_first`` — pooled caption embedding
  concatenated with average-pooled region features, then an FC head.
* ``dual_stream_late_fusion`` — an image-guided stream (region queries over
  caption keys/values) and a text-guided stream (the converse), each through
  a stack of cross-attention encoder layers, average-pooled, classified, and
  fused as ``w1 * p_img + w2 * p_txt``.
* ``single_stream_bitransformer`` — one encoder over
  ``[CLS] + projected regions (segment 0) + caption tokens (segment 1)``,
  classifying from the [CLS] output.  ``num_regions=0`` degenerates to a
  text-only classifier.
* ``image_only_mlp`` — average-pooled region features through an MLP,
  trained against per-sample annotator distributions.

Checkpoints are a single binary file: magic ``MMFL``, little-endian u16
version, a JSON config block, then named parameter blobs (u16 name length,
name, u8 rank, u32 dims, float64 little-endian data).
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import losses
from . import tensor as T
from .data import Batch, CLS_ID
from .errors import ConfigError, FormatError, InvariantError, ShapeError
from .nn import (
    SEGMENT_IMAGE,
    SEGMENT_TEXT,
    AttentionMask,
    ClassifierHead,
    EmbeddingTable,
    EncoderLayer,
    Linear,
    embed_sequence,
    pool_average,
    pool_first_token,
)
from .rng import substream
from .tensor import Tensor

log = logging.getLogger(__name__)

EARLY_FUSION_AVG = "early_fusion_avg"
EARLY_FUSION_FIRST = "early_fusion_first"
DUAL_STREAM = "dual_stream_late_fusion"
SINGLE_STREAM = "single_stream_bitransformer"
IMAGE_ONLY = "image_only_mlp"
FAMILIES = (EARLY_FUSION_AVG, EARLY_FUSION_FIRST, DUAL_STREAM, SINGLE_STREAM, IMAGE_ONLY)

CHECKPOINT_MAGIC = b"MMFL"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    family: str
    num_classes: int = 9
    vocab_size: int = 32
    encoder_layers: int = 2
    heads: int = 4
    model_dim: int = 64
    ff_dim: int = 128
    max_text_len: int = 16
    num_regions: int = 4
    region_feature_dim: int = 16
    dropout: float = 0.1
    label_smoothing: float = 0.1
    cls_hidden_dim: int = 64
    fusion_trainable: bool = True
    fusion_w1: float = 0.5
    fusion_w2: float = 0.5
    per_stream_loss: bool = True
    kl_reverse: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown model family {self.family!r}, expected one of {FAMILIES}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.num_regions < 0:
            raise ConfigError(f"num_regions must be >= 0, got {self.num_regions}")
        if self.num_regions == 0 and self.family != SINGLE_STREAM:
            raise ConfigError(f"{self.family} requires at least one region")
        if self.model_dim % self.heads != 0:
            raise ConfigError(f"model_dim {self.model_dim} not divisible by heads {self.heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 <= self.label_smoothing <= 1.0:
            raise ConfigError(f"label_smoothing must be in [0, 1], got {self.label_smoothing}")
        if self.vocab_size < 3:
            raise ConfigError("vocab_size must cover the special tokens")


def fullscale_preset(family: str, **overrides) -> ModelConfig:
    """The large configuration used for full-corpus experiments."""
    base = dict(model_dim=256, ff_dim=1024, heads=8, max_text_len=64,
                num_regions=50, region_feature_dim=2048, cls_hidden_dim=256)
    if family == DUAL_STREAM:
        base["encoder_layers"] = 5
    elif family == SINGLE_STREAM:
        base["encoder_layers"] = 12
    base.update(overrides)
    return ModelConfig(family=family, **base)


@dataclass(frozen=True)
class FusionWeights:
    """Convex weights over the image- and text-guided stream probabilities."""

    w1: float
    w2: float
    renormalized: bool = False

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0:
            raise InvariantError(f"fusion weights must be nonnegative, got ({self.w1}, {self.w2})")
        if abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise InvariantError(
                "fusion weights must sum to 1; use FusionWeights.create to normalize"
            )

    @classmethod
    def create(cls, w1: float, w2: float) -> "FusionWeights":
        if w1 < 0 or w2 < 0:
            raise InvariantError(f"fusion weights must be nonnegative, got ({w1}, {w2})")
        total = w1 + w2
        if total == 0:
            raise InvariantError("fusion weights must not both be zero")
        if abs(total - 1.0) > 1e-12:
            log.warning("fusion weights (%g, %g) renormalized to sum 1", w1, w2)
            return cls(w1 / total, w2 / total, renormalized=True)
        return cls(w1, w2)


def validate_class_probabilities(probs: np.ndarray, atol: float = 1e-9) -> np.ndarray:
    probs = np.atleast_2d(np.asarray(probs))
    if (probs < 0).any() or (probs > 1).any():
        raise InvariantError("class probabilities must lie in [0, 1]")
    if not np.allclose(probs.sum(axis=1), 1.0, atol=atol):
        raise InvariantError("class probabilities must sum to 1")
    return probs


class EmotionClassifier:
    """Shared surface: parameter map, probability prediction, training loss."""

    def __init__(self, config: ModelConfig, seed: int):
        self.config = config
        self.seed = seed
        self._parameters: dict[str, Tensor] = {}

    def parameters(self) -> dict[str, Tensor]:
        return self._parameters

    def _register(self, params: dict[str, Tensor]) -> None:
        self._parameters.update(params)

    def _check_regions(self, regions: np.ndarray) -> None:
        cfg = self.config
        if cfg.num_regions == 0:
            return
        expected = (cfg.num_regions, cfg.region_feature_dim)
        if regions.ndim != 3 or regions.shape[1:] != expected:
            raise ShapeError(
                f"region features shaped {regions.shape[1:]} do not match configured {expected}"
            )

    def _region_tensor(self, batch: Batch, override: Optional[Tensor]) -> Tensor:
        if override is not None:
            self._check_regions(override.data)
            return override
        self._check_regions(batch.regions)
        return Tensor(batch.regions)

    def _check_text(self, batch: Batch) -> None:
        if batch.token_ids.shape[1] > self.config.max_text_len:
            limit = self.config.max_text_len
            raise InvariantError(
                f"text length {batch.token_ids.shape[1]} exceeds configured limit {limit}"
            )

    # family-specific
    def predict_proba(self, batch: Batch) -> np.ndarray:
        raise NotImplementedError

    def training_loss(self, batch: Batch, training: bool = True,
                      rng: Optional[np.random.Generator] = None, loss: str = "auto") -> Tensor:
        raise NotImplementedError

    def attribution_scalar(self, batch: Batch, target_class: int, regions: Tensor) -> Tensor:
        """Differentiable score of one class for a single-sample batch."""
        raise NotImplementedError

    def _ce(self, logits: Tensor, batch: Batch) -> Tensor:
        return losses.label_smoothed_ce(
            logits, batch.labels, self.config.label_smoothing, self.config.num_classes
        )

    def _kl(self, logits: Tensor, batch: Batch) -> Tensor:
        return losses.kl_to_annotator(logits, batch.distributions, reverse=self.config.kl_reverse)


class EarlyFusionModel(EmotionClassifier):
    """Pooled caption embedding ++ average-pooled regions, FC head on top."""

    def __init__(self, config: ModelConfig, seed: int):
        super().__init__(config, seed)
        rng = substream(seed, "init")
        self.token_table = EmbeddingTable(rng, config.vocab_size, config.model_dim, "token")
        self.head = ClassifierHead(
            rng,
            config.model_dim + config.region_feature_dim,
            config.cls_hidden_dim,
            config.num_classes,
        )
        self._register(self.token_table.parameters("token_table"))
        self._register(self.head.parameters("head"))

    def forward_logits(self, batch: Batch, training: bool = False,
                       rng: Optional[np.random.Generator] = None,
                       regions: Optional[Tensor] = None) -> Tensor:
        self._check_text(batch)
        region_tensor = self._region_tensor(batch, regions)
        embedded = self.token_table.lookup(batch.token_ids)
        embedded = T.dropout(embedded, self.config.dropout, training, rng)
        if self.config.family == EARLY_FUSION_AVG:
            pooled_text = pool_average(embedded, batch.token_keep)
        else:
            pooled_text = pool_first_token(embedded)
        pooled_regions = T.mean(region_tensor, axis=1)
        return self.head(T.concat([pooled_text, pooled_regions], axis=1))

    def predict_proba(self, batch: Batch) -> np.ndarray:
        return T.softmax(self.forward_logits(batch), axis=-1).data

    def training_loss(self, batch, training=True, rng=None, loss="auto"):
        logits = self.forward_logits(batch, training, rng)
        if loss in ("auto", "label_smoothed_ce"):
            return self._ce(logits, batch)
        if loss == "kl":
            return self._kl(logits, batch)
        raise ConfigError(f"unknown loss {loss!r}")

    def attribution_scalar(self, batch, target_class, regions):
        logits = self.forward_logits(batch, regions=regions)
        return T.select(T.select(logits, 0, axis=0), target_class, axis=0)


class ImageOnlyModel(EmotionClassifier):
    """Average-pooled region features through an MLP."""

    def __init__(self, config: ModelConfig, seed: int):
        super().__init__(config, seed)
        rng = substream(seed, "init")
        self.head = ClassifierHead(
            rng, config.region_feature_dim, config.cls_hidden_dim, config.num_classes
        )
        self._register(self.head.parameters("head"))

    def forward_logits(self, batch: Batch, training: bool = False,
                       rng: Optional[np.random.Generator] = None,
                       regions: Optional[Tensor] = None) -> Tensor:
        region_tensor = self._region_tensor(batch, regions)
        return self.head(T.mean(region_tensor, axis=1))

    def predict_proba(self, batch: Batch) -> np.ndarray:
        return T.softmax(self.forward_logits(batch), axis=-1).data

    def training_loss(self, batch, training=True, rng=None, loss="auto"):
        logits = self.forward_logits(batch, training, rng)
        if loss in ("auto", "kl"):
            return self._kl(logits, batch)
        if loss == "label_smoothed_ce":
            return self._ce(logits, batch)
        raise ConfigError(f"unknown loss {loss!r}")

    def attribution_scalar(self, batch, target_class, regions):
        logits = self.forward_logits(batch, regions=regions)
        return T.select(T.select(logits, 0, axis=0), target_class, axis=0)


class DualStreamModel(EmotionClassifier):
    """Cross-attention streams with weighted late fusion of probabilities."""

    def __init__(self, config: ModelConfig, seed: int):
        super().__init__(config, seed)
        rng = substream(seed, "init")
        d = config.model_dim
        self.token_table = EmbeddingTable(rng, config.vocab_size, d, "token")
        self.position_table = EmbeddingTable(rng, config.max_text_len, d, "position")
        self.region_proj = Linear(rng, config.region_feature_dim, d)
        self.img_layers = [
            EncoderLayer(rng, d, config.heads, config.ff_dim, config.dropout)
            for _ in range(config.encoder_layers)
        ]
        self.txt_layers = [
            EncoderLayer(rng, d, config.heads, config.ff_dim, config.dropout)
            for _ in range(config.encoder_layers)
        ]
        self.img_head = ClassifierHead(rng, d, config.cls_hidden_dim, config.num_classes)
        self.txt_head = ClassifierHead(rng, d, config.cls_hidden_dim, config.num_classes)

        self._register(self.token_table.parameters("token_table"))
        self._register(self.position_table.parameters("position_table"))
        self._register(self.region_proj.parameters("region_proj"))
        for i, layer in enumerate(self.img_layers):
            self._register(layer.parameters(f"img_stream.{i}"))
        for i, layer in enumerate(self.txt_layers):
            self._register(layer.parameters(f"txt_stream.{i}"))
        self._register(self.img_head.parameters("img_head"))
        self._register(self.txt_head.parameters("txt_head"))

        self.frozen_fusion = FusionWeights.create(config.fusion_w1, config.fusion_w2)
        if config.fusion_trainable:
            self.fusion_raw = Tensor(np.zeros(2), requires_grad=True)
            self._register({"fusion.raw": self.fusion_raw})
        else:
            self.fusion_raw = None

    def _embed_text(self, batch: Batch, training: bool, rng) -> Tensor:
        self._check_text(batch)
        n = batch.token_ids.shape[1]
        positions = np.broadcast_to(np.arange(n), batch.token_ids.shape)
        embedded = self.token_table.lookup(batch.token_ids) + self.position_table.lookup(positions)
        return T.dropout(embedded, self.config.dropout, training, rng)

    def forward_streams(self, batch: Batch, training: bool = False,
                        rng: Optional[np.random.Generator] = None,
                        regions: Optional[Tensor] = None) -> tuple[Tensor, Tensor]:
        """Per-stream logits: (image-guided, text-guided)."""
        region_tensor = self._region_tensor(batch, regions)
        text_memory = self._embed_text(batch, training, rng)
        region_memory = self.region_proj(region_tensor)
        text_mask = batch.text_mask()

        x = region_memory
        for layer in self.img_layers:
            x = layer(x, kv=text_memory, kv_mask=text_mask, training=training, rng=rng)
        img_logits = self.img_head(pool_average(x))

        y = text_memory
        for layer in self.txt_layers:
            y = layer(y, kv=region_memory, kv_mask=None, training=training, rng=rng)
        txt_logits = self.txt_head(pool_average(y, batch.token_keep))
        return img_logits, txt_logits

    def fusion_weights(self) -> FusionWeights:
        """Current effective weights as plain numbers."""
        if self.fusion_raw is not None:
            w = T.softmax(T.reshape(self.fusion_raw, (1, 2)), axis=-1).data[0]
            return FusionWeights(float(w[0]), float(w[1]))
        return self.frozen_fusion

    def _fuse(self, p_img: Tensor, p_txt: Tensor, fusion: Optional[FusionWeights]) -> Tensor:
        if fusion is not None:
            return p_img * fusion.w1 + p_txt * fusion.w2
        if self.fusion_raw is not None:
            w = T.softmax(T.reshape(self.fusion_raw, (1, 2)), axis=-1)
            w1 = T.select(T.select(w, 0, axis=0), 0, axis=0)
            w2 = T.select(T.select(w, 0, axis=0), 1, axis=0)
            return T.mul(p_img, w1) + T.mul(p_txt, w2)
        return p_img * self.frozen_fusion.w1 + p_txt * self.frozen_fusion.w2

    def forward_probs(self, batch: Batch, fusion: Optional[FusionWeights] = None,
                      training: bool = False, rng: Optional[np.random.Generator] = None,
                      regions: Optional[Tensor] = None) -> Tensor:
        img_logits, txt_logits = self.forward_streams(batch, training, rng, regions)
        return self._fuse(T.softmax(img_logits, axis=-1), T.softmax(txt_logits, axis=-1), fusion)

    def predict_proba(self, batch: Batch, fusion: Optional[FusionWeights] = None) -> np.ndarray:
        return self.forward_probs(batch, fusion=fusion).data

    def stream_probabilities(self, batch: Batch) -> tuple[np.ndarray, np.ndarray]:
        img_logits, txt_logits = self.forward_streams(batch)
        return (
            T.softmax(img_logits, axis=-1).data,
            T.softmax(txt_logits, axis=-1).data,
        )

    def training_loss(self, batch, training=True, rng=None, loss="auto"):
        img_logits, txt_logits = self.forward_streams(batch, training, rng)
        p_img = T.softmax(img_logits, axis=-1)
        p_txt = T.softmax(txt_logits, axis=-1)
        fused = self._fuse(p_img, p_txt, None)
        eps = self.config.label_smoothing
        C = self.config.num_classes
        if loss in ("auto", "label_smoothed_ce"):
            total = losses.nll_of_probs(fused, batch.labels, eps, C)
            if self.config.per_stream_loss:
                total = total + self._ce(img_logits, batch) + self._ce(txt_logits, batch)
            return total
        if loss == "kl":
            return losses.kl_of_probs(fused, batch.distributions)
        raise ConfigError(f"unknown loss {loss!r}")

    def attribution_scalar(self, batch, target_class, regions):
        probs = self.forward_probs(batch, regions=regions)
        return T.log(T.select(T.select(probs, 0, axis=0), target_class, axis=0))


class SingleStreamModel(EmotionClassifier):
    """One encoder over [CLS] + projected regions + caption tokens.

    Region tokens share position id 0 (regions are an unordered set); caption
    tokens take positions 1..T.  The [CLS] token sits in the image segment.
    """

    def __init__(self, config: ModelConfig, seed: int):
        super().__init__(config, seed)
        rng = substream(seed, "init")
        d = config.model_dim
        self.token_table = EmbeddingTable(rng, config.vocab_size, d, "token")
        self.position_table = EmbeddingTable(rng, config.max_text_len + 1, d, "position")
        self.segment_table = EmbeddingTable(rng, 2, d, "segment")
        if config.num_regions > 0:
            self.region_proj = Linear(rng, config.region_feature_dim, d)
        else:
            self.region_proj = None
        self.layers = [
            EncoderLayer(rng, d, config.heads, config.ff_dim, config.dropout)
            for _ in range(config.encoder_layers)
        ]
        self.head = ClassifierHead(rng, d, config.cls_hidden_dim, config.num_classes)

        self._register(self.token_table.parameters("token_table"))
        self._register(self.position_table.parameters("position_table"))
        self._register(self.segment_table.parameters("segment_table"))
        if self.region_proj is not None:
            self._register(self.region_proj.parameters("region_proj"))
        for i, layer in enumerate(self.layers):
            self._register(layer.parameters(f"encoder.{i}"))
        self._register(self.head.parameters("head"))

    def forward_logits(self, batch: Batch, training: bool = False,
                       rng: Optional[np.random.Generator] = None,
                       regions: Optional[Tensor] = None) -> Tensor:
        cfg = self.config
        B, n_text = batch.token_ids.shape
        k = cfg.num_regions
        total = 1 + k + n_text
        limit = 1 + k + cfg.max_text_len
        if total > limit:
            raise InvariantError(f"sequence length {total} exceeds limit {limit}")

        cls_ids = np.full((B, 1), CLS_ID, dtype=np.int64)
        zeros = np.zeros((B, 1), dtype=np.int64)
        cls_part = embed_sequence(
            cls_ids, zeros, np.full((B, 1), SEGMENT_IMAGE, dtype=np.int64),
            self.token_table, self.position_table, self.segment_table,
        )

        parts = [cls_part]
        if k > 0:
            region_tensor = self._region_tensor(batch, regions)
            region_part = self.region_proj(region_tensor)
            region_positions = np.zeros((B, k), dtype=np.int64)
            region_segments = np.full((B, k), SEGMENT_IMAGE, dtype=np.int64)
            region_part = (
                region_part
                + self.position_table.lookup(region_positions)
                + self.segment_table.lookup(region_segments)
            )
            parts.append(region_part)

        text_positions = np.broadcast_to(np.arange(1, n_text + 1), (B, n_text))
        text_part = embed_sequence(
            batch.token_ids, text_positions,
            np.full((B, n_text), SEGMENT_TEXT, dtype=np.int64),
            self.token_table, self.position_table, self.segment_table,
        )
        parts.append(text_part)

        x = T.concat(parts, axis=1)
        x = T.dropout(x, cfg.dropout, training, rng)
        keep = np.concatenate(
            [np.ones((B, 1 + k), dtype=bool), batch.token_keep], axis=1
        )
        mask = AttentionMask.from_key_padding(keep)
        for layer in self.layers:
            x = layer(x, kv_mask=mask, training=training, rng=rng)
        return self.head(pool_first_token(x))

    def predict_proba(self, batch: Batch) -> np.ndarray:
        return T.softmax(self.forward_logits(batch), axis=-1).data

    def training_loss(self, batch, training=True, rng=None, loss="auto"):
        logits = self.forward_logits(batch, training, rng)
        if loss in ("auto", "label_smoothed_ce"):
            return self._ce(logits, batch)
        if loss == "kl":
            return self._kl(logits, batch)
        raise ConfigError(f"unknown loss {loss!r}")

    def attribution_scalar(self, batch, target_class, regions):
        if self.config.num_regions == 0:
            raise InvariantError("model consumes no region features")
        logits = self.forward_logits(batch, regions=regions)
        return T.select(T.select(logits, 0, axis=0), target_class, axis=0)


_FAMILY_CLASSES = {
    EARLY_FUSION_AVG: EarlyFusionModel,
    EARLY_FUSION_FIRST: EarlyFusionModel,
    DUAL_STREAM: DualStreamModel,
    SINGLE_STREAM: SingleStreamModel,
    IMAGE_ONLY: ImageOnlyModel,
}


def build_model(config: ModelConfig, seed: int = 0) -> EmotionClassifier:
    return _FAMILY_CLASSES[config.family](config, seed)


# --------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: EmotionClassifier, path: str) -> None:
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<H", CHECKPOINT_VERSION)
    config_json = json.dumps({"config": asdict(model.config), "seed": model.seed}).encode("utf-8")
    blob += struct.pack("<I", len(config_json))
    blob += config_json
    params = model.parameters()
    blob += struct.pack("<I", len(params))
    for name, p in params.items():
        encoded = name.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", p.data.ndim)
        for dim in p.data.shape:
            blob += struct.pack("<I", dim)
        blob += p.data.astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


class _CheckpointReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise FormatError(f"checkpoint truncated while reading {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))[0]


def load_checkpoint_bytes(data: bytes) -> EmotionClassifier:
    reader = _CheckpointReader(data)
    if reader.take(4, "magic") != CHECKPOINT_MAGIC:
        raise FormatError("not a model checkpoint (bad magic)")
    version = reader.unpack("<H", "version")
    if version != CHECKPOINT_VERSION:
        raise FormatError(
            f"checkpoint version {version} unsupported (expected {CHECKPOINT_VERSION})"
        )
    config_len = reader.unpack("<I", "config length")
    try:
        meta = json.loads(reader.take(config_len, "config block").decode("utf-8"))
        config = ModelConfig(**meta["config"])
        seed = meta["seed"]
    except (json.JSONDecodeError, UnicodeDecodeError, KeyError, TypeError, ConfigError) as exc:
        raise FormatError(f"checkpoint config block is invalid: {exc}") from None

    model = build_model(config, seed)
    params = model.parameters()
    n_params = reader.unpack("<I", "parameter count")
    if n_params != len(params):
        raise FormatError(f"checkpoint has {n_params} parameters, model needs {len(params)}")
    seen = set()
    for _ in range(n_params):
        name_len = reader.unpack("<H", "parameter name length")
        name = reader.take(name_len, "parameter name").decode("utf-8", errors="replace")
        if name not in params:
            raise FormatError(f"checkpoint parameter {name!r} unknown to this model")
        if name in seen:
            raise FormatError(f"checkpoint parameter {name!r} appears twice")
        seen.add(name)
        ndim = reader.unpack("<B", f"rank of {name}")
        shape = tuple(reader.unpack("<I", f"dim of {name}") for _ in range(ndim))
        expected = params[name].data.shape
        if shape != expected:
            raise FormatError(f"parameter {name!r} has shape {shape}, expected {expected}")
        count = int(np.prod(shape)) if shape else 1
        raw = reader.take(8 * count, f"data of {name}")
        params[name].data = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    if reader.pos != len(data):
        raise FormatError("checkpoint has trailing bytes")
    return model


def load_checkpoint(path: str) -> EmotionClassifier:
    with open(path, "rb") as fh:
        return load_checkpoint_bytes(fh.read())
