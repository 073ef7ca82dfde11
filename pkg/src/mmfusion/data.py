"""Dataset model, on-disk formats, and the synthetic two-modality task.

On-disk layout is a pair of files sharing a prefix:

* ``<prefix>.manifest.jsonl`` — line 1 is a header object (format name,
  version, class names, region geometry, vocabulary, optional provenance),
  followed by one object per sample (ids, token ids, label, annotator
  distribution, split), closed by a footer line carrying the sample count
  and the sha256 of the feature blob.
* ``<prefix>.features.bin`` — magic ``MMRF``, a little-endian u16 version,
  then per sample: u32 id length + utf-8 id, u32 k, u32 dim, boxes ``[k,4]``,
  scores ``[k]`` and features ``[k, dim]`` as little-endian float32.

Features are single precision on disk and widened to float64 on load.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import FormatError, InvariantError
from .nn import AttentionMask
from .rng import substream

MANIFEST_FORMAT = "mmfusion-dataset"
MANIFEST_VERSION = 1
BLOB_MAGIC = b"MMRF"
BLOB_VERSION = 1

PAD_ID = 0
CLS_ID = 1
UNK_ID = 2
SPECIAL_TOKENS = ("[PAD]", "[CLS]", "[UNK]")

SPLITS = ("train", "val", "test")


class Vocabulary:
    """Dense token→id map with fixed special tokens at ids 0..2."""

    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[:3]) != SPECIAL_TOKENS:
            raise InvariantError(f"vocabulary must start with {SPECIAL_TOKENS}")
        if len(set(tokens)) != len(tokens):
            raise InvariantError("vocabulary tokens must be unique")
        self.tokens = list(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    @classmethod
    def build(cls, texts: Sequence[str]) -> "Vocabulary":
        seen = dict.fromkeys(tok for text in texts for tok in _split(text))
        return cls(list(SPECIAL_TOKENS) + list(seen))

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        return [self.index.get(tok, UNK_ID) for tok in _split(text)]

    def decode(self, ids: Sequence[int]) -> str:
        return " ".join(self.tokens[i] for i in ids)


def _split(text: str) -> list[str]:
    return text.lower().split()


@dataclass
class MultimodalSample:
    sample_id: str
    token_ids: list[int]
    region_features: np.ndarray  # [k, dim] float64
    region_boxes: np.ndarray  # [k, 4] float64, normalized corners
    region_scores: np.ndarray  # [k] float64, non-increasing
    label: int
    distribution: np.ndarray  # [num_classes] float64, sums to 1
    split: str
    caption: Optional[str] = None
    padded_regions: int = 0


@dataclass
class Dataset:
    num_classes: int
    class_names: list[str]
    region_feature_dim: int
    num_regions: int
    vocab: Vocabulary
    samples: list[MultimodalSample]
    provenance: dict = field(default_factory=dict)

    def split(self, name: str) -> list[MultimodalSample]:
        if name not in SPLITS:
            raise InvariantError(f"unknown split {name!r}, expected one of {SPLITS}")
        return [s for s in self.samples if s.split == name]

    def by_id(self, sample_id: str) -> MultimodalSample:
        for s in self.samples:
            if s.sample_id == sample_id:
                return s
        raise InvariantError(f"no sample with id {sample_id!r}")


def validate_sample(sample: MultimodalSample, dataset: Dataset) -> None:
    """Check every per-sample invariant; raise naming the sample on failure."""
    sid = sample.sample_id
    k, dim = dataset.num_regions, dataset.region_feature_dim
    if sample.region_features.shape != (k, dim):
        raise InvariantError(
            f"sample {sid}: feature shape {sample.region_features.shape} != ({k}, {dim})"
        )
    if sample.region_boxes.shape != (k, 4):
        raise InvariantError(f"sample {sid}: box shape {sample.region_boxes.shape} != ({k}, 4)")
    if sample.region_scores.shape != (k,):
        raise InvariantError(f"sample {sid}: score shape {sample.region_scores.shape} != ({k},)")
    if k and (sample.region_boxes.min() < 0.0 or sample.region_boxes.max() > 1.0):
        raise InvariantError(f"sample {sid}: boxes must lie in [0, 1]")
    if k and (np.diff(sample.region_scores) > 0).any():
        raise InvariantError(f"sample {sid}: region scores must be non-increasing")
    if not 0 <= sample.label < dataset.num_classes:
        raise InvariantError(f"sample {sid}: label {sample.label} out of range")
    if sample.distribution.shape != (dataset.num_classes,):
        raise InvariantError(f"sample {sid}: distribution length != {dataset.num_classes}")
    if (sample.distribution < 0).any() or abs(sample.distribution.sum() - 1.0) > 1e-6:
        raise InvariantError(f"sample {sid}: distribution is not a probability vector")
    if sample.split not in SPLITS:
        raise InvariantError(f"sample {sid}: unknown split {sample.split!r}")
    if sample.token_ids and (min(sample.token_ids) < 0 or max(sample.token_ids) >= len(dataset.vocab)):
        raise InvariantError(f"sample {sid}: token id out of vocabulary range")


def validate_dataset(dataset: Dataset) -> None:
    if len(set(dataset.class_names)) != dataset.num_classes:
        raise InvariantError("class names must be unique and match num_classes")
    seen: dict[str, str] = {}
    for sample in dataset.samples:
        if sample.sample_id in seen:
            raise InvariantError(f"duplicate sample id {sample.sample_id!r}")
        seen[sample.sample_id] = sample.split
        validate_sample(sample, dataset)


# --------------------------------------------------------------------------
# persistence


def manifest_path(prefix: str) -> str:
    return f"{prefix}.manifest.jsonl"


def blob_path(prefix: str) -> str:
    return f"{prefix}.features.bin"


def save_dataset(dataset: Dataset, prefix: str) -> None:
    validate_dataset(dataset)
    blob = bytearray()
    blob += BLOB_MAGIC
    blob += struct.pack("<H", BLOB_VERSION)
    for s in dataset.samples:
        sid = s.sample_id.encode("utf-8")
        blob += struct.pack("<I", len(sid))
        blob += sid
        blob += struct.pack("<II", dataset.num_regions, dataset.region_feature_dim)
        blob += s.region_boxes.astype("<f4").tobytes()
        blob += s.region_scores.astype("<f4").tobytes()
        blob += s.region_features.astype("<f4").tobytes()
    blob_bytes = bytes(blob)
    with open(blob_path(prefix), "wb") as fh:
        fh.write(blob_bytes)

    header = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "num_classes": dataset.num_classes,
        "class_names": dataset.class_names,
        "region_feature_dim": dataset.region_feature_dim,
        "k": dataset.num_regions,
        "vocab": dataset.vocab.tokens,
    }
    if dataset.provenance:
        header["provenance"] = dataset.provenance
    lines = [json.dumps(header)]
    for s in dataset.samples:
        record = {
            "sample_id": s.sample_id,
            "tokens": list(map(int, s.token_ids)),
            "label": int(s.label),
            "distribution": [float(x) for x in s.distribution],
            "split": s.split,
        }
        if s.caption is not None:
            record["caption"] = s.caption
        if s.padded_regions:
            record["padded_regions"] = int(s.padded_regions)
        lines.append(json.dumps(record))
    footer = {
        "footer": True,
        "n_samples": len(dataset.samples),
        "blob_sha256": hashlib.sha256(blob_bytes).hexdigest(),
    }
    lines.append(json.dumps(footer))
    with open(manifest_path(prefix), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


class _BlobReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"feature blob truncated while reading {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u16(self, what: str) -> int:
        return struct.unpack("<H", self.take(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def f32_array(self, count: int, what: str) -> np.ndarray:
        raw = self.take(4 * count, what)
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)

    def at_end(self) -> bool:
        return self.pos == len(self.data)


def load_dataset(prefix: str) -> Dataset:
    """Load and fully validate a manifest/blob pair.

    Any invariant violation is an error naming the offending sample; nothing
    is silently repaired.
    """
    with open(manifest_path(prefix), "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if len(lines) < 2:
        raise FormatError("manifest needs at least a header and a footer line")
    try:
        header = json.loads(lines[0])
        footer = json.loads(lines[-1])
        records = [json.loads(line) for line in lines[1:-1]]
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSONL: {exc}") from None

    if header.get("format") != MANIFEST_FORMAT:
        raise FormatError(f"unrecognized manifest format {header.get('format')!r}")
    if header.get("version") != MANIFEST_VERSION:
        raise FormatError(
            f"manifest version {header.get('version')} unsupported (expected {MANIFEST_VERSION})"
        )
    for key in ("num_classes", "class_names", "region_feature_dim", "k", "vocab"):
        if key not in header:
            raise FormatError(f"manifest header missing {key!r}")
    if not footer.get("footer"):
        raise FormatError("manifest footer line missing")
    if footer.get("n_samples") != len(records):
        raise FormatError(
            f"manifest footer says {footer.get('n_samples')} samples, found {len(records)}"
        )

    with open(blob_path(prefix), "rb") as fh:
        blob_bytes = fh.read()
    digest = hashlib.sha256(blob_bytes).hexdigest()
    if digest != footer.get("blob_sha256"):
        raise FormatError("feature blob checksum mismatch against manifest footer")

    reader = _BlobReader(blob_bytes)
    if reader.take(4, "magic") != BLOB_MAGIC:
        raise FormatError("feature blob has wrong magic")
    if reader.u16("version") != BLOB_VERSION:
        raise FormatError("feature blob version unsupported")

    k, dim = header["k"], header["region_feature_dim"]
    vocab = Vocabulary(header["vocab"])
    samples = []
    for record in records:
        sid = record.get("sample_id", "<missing id>")
        blob_sid = reader.take(reader.u32("sample id length"), "sample id").decode("utf-8")
        if blob_sid != sid:
            raise FormatError(f"sample {sid}: blob order mismatch (found {blob_sid!r})")
        sample_k = reader.u32("region count")
        sample_dim = reader.u32("feature dim")
        if sample_k != k or sample_dim != dim:
            raise FormatError(
                f"sample {sid}: blob geometry {sample_k}x{sample_dim} != manifest {k}x{dim}"
            )
        boxes = reader.f32_array(k * 4, f"boxes of {sid}").reshape(k, 4)
        scores = reader.f32_array(k, f"scores of {sid}")
        features = reader.f32_array(k * dim, f"features of {sid}").reshape(k, dim)
        samples.append(
            MultimodalSample(
                sample_id=sid,
                token_ids=list(record["tokens"]),
                region_features=features,
                region_boxes=boxes,
                region_scores=scores,
                label=record["label"],
                distribution=np.asarray(record["distribution"], dtype=np.float64),
                split=record["split"],
                caption=record.get("caption"),
                padded_regions=record.get("padded_regions", 0),
            )
        )
    if not reader.at_end():
        raise FormatError("feature blob has trailing bytes")

    dataset = Dataset(
        num_classes=header["num_classes"],
        class_names=list(header["class_names"]),
        region_feature_dim=dim,
        num_regions=k,
        vocab=vocab,
        samples=samples,
        provenance=header.get("provenance", {}),
    )
    validate_dataset(dataset)
    return dataset


# --------------------------------------------------------------------------
# synthetic task


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs for the generated two-modality task.

    The label is a deterministic function of both modalities: a cue word in
    the caption carries a text class ``t`` and the horizontal placement of
    all region boxes carries a visual state ``g``; the label is
    ``(t + g * label_shift) mod num_classes``.  Either modality alone is
    ambiguous, together they determine the label exactly.
    """

    num_classes: int = 9
    num_regions: int = 4
    region_feature_dim: int = 16
    max_text_len: int = 12
    min_text_len: int = 3
    filler_words: int = 20
    visual_states: int = 2
    val_fraction: float = 0.1
    test_fraction: float = 0.1
    noise_std: float = 0.02

    @property
    def label_shift(self) -> int:
        return max(1, self.num_classes // 2)

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvariantError("need at least two classes")
        if self.visual_states < 2:
            raise InvariantError("need at least two visual states")
        if self.min_text_len < 1 or self.max_text_len < self.min_text_len:
            raise InvariantError("bad text length range")
        if self.region_feature_dim < 5:
            raise InvariantError("region features need at least 5 dims")


def synthetic_vocab(config: SyntheticConfig) -> Vocabulary:
    cues = [f"cue{t}" for t in range(config.num_classes)]
    fillers = [f"word{i}" for i in range(config.filler_words)]
    return Vocabulary(list(SPECIAL_TOKENS) + cues + fillers)


def cue_token_ids(config: SyntheticConfig) -> list[int]:
    start = len(SPECIAL_TOKENS)
    return list(range(start, start + config.num_classes))


def synthetic_label(text_class: int, visual_state: int, config: SyntheticConfig) -> int:
    return (text_class + visual_state * config.label_shift) % config.num_classes


def _band(state: int, states: int) -> tuple[float, float]:
    """Horizontal band [lo, hi] for one visual state, with safety margins."""
    width = 1.0 / states
    lo = state * width + 0.05 * width
    hi = (state + 1) * width - 0.35 * width
    return lo, hi


def generate_synthetic(seed: int, n_samples: int, config: SyntheticConfig | None = None) -> Dataset:
    """Build a balanced, reproducible dataset for the multimodal task."""
    config = config or SyntheticConfig()
    if n_samples < config.num_classes:
        raise InvariantError(f"need at least {config.num_classes} samples")
    rng = substream(seed, "synthetic")
    vocab = synthetic_vocab(config)
    cues = cue_token_ids(config)
    filler_start = len(SPECIAL_TOKENS) + config.num_classes
    C = config.num_classes

    samples = []
    for i in range(n_samples):
        label = i % C
        g = int(rng.integers(0, config.visual_states))
        t = (label - g * config.label_shift) % C

        length = int(rng.integers(config.min_text_len, config.max_text_len + 1))
        tokens = list(rng.integers(filler_start, filler_start + config.filler_words, size=length))
        tokens[int(rng.integers(0, length))] = cues[t]

        lo, hi = _band(g, config.visual_states)
        x1 = rng.uniform(lo, hi, size=config.num_regions)
        y1 = rng.uniform(0.05, 0.6, size=config.num_regions)
        widths = rng.uniform(0.1, 0.25, size=config.num_regions)
        heights = rng.uniform(0.1, 0.35, size=config.num_regions)
        boxes = np.stack([x1, y1, np.clip(x1 + widths, 0, 1), np.clip(y1 + heights, 0, 1)], axis=1)
        scores = np.sort(rng.uniform(0.1, 1.0, size=config.num_regions))[::-1]

        # one informative column: the horizontal cue, weighted by detection
        # score so regions contribute with graded strength (this is what makes
        # per-region importance a well-ordered quantity)
        cx = (boxes[:, 0] + boxes[:, 2]) / 2.0
        features = np.zeros((config.num_regions, config.region_feature_dim))
        features[:, 0] = scores
        features[:, 1] = scores * (2.0 * cx - 1.0)
        features[:, 2] = (boxes[:, 1] + boxes[:, 3]) / 2.0
        features[:, 3] = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
        if config.region_feature_dim > 4:
            features[:, 4:] = rng.normal(0.0, config.noise_std,
                                         size=(config.num_regions, config.region_feature_dim - 4))
        # features are stored as float32 on disk; quantize now so that
        # in-memory datasets round-trip bit-exactly
        features = features.astype(np.float32).astype(np.float64)
        boxes = boxes.astype(np.float32).astype(np.float64)
        scores = scores.astype(np.float32).astype(np.float64)

        distribution = np.full(C, 0.25 / C)
        distribution[label] += 0.75
        if rng.random() < 0.1:
            # annotators occasionally disagree with the caption label
            other = (label + 1 + int(rng.integers(0, C - 1))) % C
            distribution[label] -= 0.4
            distribution[other] += 0.4

        u = rng.random()
        if u < config.test_fraction:
            split = "test"
        elif u < config.test_fraction + config.val_fraction:
            split = "val"
        else:
            split = "train"

        samples.append(
            MultimodalSample(
                sample_id=f"syn{i:06d}",
                token_ids=[int(t_) for t_ in tokens],
                region_features=features,
                region_boxes=boxes,
                region_scores=scores,
                label=label,
                distribution=distribution,
                split=split,
                caption=vocab.decode(tokens),
            )
        )

    dataset = Dataset(
        num_classes=C,
        class_names=[f"emotion{i}" for i in range(C)],
        region_feature_dim=config.region_feature_dim,
        num_regions=config.num_regions,
        vocab=vocab,
        samples=samples,
        provenance={"generator": "synthetic", "seed": seed},
    )
    validate_dataset(dataset)
    return dataset


def bayes_accuracy_table(config: SyntheticConfig) -> dict[str, float]:
    """Exact best-possible accuracies from the generative table."""
    return {
        "text_only": 1.0 / config.visual_states,
        "image_only": 1.0 / config.num_classes,
        "multimodal": 1.0,
    }


# --------------------------------------------------------------------------
# batching


@dataclass
class Batch:
    sample_ids: list[str]
    token_ids: np.ndarray  # [B, T] int64, padded with PAD_ID
    token_keep: np.ndarray  # [B, T] bool
    regions: np.ndarray  # [B, k, dim] float64
    labels: np.ndarray  # [B] int64
    distributions: np.ndarray  # [B, C] float64

    def __len__(self) -> int:
        return len(self.sample_ids)

    def text_mask(self) -> AttentionMask:
        return AttentionMask.from_key_padding(self.token_keep)


def batch_from_samples(samples: Sequence[MultimodalSample], num_classes: int) -> Batch:
    max_len = max((len(s.token_ids) for s in samples), default=0)
    max_len = max(max_len, 1)
    B = len(samples)
    token_ids = np.full((B, max_len), PAD_ID, dtype=np.int64)
    token_keep = np.zeros((B, max_len), dtype=bool)
    for i, s in enumerate(samples):
        token_ids[i, : len(s.token_ids)] = s.token_ids
        token_keep[i, : len(s.token_ids)] = True
    regions = np.stack([s.region_features for s in samples]) if B else np.zeros((0, 0, 0))
    labels = np.array([s.label for s in samples], dtype=np.int64)
    distributions = np.stack([s.distribution for s in samples]) if B else np.zeros((0, num_classes))
    return Batch(
        sample_ids=[s.sample_id for s in samples],
        token_ids=token_ids,
        token_keep=token_keep,
        regions=regions,
        labels=labels,
        distributions=distributions,
    )


def batch_iterator(
    samples: Sequence[MultimodalSample],
    num_classes: int,
    batch_size: int,
    shuffle_seed: Optional[int] = None,
) -> Iterator[Batch]:
    """Yield padded batches covering every sample exactly once per epoch."""
    if batch_size < 1:
        raise InvariantError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(len(samples))
    if shuffle_seed is not None:
        substream(shuffle_seed, "shuffle").shuffle(order)
    for start in range(0, len(samples), batch_size):
        chunk = [samples[i] for i in order[start : start + batch_size]]
        yield batch_from_samples(chunk, num_classes)
