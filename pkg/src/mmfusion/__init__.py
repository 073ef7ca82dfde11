"""Multimodal (caption + image-region) emotion classification toolkit.

Dual-stream early/late-fusion and single-stream encoder classifiers on top
of a small tape-based autodiff engine, with hot kernels served by either a
compiled extension or a numpy fallback (see :mod:`mmfusion.backend`).
"""

from .backend import backend_name
from .data import (
    Batch,
    Dataset,
    MultimodalSample,
    SyntheticConfig,
    Vocabulary,
    batch_from_samples,
    batch_iterator,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from .errors import ConfigError, FormatError, InvariantError, MMFusionError, ShapeError
from .evaluation import EvalReport, evaluate, export_confusion_csv, export_report_json
from .attribution import AttributionReport, region_attribution
from .losses import kl_to_annotator, label_smoothed_ce
from .models import (
    FAMILIES,
    EmotionClassifier,
    FusionWeights,
    ModelConfig,
    build_model,
    fullscale_preset,
    load_checkpoint,
    save_checkpoint,
)
from .optim import AdamW, ScheduleConfig, lr_at
from .rng import substream
from .tensor import Tape, Tensor
from .training import RunConfig, train_model

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "AttributionReport",
    "Batch",
    "ConfigError",
    "Dataset",
    "EmotionClassifier",
    "EvalReport",
    "FAMILIES",
    "FormatError",
    "FusionWeights",
    "InvariantError",
    "MMFusionError",
    "ModelConfig",
    "MultimodalSample",
    "RunConfig",
    "ScheduleConfig",
    "ShapeError",
    "SyntheticConfig",
    "Tape",
    "Tensor",
    "Vocabulary",
    "backend_name",
    "batch_from_samples",
    "batch_iterator",
    "build_model",
    "evaluate",
    "export_confusion_csv",
    "export_report_json",
    "fullscale_preset",
    "generate_synthetic",
    "kl_to_annotator",
    "label_smoothed_ce",
    "load_checkpoint",
    "load_dataset",
    "lr_at",
    "region_attribution",
    "save_checkpoint",
    "save_dataset",
    "substream",
    "train_model",
    "__version__",
]
