"""Geometry- and rarity-aware losses, SELD metrics, and a synthetic
long-tail benchmark for ACCDOA vector regression."""

from seldkit.bench import (
    BenchResult,
    SynthConfig,
    SynthDataset,
    ToyModel,
    TrainingDiverged,
    generate_synthetic,
    run_ladder,
    train,
)
from seldkit.data import (
    AccdoaFrame,
    Dataset,
    load_counts,
    load_frames,
    save_frames,
    save_report,
)
from seldkit.geometry import R_EPS, ResidualDecomposition, decompose
from seldkit.gradcheck import GradCheckResult, run_grad_check
from seldkit.losses import (
    VARIANTS,
    LossBreakdown,
    LossConfig,
    active_loss,
    angular_mia,
    angular_perp,
    grad_total_loss,
    inactive_loss,
    rarity_weighted_under,
    saturation,
    total_loss,
    under_penalty,
)
from seldkit.metrics import (
    ClassMetrics,
    DecodedEvent,
    SeldMetrics,
    aggregate_seld_error,
    angular_distance_deg,
    decode_predictions,
    evaluate,
)
from seldkit.priors import ClassPriorTable, build_priors, inactive_weight

__version__ = "0.1.0"

__all__ = [
    "AccdoaFrame",
    "BenchResult",
    "ClassMetrics",
    "ClassPriorTable",
    "Dataset",
    "DecodedEvent",
    "GradCheckResult",
    "LossBreakdown",
    "LossConfig",
    "R_EPS",
    "ResidualDecomposition",
    "SeldMetrics",
    "SynthConfig",
    "SynthDataset",
    "ToyModel",
    "TrainingDiverged",
    "VARIANTS",
    "active_loss",
    "aggregate_seld_error",
    "angular_distance_deg",
    "angular_mia",
    "angular_perp",
    "build_priors",
    "decode_predictions",
    "decompose",
    "evaluate",
    "generate_synthetic",
    "grad_total_loss",
    "inactive_loss",
    "inactive_weight",
    "load_counts",
    "load_frames",
    "rarity_weighted_under",
    "run_grad_check",
    "run_ladder",
    "saturation",
    "save_frames",
    "save_report",
    "total_loss",
    "train",
    "under_penalty",
]
