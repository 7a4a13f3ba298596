"""Frame-level detection and localization scoring with macro averaging.

Scoring conventions (documented because they matter for comparability):

* Matching is frame-level: with single-track decoding there is at most one
  prediction and one reference per (t, c) cell, so a prediction matches
  when its class is active in the same frame and its angular distance is
  within the threshold. This deliberately diverges from the reference
  challenge toolkit, which aggregates over one-second segments; numbers
  from the two scorers are not interchangeable.
* Error rate is per class with substitutions folded into deletions plus
  insertions: a matched detection beyond the angular gate counts one miss
  and one insertion. N is the class's active reference frame count.
* Localization error/recall are class-dependent and location-independent:
  every same-class detection counts, regardless of the angular gate.
  Classes with zero recall are penalized with a 180 degree error.
* All reported values are macro averages over classes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from seldkit.data import Dataset


@dataclass(frozen=True)
class ClassMetrics:
    """Per-class scores: location-gated ER/F plus class-gated LE/LR."""

    er20: float
    f20: float
    le_cd: float
    lr_cd: float

    def to_dict(self) -> dict:
        return {
            "er20": float(self.er20),
            "f20": float(self.f20),
            "le_cd": float(self.le_cd),
            "lr_cd": float(self.lr_cd),
        }


@dataclass(frozen=True)
class SeldMetrics:
    """Macro-averaged scores plus the aggregate error and per-class rows."""

    er20: float
    f20: float
    le_cd: float
    lr_cd: float
    e_seld: float
    per_class: tuple[ClassMetrics, ...]

    def to_dict(self, class_names=None) -> dict:
        per_class = []
        for c, m in enumerate(self.per_class):
            entry = m.to_dict()
            if class_names is not None:
                entry = {"class": class_names[c], **entry}
            per_class.append(entry)
        return {
            "er20": float(self.er20),
            "f20": float(self.f20),
            "le_cd": float(self.le_cd),
            "lr_cd": float(self.lr_cd),
            "e_seld": float(self.e_seld),
            "per_class": per_class,
        }


@dataclass(frozen=True)
class DecodedEvent:
    """One decoded detection: frame, class and unit direction of arrival."""

    t: int
    c: int
    doa: np.ndarray

    def __post_init__(self):
        doa = np.array(self.doa, dtype=np.float64)
        if doa.shape != (3,) or abs(np.linalg.norm(doa) - 1.0) > 1e-9:
            raise ValueError(f"doa must be a unit 3-vector, got {doa!r}")
        doa.flags.writeable = False
        object.__setattr__(self, "doa", doa)


def angular_distance_deg(u, v) -> np.ndarray:
    """Angle between unit vectors in degrees, via a clamped dot product."""
    dot = np.clip(np.sum(np.asarray(u) * np.asarray(v), axis=-1), -1.0, 1.0)
    return np.degrees(np.arccos(dot))


def decode_predictions(dataset: Dataset, activity_threshold: float = 0.5) -> list[DecodedEvent]:
    """Standard ACCDOA decoding: a class is detected where the prediction
    norm exceeds the threshold; the DOA is the normalized prediction."""
    if not 0.0 < activity_threshold < 1.0:
        raise ValueError(f"activity_threshold must lie in (0, 1), got {activity_threshold}")
    preds = dataset.predictions
    r = np.linalg.norm(preds, axis=-1)
    events = []
    for t, c in zip(*np.nonzero(r > activity_threshold)):
        events.append(DecodedEvent(t=int(t), c=int(c), doa=preds[t, c] / r[t, c]))
    return events


def aggregate_seld_error(er20: float, f20: float, le_cd_deg: float, lr_cd: float) -> float:
    """Single-number aggregate of the four scores (lower is better):
    the mean of ER, 1 - F, LE/180 and 1 - LR."""
    if er20 < 0.0:
        raise ValueError(f"er20 must be >= 0, got {er20}")
    if not 0.0 <= f20 <= 1.0:
        raise ValueError(f"f20 must lie in [0, 1], got {f20}")
    if not 0.0 <= le_cd_deg <= 180.0:
        raise ValueError(f"le_cd_deg must lie in [0, 180], got {le_cd_deg}")
    if not 0.0 <= lr_cd <= 1.0:
        raise ValueError(f"lr_cd must lie in [0, 1], got {lr_cd}")
    return (er20 + (1.0 - f20) + le_cd_deg / 180.0 + (1.0 - lr_cd)) / 4.0


def evaluate(dataset: Dataset, threshold_deg: float = 20.0,
             activity_threshold: float = 0.5) -> SeldMetrics:
    """Score a dataset's predictions against its reference activity.

    Raises if the reference contains no active frame at all. A class that
    never occurs in the reference scores LR 0, LE 180 and F 0; its error
    rate counts insertions against a denominator floored at one frame.
    """
    if threshold_deg <= 0.0:
        raise ValueError(f"threshold_deg must be positive, got {threshold_deg}")
    if not 0.0 < activity_threshold < 1.0:
        raise ValueError(f"activity_threshold must lie in (0, 1), got {activity_threshold}")
    ref = dataset.activity
    if not ref.any():
        raise ValueError("reference contains no active frames")

    preds = dataset.predictions
    r = np.linalg.norm(preds, axis=-1)
    det = r > activity_threshold
    matched = ref & det

    safe_r = np.where(det, r, 1.0)
    cos = np.sum(dataset.targets * preds, axis=-1) / safe_r
    angles = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    within = matched & (angles <= threshold_deg)

    n_ref = ref.sum(axis=0)
    tp = within.sum(axis=0)
    de_tp = matched.sum(axis=0)
    sum_angle = np.where(matched, angles, 0.0).sum(axis=0)
    # a matched detection beyond the gate is one miss plus one insertion
    fp = ((det & ~ref) | (matched & ~within)).sum(axis=0)
    fn = ((ref & ~det) | (matched & ~within)).sum(axis=0)

    er_c = (fp + fn) / np.maximum(n_ref, 1)
    f_denom = 2 * tp + fp + fn
    f_c = np.where(f_denom > 0, 2 * tp / np.maximum(f_denom, 1), 0.0)
    lr_c = np.where(n_ref > 0, de_tp / np.maximum(n_ref, 1), 0.0)
    le_c = np.where(de_tp > 0, sum_angle / np.maximum(de_tp, 1), 180.0)

    per_class = tuple(
        ClassMetrics(er20=float(er_c[c]), f20=float(f_c[c]),
                     le_cd=float(le_c[c]), lr_cd=float(lr_c[c]))
        for c in range(dataset.num_classes)
    )
    er = float(er_c.mean())
    f = float(f_c.mean())
    le = float(le_c.mean())
    lr = float(lr_c.mean())
    return SeldMetrics(
        er20=er, f20=f, le_cd=le, lr_cd=lr,
        e_seld=aggregate_seld_error(er, f, le, lr),
        per_class=per_class,
    )
