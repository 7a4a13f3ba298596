"""Per-class rarity priors derived from active-frame counts.

The prior pi_c grows with class rarity and is normalized to mean 1 across
classes. Its exponent gamma is driven by the dataset imbalance ratio, so a
balanced dataset yields the all-ones prior and any rarity weighting
degenerates to a constant. The inverse-prior weight w_c = 1/(1 + pi_c)
down-weights the inactive-frame penalty for rare classes, which see far
more inactive frames than head classes.

Counts are taken once from the training split and frozen in the table.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_BASES = ("natural", "base10")


@dataclass(frozen=True)
class ClassPriorTable:
    """Frozen rarity-prior table for a fixed class set.

    counts: per-class active-frame counts n_c (all >= 1)
    ir:     imbalance ratio max(n) / min(n), >= 1
    gamma:  rarity exponent log(IR) / (1 + log(IR)), in [0, 1)
    pi:     mean-1 rarity priors, strictly larger for rarer classes
    w:      inactive-frame weights 1 / (1 + pi), in (0, 1]
    """

    counts: np.ndarray
    ir: float
    gamma: float
    pi: np.ndarray
    w: np.ndarray
    log_base: str = "natural"

    def __post_init__(self):
        for name in ("counts", "pi", "w"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def num_classes(self) -> int:
        return int(self.counts.size)


def build_priors(counts, log_base: str = "natural") -> ClassPriorTable:
    """Build the rarity-prior table from per-class active-frame counts.

    Every count must be a positive integer: a zero count makes the
    imbalance ratio undefined, so the caller has to clamp or exclude such
    classes before building priors. The log base only affects gamma; both
    bases keep gamma in [0, 1) and the priors at mean 1.
    """
    if log_base not in LOG_BASES:
        raise ValueError(f"log_base must be one of {LOG_BASES}, got {log_base!r}")
    arr = np.asarray(counts)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("counts must be a non-empty 1-D array")
    if np.issubdtype(arr.dtype, np.floating):
        if not np.all(arr == np.floor(arr)):
            raise ValueError("counts must be integers")
    elif not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"counts must be integers, got dtype {arr.dtype}")
    counts_i = arr.astype(np.int64)
    if np.any(counts_i <= 0):
        bad = int(np.argmax(counts_i <= 0))
        raise ValueError(
            f"class {bad} has count {counts_i[bad]}; every count must be >= 1 "
            "(clamp or exclude zero-count classes before building priors)"
        )

    n = counts_i.astype(np.float64)
    ir = float(n.max() / n.min())
    log = np.log if log_base == "natural" else np.log10
    gamma = float(log(ir) / (1.0 + log(ir)))
    raw = (n.max() / n) ** gamma
    pi = raw / raw.mean()
    w = 1.0 / (1.0 + pi)
    return ClassPriorTable(counts=counts_i, ir=ir, gamma=gamma, pi=pi, w=w, log_base=log_base)


def inactive_weight(table: ClassPriorTable, c: int) -> float:
    """Inactive-frame weight w_c = 1 / (1 + pi_c) for class c."""
    if not 0 <= c < table.num_classes:
        raise IndexError(f"class index {c} out of range [0, {table.num_classes})")
    return float(table.w[c])
