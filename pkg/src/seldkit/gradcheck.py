"""Central finite-difference verification of the analytic loss gradients.

The check evaluates only the forward loss path, so it stays independent of
the gradient code it verifies. Cells are sampled away from the non-smooth
loci of the hinge terms and the origin plateau, where a finite difference
would straddle a kink.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from seldkit import losses
from seldkit.losses import VARIANTS, LossConfig
from seldkit.priors import ClassPriorTable, build_priors

# margins around the non-smooth loci |a - 1| = 0, |r - 1| = 0 and r = 0
KINK_MARGIN = 1e-3


@dataclass(frozen=True)
class GradCheckResult:
    variant: str
    max_rel_error: float
    cells: int
    step: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol


def sample_cells(cells: int, rng: np.random.Generator, num_classes: int = 4):
    """Random kink-free cell grid: targets, predictions, activity, priors.

    Roughly 15% of cells are inactive (their branch is smooth everywhere);
    every active cell satisfies |a - 1|, |r - 1| > KINK_MARGIN and
    r > KINK_MARGIN so central differences never straddle a kink.
    """
    if cells % num_classes != 0:
        raise ValueError(f"cells={cells} must be a multiple of num_classes={num_classes}")
    num_frames = cells // num_classes
    activity = rng.random((num_frames, num_classes)) > 0.15

    dirs = rng.standard_normal((num_frames, num_classes, 3))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    targets = np.where(activity[..., None], dirs, 0.0)

    predictions = rng.uniform(-1.5, 1.5, size=(num_frames, num_classes, 3))
    for _ in range(100):
        a = np.sum(predictions * targets, axis=-1)
        r = np.linalg.norm(predictions, axis=-1)
        bad = activity & (
            (np.abs(a - 1.0) <= KINK_MARGIN)
            | (np.abs(r - 1.0) <= KINK_MARGIN)
            | (r <= KINK_MARGIN)
        )
        if not bad.any():
            break
        predictions[bad] = rng.uniform(-1.5, 1.5, size=(int(bad.sum()), 3))
    else:
        raise RuntimeError("could not sample kink-free cells")

    counts = rng.integers(1, 1000, size=num_classes)
    return targets, predictions, activity, build_priors(counts)


def fd_grad(targets, predictions, activity, table: ClassPriorTable,
            config: LossConfig, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of the batch total, via per-cell losses.

    Cells are independent, so shifting one coordinate of every cell at
    once yields each cell's directional difference in a single pass.
    """
    num_frames, num_classes = activity.shape
    grad = np.empty_like(predictions)
    for axis in range(3):
        shift = np.zeros(3)
        shift[axis] = step
        plus = losses.cell_losses_from_arrays(
            targets, predictions + shift, activity, table, config)
        minus = losses.cell_losses_from_arrays(
            targets, predictions - shift, activity, table, config)
        grad[..., axis] = (plus - minus) / (2.0 * step)
    return grad / (num_frames * num_classes)


def check_variant(variant: str, cells: int = 1000, step: float = 1e-6,
                  tol: float = 1e-5, seed: int = 0, num_classes: int = 4) -> GradCheckResult:
    """Compare analytic and finite-difference gradients for one variant."""
    rng = np.random.default_rng(seed)
    targets, predictions, activity, table = sample_cells(cells, rng, num_classes)
    config = LossConfig.from_variant(variant)
    analytic = losses.grad_total_loss_from_arrays(targets, predictions, activity, table, config)
    numeric = fd_grad(targets, predictions, activity, table, config, step)
    err = np.linalg.norm(analytic - numeric, axis=-1)
    scale = np.maximum(np.linalg.norm(numeric, axis=-1), 1e-12)
    max_rel = float((err / scale).max())
    return GradCheckResult(variant=variant, max_rel_error=max_rel,
                           cells=cells, step=step, tol=tol)


def run_grad_check(variants=None, cells: int = 1000, step: float = 1e-6,
                   tol: float = 1e-5, seed: int = 0) -> list[GradCheckResult]:
    """Run the finite-difference suite for every requested variant."""
    if variants is None:
        variants = VARIANTS
    return [
        check_variant(v, cells=cells, step=step, tol=tol, seed=seed)
        for v in variants
    ]
