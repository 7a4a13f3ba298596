"""Loss family over ACCDOA vector regression, with analytic gradients.

Active frames are scored on the decomposed residual:

  under      ([1 - a]_+)^2          squared hinge on the shortfall of the
                                    projection a below 1; overshooting an
                                    aligned prediction (a > 1) costs nothing
  rarity     (1 + pi_c) * under     prior-boosted radial pull for rare classes
  angular    ||e_perp||^2           = r^2 sin^2(theta), the default angular term
         or  sin^2(theta)           magnitude-invariant alternative
  saturation (1 + sin^2) [r - 1]_+^2  soft hinge on over-long predictions,
                                    harsher when the direction is also wrong

Inactive frames are scored on the squared prediction norm, optionally
down-weighted by the inverse-prior weight w_c. Two undecomposed baselines
complete the ladder: A0 is plain squared error, I0 re-weights squared
error by (1 + pi_c) on active cells and w_c on inactive cells.

The total is the plain arithmetic mean over all T*C cells; active and
inactive branches are never re-normalized. Cells are independent, batch
evaluation is single-threaded numpy, so totals reproduce bit-for-bit.

Gradients are closed-form (no autodiff framework); at the hinge kinks the
subgradient 0 is used, which the squared hinge makes continuous anyway.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from seldkit.data import Dataset
from seldkit.geometry import R_EPS, ResidualDecomposition, decompose_active
from seldkit.priors import LOG_BASES, ClassPriorTable

VARIANTS = ("A0", "I0", "A1", "A2", "A3", "A4", "M1", "M2", "M3", "M4")

# variant -> (angular, use_rarity, use_inactive_weight, use_saturation).
# The ladder adds one ingredient per step; each M-variant swaps the
# angular term of its A-counterpart for the magnitude-invariant one.
# A0/I0 do not decompose at all; their angular slot is inert.
_LADDER = {
    "A0": ("perp", False, False, False),
    "I0": ("perp", True, True, False),
    "A1": ("perp", False, False, False),
    "A2": ("perp", True, False, False),
    "A3": ("perp", True, True, False),
    "A4": ("perp", True, True, True),
    "M1": ("mia", False, False, False),
    "M2": ("mia", True, False, False),
    "M3": ("mia", True, True, False),
    "M4": ("mia", True, True, True),
}


@dataclass(frozen=True)
class LossConfig:
    """Variant selector plus the term toggles it implies.

    The flags are uniquely determined by the variant; constructing a
    config whose flags disagree with the ladder raises. Use from_variant
    for the normal path.
    """

    variant: str
    angular: str = "perp"
    use_rarity: bool = False
    use_inactive_weight: bool = False
    use_saturation: bool = False
    log_base: str = "natural"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.log_base not in LOG_BASES:
            raise ValueError(f"log_base must be one of {LOG_BASES}, got {self.log_base!r}")
        expected = _LADDER[self.variant]
        got = (self.angular, self.use_rarity, self.use_inactive_weight, self.use_saturation)
        if got != expected:
            raise ValueError(
                f"flags {got} contradict variant {self.variant}, which requires {expected}"
            )

    @classmethod
    def from_variant(cls, variant: str, log_base: str = "natural") -> "LossConfig":
        if variant not in _LADDER:
            raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
        angular, rarity, inactive, sat = _LADDER[variant]
        return cls(
            variant=variant, angular=angular, use_rarity=rarity,
            use_inactive_weight=inactive, use_saturation=sat, log_base=log_base,
        )

    @property
    def decomposed(self) -> bool:
        """False for the undecomposed A0/I0 baselines."""
        return self.variant not in ("A0", "I0")


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term totals of one batch evaluation.

    All five scalars are already divided by T*C, so
    total == under + angular + saturation + inactive. per_class[c] is the
    frame-mean of class c's cell losses, hence mean(per_class) == total.

    For the undecomposed A0/I0 baselines the active squared error is
    reported through its radial/perpendicular shares in the under/angular
    slots, keeping the four-way split exhaustive for every variant.
    """

    total: float
    under: float
    angular: float
    saturation: float
    inactive: float
    per_class: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.per_class, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "per_class", arr)

    def to_dict(self) -> dict:
        return {
            "total": float(self.total),
            "under": float(self.under),
            "angular": float(self.angular),
            "saturation": float(self.saturation),
            "inactive": float(self.inactive),
            "per_class": [float(v) for v in self.per_class],
        }


# ---------------------------------------------------------------------------
# per-term operations (broadcast over leading axes)
# ---------------------------------------------------------------------------

def under_penalty(a):
    """([1 - a]_+)^2: penalizes only under-confident projections (a < 1)."""
    return np.maximum(0.0, 1.0 - np.asarray(a, dtype=np.float64)) ** 2


def rarity_weighted_under(a, pi_c):
    """(1 + pi_c) * under_penalty(a)."""
    return (1.0 + np.asarray(pi_c, dtype=np.float64)) * under_penalty(a)


def angular_perp(decomp: ResidualDecomposition):
    """Squared perpendicular residual ||e_perp||^2 = r^2 - a^2."""
    return np.sum(decomp.e_perp * decomp.e_perp, axis=-1)


def angular_mia(decomp: ResidualDecomposition):
    """Magnitude-invariant angular term sin^2(theta) = 1 - (a/r)^2.

    Takes the value 1 on the plateau below R_EPS where the predicted
    direction is undefined.
    """
    return decomp.sin2_theta


def saturation(decomp: ResidualDecomposition):
    """(1 + sin^2(theta)) * ([r - 1]_+)^2: soft hinge on norm overshoot."""
    return (1.0 + decomp.sin2_theta) * np.maximum(0.0, decomp.r - 1.0) ** 2


def inactive_loss(prediction, w_c):
    """w_c * ||prediction||^2 for inactive cells."""
    prediction = np.asarray(prediction, dtype=np.float64)
    return np.asarray(w_c, dtype=np.float64) * np.sum(prediction * prediction, axis=-1)


def active_loss(decomp: ResidualDecomposition, pi_c, config: LossConfig):
    """Active-cell loss of one variant, from a residual decomposition.

    For A0 this is the plain squared error ||e||^2, for I0 the same scaled
    by (1 + pi_c); the decomposed variants assemble the term ladder.
    """
    if not config.decomposed:
        sq = np.sum(decomp.e * decomp.e, axis=-1)
        if config.variant == "I0":
            return (1.0 + np.asarray(pi_c, dtype=np.float64)) * sq
        return sq
    if config.use_rarity:
        value = rarity_weighted_under(decomp.a, pi_c)
    else:
        value = under_penalty(decomp.a)
    value = value + (angular_mia(decomp) if config.angular == "mia" else angular_perp(decomp))
    if config.use_saturation:
        value = value + saturation(decomp)
    return value


# ---------------------------------------------------------------------------
# batch evaluation over (T, C) cell grids
# ---------------------------------------------------------------------------

def _check_arrays(targets, predictions, activity, table: ClassPriorTable):
    targets = np.asarray(targets, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    activity = np.asarray(activity, dtype=bool)
    if targets.ndim != 3 or targets.shape[-1] != 3:
        raise ValueError(f"targets must have shape (T, C, 3), got {targets.shape}")
    if predictions.shape != targets.shape:
        raise ValueError(f"predictions shape {predictions.shape} != {targets.shape}")
    if activity.shape != targets.shape[:2]:
        raise ValueError(f"activity shape {activity.shape} != {targets.shape[:2]}")
    if table.num_classes != targets.shape[1]:
        raise ValueError(
            f"prior table has {table.num_classes} classes, dataset has {targets.shape[1]}"
        )
    return targets, predictions, activity


def _term_arrays(targets, predictions, activity, table, config):
    """Per-cell values of the four loss terms, each (T, C), masked by branch."""
    d = decompose_active(targets, predictions)
    pi = table.pi[None, :]
    zeros = np.zeros(activity.shape)

    if not config.decomposed:
        par_sq = np.sum(d.e_par * d.e_par, axis=-1)
        perp_sq = np.sum(d.e_perp * d.e_perp, axis=-1)
        weight = (1.0 + pi) if config.variant == "I0" else 1.0
        under = np.where(activity, weight * par_sq, 0.0)
        ang = np.where(activity, weight * perp_sq, 0.0)
        sat = zeros
    else:
        under = under_penalty(d.a)
        if config.use_rarity:
            under = (1.0 + pi) * under
        ang = angular_mia(d) if config.angular == "mia" else angular_perp(d)
        sat = saturation(d) if config.use_saturation else zeros
        under = np.where(activity, under, 0.0)
        ang = np.where(activity, ang, 0.0)
        sat = np.where(activity, sat, 0.0)

    w_eff = table.w[None, :] if config.use_inactive_weight else 1.0
    norms_sq = np.sum(predictions * predictions, axis=-1)
    inact = np.where(activity, 0.0, w_eff * norms_sq)
    return under, ang, sat, inact


def cell_losses_from_arrays(targets, predictions, activity, table, config) -> np.ndarray:
    """(T, C) array of per-cell branch losses (no 1/(T*C) reduction)."""
    targets, predictions, activity = _check_arrays(targets, predictions, activity, table)
    under, ang, sat, inact = _term_arrays(targets, predictions, activity, table, config)
    return under + ang + sat + inact


def total_loss_from_arrays(targets, predictions, activity, table, config) -> LossBreakdown:
    """Batch loss over dense arrays; see total_loss for the Dataset wrapper."""
    targets, predictions, activity = _check_arrays(targets, predictions, activity, table)
    under, ang, sat, inact = _term_arrays(targets, predictions, activity, table, config)
    num_frames, num_classes = activity.shape
    cells = num_frames * num_classes
    per_cell = under + ang + sat + inact
    return LossBreakdown(
        total=float(per_cell.sum() / cells),
        under=float(under.sum() / cells),
        angular=float(ang.sum() / cells),
        saturation=float(sat.sum() / cells),
        inactive=float(inact.sum() / cells),
        per_class=per_cell.sum(axis=0) / num_frames,
    )


def total_loss(dataset: Dataset, table: ClassPriorTable, config: LossConfig) -> LossBreakdown:
    """Mean loss over every (t, c) cell of the dataset."""
    return total_loss_from_arrays(
        dataset.targets, dataset.predictions, dataset.activity, table, config
    )


def grad_total_loss_from_arrays(targets, predictions, activity, table, config) -> np.ndarray:
    """(T, C, 3) gradient of the batch total with respect to each prediction."""
    targets, predictions, activity = _check_arrays(targets, predictions, activity, table)
    d = decompose_active(targets, predictions)
    num_frames, num_classes = activity.shape
    pi_col = (1.0 + table.pi)[None, :, None]

    if not config.decomposed:
        g_act = -2.0 * d.e
        if config.variant == "I0":
            g_act = pi_col * g_act
    else:
        hinge = np.maximum(0.0, 1.0 - d.a)[..., None]
        g_under = -2.0 * hinge * targets
        if config.use_rarity:
            g_under = pi_col * g_under

        defined = (d.r >= R_EPS)[..., None]
        safe_r2 = np.where(d.r < R_EPS, 1.0, d.r * d.r)
        a_r2 = np.where(d.r < R_EPS, 0.0, d.a / safe_r2)[..., None]
        # gradient of sin^2(theta); zero on the plateau below R_EPS
        g_sin2 = np.where(defined, -2.0 * a_r2 * (targets - a_r2 * predictions), 0.0)

        if config.angular == "mia":
            g_ang = g_sin2
        else:
            g_ang = 2.0 * (predictions - d.a[..., None] * targets)
        g_act = g_under + g_ang

        if config.use_saturation:
            over = np.maximum(0.0, d.r - 1.0)
            safe_r = np.where(d.r < R_EPS, 1.0, d.r)
            g_sat = (
                ((1.0 + d.sin2_theta) * 2.0 * over / safe_r)[..., None] * predictions
                + (over * over)[..., None] * g_sin2
            )
            g_act = g_act + g_sat

    w_eff = table.w[None, :, None] if config.use_inactive_weight else 1.0
    g_inact = 2.0 * w_eff * predictions
    grad = np.where(activity[..., None], g_act, g_inact)
    return grad / (num_frames * num_classes)


def grad_total_loss(dataset: Dataset, table: ClassPriorTable, config: LossConfig) -> np.ndarray:
    """(T, C, 3) gradient of total_loss with respect to every prediction."""
    return grad_total_loss_from_arrays(
        dataset.targets, dataset.predictions, dataset.activity, table, config
    )
