"""Radial/perpendicular decomposition of ACCDOA regression residuals.

For an active frame the target is a unit vector along the true direction
of arrival. The residual between target and prediction is split into a
component along the target (carrying activity-confidence error) and one
perpendicular to it (carrying directional error). All downstream loss
terms are written in the scalars derived here.

Every function broadcasts over leading axes: inputs of shape (..., 3)
produce vector fields of shape (..., 3) and scalar fields of shape (...).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Below this prediction norm the predicted direction is undefined. The
# angle fields plateau at cos_theta = 0 / sin2_theta = 1 (maximally
# misaligned) so that the magnitude-invariant angular loss stays finite
# and flat at the origin instead of dividing by zero.
R_EPS = 1e-12

# Targets round-trip through decimal text, so unit norms are checked with
# a tolerance rather than exactly.
UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class ResidualDecomposition:
    """Split of the residual e = target - prediction about the target.

    Fields (shapes given for a single cell; all broadcast):
      e           (3,)  residual target - prediction
      e_par       (3,)  component of e along the target direction
      e_perp      (3,)  component of e perpendicular to the target
      a           ()    scalar projection <prediction, target> = r cos(theta)
      r           ()    prediction norm, >= 0
      cos_theta   ()    alignment cosine in [-1, 1]; 0 below R_EPS
      sin2_theta  ()    squared sine of the mismatch angle in [0, 1]; 1 below R_EPS
    """

    e: np.ndarray
    e_par: np.ndarray
    e_perp: np.ndarray
    a: np.ndarray
    r: np.ndarray
    cos_theta: np.ndarray
    sin2_theta: np.ndarray


def decompose(target, prediction) -> ResidualDecomposition:
    """Decompose the residual of a prediction against a unit target.

    Only defined for active frames: every target must have unit norm
    (within UNIT_NORM_TOL), otherwise a ValueError is raised. Accepts
    single (3,) vectors or stacks of shape (..., 3).
    """
    target = np.asarray(target, dtype=np.float64)
    prediction = np.asarray(prediction, dtype=np.float64)
    if target.shape != prediction.shape or target.shape[-1:] != (3,):
        raise ValueError(
            f"target and prediction must share a (..., 3) shape, got "
            f"{target.shape} and {prediction.shape}"
        )
    tnorm = np.linalg.norm(target, axis=-1)
    if not np.all(np.abs(tnorm - 1.0) <= UNIT_NORM_TOL):
        raise ValueError("decompose requires unit-norm targets (active frames only)")
    return decompose_active(target, prediction)


def decompose_active(target: np.ndarray, prediction: np.ndarray) -> ResidualDecomposition:
    """Unchecked decomposition; callers guarantee unit-norm targets.

    Used on pre-validated batches where re-checking every cell would be
    wasted work. Cells whose target is the zero vector yield e_par = 0 and
    must be masked out by the caller.
    """
    e = target - prediction
    a = np.sum(prediction * target, axis=-1)
    r = np.linalg.norm(prediction, axis=-1)
    e_par = np.sum(e * target, axis=-1)[..., None] * target
    e_perp = e - e_par
    safe_r = np.where(r < R_EPS, 1.0, r)
    cos_theta = np.where(r < R_EPS, 0.0, np.clip(a / safe_r, -1.0, 1.0))
    sin2_theta = 1.0 - cos_theta * cos_theta
    return ResidualDecomposition(
        e=e, e_par=e_par, e_perp=e_perp, a=a, r=r,
        cos_theta=cos_theta, sin2_theta=sin2_theta,
    )
