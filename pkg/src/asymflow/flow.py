"""Linear flow schedule, rank-asymmetric velocity targets, and exact
full-rank velocity recovery.

The forward process interpolates data toward noise with alpha_t = 1 - t
and sigma_t = t. The asymmetric target keeps the data term full rank
but projects the noise term to a low-rank subspace:

    u_asym = P @ eps - x0

Splitting by the projector shows the target is velocity-like inside the
subspace and (negated) clean data in the orthogonal complement, so the
full-rank velocity u = eps - x0 can be recovered exactly:

    u = P @ u_asym + (I - P) @ (x_t + u_asym) / sigma_t

with the divisor clamped below by ``sigma_min`` at sampling time. A
scalar-calibrated variant divides the data term by a scale s and uses a
remapped time tau and input gain k so a lifted latent model sees inputs
on its native trajectory; its generalized recovery reduces to the plain
formula at s = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .subspace import Calibration, SubspaceBasis

__all__ = [
    "FlowSample",
    "AsymPrediction",
    "ClampPolicy",
    "CalibrationMismatch",
    "schedule",
    "forward",
    "asym_target",
    "decompose",
    "recover_velocity",
    "calibrate_time",
    "calibrated_target",
    "recover_calibrated",
]


class CalibrationMismatch(ValueError):
    """A calibrated prediction was recovered with the wrong scale."""


@dataclass(frozen=True)
class ClampPolicy:
    """Floor for the x0-to-velocity divisor: max(sigma_t, sigma_min).

    The default 0.04 is applied at recovery/sampling only; training
    targets are never clamped.
    """

    sigma_min: float = 0.04

    def __post_init__(self):
        if not (np.isfinite(self.sigma_min) and self.sigma_min >= 0.0):
            raise ValueError(f"sigma_min must be >= 0, got {self.sigma_min}")

    def divisor(self, t) -> np.ndarray | float:
        return np.maximum(t, self.sigma_min)


@dataclass(frozen=True)
class FlowSample:
    """One forward-process draw: x_t = (1 - t) x0 + t eps."""

    x0: np.ndarray
    eps: np.ndarray
    t: float | np.ndarray
    xt: np.ndarray


@dataclass(frozen=True)
class AsymPrediction:
    """A network output interpreted as the asymmetric velocity.

    ``s`` records the calibration scale the prediction was trained
    under (1.0 when uncalibrated), letting recovery reject mismatches.
    """

    u_a: np.ndarray
    calibrated: bool = False
    s: float = 1.0


def _col(t):
    """Shape time values for broadcasting against (..., D) states."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 0:
        return float(t)
    return t[..., None]


def _check_time(t, low_open: bool = True):
    t = np.asarray(t, dtype=np.float64)
    if low_open:
        if np.any(t <= 0.0) or np.any(t > 1.0):
            raise ValueError("t must lie in (0, 1]")
    else:
        if np.any(t < 0.0) or np.any(t > 1.0):
            raise ValueError("t must lie in [0, 1]")
    return t


def _check_pair(a: np.ndarray, b: np.ndarray):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def schedule(t) -> tuple[np.ndarray | float, np.ndarray | float]:
    """(alpha_t, sigma_t) = (1 - t, t) for t in [0, 1]."""
    t = _check_time(t, low_open=False)
    if t.ndim == 0:
        t = float(t)
        return 1.0 - t, t
    return 1.0 - t, t


def forward(x0: np.ndarray, eps: np.ndarray, t) -> FlowSample:
    """Interpolate clean data toward noise at time t in (0, 1]."""
    x0, eps = _check_pair(x0, eps)
    t = _check_time(t)
    tc = _col(t)
    xt = (1.0 - tc) * x0 + tc * eps
    return FlowSample(x0=x0, eps=eps, t=np.asarray(t, dtype=np.float64) if np.ndim(t) else float(t), xt=xt)


def asym_target(x0: np.ndarray, eps: np.ndarray, basis: SubspaceBasis) -> AsymPrediction:
    """Training target with low-rank noise: P @ eps - x0."""
    x0, eps = _check_pair(x0, eps)
    return AsymPrediction(basis.project(eps) - x0, calibrated=False, s=1.0)


def decompose(pred: AsymPrediction, basis: SubspaceBasis) -> tuple[np.ndarray, np.ndarray]:
    """Split an uncalibrated prediction into its subspace component
    (a velocity) and orthogonal component (negated clean data)."""
    if pred.calibrated:
        raise CalibrationMismatch("decompose expects an uncalibrated prediction")
    lowrank = basis.project(pred.u_a)
    ortho = pred.u_a - lowrank
    return lowrank, ortho


def recover_velocity(
    pred: AsymPrediction,
    xt: np.ndarray,
    t,
    basis: SubspaceBasis,
    clamp: ClampPolicy,
) -> np.ndarray:
    """Exact full-rank velocity from an uncalibrated asymmetric prediction.

    Keeps the subspace component and converts the orthogonal component
    through the x0-to-velocity relation, dividing by max(t, sigma_min).
    When the prediction equals the true target and sigma_min <= t the
    result is exactly eps - x0.
    """
    if pred.calibrated:
        raise CalibrationMismatch("recover_velocity expects an uncalibrated prediction")
    u_a, xt = _check_pair(pred.u_a, xt)
    t = _check_time(t)
    sig = _col(clamp.divisor(t))
    lowrank = basis.project(u_a)
    resid = xt + u_a
    ortho = (resid - basis.project(resid)) / sig
    return lowrank + ortho


def calibrate_time(cal: Calibration, t) -> tuple[np.ndarray | float, np.ndarray | float]:
    """Remapped time tau and input gain k for a scale-s lift.

    Matching signal-to-noise ratio across the lift gives
    tau = t / (s (1 - t) + t) and k = tau / t = 1 / (s (1 - t) + t).
    """
    t = _check_time(t)
    denom = cal.s * (1.0 - t) + t
    tau = t / denom
    k = 1.0 / denom
    if t.ndim == 0:
        return float(tau), float(k)
    return tau, k


def calibrated_target(
    x0: np.ndarray, eps: np.ndarray, basis: SubspaceBasis, cal: Calibration
) -> AsymPrediction:
    """Asymmetric target in the calibrated frame: P @ eps - x0 / s."""
    x0, eps = _check_pair(x0, eps)
    return AsymPrediction(basis.project(eps) - x0 / cal.s, calibrated=True, s=cal.s)


def recover_calibrated(
    pred: AsymPrediction,
    xt: np.ndarray,
    t,
    basis: SubspaceBasis,
    cal: Calibration,
    clamp: ClampPolicy,
) -> np.ndarray:
    """Full-rank velocity from a scale-calibrated prediction.

    u = P (s k u_a + (1 - s k) x_t / sig) + (I - P) (x_t + s u_a) / sig

    with sig = max(t, sigma_min) shared by both branches. Reduces to
    :func:`recover_velocity` when s = 1.
    """
    if not pred.calibrated:
        raise CalibrationMismatch("recover_calibrated expects a calibrated prediction")
    if pred.s != cal.s:
        raise CalibrationMismatch(f"prediction scale {pred.s} != calibration scale {cal.s}")
    u_a, xt = _check_pair(pred.u_a, xt)
    t = _check_time(t)
    _, k = calibrate_time(cal, t)
    sig = _col(clamp.divisor(t))
    sk = _col(cal.s * np.asarray(k, dtype=np.float64)) if np.ndim(k) else cal.s * k
    lowrank = basis.project(sk * u_a + (1.0 - sk) * (xt / sig))
    resid = xt + cal.s * u_a
    ortho = (resid - basis.project(resid)) / sig
    return lowrank + ortho
