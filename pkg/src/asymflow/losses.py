"""Training objectives: flow-matching loss, the variance-reduced loss
with its closed-form adaptive coefficient, the fading schedule, and a
gated perceptual correction with a pluggable stand-in distance.

The variance-reduced objective subtracts a scaled copy of the paired
low-rank residual from the data residual:

    || x0 - x0_hat - (1 - omega_t) * lam * (x0_low - x0_low_hat) ||^2 / sigma_t^2

where lam is the per-patch least-squares coefficient
lam = clip(<d, dl> / ||dl||^2, 0, 1), which can only shrink the
residual. omega_t fades the correction out toward low noise (where its
subspace approximation error matters most) and simultaneously gates in
a perceptual distance between prediction and data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Protocol

import numpy as np

__all__ = [
    "LossWeights",
    "ResidualPair",
    "PerceptualMetric",
    "PyramidMetric",
    "fm_loss",
    "lambda_star",
    "omega",
    "vr_loss",
    "perceptual_loss",
    "total_loss",
]


@dataclass(frozen=True)
class LossWeights:
    kappa: float = 0.3
    omega_p: float = 0.2
    lambda_clamp: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")
        if self.omega_p < 0.0:
            raise ValueError("omega_p must be >= 0")
        lo, hi = self.lambda_clamp
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("lambda_clamp must be a subinterval of [0, 1]")


class ResidualPair(NamedTuple):
    """Full-rank and low-rank prediction deviations for one patch."""

    d: np.ndarray
    dl: np.ndarray


class PerceptualMetric(Protocol):
    def __call__(self, a: np.ndarray, b: np.ndarray) -> float | np.ndarray: ...

    def grad(self, a: np.ndarray, b: np.ndarray) -> np.ndarray: ...


def fm_loss(u_hat: np.ndarray, u: np.ndarray) -> float | np.ndarray:
    """Per-sample squared error ||u - u_hat||^2 (batch mean is the
    trainer's job)."""
    u_hat = np.asarray(u_hat, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if u_hat.shape != u.shape:
        raise ValueError(f"shape mismatch: {u_hat.shape} vs {u.shape}")
    out = np.sum((u - u_hat) ** 2, axis=-1)
    return float(out) if out.ndim == 0 else out


def lambda_star(
    d: np.ndarray, dl: np.ndarray, clamp: tuple[float, float] = (0.0, 1.0)
) -> float | np.ndarray:
    """Clamped least-squares coefficient of d on dl.

    Minimizes ||d - lam * dl|| over lam, then clips to ``clamp``. A
    zero dl yields lam = 0 so a perfect low-rank predictor degrades the
    objective to the plain residual.
    """
    d = np.asarray(d, dtype=np.float64)
    dl = np.asarray(dl, dtype=np.float64)
    if d.shape != dl.shape:
        raise ValueError(f"shape mismatch: {d.shape} vs {dl.shape}")
    denom = np.sum(dl * dl, axis=-1)
    inner = np.sum(d * dl, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.where(denom > 0.0, inner / np.where(denom > 0.0, denom, 1.0), 0.0)
    out = np.clip(raw, clamp[0], clamp[1])
    return float(out) if out.ndim == 0 else out


def omega(t, kappa: float) -> float | np.ndarray:
    """Shifted signal-ratio fade: alpha^2 / (alpha^2 + (kappa * sigma)^2).

    Equals 1 at t = 0 and 0 at t = 1, strictly decreasing between.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("t must lie in [0, 1]")
    alpha = 1.0 - t
    sig = kappa * t
    out = alpha**2 / (alpha**2 + sig**2)
    return float(out) if out.ndim == 0 else out


def vr_loss(
    x0: np.ndarray,
    x0_hat: np.ndarray,
    x0_low: np.ndarray,
    x0_low_hat: np.ndarray,
    t,
    weights: LossWeights = LossWeights(),
) -> float | np.ndarray:
    """Per-patch variance-reduced loss with faded control term.

    ``x0_low_hat`` must come from the frozen low-rank model driven by
    the same noise draw as the full-rank input. sigma_t is used
    unclamped; the trainer keeps t away from 0.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    x0_low = np.asarray(x0_low, dtype=np.float64)
    x0_low_hat = np.asarray(x0_low_hat, dtype=np.float64)
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr <= 0.0):
        raise ValueError("vr_loss requires t > 0")
    lam = lambda_star(x0 - x0_hat, x0_low - x0_low_hat, weights.lambda_clamp)
    fade = 1.0 - omega(t_arr, weights.kappa)
    coeff = np.asarray(fade * lam, dtype=np.float64)
    resid = x0 - x0_hat - coeff[..., None] * (x0_low - x0_low_hat)
    out = np.sum(resid**2, axis=-1) / t_arr**2
    return float(out) if out.ndim == 0 else out


def perceptual_loss(
    x0_hat: np.ndarray,
    x0: np.ndarray,
    lam,
    t,
    weights: LossWeights,
    metric: PerceptualMetric,
) -> float | np.ndarray:
    """Perceptual correction omega_t * lam / sigma_t^2 * metric(x0_hat, x0),
    gated per patch by the same adaptive coefficient as the control term."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr <= 0.0):
        raise ValueError("perceptual_loss requires t > 0")
    gate = omega(t_arr, weights.kappa) * np.asarray(lam, dtype=np.float64) / t_arr**2
    out = gate * np.asarray(metric(x0_hat, x0), dtype=np.float64)
    return float(out) if out.ndim == 0 else out


def total_loss(l_vr: float, l_p: float, weights: LossWeights = LossWeights()) -> float:
    return float(l_vr + weights.omega_p * l_p)


class PyramidMetric:
    """Stand-in perceptual distance: summed squared differences over a
    stack of 2x2 average-pooled views of the patch grid.

    Level 0 is the raw side x side patch; each further level halves the
    resolution. ``side`` must be divisible by 2**(levels - 1).
    """

    def __init__(self, side: int, levels: int = 3):
        if side < 1 or levels < 1:
            raise ValueError("side and levels must be positive")
        if side % (2 ** (levels - 1)) != 0:
            raise ValueError(f"side {side} not divisible by 2^{levels - 1}")
        self.side = side
        self.levels = levels

    @staticmethod
    def _pool(img: np.ndarray) -> np.ndarray:
        h, w = img.shape[-2], img.shape[-1]
        return img.reshape(*img.shape[:-2], h // 2, 2, w // 2, 2).mean(axis=(-3, -1))

    @staticmethod
    def _unpool(img: np.ndarray) -> np.ndarray:
        # adjoint of mean pooling: spread each cell's value / 4 to its sources
        out = np.repeat(np.repeat(img, 2, axis=-2), 2, axis=-1)
        return out / 4.0

    def _as_grid(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.side * self.side:
            raise ValueError(f"expected vectors of dim {self.side * self.side}")
        return v.reshape(*v.shape[:-1], self.side, self.side)

    def __call__(self, a: np.ndarray, b: np.ndarray) -> float | np.ndarray:
        diff = self._as_grid(a) - self._as_grid(b)
        total = np.sum(diff**2, axis=(-2, -1))
        for _ in range(self.levels - 1):
            diff = self._pool(diff)
            total = total + np.sum(diff**2, axis=(-2, -1))
        return float(total) if total.ndim == 0 else total

    def grad(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Derivative of the distance with respect to ``a``."""
        diff = self._as_grid(a) - self._as_grid(b)
        pooled = [diff]
        for _ in range(self.levels - 1):
            pooled.append(self._pool(pooled[-1]))
        g = np.zeros_like(diff)
        for level in reversed(range(self.levels)):
            contrib = 2.0 * pooled[level]
            for _ in range(level):
                contrib = self._unpool(contrib)
            g += contrib
        return g.reshape(*g.shape[:-2], self.side * self.side)
