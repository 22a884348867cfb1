"""Deterministic ODE samplers over a recovered full-rank velocity.

A model is anything exposing ``velocity(x, t, cond, sigma_min)``; the
sampler integrates dx/dt = u from t = 1 down to a time floor on a
uniform grid with Euler or Heun (trapezoidal predictor-corrector)
steps. Classifier-free guidance mixes conditional and unconditional
velocities, active only inside a configured time interval.

States may be a single vector or a batch of row vectors; every model
must broadcast over rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

__all__ = ["SamplerConfig", "VelocityModel", "euler_step", "heun_step", "sample"]


class VelocityModel(Protocol):
    def velocity(self, x: np.ndarray, t: float, cond, sigma_min: float) -> np.ndarray: ...


@dataclass(frozen=True)
class SamplerConfig:
    method: str = "heun"
    steps: int = 50
    t_end: float = 1e-3
    sigma_min: float = 0.04
    guidance_scale: float = 1.0
    guidance_interval: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.method not in ("euler", "heun"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 0.0 < self.t_end < 1.0:
            raise ValueError("t_end must lie in (0, 1)")
        if self.sigma_min < 0.0:
            raise ValueError("sigma_min must be >= 0")
        if self.guidance_scale < 1.0:
            raise ValueError("guidance_scale must be >= 1")
        lo, hi = self.guidance_interval
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("guidance_interval must be [lo, hi] within [0, 1]")

    def grid(self) -> np.ndarray:
        return np.linspace(1.0, self.t_end, self.steps + 1)


def _guided_velocity(model, x, t: float, cond, cfg: SamplerConfig) -> np.ndarray:
    lo, hi = cfg.guidance_interval
    if cond is None or cfg.guidance_scale == 1.0 or not (lo <= t <= hi):
        return model.velocity(x, t, cond, cfg.sigma_min)
    u_cond = model.velocity(x, t, cond, cfg.sigma_min)
    u_uncond = model.velocity(x, t, None, cfg.sigma_min)
    return u_uncond + cfg.guidance_scale * (u_cond - u_uncond)


def _check_step(t_from: float, t_to: float) -> None:
    if not (1.0 >= t_from > t_to > 0.0):
        raise ValueError(f"need 1 >= t_from > t_to > 0, got {t_from}, {t_to}")


def euler_step(model, x: np.ndarray, t_from: float, t_to: float, cfg: SamplerConfig, cond=None) -> np.ndarray:
    _check_step(t_from, t_to)
    u = _guided_velocity(model, x, t_from, cond, cfg)
    return x + (t_to - t_from) * u


def heun_step(model, x: np.ndarray, t_from: float, t_to: float, cfg: SamplerConfig, cond=None) -> np.ndarray:
    _check_step(t_from, t_to)
    dt = t_to - t_from
    u1 = _guided_velocity(model, x, t_from, cond, cfg)
    x_pred = x + dt * u1
    u2 = _guided_velocity(model, x_pred, t_to, cond, cfg)
    return x + 0.5 * dt * (u1 + u2)


def sample(model, eps: np.ndarray, cfg: SamplerConfig, cond=None) -> np.ndarray:
    """Integrate from pure noise at t = 1 to the time floor; the state at
    t_end is returned as the sample."""
    x = np.asarray(eps, dtype=np.float64).copy()
    step = euler_step if cfg.method == "euler" else heun_step
    grid = cfg.grid()
    for i in range(cfg.steps):
        x = step(model, x, float(grid[i]), float(grid[i + 1]), cfg, cond)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(
                f"sampler state became non-finite at t={grid[i + 1]:.6g}"
            )
    return x
