"""Training loops for asymmetric velocity models on synthetic data.

The trainer draws (data, noise, time) batches from independent seeded
streams, converts the network's asymmetric prediction to a full-rank
velocity, and backpropagates one of three objectives:

  fm             squared error on the recovered velocity
  vr             variance-reduced data-space loss against a frozen
                 low-rank teacher
  vr_perceptual  vr plus the faded, gated perceptual correction

Recovery inside training never clamps the divisor (times are floored
at 1e-3 by the sampler of training times); the sigma_min clamp applies
only when sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import AsymPrediction, ClampPolicy, calibrate_time, recover_calibrated, recover_velocity
from .losses import LossWeights, PyramidMetric, lambda_star, omega
from .metrics import sliced_wasserstein
from .net import AdamState, TrainConfig, VelocityNet, adam_step, ema_update, sample_time
from .rng import Rng
from .sampler import SamplerConfig, sample
from .subspace import Calibration, SubspaceBasis

__all__ = [
    "AsymVelocityModel",
    "FrozenLowRank",
    "TrainResult",
    "train_low_rank_teacher",
    "train_velocity_net",
    "generate_samples",
]

SW_PROJECTIONS = 64
SW_SEED = 1234


class AsymVelocityModel:
    """Adapter making (net, basis, calibration) a sampler-ready model.

    For a calibrated lift the network consumes the rescaled input
    (k * x_t, k * t) and its output is converted through the
    generalized recovery; at s = 1 this is the plain conversion.
    """

    def __init__(self, net: VelocityNet, basis: SubspaceBasis, cal: Calibration | None = None):
        self.net = net
        self.basis = basis
        self.cal = cal if cal is not None else Calibration(1.0)

    def predict(self, x: np.ndarray, t: float, cond=None) -> np.ndarray:
        if self.cal.s == 1.0:
            return self.net.forward(x, t, cond)
        _, k = calibrate_time(self.cal, t)
        return self.net.forward(k * x, k * t, cond)

    def velocity(self, x: np.ndarray, t: float, cond, sigma_min: float) -> np.ndarray:
        u_a = self.predict(x, t, cond)
        clamp = ClampPolicy(sigma_min)
        if self.cal.s == 1.0:
            return recover_velocity(AsymPrediction(u_a), x, t, self.basis, clamp)
        pred = AsymPrediction(u_a, calibrated=True, s=self.cal.s)
        return recover_calibrated(pred, x, t, self.basis, self.cal, clamp)


@dataclass(frozen=True)
class FrozenLowRank:
    """Frozen low-rank data predictor used as the control-variate anchor.

    Wraps a latent velocity net: given the paired low-rank noisy state,
    predicts the low-rank clean data as P x_t - sigma_t * (a @ u_z).
    """

    basis: SubspaceBasis
    latent_net: VelocityNet

    def predict_x0_low(self, xt_low: np.ndarray, t: np.ndarray) -> np.ndarray:
        z = self.basis.coords(xt_low)
        u_z = self.latent_net.forward(z, t)
        t_col = np.asarray(t, dtype=np.float64)[..., None]
        return self.basis.project(xt_low) - t_col * self.basis.lift(u_z)


@dataclass
class TrainResult:
    net: VelocityNet
    ema_params: dict[str, np.ndarray]
    rows: list[tuple[int, str, float]]
    config: TrainConfig


def _jacobian_apply(basis: SubspaceBasis, v: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Linearization of the unclamped recovery: P v + (I - P) v / t."""
    p = basis.project(v)
    return p + (v - p) / t[:, None]


def train_low_rank_teacher(
    data: np.ndarray,
    basis: SubspaceBasis,
    seed: int,
    steps: int = 1500,
    batch_size: int = 64,
    lr: float = 1e-3,
    betas: tuple[float, float] = (0.9, 0.95),
    hidden: int = 128,
    depth: int = 2,
) -> FrozenLowRank:
    """Train a plain velocity model on the latent coordinates of the
    data, then freeze it."""
    if basis.rank < 1:
        raise ValueError("a low-rank teacher needs rank >= 1")
    z_data = basis.coords(data.T)  # (N, r)
    n = z_data.shape[0]
    root = Rng(seed)
    init_rng = root.split()
    data_rng = root.split()
    time_rng = root.split()
    noise_rng = root.split()
    net = VelocityNet(basis.rank, hidden=hidden, depth=depth, rng=init_rng)
    state = AdamState.init(net.params)
    for _ in range(steps):
        idx = data_rng.integers(n, batch_size)
        z0 = z_data[idx]
        t = sample_time(time_rng, 1.0, batch_size)
        eps_z = noise_rng.normal(batch_size * basis.rank).reshape(batch_size, basis.rank)
        zt = (1.0 - t)[:, None] * z0 + t[:, None] * eps_z
        pred, cache = net.forward_cached(zt, t)
        resid = pred - (eps_z - z0)
        grads = net.backward(cache, 2.0 * resid / batch_size)
        adam_step(net.params, grads, state, lr, betas)
    return FrozenLowRank(basis, net)


def _loss_and_grad(
    cfg: TrainConfig,
    weights: LossWeights,
    basis: SubspaceBasis,
    teacher: FrozenLowRank | None,
    metric: PyramidMetric | None,
    x0: np.ndarray,
    eps: np.ndarray,
    t: np.ndarray,
    xt: np.ndarray,
    pred: np.ndarray,
    lam_override: np.ndarray | None = None,
):
    """Scalar batch loss, gradient w.r.t. the prediction, and log parts.

    ``lam_override`` pins the adaptive coefficient (it carries a stop
    gradient, so finite-difference probes must hold it fixed). Part
    names starting with "_" are diagnostics, not logged by the trainer.
    """
    batch = x0.shape[0]
    no_clamp = ClampPolicy(0.0)
    u_hat = recover_velocity(AsymPrediction(pred), xt, t, basis, no_clamp)
    if cfg.loss_mode == "fm":
        resid = u_hat - (eps - x0)
        loss = float(np.mean(np.sum(resid * resid, axis=1)))
        dpred = _jacobian_apply(basis, 2.0 * resid / batch, t)
        return loss, dpred, {"loss": loss}

    assert teacher is not None
    x0_hat = xt - t[:, None] * u_hat
    x0_low = basis.project(x0)
    xt_low = xt - (1.0 - t)[:, None] * (x0 - x0_low)
    x0_low_hat = teacher.predict_x0_low(xt_low, t)
    d = x0 - x0_hat
    dl = x0_low - x0_low_hat
    if lam_override is not None:
        lam = lam_override
    else:
        lam = np.asarray(lambda_star(d, dl, weights.lambda_clamp))
    om = np.asarray(omega(t, weights.kappa))
    resid = d - ((1.0 - om) * lam)[:, None] * dl
    inv_t2 = 1.0 / t**2
    loss_vr = float(np.mean(np.sum(resid * resid, axis=1) * inv_t2))
    dx0_hat = -2.0 * resid * inv_t2[:, None] / batch
    parts = {"loss_vr": loss_vr, "_lam": lam}
    loss = loss_vr
    if cfg.loss_mode == "vr_perceptual":
        assert metric is not None
        gate = om * lam * inv_t2
        loss_p = float(np.mean(gate * np.asarray(metric(x0_hat, x0))))
        dx0_hat += weights.omega_p * gate[:, None] * metric.grad(x0_hat, x0) / batch
        loss = loss_vr + weights.omega_p * loss_p
        parts["loss_p"] = loss_p
    parts["loss"] = loss
    dpred = _jacobian_apply(basis, -t[:, None] * dx0_hat, t)
    return loss, dpred, parts


def train_velocity_net(
    data: np.ndarray,
    basis: SubspaceBasis,
    cfg: TrainConfig,
    *,
    weights: LossWeights | None = None,
    teacher: FrozenLowRank | None = None,
    metric: PyramidMetric | None = None,
    eval_data: np.ndarray | None = None,
    eval_every: int = 0,
    eval_samples: int = 1024,
    sampler_cfg: SamplerConfig | None = None,
    log_every: int = 50,
    net_kwargs: dict | None = None,
) -> TrainResult:
    """Train a velocity net on a D x N data matrix.

    ``eval_every > 0`` periodically samples the EMA model and logs the
    sliced Wasserstein distance to ``eval_data`` (rows tagged "sw").
    """
    weights = weights if weights is not None else LossWeights()
    if cfg.loss_mode in ("vr", "vr_perceptual") and teacher is None:
        raise ValueError(f"loss mode {cfg.loss_mode!r} needs a frozen low-rank teacher")
    if cfg.loss_mode == "vr_perceptual" and metric is None:
        raise ValueError("loss mode 'vr_perceptual' needs a perceptual metric")
    dim, n = data.shape
    root = Rng(cfg.seed)
    init_rng = root.split()
    data_rng = root.split()
    time_rng = root.split()
    noise_rng = root.split()
    eval_rng = root.split()

    net = VelocityNet(dim, rng=init_rng, **(net_kwargs or {}))
    state = AdamState.init(net.params)
    ema = net.copy_params()
    rows: list[tuple[int, str, float]] = []
    if sampler_cfg is None:
        sampler_cfg = SamplerConfig(sigma_min=cfg.sigma_min)

    for step in range(1, cfg.steps + 1):
        idx = data_rng.integers(n, cfg.batch_size)
        x0 = data[:, idx].T
        t = sample_time(time_rng, cfg.time_shift, cfg.batch_size)
        eps = noise_rng.normal(cfg.batch_size * dim).reshape(cfg.batch_size, dim)
        xt = (1.0 - t)[:, None] * x0 + t[:, None] * eps
        pred, cache = net.forward_cached(xt, t)
        loss, dpred, parts = _loss_and_grad(
            cfg, weights, basis, teacher, metric, x0, eps, t, xt, pred
        )
        if not np.isfinite(loss):
            raise FloatingPointError(f"training loss became non-finite at step {step}")
        grads = net.backward(cache, dpred)
        adam_step(net.params, grads, state, cfg.lr, cfg.betas)
        ema_update(ema, net.params, cfg.ema_decay)
        if step % log_every == 0 or step == cfg.steps or step == 1:
            for name, value in parts.items():
                if not name.startswith("_"):
                    rows.append((step, name, value))
        if eval_every > 0 and (step % eval_every == 0 or step == cfg.steps):
            if eval_data is None:
                raise ValueError("eval_every > 0 requires eval_data")
            sw = _eval_distance(net, ema, basis, eval_rng, eval_data, eval_samples, sampler_cfg)
            rows.append((step, "sw", sw))
    return TrainResult(net=net, ema_params=ema, rows=rows, config=cfg)


def _eval_distance(net, ema, basis, eval_rng, eval_data, n_samples, sampler_cfg) -> float:
    gen = generate_samples(net, ema, basis, n_samples, eval_rng, sampler_cfg)
    return sliced_wasserstein(gen, eval_data.T, SW_PROJECTIONS, SW_SEED)


def generate_samples(
    net: VelocityNet,
    params: dict[str, np.ndarray] | None,
    basis: SubspaceBasis,
    n_samples: int,
    rng: Rng,
    sampler_cfg: SamplerConfig,
    cal: Calibration | None = None,
    cond=None,
) -> np.ndarray:
    """Sample the model (optionally with substitute parameters, e.g. EMA)."""
    if params is not None:
        runner = VelocityNet.from_meta(net.meta())
        runner.set_params(params)
    else:
        runner = net
    model = AsymVelocityModel(runner, basis, cal)
    eps = rng.normal(n_samples * net.dim).reshape(n_samples, net.dim)
    return sample(model, eps, sampler_cfg, cond)
