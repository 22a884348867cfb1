"""Rank-asymmetric flow modeling on small dense problems.

Velocity targets keep the data term full-rank while projecting the
noise term to a low-rank subspace; the full-rank velocity is recovered
exactly for training and sampling. Includes latent-to-pixel lifting
with exact trajectory coupling, variance-reduced objectives, a manual
backprop trainer, ODE samplers, and a deterministic experiment CLI.
"""

from .afmx import read_afmx, write_afmx
from .flow import (
    AsymPrediction,
    CalibrationMismatch,
    ClampPolicy,
    FlowSample,
    asym_target,
    calibrate_time,
    calibrated_target,
    decompose,
    forward,
    recover_calibrated,
    recover_velocity,
    schedule,
)
from .lift import (
    CoupledTrajectory,
    LatentField,
    LiftedField,
    coupling_residual,
    integrate_coupled,
    lift_input,
    lifted_velocity,
)
from .linalg import SvdConvergenceError, SvdResult, orthonormal_columns, svd
from .losses import (
    LossWeights,
    PyramidMetric,
    ResidualPair,
    fm_loss,
    lambda_star,
    omega,
    perceptual_loss,
    total_loss,
    vr_loss,
)
from .metrics import sliced_wasserstein
from .net import (
    AdamState,
    TrainConfig,
    VelocityNet,
    adam_step,
    ema_update,
    load_checkpoint,
    sample_time,
    save_checkpoint,
)
from .rng import Rng
from .sampler import SamplerConfig, euler_step, heun_step, sample
from .subspace import (
    Calibration,
    SubspaceBasis,
    estimate_scale,
    fit_pca,
    fit_procrustes,
    fit_random,
    load_basis,
    principal_angles,
    save_basis,
)
from .training import (
    AsymVelocityModel,
    FrozenLowRank,
    TrainResult,
    generate_samples,
    train_low_rank_teacher,
    train_velocity_net,
)

__version__ = "0.1.0"
