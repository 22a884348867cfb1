"""Experiment orchestration behind the CLI subcommands.

Every experiment takes one flat config dict plus an output directory,
derives all randomness from ``seed``, and writes: ``config.json`` (the
fully resolved config, sufficient to regenerate every artifact),
``metrics.csv`` with a fixed per-command header, and command-specific
artifacts (bases, checkpoints, samples, images). CSV floats are
serialized with ``repr`` so identical runs produce identical bytes.

``ASYMFLOW_THREADS`` caps worker processes for the ablation sweeps
(default 1); each task is independently seeded, so results do not
depend on the worker count.
"""

from __future__ import annotations

import json
import multiprocessing
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .datasets import make_dataset
from .lift import LatentField, LiftedField, coupling_residual, integrate_coupled
from .losses import LossWeights, PyramidMetric
from .metrics import sliced_wasserstein
from .net import TrainConfig, save_checkpoint
from .ppm import write_ppm_grid
from .rng import Rng
from .sampler import SamplerConfig
from .subspace import (
    Calibration,
    SubspaceBasis,
    estimate_scale,
    fit_pca,
    fit_procrustes,
    fit_random,
    load_basis,
    save_basis,
)
from .afmx import read_afmx, write_afmx
from .training import (
    SW_PROJECTIONS,
    SW_SEED,
    generate_samples,
    train_low_rank_teacher,
    train_velocity_net,
)

__all__ = ["COMMANDS", "run_command", "default_config"]


# -- deterministic file helpers ---------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_config(out: Path, cfg: dict) -> None:
    out.joinpath("config.json").write_text(json.dumps(cfg, sort_keys=True, indent=2) + "\n")


def _workers() -> int:
    try:
        n = int(os.environ.get("ASYMFLOW_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def _run_task(task):
    fn_name, kwargs = task
    return globals()[fn_name](**kwargs)


def _parallel(tasks: list[tuple[str, dict]]) -> list:
    n = _workers()
    if n <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    # fork avoids re-importing the caller's __main__ in the workers
    method = "fork" if "fork" in multiprocessing.get_all_start_methods() else "spawn"
    ctx = multiprocessing.get_context(method)
    with ctx.Pool(min(n, len(tasks))) as pool:
        return pool.map(_run_task, tasks)


# -- dataset / basis plumbing ------------------------------------------------


def _dataset(cfg: dict, rng: Rng) -> np.ndarray:
    kind = cfg["dataset"]
    size = int(cfg["dataset_size"])
    if kind == "toy_patches":
        return make_dataset(kind, size, rng, side=int(cfg["patch_side"]))
    if kind == "gauss_mixture":
        return make_dataset(
            kind, size, rng, dim=int(cfg["gauss_dim"]), centers=cfg["gauss_centers"],
            scales=cfg["gauss_scales"],
        )
    return make_dataset(kind, size, rng)


def _split_holdout(data: np.ndarray, holdout: int) -> tuple[np.ndarray, np.ndarray]:
    holdout = min(holdout, data.shape[1] // 2)
    return data[:, : data.shape[1] - holdout], data[:, data.shape[1] - holdout :]


def _basis_for(train: np.ndarray, rank: int, method: str, seed: int) -> SubspaceBasis:
    dim = train.shape[0]
    if rank == 0:
        return SubspaceBasis(np.zeros((dim, 0)), provenance=method)
    if rank == dim and method == "pca":
        return fit_pca(train, rank)
    if method == "pca":
        return fit_pca(train, rank)
    if method == "random":
        return fit_random(dim, rank, Rng(seed))
    raise ValueError(f"unknown basis method {method!r}")


def _sampler_cfg(cfg: dict, sigma_min: float | None = None) -> SamplerConfig:
    return SamplerConfig(
        method=cfg["sample_method"],
        steps=int(cfg["sample_steps"]),
        t_end=float(cfg["t_end"]),
        sigma_min=float(cfg["sigma_min"] if sigma_min is None else sigma_min),
        guidance_scale=float(cfg["guidance_scale"]),
        guidance_interval=tuple(cfg["guidance_interval"]),
    )


def _train_cfg(cfg: dict, rank: int, seed: int, loss_mode: str | None = None) -> TrainConfig:
    return TrainConfig(
        rank=rank,
        sigma_min=float(cfg["sigma_min"]),
        batch_size=int(cfg["batch_size"]),
        steps=int(cfg["steps"]),
        lr=float(cfg["lr"]),
        betas=(float(cfg["beta1"]), float(cfg["beta2"])),
        time_shift=float(cfg["time_shift"]),
        seed=seed,
        loss_mode=loss_mode or cfg["loss_mode"],
        ema_decay=float(cfg["ema_decay"]),
    )


# -- single training task (worker-safe, module level) ------------------------


def _train_eval_task(
    cfg: dict,
    rank: int,
    basis_method: str,
    seed: int,
    loss_mode: str,
    sigma_mins: list[float],
) -> dict:
    """Train one model and evaluate sliced Wasserstein distance for each
    requested sampling clamp. Returns a plain dict for pool transport."""
    data_rng = Rng(int(cfg["data_seed"]))
    data = _dataset(cfg, data_rng)
    train, hold = _split_holdout(data, int(cfg["holdout"]))
    basis = _basis_for(train, rank, basis_method, seed=seed + 7777)
    teacher = None
    metric = None
    if loss_mode in ("vr", "vr_perceptual"):
        teacher = train_low_rank_teacher(
            train,
            basis,
            seed=seed + 31337,
            steps=int(cfg["teacher_steps"]),
            batch_size=int(cfg["teacher_batch"]),
            lr=float(cfg["teacher_lr"]),
        )
    if loss_mode == "vr_perceptual":
        metric = PyramidMetric(int(cfg["patch_side"]))
    tcfg = _train_cfg(cfg, rank, seed, loss_mode)
    res = train_velocity_net(
        train,
        basis,
        tcfg,
        teacher=teacher,
        metric=metric,
        log_every=int(cfg["log_every"]),
    )
    eval_n = int(cfg["eval_samples"])
    hold_rows = hold[:, :eval_n].T
    sws = {}
    for sm in sigma_mins:
        gen = generate_samples(
            res.net,
            res.ema_params,
            basis,
            eval_n,
            Rng(seed + 424242),
            _sampler_cfg(cfg, sigma_min=sm),
        )
        sws[sm] = sliced_wasserstein(gen, hold_rows, SW_PROJECTIONS, SW_SEED)
    final_loss = [v for _, k, v in res.rows if k == "loss"][-1]
    return {
        "rank": rank,
        "basis": basis_method,
        "seed": seed,
        "loss_mode": loss_mode,
        "sw": sws,
        "final_loss": final_loss,
    }


# -- subcommands --------------------------------------------------------------


def run_fit_subspace(cfg: dict, out: Path) -> None:
    rng = Rng(int(cfg["seed"]))
    data = _dataset(cfg, rng)
    rank = int(cfg["rank"])
    method = cfg["basis"]
    cal = Calibration(1.0)
    rows = []
    if method == "procrustes":
        if cfg["latents"]:
            z = read_afmx(cfg["latents"])
        else:
            # self-pairing: latents are the top-rank PCA coordinates
            z = fit_pca(data, rank).a.T @ data
        basis = fit_procrustes(data, z)
        cal = estimate_scale(data, z, basis)
        from .linalg import svd

        rows = [(i, s) for i, s in enumerate(svd(data @ z.T).s)]
    elif method in ("pca", "random"):
        basis = _basis_for(data, rank, method, seed=int(cfg["seed"]))
        if method == "pca" and rank > 0:
            from .linalg import svd

            rows = [(i, s) for i, s in enumerate(svd(data).s)]
    else:
        raise ValueError(f"unknown basis method {method!r}")
    save_basis(out / "basis.afmx", basis, cal)
    write_csv(out / "metrics.csv", ["index", "singular_value"], rows)
    _write_config(out, cfg)


def run_train(cfg: dict, out: Path) -> None:
    data = _dataset(cfg, Rng(int(cfg["data_seed"])))
    train, hold = _split_holdout(data, int(cfg["holdout"]))
    rank = int(cfg["rank"])
    seed = int(cfg["seed"])
    if cfg["basis_path"]:
        basis, _ = load_basis(cfg["basis_path"])
    else:
        basis = _basis_for(train, rank, cfg["basis"], seed=seed + 7777)
    teacher = None
    metric = None
    if cfg["loss_mode"] in ("vr", "vr_perceptual"):
        teacher = train_low_rank_teacher(
            train,
            basis,
            seed=seed + 31337,
            steps=int(cfg["teacher_steps"]),
            batch_size=int(cfg["teacher_batch"]),
            lr=float(cfg["teacher_lr"]),
        )
    if cfg["loss_mode"] == "vr_perceptual":
        metric = PyramidMetric(int(cfg["patch_side"]))
    tcfg = _train_cfg(cfg, rank, seed)
    eval_every = int(cfg["eval_every"]) if int(cfg["eval_every"]) > 0 else tcfg.steps
    res = train_velocity_net(
        train,
        basis,
        tcfg,
        teacher=teacher,
        metric=metric,
        eval_data=hold[:, : int(cfg["eval_samples"])],
        eval_every=eval_every,
        eval_samples=int(cfg["eval_samples"]),
        sampler_cfg=_sampler_cfg(cfg),
        log_every=int(cfg["log_every"]),
    )
    write_csv(out / "metrics.csv", ["step", "metric", "value"], res.rows)
    save_basis(out / "basis.afmx", basis)
    save_checkpoint(
        out / "checkpoint.ckpt",
        res.net,
        cfg,
        tcfg.steps,
        Rng(seed).get_state(),
        ema_params=res.ema_params,
    )
    n_show = int(cfg["n_final_samples"])
    gen = generate_samples(
        res.net, res.ema_params, basis, n_show, Rng(seed + 424242), _sampler_cfg(cfg)
    )
    write_afmx(out / "samples.afmx", gen)
    if cfg["dataset"] == "toy_patches":
        out.joinpath("samples").mkdir(exist_ok=True)
        write_ppm_grid(out / "samples" / "final.ppm", gen, int(cfg["patch_side"]))
    _write_config(out, cfg)


def run_sample(cfg: dict, out: Path) -> None:
    from .net import load_checkpoint

    ck = load_checkpoint(cfg["checkpoint"])
    basis, cal = load_basis(cfg["basis_path"])
    net = ck["net"]
    params = ck["ema_params"] if (cfg["use_ema"] and ck["ema_params"]) else None
    gen = generate_samples(
        net,
        params,
        basis,
        int(cfg["n_samples"]),
        Rng(int(cfg["seed"])),
        _sampler_cfg(cfg),
        cal=cal if cal.s != 1.0 else None,
    )
    write_afmx(out / "samples.afmx", gen)
    side = int(round(np.sqrt(net.dim)))
    if side * side == net.dim and side >= 2:
        out.joinpath("samples").mkdir(exist_ok=True)
        write_ppm_grid(out / "samples" / "final.ppm", gen, side)
    write_csv(out / "metrics.csv", ["index", "norm"], [(i, float(np.linalg.norm(g))) for i, g in enumerate(gen)])
    _write_config(out, cfg)


def run_verify_coupling(cfg: dict, out: Path) -> None:
    root = Rng(int(cfg["seed"]))
    rows = []
    worst = 0.0
    tol = float(cfg["coupling_tol"])
    for trial in range(int(cfg["trials"])):
        trial_rng = root.split()
        dim = 2 + int(trial_rng.integers(11, 1)[0])
        d = 1 + int(trial_rng.integers(min(dim, 4), 1)[0])
        basis = fit_random(dim, d, trial_rng)
        m = trial_rng.normal_matrix(d, d) * 0.5
        c = trial_rng.normal(d) * 0.5
        b = trial_rng.normal(d) * 0.5

        def fn(z, tau, m=m, c=c, b=b):
            return z @ m.T + tau * c + b

        field = LiftedField(LatentField(d, fn), basis)
        eps = trial_rng.normal(dim)
        n_pts = 4 + int(trial_rng.integers(37, 1)[0])
        t_end = 1e-3 + float(trial_rng.uniform(1)[0]) * 0.1
        interior = np.sort(t_end + (1.0 - t_end) * trial_rng.uniform(n_pts - 2))[::-1]
        grid = np.concatenate([[1.0], interior, [t_end]])
        grid = np.unique(grid)[::-1]
        for method in ("euler", "heun"):
            traj = integrate_coupled(field, eps, grid, method)
            resid = coupling_residual(traj, basis)
            eps_perp = eps - basis.project(eps)
            final_err = float(
                np.max(np.abs(traj.x_path[-1] - (basis.lift(traj.z_path[-1]) + traj.times[-1] * eps_perp)))
            )
            rows.append((trial, method, grid.size, resid, final_err))
            worst = max(worst, resid if method == "euler" else 0.0)
            if method == "heun" and resid > tol:
                print(f"note: heun residual {resid:.3e} above {tol:.1e} in trial {trial}", file=sys.stderr)
    write_csv(
        out / "metrics.csv",
        ["trial", "method", "grid_size", "residual", "final_identity_error"],
        rows,
    )
    _write_config(out, cfg)
    print(f"verify-coupling: {int(cfg['trials'])} trials, worst euler residual {worst:.3e}")


def run_ablate_rank(cfg: dict, out: Path) -> None:
    tasks = []
    for rank in cfg["ranks"]:
        for seed in cfg["seeds"]:
            tasks.append(
                (
                    "_train_eval_task",
                    dict(cfg=cfg, rank=int(rank), basis_method=cfg["basis"], seed=int(seed),
                         loss_mode=cfg["loss_mode"], sigma_mins=[float(cfg["sigma_min"])]),
                )
            )
    for rank in cfg["extra_random_ranks"]:
        for seed in cfg["seeds"]:
            tasks.append(
                (
                    "_train_eval_task",
                    dict(cfg=cfg, rank=int(rank), basis_method="random", seed=int(seed),
                         loss_mode=cfg["loss_mode"], sigma_mins=[float(cfg["sigma_min"])]),
                )
            )
    results = _parallel(tasks)
    rows = [
        (r["rank"], r["basis"], r["seed"], int(cfg["steps"]), r["sw"][float(cfg["sigma_min"])], r["final_loss"])
        for r in results
    ]
    write_csv(
        out / "metrics.csv",
        ["rank", "basis", "seed", "eval_step", "sw_distance", "final_loss"],
        rows,
    )
    _write_config(out, cfg)


def run_ablate_sigma_min(cfg: dict, out: Path) -> None:
    sig_list = [float(s) for s in cfg["sigma_mins"]]
    tasks = [
        (
            "_train_eval_task",
            dict(cfg=cfg, rank=int(rank), basis_method=cfg["basis"], seed=int(seed),
                 loss_mode=cfg["loss_mode"], sigma_mins=sig_list),
        )
        for rank in cfg["ranks"]
        for seed in cfg["seeds"]
    ]
    results = _parallel(tasks)
    rows = []
    for r in results:
        for sm in sig_list:
            rows.append((r["rank"], r["seed"], sm, r["sw"][sm]))
    write_csv(out / "metrics.csv", ["rank", "seed", "sigma_min", "sw_distance"], rows)
    _write_config(out, cfg)


def run_ablate_loss(cfg: dict, out: Path) -> None:
    tasks = [
        (
            "_train_eval_task",
            dict(cfg=cfg, rank=int(cfg["rank"]), basis_method=cfg["basis"], seed=int(seed),
                 loss_mode=mode, sigma_mins=[float(cfg["sigma_min"])]),
        )
        for mode in cfg["loss_modes"]
        for seed in cfg["seeds"]
    ]
    results = _parallel(tasks)
    rows = [
        (r["loss_mode"], r["seed"], int(cfg["steps"]), r["sw"][float(cfg["sigma_min"])], r["final_loss"])
        for r in results
    ]
    write_csv(
        out / "metrics.csv",
        ["loss_mode", "seed", "eval_step", "sw_distance", "final_loss"],
        rows,
    )
    _write_config(out, cfg)


# -- config schema -------------------------------------------------------------

_COMMON = {
    "dataset": "toy_patches",
    "dataset_size": 50_000,
    "patch_side": 4,
    "gauss_dim": 2,
    "gauss_centers": [[0.0, 0.0]],
    "gauss_scales": [1.0],
    "holdout": 4096,
    "data_seed": 1000,
    "seed": 0,
}

_TRAIN_KEYS = {
    "rank": 4,
    "basis": "pca",
    "basis_path": "",
    "loss_mode": "fm",
    "steps": 5000,
    "batch_size": 128,
    "lr": 5e-4,
    "beta1": 0.9,
    "beta2": 0.95,
    "time_shift": 1.0,
    "ema_decay": 0.999,
    "sigma_min": 0.04,
    "sample_method": "heun",
    "sample_steps": 50,
    "t_end": 1e-3,
    "guidance_scale": 1.0,
    "guidance_interval": [0.0, 1.0],
    "eval_samples": 2048,
    "eval_every": 0,
    "log_every": 100,
    "teacher_steps": 1500,
    "teacher_batch": 64,
    "teacher_lr": 1e-3,
    "n_final_samples": 64,
}

_DEFAULTS: dict[str, dict] = {
    "fit-subspace": {**_COMMON, "dataset_size": 100_000, "rank": 4, "basis": "pca", "latents": ""},
    "train": {**_COMMON, **_TRAIN_KEYS},
    "sample": {
        **_COMMON,
        "checkpoint": "",
        "basis_path": "",
        "n_samples": 64,
        "use_ema": True,
        "sigma_min": 0.04,
        "sample_method": "heun",
        "sample_steps": 50,
        "t_end": 1e-3,
        "guidance_scale": 1.0,
        "guidance_interval": [0.0, 1.0],
    },
    "verify-coupling": {"seed": 0, "trials": 1000, "coupling_tol": 1e-9},
    "ablate-rank": {
        **_COMMON,
        **_TRAIN_KEYS,
        "ranks": [0, 2, 4, 8, 16],
        "seeds": [0, 1, 2],
        "extra_random_ranks": [],
    },
    "ablate-sigma-min": {
        **_COMMON,
        **_TRAIN_KEYS,
        "ranks": [0, 4],
        "seeds": [0, 1, 2],
        "sigma_mins": [0.04, 0.0],
    },
    "ablate-loss": {
        **_COMMON,
        **_TRAIN_KEYS,
        "rank": 4,
        "seeds": [0],
        "loss_modes": ["fm", "vr", "vr_perceptual"],
    },
}

_RUNNERS = {
    "fit-subspace": run_fit_subspace,
    "train": run_train,
    "sample": run_sample,
    "verify-coupling": run_verify_coupling,
    "ablate-rank": run_ablate_rank,
    "ablate-sigma-min": run_ablate_sigma_min,
    "ablate-loss": run_ablate_loss,
}

COMMANDS = tuple(_RUNNERS)


def default_config(command: str) -> dict:
    if command not in _DEFAULTS:
        raise ValueError(f"unknown command {command!r}")
    return json.loads(json.dumps(_DEFAULTS[command]))


def run_command(command: str, cfg: dict, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _RUNNERS[command](cfg, out)
    return out
