"""Synthetic datasets for desk-scale experiments.

All generators are deterministic given an Rng. ``toy_patches`` renders
mixtures of smooth 2-d bumps into small square patches, giving data
with genuine low-rank structure so PCA subspaces mean something.
Patch and moon data are normalized per dimension to mean 0 / std 1
over the dataset; Gaussian mixtures are returned raw since their scale
is caller-controlled.
"""

from __future__ import annotations

import numpy as np

from .rng import Rng

__all__ = ["make_dataset", "moons2d", "gauss_mixture", "toy_patches"]


def _normalize_dims(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=1, keepdims=True)
    std = x.std(axis=1, keepdims=True)
    return (x - mean) / np.maximum(std, 1e-12)


def moons2d(size: int, rng: Rng, noise: float = 0.08) -> np.ndarray:
    """Two interleaved half-circles; returns a 2 x N matrix."""
    if size < 1:
        raise ValueError("size must be >= 1")
    n_upper = (size + 1) // 2
    ang = np.pi * rng.uniform(size)
    pts = np.empty((2, size))
    pts[0, :n_upper] = np.cos(ang[:n_upper])
    pts[1, :n_upper] = np.sin(ang[:n_upper])
    pts[0, n_upper:] = 1.0 - np.cos(ang[n_upper:])
    pts[1, n_upper:] = 0.5 - np.sin(ang[n_upper:])
    pts += noise * rng.normal(2 * size).reshape(2, size)
    return _normalize_dims(pts)


def gauss_mixture(
    size: int,
    rng: Rng,
    dim: int = 2,
    centers=((0.0,),),
    scales=(1.0,),
    weights=None,
) -> np.ndarray:
    """Isotropic Gaussian mixture; returns a dim x N matrix (unnormalized)."""
    if size < 1:
        raise ValueError("size must be >= 1")
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim == 1:
        centers = centers[:, None]
    if centers.shape[1] == 1 and dim > 1:
        centers = np.repeat(centers, dim, axis=1)
    if centers.shape[1] != dim:
        raise ValueError(f"centers have dim {centers.shape[1]}, expected {dim}")
    k = centers.shape[0]
    scales = np.broadcast_to(np.asarray(scales, dtype=np.float64), (k,))
    if weights is None:
        weights = np.full(k, 1.0 / k)
    weights = np.asarray(weights, dtype=np.float64)
    weights = weights / weights.sum()
    comp = np.searchsorted(np.cumsum(weights), rng.uniform(size), side="right")
    comp = np.minimum(comp, k - 1)
    noise = rng.normal(size * dim).reshape(size, dim)
    pts = centers[comp] + scales[comp][:, None] * noise
    return pts.T


def toy_patches(size: int, rng: Rng, side: int = 4, n_bumps: int = 2) -> np.ndarray:
    """Smooth bump-mixture patches; returns a side^2 x N matrix,
    normalized to per-dimension mean 0 / std 1."""
    if size < 2:
        raise ValueError("need at least 2 patches to normalize")
    d = side * side
    cx = rng.uniform(size * n_bumps).reshape(size, n_bumps) * (side - 1)
    cy = rng.uniform(size * n_bumps).reshape(size, n_bumps) * (side - 1)
    width = 0.7 + 1.1 * rng.uniform(size * n_bumps).reshape(size, n_bumps)
    amp = 0.5 + 1.0 * rng.uniform(size * n_bumps).reshape(size, n_bumps)
    sign = np.where(rng.uniform(size * n_bumps).reshape(size, n_bumps) < 0.5, -1.0, 1.0)
    amp = amp * sign

    ys, xs = np.divmod(np.arange(d), side)
    # (N, n_bumps, D) squared distances from each bump center to each pixel
    dx = xs[None, None, :] - cx[:, :, None]
    dy = ys[None, None, :] - cy[:, :, None]
    bumps = amp[:, :, None] * np.exp(-(dx**2 + dy**2) / (2.0 * width[:, :, None] ** 2))
    patches = bumps.sum(axis=1).T  # (D, N)
    return _normalize_dims(patches)


def make_dataset(kind: str, size: int, rng: Rng, **params) -> np.ndarray:
    """Dispatch on dataset kind; returns a D x N matrix."""
    if kind == "moons2d":
        return moons2d(size, rng, **params)
    if kind == "gauss_mixture":
        return gauss_mixture(size, rng, **params)
    if kind == "toy_patches":
        return toy_patches(size, rng, **params)
    raise ValueError(f"unknown dataset kind {kind!r}")
