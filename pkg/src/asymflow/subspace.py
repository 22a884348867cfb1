"""Patch-wise low-rank subspaces.

A subspace is held as an orthonormal lift matrix ``a`` (shape D x r);
the induced orthogonal projector is ``P = a @ a.T``. Three fits are
provided: PCA of a patch matrix, an orthogonal Procrustes lift from
paired latents, and a random orthonormal basis. A scalar calibration
matches the Frobenius norm of projected data to the latents.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .afmx import read_afmx, write_afmx
from .linalg import orthonormal_columns, svd
from .rng import Rng

__all__ = [
    "SubspaceBasis",
    "Calibration",
    "fit_pca",
    "fit_procrustes",
    "fit_random",
    "estimate_scale",
    "principal_angles",
    "save_basis",
    "load_basis",
]

_ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal lift matrix plus how it was obtained.

    ``rank == 0`` is a valid basis (empty matrix, zero projector) and
    ``rank == dim`` projects to the identity; both are exact shortcuts
    in :meth:`project`.
    """

    a: np.ndarray
    provenance: str = "random"

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError(f"basis matrix must be 2-d, got shape {a.shape}")
        if a.shape[1] > a.shape[0]:
            raise ValueError(f"rank {a.shape[1]} exceeds dimension {a.shape[0]}")
        if a.shape[1] > 0:
            gram_err = np.max(np.abs(a.T @ a - np.eye(a.shape[1])))
            if not np.isfinite(gram_err) or gram_err > _ORTHO_TOL:
                raise ValueError(f"basis columns are not orthonormal (error {gram_err:.3e})")
        object.__setattr__(self, "a", a)

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def rank(self) -> int:
        return self.a.shape[1]

    def coords(self, v: np.ndarray) -> np.ndarray:
        """Subspace coordinates a.T @ v for vectors in the last axis."""
        v = self._check(v)
        return v @ self.a

    def lift(self, z: np.ndarray) -> np.ndarray:
        """Map subspace coordinates back to full dimension: a @ z."""
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.rank:
            raise ValueError(f"expected coordinate dim {self.rank}, got {z.shape[-1]}")
        return z @ self.a.T

    def project(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection a @ (a.T @ v), applied along the last axis."""
        v = self._check(v)
        if self.rank == 0:
            return np.zeros_like(v)
        if self.rank == self.dim:
            return v.copy()
        return (v @ self.a) @ self.a.T

    def reject(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal-complement component v - P v."""
        v = self._check(v)
        return v - self.project(v)

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.dim:
            raise ValueError(f"expected vectors of dim {self.dim}, got {v.shape[-1]}")
        return v


@dataclass(frozen=True)
class Calibration:
    """Scalar lift scale; 1.0 means calibration is a no-op."""

    s: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.s) and self.s > 0.0):
            raise ValueError(f"scale must be positive and finite, got {self.s}")


def fit_pca(x: np.ndarray, r: int) -> SubspaceBasis:
    """Top-r left singular vectors of the patch matrix x (D x N).

    No mean subtraction is performed; normalize patches upstream.
    Column signs are fixed so the largest-magnitude entry of each
    basis vector is positive.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("x must be a D x N matrix")
    d, n = x.shape
    if r < 1:
        raise ValueError("rank must be >= 1")
    if r > min(d, n):
        raise ValueError(f"rank {r} exceeds min(D, N) = {min(d, n)}")
    res = svd(x)
    a = res.u[:, :r].copy()
    for j in range(r):
        lead = np.argmax(np.abs(a[:, j]))
        if a[lead, j] < 0.0:
            a[:, j] = -a[:, j]
    return SubspaceBasis(a, provenance="pca")


def fit_procrustes(x: np.ndarray, z: np.ndarray) -> SubspaceBasis:
    """Orthonormal lift minimizing ||x - a @ z||_F over a.T @ a = I.

    Closed form: with x @ z.T = u @ diag(s) @ v.T (compact SVD), the
    minimizer is a = u @ v.T. When x @ z.T is numerically rank
    deficient the solution is not unique; a deterministic completion
    is used and a warning is emitted.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.ndim != 2 or z.ndim != 2:
        raise ValueError("x and z must be matrices")
    if x.shape[1] != z.shape[1]:
        raise ValueError(f"pair count mismatch: {x.shape[1]} vs {z.shape[1]}")
    d_pix, d_lat = x.shape[0], z.shape[0]
    if d_lat > d_pix:
        raise ValueError(f"latent dim {d_lat} exceeds pixel dim {d_pix}")
    cross = x @ z.T
    res = svd(cross)
    if res.s[0] > 0.0 and res.s[-1] / res.s[0] < 1e-10:
        warnings.warn(
            "cross matrix is numerically rank deficient; the lift is not unique "
            "along the degenerate directions (deterministic completion used)",
            RuntimeWarning,
            stacklevel=2,
        )
    a = res.u @ res.v.T
    return SubspaceBasis(a, provenance="procrustes")


def fit_random(d: int, r: int, rng: Rng) -> SubspaceBasis:
    """Orthonormalized Gaussian basis (modified Gram-Schmidt)."""
    if not 1 <= r <= d:
        raise ValueError(f"need 1 <= r <= D, got r={r}, D={d}")
    g = rng.normal_matrix(d, r)
    return SubspaceBasis(orthonormal_columns(g), provenance="random")


def estimate_scale(x: np.ndarray, z: np.ndarray, basis: SubspaceBasis) -> Calibration:
    """Scale making the lifted latents match the projected data in
    Frobenius norm: s = ||a.T @ x||_F / ||z||_F."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape[0] != basis.dim:
        raise ValueError(f"data dim {x.shape[0]} does not match basis dim {basis.dim}")
    z_norm = np.linalg.norm(z)
    if z_norm == 0.0:
        raise ValueError("latent matrix has zero norm; scale is undefined")
    return Calibration(float(np.linalg.norm(basis.a.T @ x) / z_norm))


def principal_angles(b1: SubspaceBasis, b2: SubspaceBasis) -> np.ndarray:
    """Principal angles (radians) between two subspaces of equal dim."""
    if b1.dim != b2.dim:
        raise ValueError("bases live in different dimensions")
    if b1.rank == 0 or b2.rank == 0:
        return np.zeros(0)
    cosines = svd(b1.a.T @ b2.a).s
    return np.arccos(np.clip(cosines, -1.0, 1.0))


def save_basis(path, basis: SubspaceBasis, cal: Calibration | None = None) -> None:
    """Persist a basis as <path> plus a JSON sidecar next to it."""
    path = Path(path)
    write_afmx(path, basis.a)
    sidecar = {
        "provenance": basis.provenance,
        "D": basis.dim,
        "r": basis.rank,
        "s": (cal.s if cal is not None else 1.0),
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def load_basis(path) -> tuple[SubspaceBasis, Calibration]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    a = read_afmx(path)
    if a.shape[0] != int(meta["D"]) or a.shape[1] != int(meta["r"]):
        raise ValueError("basis sidecar disagrees with matrix shape")
    return SubspaceBasis(a, provenance=meta["provenance"]), Calibration(float(meta["s"]))
