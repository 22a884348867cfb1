"""Dense matrix primitives: one-sided Jacobi SVD and orthonormalization.

Everything operates on float64 numpy arrays. The SVD is a compact SVD
(k = min(rows, cols) singular triplets) computed by cyclic one-sided
Jacobi rotations, which is simple and accurate at the small sizes used
throughout this package.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = ["SvdResult", "SvdConvergenceError", "svd", "orthonormal_columns"]


class SvdConvergenceError(RuntimeError):
    """Jacobi sweeps did not converge within the sweep budget."""

    def __init__(self, sweeps: int):
        super().__init__(f"one-sided Jacobi SVD did not converge after {sweeps} sweeps")
        self.sweeps = sweeps


class SvdResult(NamedTuple):
    """Compact SVD: ``m = u @ diag(s) @ v.T`` with orthonormal u, v columns."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"matrix must have at least one row and column, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite entries")
    return a


def _complete_orthonormal(u: np.ndarray, cols_needed) -> None:
    """Fill the given (zero) columns of u with a deterministic orthonormal
    completion, taking standard basis vectors in index order."""
    n = u.shape[0]
    basis_idx = 0
    for j in cols_needed:
        while True:
            if basis_idx >= n:
                raise RuntimeError("failed to complete orthonormal basis")
            cand = np.zeros(n)
            cand[basis_idx] = 1.0
            basis_idx += 1
            # two rounds of Gram-Schmidt for numerical safety
            for _ in range(2):
                cand -= u @ (u.T @ cand)
            nrm = np.linalg.norm(cand)
            if nrm > 0.5:
                u[:, j] = cand / nrm
                break


def _jacobi_tall(work: np.ndarray, max_sweeps: int, tol: float):
    """One-sided Jacobi on a tall matrix (rows >= cols).

    Orthogonalizes the columns of ``work`` in place with plane rotations,
    accumulating them into v, until every off-diagonal Gram entry is at
    most ``tol`` relative to the participating column norms.
    """
    n, k = work.shape
    v = np.eye(k)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(k - 1):
            for q in range(p + 1, k):
                bp = work[:, p]
                bq = work[:, q]
                app = float(bp @ bp)
                aqq = float(bq @ bq)
                apq = float(bp @ bq)
                if app == 0.0 or aqq == 0.0:
                    continue
                if abs(apq) <= tol * np.sqrt(app * aqq):
                    continue
                rotated = True
                zeta = (aqq - app) / (2.0 * apq)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                if zeta == 0.0:
                    t = 1.0
                cs = 1.0 / np.sqrt(1.0 + t * t)
                sn = cs * t
                new_p = cs * bp - sn * bq
                new_q = sn * bp + cs * bq
                work[:, p] = new_p
                work[:, q] = new_q
                vp = cs * v[:, p] - sn * v[:, q]
                vq = sn * v[:, p] + cs * v[:, q]
                v[:, p] = vp
                v[:, q] = vq
        if not rotated:
            break
    else:
        raise SvdConvergenceError(max_sweeps)

    norms = np.linalg.norm(work, axis=0)
    order = np.argsort(-norms, kind="stable")
    s = norms[order]
    v = v[:, order]
    u = np.zeros((n, k))
    scale = s[0] if s[0] > 0.0 else 1.0
    dead = []
    for j in range(k):
        if s[j] > scale * 1e-300:
            u[:, j] = work[:, order[j]] / s[j]
        else:
            s[j] = 0.0
            dead.append(j)
    if dead:
        _complete_orthonormal(u, dead)
    return u, s, v


def svd(m, max_sweeps: int = 60, tol: float = 1e-12) -> SvdResult:
    """Compact SVD via cyclic one-sided Jacobi.

    Returns (u, s, v) with singular values sorted non-increasing. Raises
    SvdConvergenceError when the rotation sweeps do not settle within
    ``max_sweeps``.
    """
    a = _as_matrix(m)
    rows, cols = a.shape
    if rows >= cols:
        u, s, v = _jacobi_tall(a.copy(), max_sweeps, tol)
        return SvdResult(u, s, v)
    u, s, v = _jacobi_tall(a.T.copy(), max_sweeps, tol)
    return SvdResult(v, s, u)


def orthonormal_columns(m) -> np.ndarray:
    """Orthonormalize the columns of m by modified Gram-Schmidt (two passes).

    Requires numerically independent columns; raises on rank deficiency.
    """
    a = _as_matrix(m).copy()
    n, k = a.shape
    if k > n:
        raise ValueError(f"cannot orthonormalize {k} columns in dimension {n}")
    for j in range(k):
        for _ in range(2):
            for i in range(j):
                a[:, j] -= (a[:, i] @ a[:, j]) * a[:, i]
        nrm = np.linalg.norm(a[:, j])
        if nrm < 1e-12:
            raise ValueError(f"column {j} is numerically dependent on earlier columns")
        a[:, j] /= nrm
    return a
