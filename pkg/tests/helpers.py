"""Shared oracles for the test suite.

These deliberately avoid the package's own code paths wherever they
serve as an independent check: the cubic characteristic-polynomial
solver, the jointly-Gaussian control-variate toy, and the analytic
Gaussian flow are all self-contained.
"""

from __future__ import annotations

import numpy as np


def cubic_eigenvalues_sym3(g: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric 3x3 matrix by solving its
    characteristic polynomial with the trigonometric method."""
    g = np.asarray(g, dtype=np.float64)
    assert g.shape == (3, 3)
    p1 = g[0, 1] ** 2 + g[0, 2] ** 2 + g[1, 2] ** 2
    q = np.trace(g) / 3.0
    p2 = np.sum((np.diag(g) - q) ** 2) + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    if p == 0.0:
        return np.full(3, q)
    b = (g - q * np.eye(3)) / p
    det_b = np.linalg.det(b)
    r = np.clip(det_b / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    eig1 = q + 2.0 * p * np.cos(phi)
    eig3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    eig2 = 3.0 * q - eig1 - eig3
    return np.sort(np.array([eig1, eig2, eig3]))[::-1]


class GaussianControlVariateToy:
    """Jointly Gaussian (x0, x0_low) pairs with closed-form conditional
    means given the noisy state x_t at a fixed time.

    Per dimension: x0 ~ N(0, 1), x0_low = rho * x0 + sqrt(1 - rho^2) * w
    with independent w, so corr(x0, x0_low) = rho. The noisy state is
    x_t = (1 - t) x0 + t eps.
    """

    def __init__(self, dim: int, rho: float, t: float):
        self.dim = dim
        self.rho = rho
        self.t = t
        a = 1.0 - t
        # cov(x0, xt) = a, var(xt) = a^2 + t^2 per dimension
        self.gain_x0 = a / (a * a + t * t)
        # cov(x0_low, xt) = rho * a
        self.gain_low = self.rho * a / (a * a + t * t)

    def draw(self, n: int, rng: np.random.Generator):
        x0 = rng.standard_normal((n, self.dim))
        w = rng.standard_normal((n, self.dim))
        x0_low = self.rho * x0 + np.sqrt(1.0 - self.rho**2) * w
        eps = rng.standard_normal((n, self.dim))
        xt = (1.0 - self.t) * x0 + self.t * eps
        return x0, x0_low, xt

    def cond_mean_x0(self, xt: np.ndarray) -> np.ndarray:
        return self.gain_x0 * xt

    def cond_mean_low(self, xt: np.ndarray) -> np.ndarray:
        return self.gain_low * xt


def gaussian_flow_endpoint(mu: np.ndarray, c: float, eps: np.ndarray, t_end: float) -> np.ndarray:
    """Exact flow endpoint for data N(mu, c^2 I) started from eps at t=1.

    The marginal path is N((1-t) mu, ((1-t)^2 c^2 + t^2) I); the flow
    map transports eps along matching quantiles:
    x(t) = (1-t) mu + s_t * eps with s_t the marginal std.
    """
    s_t = np.sqrt((1.0 - t_end) ** 2 * c**2 + t_end**2)
    return (1.0 - t_end) * mu + s_t * eps


class GaussianPosteriorModel:
    """Exact velocity model for data N(mu, c^2 I)."""

    def __init__(self, mu: np.ndarray, c: float):
        self.mu = np.asarray(mu, dtype=np.float64)
        self.c = c

    def velocity(self, x, t, cond, sigma_min):
        a = 1.0 - t
        var = a * a * self.c**2 + t * t
        mean_x0 = self.mu + a * self.c**2 / var * (x - a * self.mu)
        return (x - mean_x0) / max(t, sigma_min)
