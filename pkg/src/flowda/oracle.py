"""Independent reference implementations used only by tests and acceptance
checks: exact Kalman recursion, dense-grid Bayes updates, a jittered
importance-resampling sampler, and trajectory-shape metrics.

Everything here is deliberately brute force and kept separate from the
filter implementations it validates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Array, ConfigurationError, ObservationModel, RngStream, energy_rows


@dataclass(frozen=True)
class GaussianBelief:
    """Mean and covariance of a small (d <= 4) Gaussian state belief."""

    mean: Array
    cov: Array

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        c = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if c.shape != (m.size, m.size):
            raise ConfigurationError(f"cov shape {c.shape} does not match mean {m.shape}")
        if not np.allclose(c, c.T):
            raise ConfigurationError("covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(c) <= 0):
            raise ConfigurationError("covariance must be positive definite")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", c)


def kalman_step(belief: GaussianBelief, A, Sigma, H, Gamma, y) -> GaussianBelief:
    """One predict-then-update step of the exact Kalman recursion."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=np.float64))
    H = np.atleast_2d(np.asarray(H, dtype=np.float64))
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))

    m_pred = A @ belief.mean
    c_pred = A @ belief.cov @ A.T + Sigma
    S = H @ c_pred @ H.T + Gamma
    K = np.linalg.solve(S.T, (c_pred @ H.T).T).T
    m_post = m_pred + K @ (y - H @ m_pred)
    c_post = (np.eye(m_post.size) - K @ H) @ c_pred
    c_post = 0.5 * (c_post + c_post.T)
    return GaussianBelief(m_post, c_post)


class GridCoverageError(ValueError):
    """The posterior carries no mass on the supplied grid."""


def grid_posterior(grid: Array, prior_density: Array, obs: ObservationModel, y) -> Array:
    """Pointwise Bayes update on a 1-D grid, trapezoid-normalised.

    The returned density integrates to 1 within 1e-8 on the grid.
    """
    grid = np.asarray(grid, dtype=np.float64)
    prior = np.asarray(prior_density, dtype=np.float64)
    log_like = -energy_rows(obs, grid[:, None], np.atleast_1d(np.asarray(y, dtype=np.float64)))
    log_like -= log_like.max()
    post = prior * np.exp(log_like)
    mass = np.trapezoid(post, grid)
    if mass <= 0 or not np.isfinite(mass):
        raise GridCoverageError("posterior mass vanished on the grid")
    return post / mass


def grid_posterior_2d(xs: Array, ys: Array, prior_density: Array,
                      obs: ObservationModel, y) -> Array:
    """Pointwise Bayes update on a tensor-product 2-D grid."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    prior = np.asarray(prior_density, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    log_like = -energy_rows(obs, points, np.atleast_1d(np.asarray(y, dtype=np.float64)))
    log_like -= log_like.max()
    post = prior * np.exp(log_like).reshape(prior.shape)
    mass = np.trapezoid(np.trapezoid(post, ys, axis=1), xs)
    if mass <= 0 or not np.isfinite(mass):
        raise GridCoverageError("posterior mass vanished on the grid")
    return post / mass


def grid_moments(grid: Array, density: Array) -> tuple[float, float]:
    """Trapezoid mean and variance of a 1-D gridded density."""
    mean = np.trapezoid(grid * density, grid)
    var = np.trapezoid((grid - mean) ** 2 * density, grid)
    return float(mean), float(var)


def bpf_jitter_reference(targets: Array, weights: Array, sigma_min: float,
                         n_draws: int, rng: RngStream) -> Array:
    """Weighted multinomial resampling plus N(0, sigma_min^2 I) jitter."""
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64)
    if not np.isclose(weights.sum(), 1.0):
        raise ConfigurationError("weights must be normalised")
    g = rng.generator()
    idx = g.choice(targets.shape[0], size=n_draws, p=weights)
    draws = targets[idx]
    if sigma_min > 0:
        draws = draws + sigma_min * g.standard_normal(draws.shape)
    return draws


def straightness(trajectory) -> float:
    """Arc length over chord length of a polyline; 1 iff collinear monotone.

    A zero chord has no defined ratio and is reported as NaN so callers can
    exclude it from aggregates.
    """
    pts = np.asarray(trajectory, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ConfigurationError("straightness needs at least two points")
    chord = float(np.linalg.norm(pts[-1] - pts[0]))
    if chord == 0.0:
        return float("nan")
    arc = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
    return arc / chord


def saturating_drift_kernel(z0: Array) -> Array:
    """Deterministic 2-D benchmark transition z -> z + 6 z / (1 + z^2) + 5, elementwise."""
    z0 = np.asarray(z0, dtype=np.float64)
    if z0.shape[-1] != 2:
        raise ConfigurationError("benchmark kernel is defined for 2-D states")
    return z0 + 6.0 * z0 / (1.0 + z0**2) + 5.0


def wasserstein_1d(a: Array, b: Array) -> float:
    """1-Wasserstein distance between two equal-size 1-D samples (sorted L1)."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size != b.size:
        raise ConfigurationError("samples must have equal size")
    return float(np.mean(np.abs(a - b)))
