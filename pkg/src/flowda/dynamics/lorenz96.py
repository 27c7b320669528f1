"""Lorenz '96 cyclic ODE with classical RK4 stepping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Array, BlowupError, ConfigurationError, RngStream, TransitionModel


@dataclass(frozen=True)
class Lorenz96Config:
    dim: int = 40
    forcing: float = 8.0
    dt: float = 0.01
    steps_per_da: int = 10

    def __post_init__(self):
        if self.dim < 4:
            raise ConfigurationError("cyclic stencil needs dim >= 4")
        if self.dt <= 0 or self.steps_per_da < 1:
            raise ConfigurationError("dt must be > 0 and steps_per_da >= 1")


def lorenz96_rhs(cfg: Lorenz96Config, x: Array) -> Array:
    """dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + forcing, indices cyclic."""
    xp1 = np.roll(x, -1)
    xm1 = np.roll(x, 1)
    xm2 = np.roll(x, 2)
    return (xp1 - xm2) * xm1 - x + cfg.forcing


def lorenz96_step(cfg: Lorenz96Config, x: Array) -> Array:
    """One classical RK4 step of size cfg.dt."""
    dt = cfg.dt
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = lorenz96_rhs(cfg, x)
        k2 = lorenz96_rhs(cfg, x + 0.5 * dt * k1)
        k3 = lorenz96_rhs(cfg, x + 0.5 * dt * k2)
        k4 = lorenz96_rhs(cfg, x + dt * k3)
        out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise BlowupError("Lorenz 96 step went non-finite")
    return out


def da_interval_step(cfg: Lorenz96Config, x: Array, n_solver_steps: int | None = None) -> Array:
    for _ in range(n_solver_steps or cfg.steps_per_da):
        x = lorenz96_step(cfg, x)
    return x


def transition_model(cfg: Lorenz96Config, model_noise_std: float = 0.0,
                     n_solver_steps: int | None = None) -> TransitionModel:
    return TransitionModel(
        step=lambda x: da_interval_step(cfg, x, n_solver_steps),
        model_noise_std=model_noise_std,
    )


def initial_state(cfg: Lorenz96Config, rng: RngStream) -> Array:
    # truth trajectories start from N(0, 3^2 I)
    return 3.0 * rng.generator().standard_normal(cfg.dim)
