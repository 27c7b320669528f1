"""Ground-truth trajectory and observation synthesis for twin experiments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import Array, BlowupError, ConfigurationError, ObservationModel, RngStream, observe
from . import ks, lorenz96, navier_stokes


@dataclass(frozen=True)
class ObservationProtocol:
    """Solver-step bookkeeping for one twin experiment.

    ``total_steps`` solver steps are generated; the first ``burn_in`` are
    discarded; one DA step spans ``observe_every`` solver steps, with the
    first observation at DA step 1.
    """

    total_steps: int
    burn_in: int
    observe_every: int
    obs_noise_std: float

    def __post_init__(self):
        if min(self.total_steps, self.observe_every) < 1 or self.burn_in < 0:
            raise ConfigurationError("protocol fields must be positive")
        if self.obs_noise_std <= 0:
            raise ConfigurationError("obs_noise_std must be > 0")
        if self.total_steps - self.burn_in < self.observe_every:
            raise ConfigurationError("protocol leaves no room for observations")

    @property
    def n_da_steps(self) -> int:
        return (self.total_steps - self.burn_in) // self.observe_every


@dataclass(frozen=True)
class SystemDriver:
    """Uniform handle on a dynamical system: dimension, init, one solver step."""

    name: str
    dim: int
    initial_state: Callable[[RngStream], Array]
    solver_step: Callable[[Array], Array]


def lorenz96_driver(cfg: lorenz96.Lorenz96Config) -> SystemDriver:
    return SystemDriver(
        name="lorenz96",
        dim=cfg.dim,
        initial_state=lambda rng: lorenz96.initial_state(cfg, rng),
        solver_step=lambda x: lorenz96.lorenz96_step(cfg, x),
    )


def ks_driver(cfg: ks.KSConfig, spinup_steps: int = 150) -> SystemDriver:
    ws = ks.make_workspace(cfg)
    return SystemDriver(
        name="ks",
        dim=cfg.grid,
        initial_state=lambda rng: ks.initial_state(cfg, ws, spinup_steps),
        solver_step=lambda u: ks.ks_step(cfg, ws, u),
    )


def ns_driver(cfg: navier_stokes.NSConfig) -> SystemDriver:
    ws = navier_stokes.make_workspace(cfg)

    def one_step(x: Array) -> Array:
        u, v, p = navier_stokes.unpack_state(cfg, x)
        return navier_stokes.pack_state(*navier_stokes.ns_step(cfg, ws, u, v, p))

    return SystemDriver(
        name="ns",
        dim=cfg.state_dim,
        initial_state=lambda rng: navier_stokes.initial_state(cfg, rng),
        solver_step=one_step,
    )


@dataclass(frozen=True)
class TruthBundle:
    """Truth states at DA resolution plus the synthesized observations.

    ``states[0]`` is the post-burn-in initial condition; ``states[j]`` is the
    truth at DA step j.  ``observations[j-1] = (j, y_j)``.
    """

    states: Array  # (J+1, d)
    observations: tuple  # ((j, y_j), ...)

    @property
    def n_da_steps(self) -> int:
        return self.states.shape[0] - 1


def make_truth_and_obs(driver: SystemDriver, obs_model: ObservationModel,
                       protocol: ObservationProtocol, rng: RngStream) -> TruthBundle:
    """Generate the ground truth and its noisy observations for one twin run."""
    x = driver.initial_state(rng.child("truth-init"))
    try:
        for _ in range(protocol.burn_in):
            x = driver.solver_step(x)
        n_da = protocol.n_da_steps
        states = np.empty((n_da + 1, driver.dim))
        states[0] = x
        observations = []
        for j in range(1, n_da + 1):
            for _ in range(protocol.observe_every):
                x = driver.solver_step(x)
            states[j] = x
            y = observe(obs_model, x, rng.child("truth-obs", j))
            observations.append((j, y))
    except BlowupError as e:
        raise BlowupError(f"truth generation blew up for {driver.name}: {e}") from e
    return TruthBundle(states=states, observations=tuple(observations))
