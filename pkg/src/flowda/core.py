"""State-space model primitives shared by every filter.

Conventions: a state is a 1-D float64 array of length d, an ensemble is an
(N, d) array with stable member order, and all randomness flows through
keyed :class:`RngStream` objects so results never depend on execution
schedule.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

Array = np.ndarray

_MASK64 = (1 << 64) - 1


class ConfigurationError(ValueError):
    """Inconsistent model, filter, or experiment configuration."""


class BlowupError(RuntimeError):
    """A numerical operation produced a non-finite state."""


class PropagationBlowup(BlowupError):
    """Dynamics produced a non-finite state for a specific member."""

    def __init__(self, step_index: int, member: int, detail: str = ""):
        self.step_index = step_index
        self.member = member
        msg = f"non-finite state at DA step {step_index}, member {member}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class IntegrationBlowup(BlowupError):
    """Flow/SDE integration produced a non-finite state."""

    def __init__(self, euler_step: int, detail: str = ""):
        self.euler_step = euler_step
        msg = f"non-finite state at integration step {euler_step}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


def _key_word(part) -> int:
    """Map a key part (non-negative int or short string) to a uint32-ish word."""
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    word = int(part)
    if word < 0:
        raise ValueError(f"rng key parts must be non-negative, got {part}")
    return word


@dataclass(frozen=True)
class RngStream:
    """Counter-style random stream fully determined by (seed, key).

    ``generator()`` always returns a fresh generator in the same state, so
    any operation given the same stream reproduces the same draws no matter
    when, where, or on which thread it runs.  Derive disjoint substreams
    with ``child(step, member, purpose)``.
    """

    seed: int
    key: tuple = ()

    def child(self, *parts) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(parts))

    def generator(self) -> np.random.Generator:
        words = tuple(_key_word(p) for p in self.key)
        ss = np.random.SeedSequence(entropy=self.seed & _MASK64, spawn_key=words)
        return np.random.default_rng(ss)


@dataclass(frozen=True)
class Ensemble:
    """N state vectors at a common DA step; member order is identity."""

    members: Array  # (N, d)
    step_index: int = 0

    def __post_init__(self):
        m = np.asarray(self.members, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] < 1:
            raise ConfigurationError(f"ensemble needs shape (N, d), got {m.shape}")
        if self.step_index < 0:
            raise ConfigurationError("step_index must be non-negative")
        object.__setattr__(self, "members", m)

    @property
    def n_members(self) -> int:
        return self.members.shape[0]

    @property
    def dim(self) -> int:
        return self.members.shape[1]

    def mean(self) -> Array:
        return self.members.mean(axis=0)


@dataclass(frozen=True)
class TransitionModel:
    """One-DA-interval deterministic map plus isotropic model noise.

    ``step`` maps a state vector to the state one DA interval later;
    ``model_noise_std`` is the per-coordinate standard deviation of the
    additive Gaussian model error (0 means deterministic propagation).
    """

    step: Callable[[Array], Array]
    model_noise_std: float = 0.0

    def __post_init__(self):
        if self.model_noise_std < 0:
            raise ConfigurationError("model_noise_std must be >= 0")


@dataclass(frozen=True)
class ArctanObservation:
    """Full observation through elementwise arctan: y = arctan(x) + noise."""

    obs_noise_std: float

    def __post_init__(self):
        if self.obs_noise_std < 0:
            raise ConfigurationError("obs_noise_std must be >= 0")

    def apply(self, x: Array) -> Array:
        return np.arctan(x)

    def obs_dim(self, state_dim: int) -> int:
        return state_dim


@dataclass(frozen=True)
class LinearObservation:
    """Linear observation y = H x + noise; d_y <= d allowed."""

    matrix: Array  # (d_y, d)
    obs_noise_std: float

    def __post_init__(self):
        h = np.asarray(self.matrix, dtype=np.float64)
        if h.ndim != 2:
            raise ConfigurationError(f"observation matrix must be 2-D, got {h.shape}")
        if self.obs_noise_std < 0:
            raise ConfigurationError("obs_noise_std must be >= 0")
        object.__setattr__(self, "matrix", h)

    def apply(self, x: Array) -> Array:
        if x.shape[-1] != self.matrix.shape[1]:
            raise ConfigurationError(
                f"state dim {x.shape[-1]} does not match H columns {self.matrix.shape[1]}"
            )
        return x @ self.matrix.T

    def obs_dim(self, state_dim: int) -> int:
        return self.matrix.shape[0]


ObservationModel = ArctanObservation | LinearObservation


def observe(model: ObservationModel, x: Array, rng: RngStream) -> Array:
    """Draw one observation y = h(x) + sigma_y * eps with eps ~ N(0, I)."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise BlowupError("cannot observe a non-finite state")
    y = model.apply(x)
    if model.obs_noise_std > 0:
        y = y + model.obs_noise_std * rng.generator().standard_normal(y.shape)
    return y


def energy_and_grad(model: ObservationModel, x: Array, y: Array) -> tuple[float, Array]:
    """Observation energy J(x; y) = ||y - h(x)||^2 / (2 sigma_y^2) and its state gradient.

    Returns
    -------
    (J, grad) : (float, (d,) array)
        grad is the exact analytic gradient -Dh(x)^T (y - h(x)) / sigma_y^2.
    """
    x = np.asarray(x, dtype=np.float64)
    J, g = _energy_and_grad_rows(model, x[None, :], np.asarray(y, dtype=np.float64))
    return float(J[0]), g[0]


def energy_rows(model: ObservationModel, states: Array, y: Array) -> Array:
    """J(x; y) for each row of ``states`` ((M, d) -> (M,))."""
    return _energy_and_grad_rows(model, states, y, need_grad=False)[0]


def energy_and_grad_rows(model: ObservationModel, states: Array, y: Array) -> tuple[Array, Array]:
    """Vectorised :func:`energy_and_grad` over rows of ``states``."""
    return _energy_and_grad_rows(model, states, y)


def _energy_and_grad_rows(model, states, y, need_grad=True):
    if model.obs_noise_std <= 0:
        raise ConfigurationError("observation energy requires obs_noise_std > 0")
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    hx = model.apply(states)
    if y.shape != hx.shape[1:]:
        raise ConfigurationError(f"observation shape {y.shape} does not match h(x) {hx.shape[1:]}")
    inv_var = 1.0 / model.obs_noise_std**2
    resid = y[None, :] - hx
    J = 0.5 * inv_var * np.sum(resid**2, axis=1)
    if not need_grad:
        return J, None
    if isinstance(model, ArctanObservation):
        # Dh is diagonal with entries 1 / (1 + x_i^2)
        grad = -inv_var * resid / (1.0 + states**2)
    else:
        grad = -inv_var * resid @ model.matrix
    return J, grad


def propagate(model: TransitionModel, ens: Ensemble, rng: RngStream) -> Ensemble:
    """Propagate every member one DA interval and add model noise.

    Member n uses the substream keyed (new step index, n, "propagate"), so
    the result is identical whether members run serially or in parallel.
    Member order is preserved; this ordering is what realises the
    filtering-to-predictive coupling downstream.
    """
    new_step = ens.step_index + 1
    out = np.empty_like(ens.members)
    for n in range(ens.n_members):
        try:
            nx = model.step(ens.members[n])
        except BlowupError as e:
            raise PropagationBlowup(new_step, n, str(e)) from e
        nx = np.asarray(nx, dtype=np.float64)
        if nx.shape != ens.members[n].shape:
            raise ConfigurationError("transition step must preserve dimension")
        if model.model_noise_std > 0:
            g = rng.child(new_step, n, "propagate").generator()
            nx = nx + model.model_noise_std * g.standard_normal(nx.shape)
        if not np.all(np.isfinite(nx)):
            raise PropagationBlowup(new_step, n)
        out[n] = nx
    return Ensemble(out, new_step)
