"""Guidance fields that steer the marginal flow toward the filtering posterior.

MC guidance tilts the mixture weights by the observation likelihood, so the
guided field already equals marginal field plus guidance.  Localized guidance
linearises the likelihood at the weight-averaged target estimate and applies
a constant-strength gradient step ``-lam * grad J``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Array, ConfigurationError, ObservationModel, energy_and_grad_rows, energy_rows
from .flow import (
    CoupledPairSet,
    PathContext,
    path_context,
    path_weights,
    weighted_cond_vf,
    weights_from_context,
)


@dataclass(frozen=True)
class MCGuidance:
    """Likelihood-tilted mixture weights; no tunable strength."""


@dataclass(frozen=True)
class LocalizedGuidance:
    """Constant-scheduler gradient guidance with strength lam >= 0."""

    strength: float

    def __post_init__(self):
        if not np.isfinite(self.strength) or self.strength < 0:
            raise ConfigurationError("guidance strength must be finite and >= 0")


GuidanceKind = MCGuidance | LocalizedGuidance


def target_energies(pairs: CoupledPairSet, obs: ObservationModel, y: Array) -> Array:
    """J(z1_n; y) for every target; fixed over (z, t) so computed once per step."""
    return energy_rows(obs, pairs.targets, y)


def mc_guided_vf_rows(pairs: CoupledPairSet, obs: ObservationModel, y: Array,
                      queries: Array, t: float, energies: Array | None = None,
                      ctx: PathContext | None = None) -> Array:
    if energies is None:
        energies = target_energies(pairs, obs, y)
    if ctx is None:
        ctx = path_context(pairs, t)
    w = weights_from_context(ctx, queries, extra_logits=-energies)
    return weighted_cond_vf(pairs, w, queries, t)


def mc_guided_vf(pairs: CoupledPairSet, obs: ObservationModel, y: Array,
                 z: Array, t: float) -> Array:
    """Guided field with likelihood-tilted weights at a single point."""
    z = np.asarray(z, dtype=np.float64)
    return mc_guided_vf_rows(pairs, obs, y, z[None, :], t)[0]


def localized_guidance_rows(pairs: CoupledPairSet, obs: ObservationModel, y: Array,
                            queries: Array, t: float, strength: float,
                            weights: Array | None = None) -> Array:
    if strength == 0.0:
        queries = np.atleast_2d(queries)
        return np.zeros((queries.shape[0], pairs.dim))
    if weights is None:
        weights = path_weights(pairs, queries, t)
    z1_hat = weights @ pairs.targets
    _, grad = energy_and_grad_rows(obs, z1_hat, y)
    return -strength * grad


def localized_guidance(pairs: CoupledPairSet, obs: ObservationModel, y: Array,
                       z: Array, t: float, strength: float) -> Array:
    """Gradient guidance -lam * grad J(z1_hat; y) at a single point."""
    z = np.asarray(z, dtype=np.float64)
    return localized_guidance_rows(pairs, obs, y, z[None, :], t, strength)[0]


def guided_vf_rows(pairs: CoupledPairSet, obs: ObservationModel, y: Array,
                   kind: GuidanceKind, queries: Array, t: float,
                   energies: Array | None = None,
                   ctx: PathContext | None = None) -> Array:
    """Full guided field u_t + g_t for a batch of query rows.

    The unguided weight matrix is computed once per batch and shared between
    the marginal field and (for localized guidance) the z1_hat estimate.
    """
    if isinstance(kind, MCGuidance):
        return mc_guided_vf_rows(pairs, obs, y, queries, t, energies=energies, ctx=ctx)
    if ctx is None:
        ctx = path_context(pairs, t)
    w = weights_from_context(ctx, queries)
    u = weighted_cond_vf(pairs, w, queries, t)
    if kind.strength == 0.0:
        return u
    z1_hat = w @ pairs.targets
    _, grad = energy_and_grad_rows(obs, z1_hat, y)
    # overflow here is a diverging run; the integrator turns it into an error
    with np.errstate(over="ignore", invalid="ignore"):
        return u - kind.strength * grad


def guided_vf(pairs: CoupledPairSet, obs: ObservationModel, y: Array,
              kind: GuidanceKind, z: Array, t: float) -> Array:
    """Guided field at a single point."""
    z = np.asarray(z, dtype=np.float64)
    return guided_vf_rows(pairs, obs, y, kind, z[None, :], t)[0]
