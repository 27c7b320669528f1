"""Conditional probability paths, conditional vector fields, and the
training-free Monte Carlo estimate of the marginal vector field.

Two flow families are supported.  The OT flow runs from a standard-normal
reference along straight conditional interpolants to each target.  The F2P
flow bridges an arbitrary reference ensemble to its member-wise propagated
targets, so each pair follows the constant field ``z1 - z0``.

All mixture weights are computed in log space with max subtraction; raw
Gaussian path densities underflow long before sigma_min reaches the values
used in practice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Array, ConfigurationError, IntegrationBlowup, RngStream


@dataclass(frozen=True)
class OTFlow:
    """Path N(t z1, (1-(1-sigma_min) t)^2 I) from a N(0, I) reference."""

    sigma_min: float

    def __post_init__(self):
        if not 0.0 < self.sigma_min < 1.0:
            raise ConfigurationError("OT flow needs sigma_min in (0, 1)")


@dataclass(frozen=True)
class F2PFlow:
    """Path N(t z1 + (1-t) z0, sigma_min^2 I) bridging reference to target.

    sigma_min = 0 is the degenerate limit: paths are deterministic lines and
    mixture weights collapse onto the nearest conditional path.
    """

    sigma_min: float

    def __post_init__(self):
        if self.sigma_min < 0.0:
            raise ConfigurationError("F2P flow needs sigma_min >= 0")


FlowKind = OTFlow | F2PFlow


def path_std(kind: FlowKind, t: float) -> float:
    """Standard deviation of the conditional path at time t (same for all pairs)."""
    if isinstance(kind, OTFlow):
        return 1.0 - (1.0 - kind.sigma_min) * t
    return kind.sigma_min


def path_mean(kind: FlowKind, z0: Array, z1: Array, t: float) -> Array:
    if isinstance(kind, OTFlow):
        return t * z1
    return t * z1 + (1.0 - t) * z0


def cond_vf(kind: FlowKind, z: Array, z0: Array, z1: Array, t: float) -> Array:
    """Conditional vector field of one (z0, z1) pair evaluated at (z, t)."""
    z = np.asarray(z, dtype=np.float64)
    z1 = np.asarray(z1, dtype=np.float64)
    if isinstance(kind, OTFlow):
        denom = 1.0 - (1.0 - kind.sigma_min) * t
        return (z1 - (1.0 - kind.sigma_min) * z) / denom
    return z1 - np.asarray(z0, dtype=np.float64)


def cond_log_density(kind: FlowKind, z: Array, z0: Array, z1: Array, t: float) -> float:
    """Log of the conditional Gaussian path density, constants included."""
    z = np.asarray(z, dtype=np.float64)
    sd = path_std(kind, t)
    if sd <= 0.0:
        raise ConfigurationError(f"conditional path has non-positive std at t={t}")
    mu = path_mean(kind, np.asarray(z0, dtype=np.float64), np.asarray(z1, dtype=np.float64), t)
    d = z.shape[-1]
    quad = float(np.sum((z - mu) ** 2)) / sd**2
    return -0.5 * d * math.log(2.0 * math.pi) - d * math.log(sd) - 0.5 * quad


def sample_initial(kind: FlowKind, z0: Array, rng: RngStream) -> Array:
    """Draw the integration start point for one pair.

    OT ignores z0 and samples the standard-normal reference; F2P jitters the
    reference member by sigma_min.
    """
    z0 = np.asarray(z0, dtype=np.float64)
    if isinstance(kind, OTFlow):
        return rng.generator().standard_normal(z0.shape)
    if kind.sigma_min == 0.0:
        return z0.copy()
    return z0 + kind.sigma_min * rng.generator().standard_normal(z0.shape)


@dataclass(frozen=True)
class CoupledPairSet:
    """N index-paired (reference, target) samples with their flow kind."""

    refs: Array     # (N, d)
    targets: Array  # (N, d)
    kind: FlowKind

    def __post_init__(self):
        r = np.asarray(self.refs, dtype=np.float64)
        z = np.asarray(self.targets, dtype=np.float64)
        if r.ndim != 2 or z.shape != r.shape:
            raise ConfigurationError(
                f"refs and targets must share an (N, d) shape, got {r.shape} vs {z.shape}"
            )
        object.__setattr__(self, "refs", r)
        object.__setattr__(self, "targets", z)

    @property
    def n_pairs(self) -> int:
        return self.refs.shape[0]

    @property
    def dim(self) -> int:
        return self.refs.shape[1]


def ot_pairs(targets: Array, sigma_min: float, rng: RngStream) -> CoupledPairSet:
    """Pair targets with fresh i.i.d. standard-normal references."""
    targets = np.asarray(targets, dtype=np.float64)
    refs = rng.generator().standard_normal(targets.shape)
    return CoupledPairSet(refs, targets, OTFlow(sigma_min))


def f2p_pairs(refs: Array, targets: Array, sigma_min: float) -> CoupledPairSet:
    """Pair a reference ensemble with its member-wise propagation."""
    return CoupledPairSet(np.asarray(refs), np.asarray(targets), F2PFlow(sigma_min))


@dataclass(frozen=True)
class PathContext:
    """Per-(pair set, t) quantities shared across query batches.

    The softmax logits reduce to q . mu / sd^2 - |mu|^2 / (2 sd^2); the query
    row constant cancels in the softmax, so a weight evaluation is one GEMM
    plus a handful of elementwise passes.
    """

    t: float
    mu: Array        # (N, d) path means
    sd: float
    col_logit: Array  # (N,) -|mu|^2 / (2 sd^2), or -|mu|^2 / 2 when sd == 0


def path_context(pairs: CoupledPairSet, t: float) -> PathContext:
    mu = path_mean(pairs.kind, pairs.refs, pairs.targets, t)
    sd = path_std(pairs.kind, t)
    musq = np.sum(mu**2, axis=1)
    col = -0.5 * musq if sd == 0.0 else -0.5 * musq / sd**2
    return PathContext(t=t, mu=mu, sd=sd, col_logit=col)


def weights_from_context(ctx: PathContext, queries: Array,
                         extra_logits: Array | None = None) -> Array:
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if ctx.sd == 0.0:
        # degenerate limit: all mass on the nearest path(s); finite tilts
        # only break ties between equidistant paths
        logits = queries @ ctx.mu.T
        logits += ctx.col_logit[None, :]
        on_nearest = logits == logits.max(axis=1, keepdims=True)
        if extra_logits is None:
            w = on_nearest.astype(np.float64)
        else:
            tilt = np.asarray(extra_logits, dtype=np.float64)
            w = on_nearest * np.exp(tilt - tilt.max())[None, :]
        w /= w.sum(axis=1, keepdims=True)
        return w
    # 1/sd^2 folded into the (M, d) factor so the GEMM emits final logits
    logits = (queries / ctx.sd**2) @ ctx.mu.T
    col = ctx.col_logit
    if extra_logits is not None:
        col = col + np.asarray(extra_logits, dtype=np.float64)
    logits += col[None, :]
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return logits


def path_weights(pairs: CoupledPairSet, queries: Array, t: float,
                 extra_logits: Array | None = None) -> Array:
    """Normalised mixture weights w_n(z) for each query row.

    Parameters
    ----------
    queries : (M, d) array
    extra_logits : optional (N,) array
        Added to the log path densities before normalisation (used for
        likelihood tilting).  With ``None`` these are the marginal-VF
        weights.

    Returns
    -------
    (M, N) array of weights, each row summing to 1.
    """
    return weights_from_context(path_context(pairs, t), queries, extra_logits)


def weighted_cond_vf(pairs: CoupledPairSet, weights: Array, queries: Array, t: float) -> Array:
    """Weight-averaged conditional vector field, one row per query.

    Uses the algebraic forms sum_n w_n u_n = (W Z1 - (1-s) Z) / beta_t for OT
    and W (Z1 - Z0) for F2P, so the (M, N, d) tensor is never materialised.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    kind = pairs.kind
    if isinstance(kind, OTFlow):
        denom = 1.0 - (1.0 - kind.sigma_min) * t
        return (weights @ pairs.targets - (1.0 - kind.sigma_min) * queries) / denom
    return weights @ (pairs.targets - pairs.refs)


def marginal_vf_rows(pairs: CoupledPairSet, queries: Array, t: float) -> Array:
    """Monte Carlo marginal vector field at each query row ((M, d) -> (M, d))."""
    w = path_weights(pairs, queries, t)
    return weighted_cond_vf(pairs, w, queries, t)


def marginal_vf(pairs: CoupledPairSet, z: Array, t: float) -> Array:
    """Monte Carlo marginal vector field at a single point."""
    z = np.asarray(z, dtype=np.float64)
    return marginal_vf_rows(pairs, z[None, :], t)[0]


def euler_rows(field, z_init: Array, n_steps: int, keep_path: bool = False):
    """Forward Euler on [0, 1] with uniform step 1/n_steps, batched over rows.

    ``field(t, Z)`` must return one velocity row per query row.  Raises
    :class:`IntegrationBlowup` (with the offending step index) if any state
    goes non-finite.
    """
    if n_steps < 1:
        raise ConfigurationError("integration needs at least one step")
    z = np.atleast_2d(np.asarray(z_init, dtype=np.float64)).copy()
    dt = 1.0 / n_steps
    path = [z.copy()] if keep_path else None
    for k in range(n_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            z += dt * field(k * dt, z)
        if not np.all(np.isfinite(z)):
            raise IntegrationBlowup(k)
        if keep_path:
            path.append(z.copy())
    return (z, path) if keep_path else (z, None)


def integrate_flow(field, z_init: Array, n_steps: int) -> tuple[Array, list[Array]]:
    """Integrate a time-dependent field from t=0 to t=1 for a single state.

    Returns the endpoint and the n_steps + 1 visited points.
    """
    z_init = np.asarray(z_init, dtype=np.float64)
    single = z_init.ndim == 1
    wrapped = (lambda t, Z: np.atleast_2d(field(t, Z[0]))) if single else field
    end, path = euler_rows(wrapped, z_init, n_steps, keep_path=True)
    if single:
        return end[0], [p[0] for p in path]
    return end, path
