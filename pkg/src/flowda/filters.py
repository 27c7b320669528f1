"""Sequential ensemble filters: flow-matching (EnFF), score-based (EnSF),
bootstrap particle filter, and EnKF with perturbed observations.

Every filter exposes the same step contract: (analysis ensemble at j-1,
observation y_j) -> analysis ensemble at j.  Steps are pure functions of
their inputs plus an explicit RngStream, so runs are bit-reproducible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import (
    Array,
    BlowupError,
    ConfigurationError,
    Ensemble,
    IntegrationBlowup,
    ObservationModel,
    RngStream,
    TransitionModel,
    energy_and_grad_rows,
    energy_rows,
    propagate,
)
from .flow import CoupledPairSet, F2PFlow, FlowKind, OTFlow, euler_rows, path_context
from .guidance import GuidanceKind, guided_vf_rows, target_energies

logger = logging.getLogger(__name__)

# largest (query rows x pairs) weight matrix materialised at once
_WEIGHT_BUDGET = 4_000_000


class FilterDivergence(BlowupError):
    """A filter produced a non-finite ensemble; the run cannot continue."""

    def __init__(self, da_step: int, member: int, inner_step: int, algorithm: str):
        self.da_step = da_step
        self.member = member
        self.inner_step = inner_step
        super().__init__(
            f"{algorithm} diverged at DA step {da_step}, member {member}, "
            f"integration step {inner_step}"
        )


@dataclass(frozen=True)
class EnFF:
    """Flow-matching filter: flow kind plus guidance kind."""

    flow: FlowKind
    guidance: GuidanceKind


@dataclass(frozen=True)
class EnSF:
    """Score-based baseline with schedule parameters in (0, 1)."""

    eps_alpha: float
    eps_beta: float

    def __post_init__(self):
        if not (0.0 < self.eps_alpha <= 1.0 and 0.0 < self.eps_beta <= 1.0):
            raise ConfigurationError("EnSF schedule parameters must lie in (0, 1]")


@dataclass(frozen=True)
class BPF:
    """Bootstrap particle filter (no hyperparameters)."""


@dataclass(frozen=True)
class EnKFPO:
    """Ensemble Kalman filter with perturbed observations."""


Algorithm = EnFF | EnSF | BPF | EnKFPO


@dataclass(frozen=True)
class FilterConfig:
    algorithm: Algorithm
    sampling_steps: int = 1   # ODE/SDE steps per analysis; ignored by BPF/EnKF
    ensemble_size: int = 1

    def __post_init__(self):
        if self.ensemble_size < 1:
            raise ConfigurationError("ensemble_size must be >= 1")
        if isinstance(self.algorithm, (EnFF, EnSF)) and self.sampling_steps < 1:
            raise ConfigurationError("sampling_steps must be >= 1 for ODE/SDE filters")
        if isinstance(self.algorithm, EnKFPO) and self.ensemble_size < 2:
            raise ConfigurationError("EnKF needs at least 2 members for sample covariances")


def _row_blocks(n_rows: int, n_pairs: int):
    block = max(1, _WEIGHT_BUDGET // max(1, n_pairs))
    for lo in range(0, n_rows, block):
        yield lo, min(lo + block, n_rows)


def enff_step(cfg: FilterConfig, prev: Ensemble, trans: TransitionModel,
              obs: ObservationModel, y: Array, rng: RngStream) -> Ensemble:
    """One flow-matching analysis: propagate, couple, integrate the guided flow.

    OT pairs the propagated targets with fresh standard-normal references,
    which double as the integration start points.  F2P pairs each previous
    member with its own propagated target and starts from the jittered
    previous member, realising the member-index coupling.
    """
    algo = cfg.algorithm
    j = prev.step_index + 1
    predicted = propagate(trans, prev, rng)
    kind = algo.flow
    if isinstance(kind, OTFlow):
        refs = rng.child(j, "flow-refs").generator().standard_normal(prev.members.shape)
        z_init = refs
    else:
        refs = prev.members
        z_init = refs
        if kind.sigma_min > 0:
            eps = rng.child(j, "flow-init").generator().standard_normal(refs.shape)
            z_init = refs + kind.sigma_min * eps
    pairs = CoupledPairSet(refs, predicted.members, kind)
    energies = target_energies(pairs, obs, y)

    def field(t, Z):
        ctx = path_context(pairs, t)
        out = np.empty_like(Z)
        for lo, hi in _row_blocks(Z.shape[0], pairs.n_pairs):
            out[lo:hi] = guided_vf_rows(pairs, obs, y, algo.guidance, Z[lo:hi], t,
                                        energies=energies, ctx=ctx)
        return out

    try:
        endpoints, _ = euler_rows(field, z_init, cfg.sampling_steps)
    except IntegrationBlowup as e:
        raise FilterDivergence(j, getattr(e, "member", -1), e.euler_step, "EnFF") from e
    bad = ~np.all(np.isfinite(endpoints), axis=1)
    if bad.any():
        raise FilterDivergence(j, int(np.flatnonzero(bad)[0]), cfg.sampling_steps, "EnFF")
    return Ensemble(endpoints, j)


def _mixture_score(z: Array, means: Array, var: float) -> Array:
    """Score of (1/N) sum_n N(mean_n, var I) at each row of z, log-sum-exp stabilised."""
    out = np.empty_like(z)
    col = -0.5 * np.sum(means**2, axis=1) / var  # query-constant term cancels
    for lo, hi in _row_blocks(z.shape[0], means.shape[0]):
        zz = z[lo:hi]
        logits = zz @ means.T
        logits *= 1.0 / var
        logits += col[None, :]
        logits -= logits.max(axis=1, keepdims=True)
        np.exp(logits, out=logits)
        logits /= logits.sum(axis=1, keepdims=True)
        out[lo:hi] = (logits @ means - zz) / var
    return out


def ensf_step(cfg: FilterConfig, prev: Ensemble, trans: TransitionModel,
              obs: ObservationModel, y: Array, rng: RngStream,
              guidance_damping=None) -> Ensemble:
    """One score-based analysis via a guided reverse-time SDE.

    The sampler runs in flow time t: 0 (noise) -> 1 (data) with the schedule
    a_t = eps_alpha + (1-eps_alpha) t and b_t^2 = 1 - (1-eps_beta) t.  Drift
    and diffusion are those of the reverse of the linear forward process
    matching that schedule; the score is the Monte Carlo mixture score over
    the propagated targets.  ``guidance_damping`` overrides the default ramp
    c = t (zero at the noise end, one at the data end); tests use it to
    switch guidance off.
    """
    algo = cfg.algorithm
    j = prev.step_index + 1
    predicted = propagate(trans, prev, rng)
    targets = predicted.members
    n, d = targets.shape
    alpha, beta = algo.eps_alpha, algo.eps_beta
    n_steps = cfg.sampling_steps
    dt = 1.0 / n_steps
    if guidance_damping is None:
        guidance_damping = lambda t: t

    z = rng.child(j, "sde-init").generator().standard_normal((n, d))
    for k in range(n_steps):
        t = k * dt
        tau = 1.0 - t
        a_bar = 1.0 - (1.0 - alpha) * tau
        b2_bar = beta + (1.0 - beta) * tau
        f_coef = -(1.0 - alpha) / a_bar
        g2 = (1.0 - beta) - 2.0 * f_coef * b2_bar
        with np.errstate(over="ignore", invalid="ignore"):
            score = _mixture_score(z, a_bar * targets, b2_bar)
            c = guidance_damping(t)
            if c != 0.0:
                _, grad = energy_and_grad_rows(obs, z, y)
                score = score - c * grad
            noise = rng.child(j, "sde-noise", k).generator().standard_normal((n, d))
            z = z - dt * f_coef * z + dt * g2 * score + np.sqrt(g2 * dt) * noise
        bad = ~np.all(np.isfinite(z), axis=1)
        if bad.any():
            raise FilterDivergence(j, int(np.flatnonzero(bad)[0]), k, "EnSF")
    return Ensemble(z, j)


def systematic_resample(weights: Array, u: float) -> Array:
    """Systematic resampling indices from one uniform draw u in [0, 1)."""
    n = weights.shape[0]
    positions = (np.arange(n) + u) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0  # guard against rounding
    return np.minimum(np.searchsorted(cum, positions, side="left"), n - 1)


def effective_sample_size(weights: Array) -> float:
    return float(1.0 / np.sum(np.asarray(weights) ** 2))


def bpf_step(prev: Ensemble, trans: TransitionModel, obs: ObservationModel,
             y: Array, rng: RngStream) -> Ensemble:
    """Bootstrap step: propagate, likelihood-weight in log space, resample."""
    j = prev.step_index + 1
    predicted = propagate(trans, prev, rng)
    logw = -energy_rows(obs, predicted.members, y)
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    logger.debug("bpf step %d: effective sample size %.1f of %d",
                 j, effective_sample_size(w), w.size)
    u = float(rng.child(j, "resample").generator().random())
    idx = systematic_resample(w, u)
    return Ensemble(predicted.members[idx].copy(), j)


@dataclass(frozen=True)
class EnKFState:
    """Sample covariances and the gain solving K Cyy = Cxy."""

    gain: Array       # (d, d_y)
    cross_cov: Array  # (d, d_y)
    obs_cov: Array    # (d_y, d_y)


def enkf_state(states: Array, obs_preds: Array, reg_floor: float = 0.0) -> EnKFState:
    """Covariances (1/N normalisation) and gain from predicted states/observations.

    A singular obs covariance means the ensemble collapsed; it is floored by
    ``reg_floor`` on the diagonal with a warning rather than aborting.
    """
    n = states.shape[0]
    dx = states - states.mean(axis=0)
    dy = obs_preds - obs_preds.mean(axis=0)
    cxy = dx.T @ dy / n
    cyy = dy.T @ dy / n
    try:
        gain = scipy.linalg.solve(cyy, cxy.T, assume_a="sym").T
        if not np.all(np.isfinite(gain)):
            raise np.linalg.LinAlgError("non-finite gain")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        logger.warning("singular obs covariance (collapsed ensemble); "
                       "regularising with floor %.3g", reg_floor)
        cyy = cyy + reg_floor * np.eye(cyy.shape[0])
        gain = scipy.linalg.solve(cyy, cxy.T, assume_a="sym").T
    return EnKFState(gain, cxy, cyy)


def enkf_po_step(prev: Ensemble, trans: TransitionModel, obs: ObservationModel,
                 y: Array, rng: RngStream) -> Ensemble:
    """Perturbed-observation EnKF analysis with per-member gain update."""
    if prev.n_members < 2:
        raise ConfigurationError("EnKF needs at least 2 members")
    j = prev.step_index + 1
    predicted = propagate(trans, prev, rng)
    hx = obs.apply(predicted.members)
    eta = rng.child(j, "obs-perturb").generator().standard_normal(hx.shape)
    y_pred = hx + obs.obs_noise_std * eta
    state = enkf_state(predicted.members, y_pred, reg_floor=obs.obs_noise_std**2)
    updated = predicted.members + (y - y_pred) @ state.gain.T
    if not np.all(np.isfinite(updated)):
        raise FilterDivergence(j, int(np.flatnonzero(~np.all(np.isfinite(updated), axis=1))[0]),
                               0, "EnKF-PO")
    return Ensemble(updated, j)


def filter_step(cfg: FilterConfig, prev: Ensemble, trans: TransitionModel,
                obs: ObservationModel, y: Array, rng: RngStream) -> Ensemble:
    algo = cfg.algorithm
    if isinstance(algo, EnFF):
        return enff_step(cfg, prev, trans, obs, y, rng)
    if isinstance(algo, EnSF):
        return ensf_step(cfg, prev, trans, obs, y, rng)
    if isinstance(algo, BPF):
        return bpf_step(prev, trans, obs, y, rng)
    if isinstance(algo, EnKFPO):
        return enkf_po_step(prev, trans, obs, y, rng)
    raise ConfigurationError(f"unknown algorithm {algo!r}")


def run_filter(cfg: FilterConfig, init: Ensemble, trans: TransitionModel,
               obs_model: ObservationModel, observations, rng: RngStream,
               n_steps: int | None = None) -> list[Ensemble]:
    """Run a filter over a DA trajectory.

    ``observations`` is a sequence of (step, observation) with strictly
    increasing steps >= 1.  Steps without an observation are pure forecasts
    (analysis = prediction).  Returns the analysis ensemble at every DA step
    1..n_steps (default: the last observed step).
    """
    obs_list = list(observations)
    steps = [int(j) for j, _ in obs_list]
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise ConfigurationError("observation steps must be strictly increasing")
    if steps and steps[0] < 1:
        raise ConfigurationError("observation steps start at 1")
    if n_steps is None:
        n_steps = steps[-1] if steps else 0
    by_step = {int(j): np.asarray(y, dtype=np.float64) for j, y in obs_list}
    out: list[Ensemble] = []
    ens = init
    for j in range(init.step_index + 1, init.step_index + n_steps + 1):
        if j in by_step:
            ens = filter_step(cfg, ens, trans, obs_model, by_step[j], rng)
        else:
            ens = propagate(trans, ens, rng)
        out.append(ens)
    return out
