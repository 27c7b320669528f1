"""Twin-experiment orchestration: truth caching, filter runs, RMSE records,
grid-search tuning, and the embarrassingly parallel (seed, T) job pool.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import (
    ArctanObservation,
    BlowupError,
    ConfigurationError,
    Ensemble,
    RngStream,
    propagate,
)
from ..dynamics import ks, lorenz96, navier_stokes
from ..dynamics.truth import (
    ObservationProtocol,
    SystemDriver,
    TruthBundle,
    ks_driver,
    lorenz96_driver,
    make_truth_and_obs,
    ns_driver,
)
from ..filters import FilterConfig, filter_step
from .config import ExperimentConfig, TuneGrid
from .storage import ensure_truth, stable_hash, truth_cache_path

logger = logging.getLogger(__name__)

SUMMARY_WINDOW = 50  # assimilation steps averaged into the summary RMSE


class TuningFailure(RuntimeError):
    """Every grid point diverged; nothing to select."""


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one (config, seed, T) filter run."""

    system: str
    filter_name: str
    flow: str
    guidance: str
    sampling_steps: int
    ensemble_size: int
    seed: int
    params: tuple
    rmse_series: tuple
    summary_rmse: float
    diverged: bool
    wall_ms_per_step: float
    config_hash: str


def rmse(ensemble: Ensemble, truth: np.ndarray) -> float:
    """Root mean squared error between the ensemble mean and the truth state."""
    truth = np.asarray(truth, dtype=np.float64)
    if truth.shape != (ensemble.dim,):
        raise ConfigurationError(f"truth shape {truth.shape} does not match dim {ensemble.dim}")
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.sqrt(np.mean((ensemble.mean() - truth) ** 2)))


def summarize(series) -> float:
    """Mean of the final min(SUMMARY_WINDOW, len) per-step RMSEs."""
    series = list(series)
    if not series:
        return float("inf")
    tail = series[-SUMMARY_WINDOW:]
    return float(np.mean(tail))


def _system_pieces(cfg: ExperimentConfig):
    sys_cfg = cfg.system_config()
    if cfg.system == "lorenz96":
        driver = lorenz96_driver(sys_cfg)
        trans = lorenz96.transition_model(
            sys_cfg, cfg.system_params.get("model_noise_std", 0.0), cfg.protocol.observe_every)
    elif cfg.system == "ks":
        driver = ks_driver(sys_cfg)
        ws = ks.make_workspace(sys_cfg)
        trans = ks.transition_model(
            sys_cfg, ws, cfg.system_params.get("model_noise_std", 0.0), cfg.protocol.observe_every)
    else:
        driver = ns_driver(sys_cfg)
        ws = navier_stokes.make_workspace(sys_cfg)
        trans = navier_stokes.transition_model(
            sys_cfg, ws, cfg.system_params.get("model_noise_std", 0.0), cfg.protocol.observe_every)
    return driver, trans


def _protocol_key(cfg: ExperimentConfig) -> str:
    p = cfg.protocol
    return stable_hash({
        "system": cfg.system,
        "system_params": {k: v for k, v in sorted(cfg.system_params.items())
                          if k != "model_noise_std"},
        "protocol": [p.total_steps, p.burn_in, p.observe_every, p.obs_noise_std],
    })


def get_truth(cfg: ExperimentConfig, seed: int, cache_dir: str | Path | None = None) -> TruthBundle:
    """Truth/observations for one seed; cached on disk, filter-independent.

    The truth stream is keyed only by (system, protocol, seed), so every
    filter sees byte-identical truths for a given seed.
    """
    driver, _ = _system_pieces(cfg)
    obs_model = ArctanObservation(cfg.protocol.obs_noise_std)
    make = lambda: make_truth_and_obs(driver, obs_model, cfg.protocol,
                                      RngStream(seed).child("truth"))
    if cache_dir is None:
        cache_dir = Path(cfg.output_dir) / "truth_cache"
    path = truth_cache_path(cache_dir, cfg.system, _protocol_key(cfg), seed)
    return ensure_truth(path, make)


def initial_ensemble(cfg: ExperimentConfig, truth: TruthBundle, seed: int) -> Ensemble:
    """N members around the system's conventional starting point.

    Lorenz 96 ensembles start cold from N(0, I); KS/NS start from unit
    perturbations of the assimilation-window initial state.
    """
    g = RngStream(seed).child("ens-init").generator()
    d = truth.states.shape[1]
    noise = g.standard_normal((cfg.ensemble_size, d))
    if cfg.system == "lorenz96":
        return Ensemble(noise, 0)
    return Ensemble(truth.states[0] + noise, 0)


def run_assimilation(fcfg: FilterConfig, init: Ensemble, trans, obs_model,
                     truth: TruthBundle, seed: int, timer=time.perf_counter):
    """Run one filter across a truth bundle; returns (rmse series, diverged, ms/step)."""
    rng = RngStream(seed)
    ens = init
    series = []
    t0 = timer()
    diverged = False
    for j, y in truth.observations:
        try:
            ens = filter_step(fcfg, ens, trans, obs_model, y, rng)
        except BlowupError as e:
            logger.warning("run diverged (seed %d): %s", seed, e)
            diverged = True
            break
        series.append(rmse(ens, truth.states[j]))
    n_steps = max(1, len(series) + (1 if diverged else 0))
    wall_ms = (timer() - t0) * 1000.0 / n_steps
    return series, diverged, wall_ms


def free_run_rmse(cfg: ExperimentConfig, truth: TruthBundle, seed: int) -> float:
    """Summary RMSE of the unassimilated ensemble forecast (the baseline)."""
    _, trans = _system_pieces(cfg)
    ens = initial_ensemble(cfg, truth, seed)
    rng = RngStream(seed)
    series = []
    for j, _ in truth.observations:
        ens = propagate(trans, ens, rng)
        series.append(rmse(ens, truth.states[j]))
    return summarize(series)


def _one_record(cfg: ExperimentConfig, seed: int, T: int, overrides: dict | None,
                truth: TruthBundle, trans, timer) -> RunRecord:
    obs_model = ArctanObservation(cfg.protocol.obs_noise_std)
    fcfg = cfg.filter_config(T, overrides)
    init = initial_ensemble(cfg, truth, seed)
    series, diverged, wall_ms = run_assimilation(fcfg, init, trans, obs_model,
                                                 truth, seed, timer=timer)
    summary = float("inf") if diverged else summarize(series)
    return RunRecord(
        system=cfg.system,
        filter_name=cfg.filter_name,
        flow=cfg.flow_label(),
        guidance=cfg.guidance_label(),
        sampling_steps=T,
        ensemble_size=cfg.ensemble_size,
        seed=seed,
        params=cfg.param_items(overrides),
        rmse_series=tuple(series),
        summary_rmse=summary,
        diverged=diverged,
        wall_ms_per_step=wall_ms,
        config_hash=stable_hash({
            "system": cfg.system, "system_params": sorted(cfg.system_params.items()),
            "filter": cfg.filter_name, "filter_params": sorted(cfg.filter_params.items()),
            "protocol": [cfg.protocol.total_steps, cfg.protocol.burn_in,
                         cfg.protocol.observe_every, cfg.protocol.obs_noise_std],
            "ensemble_size": cfg.ensemble_size,
        }),
    )


def _effective_T_values(cfg: ExperimentConfig) -> tuple[int, ...]:
    if cfg.filter_name in ("bpf", "enkf_po"):
        return cfg.T_values or (0,)
    return cfg.T_values


def run_experiment(cfg: ExperimentConfig, workers: int = 1,
                   timer=time.perf_counter) -> list[RunRecord]:
    """Run the (seed x T) sweep; divergences are recorded, not fatal.

    Results are keyed by job, so the output order (and the emitted CSV) is
    independent of the worker count.  ``timer`` exists so replay tests can
    pin the wall-clock column.
    """
    _, trans = _system_pieces(cfg)
    truths = {seed: get_truth(cfg, seed) for seed in cfg.seeds}
    jobs = [(seed, T) for seed in cfg.seeds for T in _effective_T_values(cfg)]

    def do(job):
        seed, T = job
        return _one_record(cfg, seed, T, None, truths[seed], trans, timer)

    if workers <= 1:
        results = [do(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(do, jobs))
    return results


def tune(cfg: ExperimentConfig, grid: TuneGrid, workers: int = 1,
         timer=time.perf_counter):
    """Grid search on the dedicated tuning trajectory.

    Every grid point is evaluated per T on the tune-seed trajectory; the
    argmin of summary RMSE wins, with ties broken by the lexicographically
    smallest parameter tuple.  Returns ({T: best point dict}, all records).
    """
    if cfg.filter_name not in ("enff", "ensf"):
        raise ConfigurationError(f"filter {cfg.filter_name!r} has nothing to tune")
    _, trans = _system_pieces(cfg)
    truth = get_truth(cfg, cfg.tune_seed)
    points = list(grid.points())
    jobs = [(T, p) for T in cfg.T_values for p in points]

    def do(job):
        T, point = job
        return _one_record(cfg, cfg.tune_seed, T, point, truth, trans, timer)

    if workers <= 1:
        records = [do(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(do, jobs))

    best: dict[int, dict] = {}
    for T in cfg.T_values:
        candidates = [(r, p) for (rT, p), r in zip(jobs, records) if rT == T]
        ranked = sorted(candidates,
                        key=lambda rp: (rp[0].summary_rmse, tuple(sorted(rp[1].items()))))
        if not np.isfinite(ranked[0][0].summary_rmse):
            raise TuningFailure(
                f"all {len(candidates)} grid points diverged at T={T}: axes {grid.axes}")
        best[T] = dict(ranked[0][1])
    return best, records
