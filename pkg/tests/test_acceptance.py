"""Acceptance suite: one test per criterion, run with `pytest -v -s`.

Each test prints a PASS/FAIL line with the measured quantities before
asserting, so a full run doubles as the acceptance report.  The scalar
linear-Gaussian benchmark, the Lorenz 96 desk twin, and the KS desk smoke
test mirror the benchmark protocols at desk scale.
"""

import math
import time

import numpy as np
import pytest
from scipy.optimize import minimize

from flowda.core import (
    ArctanObservation,
    Ensemble,
    LinearObservation,
    RngStream,
    TransitionModel,
    propagate,
)
from flowda.dynamics import ks as ksmod
from flowda.dynamics import lorenz96 as l96mod
from flowda.dynamics import navier_stokes as nsmod
from flowda.dynamics.truth import (
    ObservationProtocol,
    ks_driver,
    lorenz96_driver,
    make_truth_and_obs,
)
from flowda.filters import BPF, EnFF, EnKFPO, EnSF, FilterConfig, filter_step
from flowda.flow import (
    CoupledPairSet,
    F2PFlow,
    OTFlow,
    cond_vf,
    euler_rows,
    marginal_vf,
    marginal_vf_rows,
    path_weights,
)
from flowda.guidance import LocalizedGuidance, MCGuidance, mc_guided_vf_rows, target_energies
from flowda.harness.config import config_from_dict
from flowda.harness.runner import run_experiment
from flowda.harness.storage import emit_csv
from flowda.oracle import (
    GaussianBelief,
    bpf_jitter_reference,
    kalman_step,
    saturating_drift_kernel,
    straightness,
    wasserstein_1d,
)


def report(num: int, name: str, passed: bool, detail: str) -> None:
    print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {num} ({name}): {detail}")


# ---------------------------------------------------------------------------
# scalar linear-Gaussian benchmark shared by criteria 4 and 5
# ---------------------------------------------------------------------------

A_DYN, SIG_DYN, GAM_OBS = 0.9, 0.3, 0.5
N_DA_STEPS = 10
PRIOR_MEAN, PRIOR_STD = 3.0, 1.0


@pytest.fixture(scope="module")
def scalar_benchmark():
    rng = RngStream(2024)
    g = rng.child("truth").generator()
    x = np.array([PRIOR_MEAN])
    ys = []
    for _ in range(N_DA_STEPS):
        x = A_DYN * x + SIG_DYN * g.standard_normal(1)
        ys.append(x + GAM_OBS * g.standard_normal(1))
    belief = GaussianBelief(np.array([PRIOR_MEAN]), np.array([[PRIOR_STD**2]]))
    kmeans, kvars = [], []
    for y in ys:
        belief = kalman_step(belief, [[A_DYN]], [[SIG_DYN**2]], [[1.0]], [[GAM_OBS**2]], y)
        kmeans.append(belief.mean[0])
        kvars.append(belief.cov[0, 0])
    trans = TransitionModel(step=lambda x: A_DYN * x, model_noise_std=SIG_DYN)
    obs = LinearObservation(np.eye(1), GAM_OBS)
    return {"ys": ys, "kmeans": np.array(kmeans), "kvars": np.array(kvars),
            "trans": trans, "obs": obs}


def run_scalar_filter(bench, fcfg, seed, n_members):
    r = RngStream(seed)
    ens = Ensemble(PRIOR_MEAN + PRIOR_STD
                   * r.child("init").generator().standard_normal((n_members, 1)), 0)
    means, variances = [], []
    for y in bench["ys"]:
        ens = filter_step(fcfg, ens, bench["trans"], bench["obs"], y, r)
        means.append(ens.mean()[0])
        variances.append(float(ens.members.var()))
    return np.array(means), np.array(variances)


def test_c01_mc_cfm_minimizer_identity():
    t0 = time.perf_counter()
    g = np.random.default_rng(77)
    refs = g.standard_normal((16, 2))
    targets = 2.0 * g.standard_normal((16, 2)) + 1.0
    worst = 0.0
    for kind in (OTFlow(0.05), F2PFlow(0.05)):
        pairs = CoupledPairSet(refs, targets, kind)
        for _ in range(10):
            z = 2.0 * g.standard_normal(2)
            t = g.uniform(0.05, 0.95)
            w = path_weights(pairs, z[None, :], t)[0]
            us = np.stack([cond_vf(kind, z, refs[n], targets[n], t) for n in range(16)])
            objective = lambda v: float(np.sum(w * np.sum((v[None, :] - us) ** 2, axis=1)))
            res = minimize(objective, x0=g.standard_normal(2), method="BFGS",
                           options={"gtol": 1e-14})
            worst = max(worst, float(np.max(np.abs(res.x - marginal_vf(pairs, z, t)))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 5.0
    report(1, "MC-CFM minimizer identity",
           ok, f"max componentwise diff {worst:.2e} (<=1e-6), {elapsed:.1f}s (<5s)")
    assert worst <= 1e-6
    assert elapsed < 5.0


def test_c02_endpoint_concentration():
    t0 = time.perf_counter()
    g = np.random.default_rng(78)
    targets = 2.0 * g.standard_normal((8, 2))
    fractions = {}
    for label, kind in (("ot", OTFlow(1e-3)), ("f2p", F2PFlow(1e-3))):
        refs = g.standard_normal((8, 2))
        pairs = CoupledPairSet(refs, targets, kind)
        if label == "ot":
            starts = g.standard_normal((200, 2))
        else:
            starts = refs[g.integers(0, 8, 200)] + 1e-3 * g.standard_normal((200, 2))
        ends, _ = euler_rows(lambda t, Z: marginal_vf_rows(pairs, Z, t), starts, 500)
        dists = np.min(np.linalg.norm(ends[:, None, :] - targets[None, :, :], axis=2), axis=1)
        fractions[label] = float(np.mean(dists <= 1e-2))
    elapsed = time.perf_counter() - t0
    ok = all(f >= 0.99 for f in fractions.values()) and elapsed < 10.0
    report(2, "endpoint concentration",
           ok, f"fraction within 1e-2: ot {fractions['ot']:.3f}, f2p {fractions['f2p']:.3f} "
               f"(>=0.99), {elapsed:.1f}s (<10s)")
    assert fractions["ot"] >= 0.99
    assert fractions["f2p"] >= 0.99
    assert elapsed < 10.0


def test_c03_mc_guidance_matches_jittered_resampling():
    t0 = time.perf_counter()
    rng = RngStream(79)
    g = rng.child("setup").generator()
    n_pairs, n_draws, sigma_min = 32, 10_000, 1e-3
    prior = g.standard_normal((n_pairs, 1))
    obs = LinearObservation(np.eye(1), 0.7)
    y = np.array([1.2])
    pairs = CoupledPairSet(g.standard_normal((n_pairs, 1)), prior, OTFlow(sigma_min))
    energies = target_energies(pairs, obs, y)
    field = lambda t, Z: mc_guided_vf_rows(pairs, obs, y, Z, t, energies=energies)
    starts = g.standard_normal((n_draws, 1))
    ends, _ = euler_rows(field, starts, 500)
    logw = -energies
    w = np.exp(logw - logw.max())
    w /= w.sum()
    reference = bpf_jitter_reference(prior, w, sigma_min, n_draws, rng.child("ref"))
    dist = wasserstein_1d(ends, reference)
    elapsed = time.perf_counter() - t0
    ok = dist <= 0.05 and elapsed < 60.0
    report(3, "MC guidance equals jittered resampling",
           ok, f"W1 {dist:.4f} (<=0.05), {elapsed:.1f}s (<60s)")
    assert dist <= 0.05
    assert elapsed < 60.0


def test_c04_enkf_tracks_kalman(scalar_benchmark):
    t0 = time.perf_counter()
    bench = scalar_benchmark
    means, variances = run_scalar_filter(bench, FilterConfig(EnKFPO(), 1, 10_000), 7, 10_000)
    mean_err = float(np.max(np.abs(means - bench["kmeans"]) / np.abs(bench["kmeans"])))
    var_err = float(np.max(np.abs(variances - bench["kvars"]) / bench["kvars"]))
    elapsed = time.perf_counter() - t0
    ok = mean_err <= 0.05 and var_err <= 0.10 and elapsed < 30.0
    report(4, "EnKF-PO vs analytic Kalman",
           ok, f"max mean rel err {mean_err:.4f} (<=0.05), max var rel err {var_err:.4f} "
               f"(<=0.10), {elapsed:.1f}s (<30s)")
    assert mean_err <= 0.05
    assert var_err <= 0.10
    assert elapsed < 30.0


def _tune_scalar(bench, make_cfg, grid, n_members=384, seed=9):
    best = None
    kstd = np.sqrt(bench["kvars"])
    for point in grid:
        means, _ = run_scalar_filter(bench, make_cfg(point), seed, n_members)
        err = float(np.max(np.abs(means - bench["kmeans"]) / kstd))
        if best is None or err < best[1]:
            best = (point, err)
    return best[0]


def test_c05_all_filters_posterior_consistent(scalar_benchmark):
    t0 = time.perf_counter()
    bench = scalar_benchmark
    kstd = np.sqrt(bench["kvars"])
    lam_grid = [0.001, 0.005, 0.05] + [round(0.1 * i, 10) for i in range(1, 11)]
    results = {}

    means, _ = run_scalar_filter(bench, FilterConfig(BPF(), 1, 10_000), 8, 10_000)
    results["bpf"] = float(np.max(np.abs(means - bench["kmeans"]) / kstd))

    for label, flow in (("enff-ot", OTFlow(1e-3)), ("enff-f2p", F2PFlow(1e-3))):
        lam = _tune_scalar(bench,
                           lambda lam: FilterConfig(EnFF(flow, LocalizedGuidance(lam)), 5, 384),
                           lam_grid)
        means, _ = run_scalar_filter(
            bench, FilterConfig(EnFF(flow, LocalizedGuidance(lam)), 5, 10_000), 9, 10_000)
        results[label] = float(np.max(np.abs(means - bench["kmeans"]) / kstd))

    ensf_grid = [(a, b) for a in (0.2, 0.5, 0.8, 1.0)
                 for b in (0.001, 0.025, 0.175, 0.275)]
    best_ab = _tune_scalar(bench,
                           lambda ab: FilterConfig(EnSF(ab[0], ab[1]), 8, 256),
                           ensf_grid, n_members=256, seed=11)
    means, _ = run_scalar_filter(
        bench, FilterConfig(EnSF(best_ab[0], best_ab[1]), 8, 10_000), 11, 10_000)
    results["ensf"] = float(np.max(np.abs(means - bench["kmeans"]) / kstd))

    elapsed = time.perf_counter() - t0
    ok = all(v <= 3.0 for v in results.values()) and elapsed < 300.0
    detail = ", ".join(f"{k} {v:.2f}σ" for k, v in results.items())
    report(5, "posterior consistency of all filters",
           ok, f"max |mean - kalman| in posterior stds: {detail} (<=3), "
               f"{elapsed:.0f}s (<300s)")
    for label, err in results.items():
        assert err <= 3.0, f"{label} off by {err:.2f} posterior stds"
    assert elapsed < 300.0


def test_c06_f2p_trajectories_straighter():
    t0 = time.perf_counter()
    g = np.random.default_rng(80)
    z0 = g.standard_normal((200, 2))
    z1 = saturating_drift_kernel(z0)
    ratios = {}
    for label, kind, refs, starts in (
        ("f2p", F2PFlow(1e-3), z0, z0 + 1e-3 * g.standard_normal(z0.shape)),
        ("ot", OTFlow(1e-3), g.standard_normal((200, 2)), g.standard_normal((200, 2))),
    ):
        pairs = CoupledPairSet(refs, z1, kind)
        _, path = euler_rows(lambda t, Z: marginal_vf_rows(pairs, Z, t), starts, 100,
                             keep_path=True)
        traj = np.stack(path)
        ratios[label] = float(np.nanmean([straightness(traj[:, m]) for m in range(200)]))
    elapsed = time.perf_counter() - t0
    ok = ratios["f2p"] <= 1.05 and ratios["f2p"] <= ratios["ot"] and elapsed < 30.0
    report(6, "F2P trajectories straighter than OT",
           ok, f"mean arc/chord f2p {ratios['f2p']:.4f} (<=1.05), ot {ratios['ot']:.4f}, "
               f"{elapsed:.1f}s (<30s)")
    assert ratios["f2p"] <= 1.05
    assert ratios["f2p"] <= ratios["ot"]
    assert elapsed < 30.0


# ---------------------------------------------------------------------------
# Lorenz 96 desk twin experiment (criterion 7)
# ---------------------------------------------------------------------------

L96_PROTOCOL = ObservationProtocol(total_steps=1800, burn_in=1000,
                                   observe_every=10, obs_noise_std=0.05)


@pytest.fixture(scope="module")
def l96_desk():
    cfg = l96mod.Lorenz96Config(dim=100)
    obs = ArctanObservation(0.05)
    driver = lorenz96_driver(cfg)
    truth_eval = make_truth_and_obs(driver, obs, L96_PROTOCOL, RngStream(555).child("truth"))
    truth_tune = make_truth_and_obs(driver, obs, L96_PROTOCOL, RngStream(556).child("truth"))
    trans = l96mod.transition_model(cfg, 0.0, L96_PROTOCOL.observe_every)
    return {"cfg": cfg, "obs": obs, "trans": trans,
            "truth_eval": truth_eval, "truth_tune": truth_tune}


def _l96_run(env, fcfg, truth, seed):
    r = RngStream(seed)
    ens = Ensemble(r.child("ens-init").generator().standard_normal((20, 100)), 0)
    series = []
    for j, y in truth.observations:
        try:
            ens = filter_step(fcfg, ens, env["trans"], env["obs"], y, r)
        except Exception:
            return float("inf")
        series.append(float(np.sqrt(np.mean((ens.mean() - truth.states[j]) ** 2))))
    return float(np.mean(series[-50:]))


def _l96_free_run(env, truth, seed):
    r = RngStream(seed)
    ens = Ensemble(r.child("ens-init").generator().standard_normal((20, 100)), 0)
    series = []
    for j, _ in truth.observations:
        ens = propagate(env["trans"], ens, r)
        series.append(float(np.sqrt(np.mean((ens.mean() - truth.states[j]) ** 2))))
    return float(np.mean(series[-50:]))


def _coarse_tune_l96(env, make_cfg, grid):
    scored = [(point, _l96_run(env, make_cfg(point), env["truth_tune"], 901))
              for point in grid]
    return min(scored, key=lambda kv: kv[1])[0]


@pytest.fixture(scope="module")
def l96_results(l96_desk):
    env = l96_desk
    free = _l96_free_run(env, env["truth_eval"], 900)
    out = {"free_run": free}

    grid_f2p = [(sm, lam) for sm in (1e-1, 1e-2) for lam in (0.005, 0.02)]
    best = _coarse_tune_l96(
        env, lambda p: FilterConfig(EnFF(F2PFlow(p[0]), LocalizedGuidance(p[1])), 10, 20),
        grid_f2p)
    out["enff-f2p"] = _l96_run(
        env, FilterConfig(EnFF(F2PFlow(best[0]), LocalizedGuidance(best[1])), 10, 20),
        env["truth_eval"], 900)

    grid_ot = [(sm, lam) for sm in (1e-1, 1e-2) for lam in (0.02, 0.05)]
    best = _coarse_tune_l96(
        env, lambda p: FilterConfig(EnFF(OTFlow(p[0]), LocalizedGuidance(p[1])), 10, 20),
        grid_ot)
    out["enff-ot"] = _l96_run(
        env, FilterConfig(EnFF(OTFlow(best[0]), LocalizedGuidance(best[1])), 10, 20),
        env["truth_eval"], 900)

    grid_ensf = [(1.0, 0.275), (1.0, 0.175), (0.9, 0.275), (0.8, 0.275)]
    best = _coarse_tune_l96(
        env, lambda p: FilterConfig(EnSF(p[0], p[1]), 10, 20), grid_ensf)
    out["ensf"] = _l96_run(env, FilterConfig(EnSF(best[0], best[1]), 10, 20),
                           env["truth_eval"], 900)
    return out


def test_c07a_l96_enff_halves_free_run(l96_results):
    t0 = time.perf_counter()
    r = l96_results
    bar = 0.5 * r["free_run"]
    ok = r["enff-f2p"] <= bar and r["enff-ot"] <= bar
    report(7, "L96 desk: EnFF variants vs free run",
           ok, f"free run {r['free_run']:.2f}, bar {bar:.2f}; "
               f"enff-f2p {r['enff-f2p']:.2f}, enff-ot {r['enff-ot']:.2f} "
               f"(+{time.perf_counter() - t0:.0f}s)")
    assert r["enff-f2p"] <= bar
    assert r["enff-ot"] <= bar


def test_c07b_l96_enff_not_worse_than_ensf(l96_results):
    r = l96_results
    ok = r["enff-f2p"] <= r["ensf"] and r["enff-ot"] <= r["ensf"]
    report(7, "L96 desk: EnFF <= EnSF at T=10",
           ok, f"enff-f2p {r['enff-f2p']:.2f}, enff-ot {r['enff-ot']:.2f}, "
               f"ensf {r['ensf']:.2f}")
    assert r["enff-f2p"] <= r["ensf"]
    assert r["enff-ot"] <= r["ensf"]


def test_c07c_l96_ensf_halves_free_run(l96_results):
    # Known-red clause: over the full default tuning grid the
    # score-based filter at T=10 bottoms out near 2.7 on this desk setup
    # (it reaches 0.75 at T=50 and 0.53 at T=100, the expected cost-accuracy
    # profile), while 0.5x the free run requires ~1.9.
    r = l96_results
    bar = 0.5 * r["free_run"]
    ok = r["ensf"] <= bar
    report(7, "L96 desk: EnSF vs free run at T=10",
           ok, f"ensf {r['ensf']:.2f} vs bar {bar:.2f}")
    assert r["ensf"] <= bar, (
        f"EnSF at T=10 reached {r['ensf']:.2f}, above the 0.5x free-run bar "
        f"{bar:.2f}; best full-grid value is ~2.7 on this configuration"
    )


def test_c08_ks_desk_smoke():
    t0 = time.perf_counter()
    cfg = ksmod.KSConfig(grid=128, length=32 * math.pi)
    protocol = ObservationProtocol(total_steps=6000, burn_in=2000,
                                   observe_every=10, obs_noise_std=0.1)
    obs = ArctanObservation(0.1)
    truth = make_truth_and_obs(ks_driver(cfg), obs, protocol, RngStream(404).child("truth"))
    clim_std = float(truth.states.std())
    ws = ksmod.make_workspace(cfg)
    trans = ksmod.transition_model(cfg, ws, 0.0, protocol.observe_every)
    r = RngStream(31)
    ens = Ensemble(truth.states[0]
                   + r.child("ens-init").generator().standard_normal((20, 128)), 0)
    fcfg = FilterConfig(EnFF(F2PFlow(1e-2), LocalizedGuidance(0.02)), 5, 20)
    series = []
    for j, y in truth.observations:
        ens = filter_step(fcfg, ens, trans, obs, y, r)
        series.append(float(np.sqrt(np.mean((ens.mean() - truth.states[j]) ** 2))))
    summary = float(np.mean(series[-50:]))
    elapsed = time.perf_counter() - t0
    ok = summary < clim_std and elapsed < 600.0
    report(8, "KS desk smoke",
           ok, f"summary RMSE {summary:.3f} < climatological std {clim_std:.3f}, "
               f"{elapsed:.0f}s (<600s)")
    assert summary < clim_std
    assert elapsed < 600.0


def test_c09_dynamics_correctness():
    t0 = time.perf_counter()
    checks = {}

    # RK4 local order on a d=4 random state
    g = np.random.default_rng(0)
    x = 2.0 * g.standard_normal(4)
    def one(dt):
        return l96mod.lorenz96_step(l96mod.Lorenz96Config(dim=4, dt=dt), x)
    def ref(dt):
        c = l96mod.Lorenz96Config(dim=4, dt=dt / 16)
        y = x
        for _ in range(16):
            y = l96mod.lorenz96_step(c, y)
        return y
    errs = [np.linalg.norm(one(dt) - ref(dt)) for dt in (0.02, 0.01)]
    checks["rk4_ratio"] = (errs[0] / errs[1], 24 <= errs[0] / errs[1] <= 40)

    # KS zero-mode invariance over 1000 steps
    kcfg = ksmod.KSConfig(grid=128, length=32 * math.pi)
    ws = ksmod.make_workspace(kcfg)
    u = ksmod.initial_state(kcfg, ws, 150)
    m0 = u.mean()
    for _ in range(1000):
        u = ksmod.ks_step(kcfg, ws, u)
    drift = abs(u.mean() - m0) / max(1.0, abs(m0))
    checks["ks_zero_mode"] = (drift, drift <= 1e-10)

    # KS linear decay of a small high-k mode
    m = 32
    k = 2 * math.pi * m / kcfg.length
    xgrid = kcfg.length * np.arange(128) / 128
    u = 1e-5 * np.sin(k * xgrid)
    expected = abs(np.fft.rfft(u)[m]) * math.exp((k**2 - k**4) * kcfg.dt)
    u = ksmod.ks_step(kcfg, ws, u)
    rel = abs(abs(np.fft.rfft(u)[m]) - expected) / expected
    checks["ks_decay"] = (rel, rel <= 0.01)

    # NS projection divergence from rough input
    ncfg = nsmod.NSConfig(grid=64)
    nws = nsmod.make_workspace(ncfg)
    uu = g.standard_normal((64, 64))
    vv = g.standard_normal((64, 64))
    pp = np.zeros((64, 64))
    div = 0.0
    for _ in range(3):
        uu, vv, pp = nsmod.ns_step(ncfg, nws, uu, vv, pp)
        div = max(div, nsmod.max_divergence(ncfg, nws, uu, vv))
    checks["ns_divergence"] = (div, div <= 1e-10)

    # NS Taylor-Green energy decay over 500 steps
    tcfg = nsmod.NSConfig(grid=64, forcing_amplitude=0.0)
    tws = nsmod.make_workspace(tcfg)
    kap = 2 * math.pi / tcfg.length
    xs = tcfg.length * np.arange(64) / 64
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    tu = np.sin(kap * X) * np.cos(kap * Y)
    tv = -np.cos(kap * X) * np.sin(kap * Y)
    tp = np.zeros_like(tu)
    e0 = np.mean(tu**2 + tv**2)
    for _ in range(500):
        tu, tv, tp = nsmod.ns_step(tcfg, tws, tu, tv, tp)
    decay = np.mean(tu**2 + tv**2) / e0
    target = math.exp(-2 * tcfg.viscosity * kap**2 * 2 * 500 * tcfg.dt)
    rel = abs(decay - target) / target
    checks["ns_taylor_green"] = (rel, rel <= 0.02)

    elapsed = time.perf_counter() - t0
    ok = all(passed for _, passed in checks.values()) and elapsed < 120.0
    detail = ", ".join(f"{k}={v:.3g}:{'ok' if p else 'BAD'}"
                       for k, (v, p) in checks.items())
    report(9, "dynamics correctness", ok, f"{detail}, {elapsed:.0f}s (<120s)")
    for name, (value, passed) in checks.items():
        assert passed, f"{name} measured {value}"
    assert elapsed < 120.0


def test_c10_replay_determinism(tmp_path):
    t0 = time.perf_counter()
    raw = {
        "system": "lorenz96",
        "system_params": {"dim": 8},
        "filter": "enff",
        "filter_params": {"flow": "f2p", "guidance": "localized",
                          "sigma_min": 0.01, "lambda": 0.01},
        "protocol": {"total_steps": 80, "burn_in": 30, "observe_every": 10,
                     "obs_noise_std": 0.05},
        "seeds": [1, 2],
        "T_values": [4, 8],
        "ensemble_size": 6,
        "output_dir": str(tmp_path / "out"),
    }
    cfg = config_from_dict(raw)
    frozen_clock = lambda: 0.0
    runs = {}
    for workers in (1, 3):
        records = run_experiment(cfg, workers=workers, timer=frozen_clock)
        runs[workers] = emit_csv(records, tmp_path / f"w{workers}.csv").read_bytes()
    byte_identical = runs[1] == runs[3]

    # with the real clock everything except the timing column must agree
    def strip_wall(blob):
        return [line.rsplit(",", 1)[0] for line in blob.decode().splitlines()]
    real_a = emit_csv(run_experiment(cfg, workers=2), tmp_path / "ra.csv").read_bytes()
    real_b = emit_csv(run_experiment(cfg, workers=1), tmp_path / "rb.csv").read_bytes()
    real_identical = strip_wall(real_a) == strip_wall(real_b)

    elapsed = time.perf_counter() - t0
    ok = byte_identical and real_identical
    report(10, "replay determinism",
           ok, f"byte-identical under worker counts: {byte_identical}; "
               f"real-clock rows identical outside timing column: {real_identical} "
               f"({elapsed:.0f}s)")
    assert byte_identical
    assert real_identical
