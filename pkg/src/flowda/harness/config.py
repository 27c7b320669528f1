"""Experiment configuration: JSON schema parsing and filter construction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..core import ConfigurationError
from ..dynamics import KSConfig, Lorenz96Config, NSConfig, ObservationProtocol
from ..filters import BPF, EnFF, EnKFPO, EnSF, FilterConfig
from ..flow import F2PFlow, OTFlow
from ..guidance import LocalizedGuidance, MCGuidance

_SYSTEMS = ("lorenz96", "ks", "ns")
_FILTERS = ("enff", "ensf", "bpf", "enkf_po")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment sweep: a system, a filter family, seeds, and T values."""

    system: str
    system_params: dict
    filter_name: str
    filter_params: dict
    protocol: ObservationProtocol
    seeds: tuple[int, ...]
    T_values: tuple[int, ...]
    ensemble_size: int
    output_dir: str
    tune_seed: int

    def __post_init__(self):
        if self.system not in _SYSTEMS:
            raise ConfigurationError(f"unknown system {self.system!r}; expected one of {_SYSTEMS}")
        if self.filter_name not in _FILTERS:
            raise ConfigurationError(f"unknown filter {self.filter_name!r}; expected one of {_FILTERS}")
        if not self.seeds:
            raise ConfigurationError("at least one seed is required")
        if self.filter_name in ("enff", "ensf") and not self.T_values:
            raise ConfigurationError("T_values must be non-empty for ODE/SDE filters")
        if self.ensemble_size < 1:
            raise ConfigurationError("ensemble_size must be >= 1")
        if self.tune_seed in self.seeds:
            raise ConfigurationError("tune_seed must be disjoint from evaluation seeds")

    def system_config(self):
        params = dict(self.system_params)
        try:
            if self.system == "lorenz96":
                return Lorenz96Config(**params)
            if self.system == "ks":
                if "length_over_pi" in params:
                    params["length"] = params.pop("length_over_pi") * math.pi
                return KSConfig(**params)
            return NSConfig(**params)
        except TypeError as e:
            raise ConfigurationError(f"bad system_params for {self.system}: {e}") from e

    def filter_config(self, sampling_steps: int, overrides: dict | None = None) -> FilterConfig:
        return FilterConfig(
            algorithm=build_algorithm(self.filter_name, dict(self.filter_params, **(overrides or {}))),
            sampling_steps=max(1, sampling_steps),
            ensemble_size=self.ensemble_size,
        )

    def flow_label(self) -> str:
        return self.filter_params.get("flow", "") if self.filter_name == "enff" else ""

    def guidance_label(self) -> str:
        return self.filter_params.get("guidance", "") if self.filter_name == "enff" else ""

    def param_items(self, overrides: dict | None = None) -> tuple[tuple[str, float], ...]:
        """The (name, value) pairs that identify a grid point in reports."""
        p = dict(self.filter_params, **(overrides or {}))
        if self.filter_name == "enff":
            out = [("sigma_min", float(p.get("sigma_min", 0.0)))]
            if p.get("guidance", "localized") == "localized":
                out.append(("lambda", float(p.get("lambda", 0.0))))
            return tuple(out)
        if self.filter_name == "ensf":
            return (("eps_alpha", float(p["eps_alpha"])), ("eps_beta", float(p["eps_beta"])))
        return ()


def build_algorithm(name: str, params: dict):
    if name == "enff":
        flow_name = params.get("flow", "f2p")
        sigma_min = float(params.get("sigma_min", 1e-3))
        if flow_name == "ot":
            flow = OTFlow(sigma_min)
        elif flow_name == "f2p":
            flow = F2PFlow(sigma_min)
        else:
            raise ConfigurationError(f"unknown flow {flow_name!r}; expected 'ot' or 'f2p'")
        guidance_name = params.get("guidance", "localized")
        if guidance_name == "mc":
            guidance = MCGuidance()
        elif guidance_name == "localized":
            guidance = LocalizedGuidance(float(params.get("lambda", 0.0)))
        else:
            raise ConfigurationError(f"unknown guidance {guidance_name!r}; expected 'mc' or 'localized'")
        return EnFF(flow, guidance)
    if name == "ensf":
        try:
            return EnSF(float(params["eps_alpha"]), float(params["eps_beta"]))
        except KeyError as e:
            raise ConfigurationError(f"ensf needs eps_alpha and eps_beta: missing {e}") from e
    if name == "bpf":
        return BPF()
    return EnKFPO()


@dataclass(frozen=True)
class TuneGrid:
    """Named parameter axes whose Cartesian product is searched."""

    axes: tuple[tuple[str, tuple[float, ...]], ...]

    def points(self):
        names = [n for n, _ in self.axes]
        values = [v for _, v in self.axes]
        idx = [0] * len(values)
        while True:
            yield dict(zip(names, (vals[i] for vals, i in zip(values, idx))))
            for pos in reversed(range(len(idx))):
                idx[pos] += 1
                if idx[pos] < len(values[pos]):
                    break
                idx[pos] = 0
            else:
                return

    def size(self) -> int:
        out = 1
        for _, v in self.axes:
            out *= len(v)
        return out


def default_enff_grid() -> TuneGrid:
    sigma = tuple(10.0**-i for i in range(1, 6))
    lam = tuple(sorted({0.001, 0.005, 0.05} | {round(0.1 * i, 10) for i in range(1, 11)}))
    return TuneGrid((("sigma_min", sigma), ("lambda", lam)))


def default_ensf_grid() -> TuneGrid:
    alpha = tuple(round(0.1 * i, 10) for i in range(1, 11))
    beta = tuple(sorted({0.001, 0.005} | {round(0.025 + 0.05 * i, 10) for i in range(6)}))
    return TuneGrid((("eps_alpha", alpha), ("eps_beta", beta)))


def default_grid(filter_name: str) -> TuneGrid:
    if filter_name == "enff":
        return default_enff_grid()
    if filter_name == "ensf":
        return default_ensf_grid()
    raise ConfigurationError(f"no default tuning grid for filter {filter_name!r}")


def _require(d: dict, key: str):
    if key not in d:
        raise ConfigurationError(f"config missing required key {key!r}")
    return d[key]


def config_from_dict(raw: dict) -> ExperimentConfig:
    proto_raw = _require(raw, "protocol")
    try:
        protocol = ObservationProtocol(
            total_steps=int(_require(proto_raw, "total_steps")),
            burn_in=int(_require(proto_raw, "burn_in")),
            observe_every=int(_require(proto_raw, "observe_every")),
            obs_noise_std=float(_require(proto_raw, "obs_noise_std")),
        )
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"bad protocol: {e}") from e
    seeds = tuple(int(s) for s in _require(raw, "seeds"))
    return ExperimentConfig(
        system=_require(raw, "system"),
        system_params=dict(raw.get("system_params", {})),
        filter_name=_require(raw, "filter"),
        filter_params=dict(raw.get("filter_params", {})),
        protocol=protocol,
        seeds=seeds,
        T_values=tuple(int(t) for t in raw.get("T_values", [])),
        ensemble_size=int(_require(raw, "ensemble_size")),
        output_dir=str(raw.get("output_dir", "runs")),
        tune_seed=int(raw.get("tune_seed", (max(seeds) if seeds else 0) + 1)),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    return config_from_dict(raw)


def load_grid(path: str | Path) -> TuneGrid:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"cannot read grid {path}: {e}") from e
    axes_raw = raw.get("axes", raw) if isinstance(raw, dict) else None
    if not isinstance(axes_raw, dict) or not axes_raw:
        raise ConfigurationError("grid file must contain an 'axes' object of name -> values")
    axes = tuple((str(k), tuple(float(x) for x in v)) for k, v in axes_raw.items())
    for name, vals in axes:
        if not vals:
            raise ConfigurationError(f"grid axis {name!r} is empty")
    return TuneGrid(axes)
