"""Experiment configuration: YAML schema, validation and derived objects.

One config file describes the model (single- or two-phase), grid, prior,
wells, measurement schedule and noise, the MCMC budget, the approximation
methods to run, and the forecast scenario.  Shipped presets live in
dabench/presets/.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from ..gaussian import LMOptions
from ..grids import Grid2D, constant_field
from ..prior import GaussianPrior
from ..schedule import PiecewiseSchedule, constant_schedule
from ..singlephase import (
    MeasurementSchedule,
    SinglePhaseConfig,
    WellLocation,
    WellSpec,
)
from ..twophase import InjectorSpec, ProducerSpec, RelPermModel, TwoPhaseConfig

YEAR_DAYS = 365.0


def _schedule_from(node, default=None) -> PiecewiseSchedule:
    if node is None:
        if default is None:
            raise ValueError("well needs a rate/bhp or schedule entry")
        return constant_schedule(float(default))
    if isinstance(node, (int, float)):
        return constant_schedule(float(node))
    return PiecewiseSchedule(tuple((float(t), float(v)) for t, v in node))


@dataclass(frozen=True)
class MethodSpec:
    name: str                     # map | lmap | rml | enkf | ensrf
    ensemble_size: int = 50
    localization_length: float | None = None
    lm: LMOptions = field(default_factory=LMOptions)
    label_override: str | None = None

    def __post_init__(self):
        if self.name not in ("map", "lmap", "rml", "enkf", "ensrf"):
            raise ValueError(f"unknown method {self.name!r}")
        if self.ensemble_size < 1:
            raise ValueError("ensemble size must be positive")
        if self.localization_length is not None and not self.localization_length > 0:
            raise ValueError("localization length must be positive")

    @property
    def label(self) -> str:
        if self.label_override:
            return self.label_override
        return self.name + ("_loc" if self.localization_length else "")


@dataclass(frozen=True)
class McmcSettings:
    chains: int = 8
    steps: int = 50_000
    burn_in: int = 10_000
    thin: int = 10
    beta: float = 0.05
    trace_modes: int = 16
    psrf_checkpoints: int = 20

    def __post_init__(self):
        if self.chains < 2:
            raise ValueError("need at least two chains for convergence diagnostics")
        if not self.steps > self.burn_in >= 0:
            raise ValueError("need steps > burn_in >= 0")
        if self.thin < 1 or self.trace_modes < 1:
            raise ValueError("thin and trace_modes must be positive")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")


@dataclass(frozen=True)
class ForecastSettings:
    extension_days: float
    new_wells: tuple = ()           # single-phase WellSpec / two-phase ProducerSpec
    well_overrides: dict = field(default_factory=dict)  # name -> schedule
    report_wells: tuple[str, ...] = ()
    max_samples: int = 100
    histogram_bins: int = 20

    def __post_init__(self):
        if not self.extension_days > 0:
            raise ValueError("forecast extension must be positive")
        if self.max_samples < 1:
            raise ValueError("need at least one forecast sample")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    model: str                    # single_phase | two_phase
    seed: int
    grid: Grid2D
    prior_mean_log: float
    prior_kappa: float
    prior_alpha: float
    single_phase: SinglePhaseConfig | None
    two_phase: TwoPhaseConfig | None
    measurement_times_days: tuple[float, ...]
    observed_wells: tuple[str, ...]       # single-phase observed well names
    noise_std: dict                        # see parsing
    mcmc: McmcSettings
    methods: tuple[MethodSpec, ...]
    forecast: ForecastSettings | None
    raw: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if self.model not in ("single_phase", "two_phase"):
            raise ValueError(f"unknown model kind {self.model!r}")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate method labels: {labels}")

    def build_prior(self) -> GaussianPrior:
        return GaussianPrior(constant_field(self.grid, self.prior_mean_log),
                             kappa=self.prior_kappa, alpha=self.prior_alpha)

    def measurement_schedule(self) -> MeasurementSchedule:
        if self.model != "single_phase":
            raise ValueError("measurement_schedule applies to the single-phase model")
        by_name = {w.name: w for w in self.single_phase.wells}
        wells = tuple(WellLocation(n, by_name[n].x, by_name[n].y)
                      for n in self.observed_wells)
        return MeasurementSchedule(times_days=self.measurement_times_days, wells=wells)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, default=str)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def method_by_label(self, label: str) -> tuple[int, MethodSpec]:
        for i, m in enumerate(self.methods):
            if m.label == label:
                return i, m
        raise KeyError(f"no method labelled {label!r}; have "
                       f"{[m.label for m in self.methods]}")


def _parse_single_phase(node, horizon_days) -> SinglePhaseConfig:
    wells = tuple(
        WellSpec(w["name"], float(w["x"]), float(w["y"]),
                 _schedule_from(w.get("schedule"), w.get("rate")))
        for w in node["wells"])
    names = [w.name for w in wells]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate well names: {names}")
    return SinglePhaseConfig(
        compressibility=float(node["compressibility"]),
        porosity=float(node["porosity"]),
        initial_pressure=float(node["initial_pressure"]),
        horizon_days=horizon_days,
        dt_days=float(node["dt_days"]),
        wells=wells,
    )


def _parse_two_phase(node, horizon_days, snap_times) -> TwoPhaseConfig:
    rp = node["relperm"]
    relperm = RelPermModel(a_w=float(rp["a_w"]), a_o=float(rp["a_o"]),
                           s_iw=float(rp["s_iw"]), s_or=float(rp["s_or"]),
                           mu_w=float(rp["mu_w"]), mu_o=float(rp["mu_o"]))
    injectors = tuple(
        InjectorSpec(w["name"], float(w["x"]), float(w["y"]),
                     _schedule_from(w.get("schedule"), w.get("rate")),
                     well_index=float(w["well_index"]) if "well_index" in w else None)
        for w in node["injectors"])
    producers = tuple(
        ProducerSpec(w["name"], float(w["x"]), float(w["y"]),
                     _schedule_from(w.get("bhp_schedule"), w.get("bhp")),
                     well_index=float(w["well_index"]) if "well_index" in w else None,
                     start_day=float(w.get("start_day", 0.0)))
        for w in node["producers"])
    names = [w.name for w in injectors + producers]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate well names: {names}")
    return TwoPhaseConfig(
        porosity=float(node["porosity"]),
        initial_pressure=float(node["initial_pressure"]),
        initial_saturation=float(node["initial_saturation"]),
        horizon_days=horizon_days,
        injectors=injectors,
        producers=producers,
        relperm=relperm,
        pressure_dt_days=float(node["pressure_dt_days"]),
        cfl_target=float(node.get("cfl_target", 0.5)),
        well_radius=float(node.get("well_radius", 0.1)),
        snap_times_days=tuple(snap_times),
    )


def _horizon_days(node) -> float:
    if "horizon_days" in node:
        return float(node["horizon_days"])
    if "horizon_years" in node:
        return float(node["horizon_years"]) * YEAR_DAYS
    raise ValueError("model section needs horizon_days or horizon_years")


def _measurement_times(node) -> tuple[float, ...]:
    if "times_days" in node:
        return tuple(float(t) for t in node["times_days"])
    if "times_years" in node:
        return tuple(float(t) * YEAR_DAYS for t in node["times_years"])
    raise ValueError("measurement section needs times_days or times_years")


def _parse_lm(node) -> LMOptions:
    if node is None:
        return LMOptions()
    return LMOptions(**{k: v for k, v in node.items()})


def _parse_forecast(node, model) -> ForecastSettings | None:
    if node is None:
        return None
    if "extension_days" in node:
        ext = float(node["extension_days"])
    elif "extension_years" in node:
        ext = float(node["extension_years"]) * YEAR_DAYS
    else:
        raise ValueError("forecast section needs extension_days or extension_years")
    new_wells = []
    for w in node.get("new_wells", ()):
        if model == "single_phase":
            new_wells.append(WellSpec(w["name"], float(w["x"]), float(w["y"]),
                                      _schedule_from(w.get("schedule"), w.get("rate"))))
        else:
            new_wells.append(ProducerSpec(
                w["name"], float(w["x"]), float(w["y"]),
                _schedule_from(w.get("bhp_schedule"), w.get("bhp")),
                well_index=float(w["well_index"]) if "well_index" in w else None,
                start_day=float(w["start_day"])))
    overrides = {name: _schedule_from(seg)
                 for name, seg in node.get("well_overrides", {}).items()}
    return ForecastSettings(
        extension_days=ext,
        new_wells=tuple(new_wells),
        well_overrides=overrides,
        report_wells=tuple(node.get("report_wells", ())),
        max_samples=int(node.get("max_samples", 100)),
        histogram_bins=int(node.get("histogram_bins", 20)),
    )


def parse_config(raw: dict) -> ExperimentConfig:
    model = raw["model"]
    grid_node = raw["grid"]
    grid = Grid2D(int(grid_node["nx"]), int(grid_node["ny"]),
                  float(grid_node["length"]))
    prior = raw["prior"]
    meas = raw["measurement"]
    times = _measurement_times(meas)
    default_lm = _parse_lm(raw.get("lm"))

    single = two = None
    observed: tuple[str, ...] = ()
    if model == "single_phase":
        node = raw["single_phase"]
        single = _parse_single_phase(node, _horizon_days(node))
        observed = tuple(meas.get("wells") or (w.name for w in single.wells))
        known = {w.name for w in single.wells}
        missing = [n for n in observed if n not in known]
        if missing:
            raise ValueError(f"observed wells not configured: {missing}")
        noise = {"pressure_std": float(meas["noise_std"])}
    elif model == "two_phase":
        node = raw["two_phase"]
        two = _parse_two_phase(node, _horizon_days(node), times)
        observed = tuple(w.name for w in two.injectors + two.producers)
        nn = meas["noise"]
        prod_node = nn.get("producer_rate_std", {})
        if isinstance(prod_node, (int, float)):
            prod_node = {"default": float(prod_node)}
        noise = {
            "injector_bhp_std": float(nn["injector_bhp_std"]),
            "producer_rate_std": {k: float(v) for k, v in prod_node.items()},
        }
        if "default" not in noise["producer_rate_std"]:
            unnamed = [w.name for w in two.producers
                       if w.name not in noise["producer_rate_std"]]
            if unnamed:
                raise ValueError(f"producers without a noise level: {unnamed}")
    else:
        raise ValueError(f"unknown model kind {model!r}")

    methods = []
    for m in raw.get("methods", ()):
        lm = _parse_lm(m.get("lm")) if "lm" in m else default_lm
        methods.append(MethodSpec(
            name=m["name"],
            ensemble_size=int(m.get("ensemble_size", 50)),
            localization_length=(float(m["localization_length"])
                                 if "localization_length" in m else None),
            lm=lm,
            label_override=m.get("label"),
        ))

    return ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        model=model,
        seed=int(raw["seed"]),
        grid=grid,
        prior_mean_log=float(prior["mean_log"]),
        prior_kappa=float(prior["kappa"]),
        prior_alpha=float(prior["alpha"]),
        single_phase=single,
        two_phase=two,
        measurement_times_days=times,
        observed_wells=observed,
        noise_std=noise,
        mcmc=McmcSettings(**raw.get("mcmc", {})),
        methods=tuple(methods),
        forecast=_parse_forecast(raw.get("forecast"), model),
        raw=raw,
    )


def load_config(path, seed_override: int | None = None) -> ExperimentConfig:
    """Load a config YAML from a path or a preset name (without .yaml)."""
    p = Path(path)
    if not p.exists():
        candidate = resources.files("dabench").joinpath("presets", f"{path}.yaml")
        if candidate.is_file():
            raw = yaml.safe_load(candidate.read_text())
        else:
            raise FileNotFoundError(f"no config file or preset named {path!r}")
    else:
        raw = yaml.safe_load(p.read_text())
    if seed_override is not None:
        raw["seed"] = int(seed_override)
    return parse_config(raw)


def preset_names() -> list[str]:
    root = resources.files("dabench").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))
