"""Experiment stages: synthetic data, MCMC gold standard, approximations.

Each stage reads its inputs from the output directory written by earlier
stages, so the CLI subcommands compose into a pipeline.  All randomness
derives from named SeedSequence children of the experiment seed, making
every stage reproducible in isolation.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..diagnostics import mpsrf, psrf
from ..gaussian import (
    build_localization,
    cmap,
    enkf_analyze,
    enkf_predict,
    ensrf_analyze,
    initial_ensemble,
    lmap_sample,
    map_estimate,
    rml_sample,
)
from ..grids import Field, read_field_csv, write_field_csv
from ..mcmc import Likelihood, moments_from_values, posterior_moments, run_chain
from ..observations import ObservationSet
from ..prior import GaussianPrior
from ..singlephase import SinglePhaseForward, SinglePhaseModel
from ..twophase import TwoPhaseForward, TwoPhaseModel
from .config import ExperimentConfig

log = logging.getLogger(__name__)

# fixed stream tags so stages can be rerun in isolation
_STREAM_TRUTH = 0
_STREAM_NOISE = 1
_STREAM_CHAIN = 2
_STREAM_METHOD = 3
_STREAM_PRIOR_FORECAST = 4


def stream(cfg_seed: int, tag: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg_seed, tag, index]))


# --------------------------------------------------------------------------
# model plumbing


def build_forward(cfg: ExperimentConfig):
    if cfg.model == "single_phase":
        return SinglePhaseForward(cfg.grid, cfg.single_phase, cfg.measurement_schedule())
    return TwoPhaseForward(cfg.grid, cfg.two_phase, cfg.measurement_times_days)


def build_model(cfg: ExperimentConfig):
    if cfg.model == "single_phase":
        return SinglePhaseModel(cfg.grid, cfg.single_phase, cfg.measurement_schedule())
    return TwoPhaseModel(cfg.grid, cfg.two_phase, cfg.measurement_times_days)


def observed_well_points(cfg: ExperimentConfig):
    """Well coordinates in measurement-block order (for localization tapers)."""
    if cfg.model == "single_phase":
        return list(cfg.measurement_schedule().wells)
    return list(cfg.two_phase.injectors + cfg.two_phase.producers)


def component_layout(cfg: ExperimentConfig):
    """Per-component (time, well, sigma, unit) in stacking order."""
    rows = []
    if cfg.model == "single_phase":
        sig = cfg.noise_std["pressure_std"]
        for t in cfg.measurement_times_days:
            for w in cfg.measurement_schedule().wells:
                rows.append((t, w.name, sig, "Pa"))
    else:
        tp = cfg.two_phase
        sig_i = cfg.noise_std["injector_bhp_std"]
        prod_std = cfg.noise_std["producer_rate_std"]
        for t in cfg.measurement_times_days:
            for w in tp.injectors:
                rows.append((t, w.name, sig_i, "Pa"))
            for w in tp.producers:
                sig = prod_std.get(w.name, prod_std.get("default"))
                rows.append((t, w.name, sig, "m3_per_day"))
    return rows


def generate_truth_and_data(cfg: ExperimentConfig):
    """Draw the synthetic truth from the prior and perturb its data.

    The truth comes from the experiment's own prior, so a two-phase config
    with doubled kappa carries the sqrt(2)-scaled fluctuation amplitude
    relative to the single-phase prior by construction.
    """
    prior = cfg.build_prior()
    truth = prior.sample(stream(cfg.seed, _STREAM_TRUTH))
    forward = build_forward(cfg)
    noiseless = forward(truth.values)
    layout = component_layout(cfg)
    if len(layout) != noiseless.size:
        raise RuntimeError("component layout disagrees with the forward output")
    sigma = np.array([r[2] for r in layout])
    noise = sigma * stream(cfg.seed, _STREAM_NOISE).standard_normal(noiseless.size)
    obs = ObservationSet(
        y=noiseless + noise,
        gamma=sigma**2,
        times_days=np.array([r[0] for r in layout]),
        wells=tuple(r[1] for r in layout),
        noiseless=noiseless,
    )
    return truth, obs


# --------------------------------------------------------------------------
# persistence helpers


def _json_dump(obj, path: Path):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_observations(cfg: ExperimentConfig, truth: Field, obs: ObservationSet,
                       out: Path):
    out.mkdir(parents=True, exist_ok=True)
    write_field_csv(truth, out / "truth_u.csv")
    layout = component_layout(cfg)
    with open(out / "observations.csv", "w") as fh:
        fh.write("index,time_days,well,unit,value,noiseless,noise_std\n")
        for i, ((t, well, sig, unit), y, y0) in enumerate(
                zip(layout, obs.y, obs.noiseless)):
            fh.write(f"{i},{float(t)!r},{well},{unit},{float(y)!r},"
                     f"{float(y0)!r},{float(sig)!r}\n")
    _json_dump({"n_data": obs.n_data, "checksum": obs.checksum(),
                "seed": cfg.seed, "config_hash": cfg.config_hash()},
               out / "data_meta.json")


def load_observations(cfg: ExperimentConfig, out: Path):
    truth = read_field_csv(out / "truth_u.csv")
    layout = component_layout(cfg)
    y = np.empty(len(layout))
    noiseless = np.empty(len(layout))
    with open(out / "observations.csv") as fh:
        header = fh.readline()
        for line in fh:
            parts = line.strip().split(",")
            i = int(parts[0])
            y[i] = float(parts[4])
            noiseless[i] = float(parts[5])
    sigma = np.array([r[2] for r in layout])
    return truth, ObservationSet(
        y=y, gamma=sigma**2,
        times_days=np.array([r[0] for r in layout]),
        wells=tuple(r[1] for r in layout),
        noiseless=noiseless)


# --------------------------------------------------------------------------
# MCMC gold standard


@dataclass
class GoldStandard:
    mean: Field
    variance: Field
    n_samples: int
    forecast_samples: np.ndarray
    acceptance_rates: list[float]
    psrf_trace: list[list[float]]   # [step, max_psrf, mpsrf]
    psrf_final: float
    mpsrf_final: float
    forward_runs: float
    data_checksum: str


class _OnlineMoments:
    """Pooled mean/variance accumulator (unbiased), chain by chain."""

    def __init__(self, dim):
        self.n = 0
        self.s1 = np.zeros(dim)
        self.s2 = np.zeros(dim)

    def add(self, stack: np.ndarray):
        self.n += stack.shape[0]
        self.s1 += stack.sum(axis=0)
        self.s2 += (stack**2).sum(axis=0)

    def mean(self):
        return self.s1 / self.n

    def variance(self):
        m = self.mean()
        return np.maximum((self.s2 - self.n * m**2) / (self.n - 1), 0.0)


def _psrf_checkpoints(settings):
    lo = settings.burn_in + max(10, settings.thin)
    pts = np.unique(np.linspace(lo, settings.steps, settings.psrf_checkpoints,
                                dtype=int))
    return [int(p) for p in pts if p > settings.burn_in + 1]


def run_gold_standard(cfg: ExperimentConfig, obs: ObservationSet,
                      out: Path | None = None) -> GoldStandard:
    """Run the pCN chains and pool their post-burn-in samples."""
    prior = cfg.build_prior()
    settings = cfg.mcmc
    dim = cfg.grid.n_cells
    acc = _OnlineMoments(dim)
    traces = []
    accept_rates = []
    keep_per_chain = -(-max(1, (cfg.forecast.max_samples if cfg.forecast else 100))
                       // settings.chains)
    kept = []
    total_evals = 0
    trace_stride = max(1, settings.steps // 5000)
    for i in range(settings.chains):
        rng = stream(cfg.seed, _STREAM_CHAIN, i)
        forward = build_forward(cfg)
        lik = Likelihood(obs.y, obs.gamma, forward)
        init = prior.sample(rng)
        res = run_chain(init, settings.steps, settings.burn_in, settings.thin,
                        prior, lik, rng, beta=settings.beta,
                        trace_modes=settings.trace_modes)
        stack = np.stack([s.values for s in res.samples])
        acc.add(stack)
        stride = max(1, len(res.samples) // keep_per_chain)
        kept.append(stack[::stride][:keep_per_chain])
        traces.append(res.coeff_trace)
        accept_rates.append(res.acceptance_rate)
        total_evals += res.n_forward_evals
        log.info("chain %d/%d: acceptance %.3f", i + 1, settings.chains,
                 res.acceptance_rate)
        if out is not None:
            mdir = out / "mcmc"
            mdir.mkdir(parents=True, exist_ok=True)
            with open(mdir / f"chain_{i:02d}_trace.csv", "w") as fh:
                cols = ",".join(f"coeff_{k}" for k in range(settings.trace_modes))
                fh.write(f"step,phi,accepted,{cols}\n")
                for s in range(0, settings.steps, trace_stride):
                    coeffs = ",".join(repr(float(c)) for c in res.coeff_trace[s])
                    fh.write(f"{s + 1},{float(res.phi_trace[s])!r},"
                             f"{int(res.accept_trace[s])},{coeffs}\n")

    checkpoints = _psrf_checkpoints(settings)
    psrf_trace = []
    for step in checkpoints:
        segs = [t[settings.burn_in:step] for t in traces]
        per_mode = [psrf([s[:, k] for s in segs]) for k in range(settings.trace_modes)]
        psrf_trace.append([float(step), float(np.max(per_mode)), float(mpsrf(segs))])
    psrf_final = psrf_trace[-1][1]
    mpsrf_final = psrf_trace[-1][2]

    gold = GoldStandard(
        mean=Field(cfg.grid, acc.mean()),
        variance=Field(cfg.grid, acc.variance()),
        n_samples=acc.n,
        forecast_samples=np.concatenate(kept, axis=0),
        acceptance_rates=[float(a) for a in accept_rates],
        psrf_trace=psrf_trace,
        psrf_final=float(psrf_final),
        mpsrf_final=float(mpsrf_final),
        forward_runs=float(total_evals),
        data_checksum=obs.checksum(),
    )
    if out is not None:
        persist_gold(gold, out)
    return gold


def persist_gold(gold: GoldStandard, out: Path):
    mdir = out / "mcmc"
    mdir.mkdir(parents=True, exist_ok=True)
    write_field_csv(gold.mean, mdir / "gold_mean.csv")
    write_field_csv(gold.variance, mdir / "gold_var.csv")
    np.savez(mdir / "gold_samples.npz", samples=gold.forecast_samples)
    _json_dump({
        "n_samples": gold.n_samples,
        "acceptance_rates": gold.acceptance_rates,
        "psrf_trace": gold.psrf_trace,
        "psrf_final": gold.psrf_final,
        "mpsrf_final": gold.mpsrf_final,
        "forward_runs": gold.forward_runs,
        "data_checksum": gold.data_checksum,
    }, mdir / "diagnostics.json")


def load_gold(cfg: ExperimentConfig, out: Path) -> GoldStandard:
    mdir = out / "mcmc"
    meta = json.loads((mdir / "diagnostics.json").read_text())
    return GoldStandard(
        mean=read_field_csv(mdir / "gold_mean.csv"),
        variance=read_field_csv(mdir / "gold_var.csv"),
        n_samples=int(meta["n_samples"]),
        forecast_samples=np.load(mdir / "gold_samples.npz")["samples"],
        acceptance_rates=meta["acceptance_rates"],
        psrf_trace=meta["psrf_trace"],
        psrf_final=meta["psrf_final"],
        mpsrf_final=meta["mpsrf_final"],
        forward_runs=meta["forward_runs"],
        data_checksum=meta["data_checksum"],
    )


def gold_cache_key(cfg: ExperimentConfig) -> str:
    return f"gold_{cfg.config_hash()}_{cfg.seed}"


def run_or_load_gold(cfg: ExperimentConfig, obs: ObservationSet, out: Path,
                     cache: Path | None) -> GoldStandard:
    """The gold standard is cached keyed by config hash and seed."""
    if cache is not None:
        key = cache / gold_cache_key(cfg)
        if (key / "mcmc" / "diagnostics.json").exists():
            gold = load_gold(cfg, key)
            if gold.data_checksum != obs.checksum():
                raise RuntimeError("cached gold standard was built from different data")
            log.info("loaded cached gold standard %s", key.name)
            persist_gold(gold, out)
            return gold
    gold = run_gold_standard(cfg, obs, out=out)
    if cache is not None:
        key = cache / gold_cache_key(cfg)
        persist_gold(gold, key)
    return gold


# --------------------------------------------------------------------------
# Gaussian approximation methods


@dataclass
class MethodOutput:
    label: str
    name: str
    mean: Field
    variance: Field
    samples: np.ndarray | None     # (n, n_cells) parameter draws, None for 'map'
    forward_runs: float
    data_checksum: str
    extras: dict = field(default_factory=dict)


def run_method(cfg: ExperimentConfig, method_index: int, obs: ObservationSet,
               out: Path | None = None) -> MethodOutput:
    spec = cfg.methods[method_index]
    prior = cfg.build_prior()
    rng = stream(cfg.seed, _STREAM_METHOD, method_index)
    if spec.name in ("map", "lmap", "rml"):
        result = _run_variational(cfg, spec, prior, obs, rng)
    else:
        result = _run_filter(cfg, spec, prior, obs, rng)
    if out is not None:
        persist_method(result, out)
    return result


def _run_variational(cfg, spec, prior: GaussianPrior, obs, rng) -> MethodOutput:
    forward = build_forward(cfg)
    lik = Likelihood(obs.y, obs.gamma, forward)
    if spec.name == "rml":
        res = rml_sample(prior, lik, spec.ensemble_size, spec.lm, rng)
        if len(res.members) < 2:
            raise RuntimeError(
                f"RML produced {len(res.members)} usable members; cannot form moments")
        mom = posterior_moments(res.members)
        samples = np.stack([m.values for m in res.members])
        extras = {
            "n_failed": res.n_failed,
            "mean_lm_iterations": float(res.lm_iterations.mean()),
        }
        return MethodOutput(spec.label, spec.name, mom.mean, mom.variance,
                            samples, float(forward.n_evals), obs.checksum(), extras)
    map_res = map_estimate(prior, lik, spec.lm)
    factor = cmap(map_res.u, prior, lik, b_matrix=map_res.b_matrix)
    extras = {
        "lm_iterations": map_res.lm.iterations,
        "lm_converged": bool(map_res.lm.converged),
    }
    if spec.name == "map":
        return MethodOutput(spec.label, spec.name, map_res.u,
                            factor.variance_field(), None,
                            float(forward.n_evals), obs.checksum(), extras)
    samples_f = lmap_sample(map_res.u, factor, spec.ensemble_size, rng)
    mom = posterior_moments(samples_f)
    samples = np.stack([s.values for s in samples_f])
    return MethodOutput(spec.label, spec.name, mom.mean, mom.variance, samples,
                        float(forward.n_evals), obs.checksum(), extras)


def _run_filter(cfg, spec, prior: GaussianPrior, obs, rng) -> MethodOutput:
    model = build_model(cfg)
    analyze = enkf_analyze if spec.name == "enkf" else ensrf_analyze
    loc = None
    if spec.localization_length is not None:
        loc = build_localization(cfg.grid, observed_well_points(cfg),
                                 spec.localization_length)
    ens = initial_ensemble(prior, model, spec.ensemble_size, rng)
    steps = 0
    for window, t in enumerate(cfg.measurement_times_days):
        ens = enkf_predict(ens, model, window)
        steps += model.window_steps(window) * spec.ensemble_size
        y_t, gamma_t = obs.block_at(t)
        ens = analyze(ens, y_t, gamma_t, rng, loc=loc)
    mom = posterior_moments(ens.u_fields())
    extras = {"assimilation_windows": len(cfg.measurement_times_days)}
    return MethodOutput(spec.label, spec.name, mom.mean, mom.variance,
                        ens.u.copy(), steps / model.steps_per_run,
                        obs.checksum(), extras)


def persist_method(m: MethodOutput, out: Path):
    mdir = out / "methods" / m.label
    mdir.mkdir(parents=True, exist_ok=True)
    write_field_csv(m.mean, mdir / "mean.csv")
    write_field_csv(m.variance, mdir / "var.csv")
    if m.samples is not None:
        np.savez(mdir / "members.npz", samples=m.samples)
        bundle = mdir / "members"
        bundle.mkdir(exist_ok=True)
        for j in range(m.samples.shape[0]):
            write_field_csv(Field(m.mean.grid, m.samples[j]),
                            bundle / f"member_{j:04d}.csv")
    _json_dump({
        "label": m.label,
        "name": m.name,
        "forward_runs": m.forward_runs,
        "data_checksum": m.data_checksum,
        "extras": m.extras,
    }, mdir / "cost.json")


def load_method(cfg: ExperimentConfig, out: Path, label: str) -> MethodOutput:
    mdir = out / "methods" / label
    meta = json.loads((mdir / "cost.json").read_text())
    samples = None
    if (mdir / "members.npz").exists():
        samples = np.load(mdir / "members.npz")["samples"]
    return MethodOutput(
        label=meta["label"], name=meta["name"],
        mean=read_field_csv(mdir / "mean.csv"),
        variance=read_field_csv(mdir / "var.csv"),
        samples=samples,
        forward_runs=meta["forward_runs"],
        data_checksum=meta["data_checksum"],
        extras=meta["extras"],
    )
