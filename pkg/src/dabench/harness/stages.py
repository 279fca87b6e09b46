"""Pipeline stages behind the CLI subcommands.

generate -> mcmc -> approx (per method) -> evaluate -> forecast -> report;
`run_experiment` chains them all.  Every stage persists its artifacts under
the output directory and later stages reload from there, so stages can be
rerun individually, and reruns with identical config and seed reproduce
byte-identical outputs.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from ..prior import GaussianPrior
from .config import ExperimentConfig
from .experiment import (
    _STREAM_PRIOR_FORECAST,
    generate_truth_and_data,
    load_gold,
    load_method,
    load_observations,
    run_method,
    run_or_load_gold,
    stream,
    write_observations,
)
from .forecast import forecast, persist_forecast
from .metrics import relative_errors
from .report import ExperimentReport, MethodRow, emit_report, load_report
from ..grids import constant_field

log = logging.getLogger(__name__)


def _json_dump(obj, path: Path):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def stage_generate(cfg: ExperimentConfig, out: Path):
    out = Path(out)
    truth, obs = generate_truth_and_data(cfg)
    write_observations(cfg, truth, obs, out)
    log.info("generated %d observations (checksum %s)", obs.n_data,
             obs.checksum()[:12])
    return truth, obs


def stage_mcmc(cfg: ExperimentConfig, out: Path, cache: Path | None = None):
    out = Path(out)
    _, obs = load_observations(cfg, out)
    gold = run_or_load_gold(cfg, obs, out, Path(cache) if cache else None)
    log.info("gold standard: PSRF %.3f, MPSRF %.3f, acceptance %s",
             gold.psrf_final, gold.mpsrf_final,
             [round(a, 3) for a in gold.acceptance_rates])
    return gold


def stage_approx(cfg: ExperimentConfig, out: Path, label: str | None = None):
    out = Path(out)
    _, obs = load_observations(cfg, out)
    if label is None:
        indices = range(len(cfg.methods))
    else:
        indices = [cfg.method_by_label(label)[0]]
    results = []
    for i in indices:
        res = run_method(cfg, i, obs, out=out)
        log.info("method %s: %.1f forward runs", res.label, res.forward_runs)
        results.append(res)
    return results


def stage_evaluate(cfg: ExperimentConfig, out: Path):
    out = Path(out)
    gold = load_gold(cfg, out)
    prior_mean = constant_field(cfg.grid, cfg.prior_mean_log)
    rows = []
    for spec in cfg.methods:
        m = load_method(cfg, out, spec.label)
        eps_u, eps_sigma = relative_errors(m.mean, m.variance, gold.mean,
                                           gold.variance, prior_mean)
        rows.append(MethodRow(label=m.label, name=m.name, eps_u=eps_u,
                              eps_sigma=eps_sigma, forward_runs=m.forward_runs,
                              data_checksum=m.data_checksum, extras=m.extras))
        log.info("%-10s eps_u=%.3f eps_sigma=%.3f runs=%.0f",
                 m.label, eps_u, eps_sigma, m.forward_runs)
    _json_dump([r.__dict__ for r in rows], out / "evaluation.json")
    return rows


def stage_forecast(cfg: ExperimentConfig, out: Path):
    out = Path(out)
    if cfg.forecast is None:
        log.info("no forecast section; skipping")
        _json_dump([], out / "forecast_summary.json")
        return []
    gold = load_gold(cfg, out)
    prior = cfg.build_prior()
    sources = {
        "prior": prior.sample_values(stream(cfg.seed, _STREAM_PRIOR_FORECAST),
                                     cfg.forecast.max_samples),
        "mcmc": gold.forecast_samples,
    }
    for spec in cfg.methods:
        m = load_method(cfg, out, spec.label)
        if m.samples is not None:
            sources[m.label] = m.samples
    summary = []
    for source, samples in sources.items():
        series = forecast(cfg, samples, gold.mean)
        summary.extend(persist_forecast(source, series, out,
                                        cfg.forecast.histogram_bins))
        log.info("forecast source %s: %d well series", source, len(series))
    _json_dump(summary, out / "forecast_summary.json")
    return summary


def stage_report(cfg: ExperimentConfig, out: Path) -> ExperimentReport:
    out = Path(out)
    meta = json.loads((out / "data_meta.json").read_text())
    gold = load_gold(cfg, out)
    rows = [MethodRow(**r) for r in json.loads((out / "evaluation.json").read_text())]
    forecast_summary = []
    fpath = out / "forecast_summary.json"
    if fpath.exists():
        forecast_summary = json.loads(fpath.read_text())
    report = ExperimentReport(
        name=cfg.name,
        model=cfg.model,
        seed=cfg.seed,
        config_hash=cfg.config_hash(),
        data_checksum=meta["checksum"],
        gold={
            "n_samples": gold.n_samples,
            "acceptance_rates": gold.acceptance_rates,
            "psrf_final": gold.psrf_final,
            "mpsrf_final": gold.mpsrf_final,
            "psrf_trace": gold.psrf_trace,
            "forward_runs": gold.forward_runs,
            "data_checksum": gold.data_checksum,
        },
        methods=rows,
        forecast=forecast_summary,
    )
    if report.gold["data_checksum"] != report.data_checksum:
        raise RuntimeError("gold standard consumed different data than generated")
    emit_report(report, out)
    log.info("report written to %s", out / "report.json")
    return report


def run_experiment(cfg: ExperimentConfig, out: Path,
                   cache: Path | None = None) -> ExperimentReport:
    """Full pipeline; any stage failure aborts with partial artifacts kept."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _json_dump(cfg.raw, out / "config.json")
    stage_generate(cfg, out)
    stage_mcmc(cfg, out, cache)
    stage_approx(cfg, out)
    stage_evaluate(cfg, out)
    stage_forecast(cfg, out)
    return stage_report(cfg, out)
