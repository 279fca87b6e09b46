"""Forecast scenarios: re-simulate parameter samples through an extended
schedule and summarize predicted well quantities as quantile bands.

The assimilation window is rerun as part of every forecast simulation, so
each curve covers [0, T + extension] with the vertical split at T.  The
posterior-mean-field trajectory is attached to every table as the
reference curve.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import CflError, SolverError
from ..grids import Field
from ..singlephase import simulate as simulate_sp
from ..singlephase import well_cells
from ..twophase import simulate as simulate_tp
from .config import ExperimentConfig, ForecastSettings

QUANTILES = (5.0, 25.0, 50.0, 75.0, 95.0)


@dataclass
class WellSeries:
    well: str
    quantity: str
    unit: str
    times_days: np.ndarray
    quantiles: np.ndarray        # (5, n_times)
    reference: np.ndarray        # posterior-mean-field trajectory
    terminal_values: np.ndarray  # per-sample value at the final time
    n_excluded: int


def extended_single_phase(cfg: ExperimentConfig):
    base = cfg.single_phase
    fc = cfg.forecast
    horizon = base.horizon_days + fc.extension_days
    wells = []
    for w in base.wells:
        sched = fc.well_overrides.get(w.name, w.schedule)
        wells.append(replace(w, schedule=sched))
    wells.extend(fc.new_wells)
    return replace(base, horizon_days=horizon, wells=tuple(wells))


def extended_two_phase(cfg: ExperimentConfig):
    base = cfg.two_phase
    fc = cfg.forecast
    horizon = base.horizon_days + fc.extension_days
    producers = list(base.producers)
    for w in fc.new_wells:
        producers.append(w)
    injectors = []
    for w in base.injectors:
        sched = fc.well_overrides.get(w.name, w.schedule)
        injectors.append(replace(w, schedule=sched))
    snap = tuple(t for t in base.snap_times_days) + (base.horizon_days,)
    return replace(base, horizon_days=horizon, injectors=tuple(injectors),
                   producers=tuple(producers), snap_times_days=snap)


def _report_wells(cfg: ExperimentConfig, ext_cfg):
    names = cfg.forecast.report_wells
    if names:
        return list(names)
    if cfg.model == "single_phase":
        return [w.name for w in ext_cfg.wells]
    return [w.name for w in ext_cfg.injectors + ext_cfg.producers]


def _single_phase_curves(ext_cfg, grid, sample_values):
    traj = simulate_sp(Field(grid, sample_values), ext_cfg)
    cells = well_cells(grid, ext_cfg.wells)
    curves = {w.name: ("pressure", "Pa", traj.pressures[:, c])
              for w, c in zip(ext_cfg.wells, cells)}
    return traj.times_days, curves


def _two_phase_curves(ext_cfg, grid, sample_values):
    traj = simulate_tp(Field(grid, sample_values), ext_cfg)
    curves = {}
    for i, w in enumerate(ext_cfg.injectors):
        curves[w.name] = ("bottom_hole_pressure", "Pa", traj.injector_bhp[:, i])
    for i, w in enumerate(ext_cfg.producers):
        curves[w.name] = ("total_rate", "m3_per_day", traj.producer_rate[:, i])
        curves[w.name + "/cum_oil"] = ("cumulative_oil", "m3",
                                       traj.producer_cum_oil[:, i])
    return traj.times_days, curves


def forecast(cfg: ExperimentConfig, samples: np.ndarray,
             reference_field: Field) -> list[WellSeries]:
    """Simulate each parameter sample through assimilation plus forecast.

    Per-sample solver failures are excluded and counted.  Returns one
    WellSeries per reported well quantity.
    """
    if cfg.forecast is None:
        raise ValueError("config has no forecast section")
    if cfg.model == "single_phase":
        ext_cfg = extended_single_phase(cfg)
        runner = _single_phase_curves
    else:
        ext_cfg = extended_two_phase(cfg)
        runner = _two_phase_curves
    wells = _report_wells(cfg, ext_cfg)

    samples = np.atleast_2d(samples)
    k = min(cfg.forecast.max_samples, samples.shape[0])
    stride = max(1, samples.shape[0] // k)
    use = samples[::stride][:k]

    times, ref_curves = runner(ext_cfg, cfg.grid, reference_field.values)
    collected = {}
    n_excluded = 0
    for row in use:
        try:
            _, curves = runner(ext_cfg, cfg.grid, row)
        except (SolverError, CflError):
            n_excluded += 1
            continue
        for key, (_, _, series) in curves.items():
            collected.setdefault(key, []).append(series)

    out = []
    for key, (quantity, unit, ref_series) in ref_curves.items():
        base_well = key.split("/")[0]
        if base_well not in wells:
            continue
        stack = np.stack(collected[key])
        q = np.percentile(stack, QUANTILES, axis=0)
        out.append(WellSeries(
            well=key, quantity=quantity, unit=unit, times_days=times,
            quantiles=q, reference=ref_series,
            terminal_values=stack[:, -1], n_excluded=n_excluded))
    return out


def persist_forecast(source: str, series: list[WellSeries], out,
                     histogram_bins: int):
    fdir = out / "forecast"
    fdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for ws in series:
        tag = ws.well.replace("/", "_")
        with open(fdir / f"{source}__{tag}.csv", "w") as fh:
            fh.write(f"time_days,q05_{ws.unit},q25,q50,q75,q95,posterior_mean_ref\n")
            for i, t in enumerate(ws.times_days):
                vals = ",".join(repr(float(ws.quantiles[j, i])) for j in range(5))
                fh.write(f"{float(t)!r},{vals},{float(ws.reference[i])!r}\n")
        counts, edges = np.histogram(ws.terminal_values, bins=histogram_bins)
        with open(fdir / f"{source}__{tag}__hist.csv", "w") as fh:
            fh.write(f"bin_left_{ws.unit},bin_right,count\n")
            for c, (lo, hi) in zip(counts, zip(edges[:-1], edges[1:])):
                fh.write(f"{float(lo)!r},{float(hi)!r},{int(c)}\n")
        q = np.percentile(ws.terminal_values, QUANTILES)
        rows.append({
            "source": source, "well": ws.well, "quantity": ws.quantity,
            "unit": ws.unit, "n_samples": int(ws.terminal_values.size),
            "n_excluded": int(ws.n_excluded),
            "terminal_quantiles": [float(v) for v in q],
        })
    return rows
