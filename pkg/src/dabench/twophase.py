"""Incompressible oil-water flow via IMPES with Peaceman well measurements.

Pressure solves the elliptic system

    -div( lambda(s) e^u grad p ) = sum_I q_l delta_I
                                   + sum_P omega_l lambda(s) [Pbh_l - p] delta_P

with no-flow boundaries; the bottom-hole-pressure producer terms enter the
matrix diagonal implicitly, which also anchors solvability.  Saturation is
advanced explicitly with upwind fractional flow on the total face fluxes,
substepped under a CFL bound.  e^u is the absolute permeability [m^2];
phase viscosities live in the relative-permeability model.  Unit thickness
throughout; configs carry days, m^3/day and Pa.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .band import BandedOperator, face_transmissibilities, harmonic_mean
from .errors import CflError, SolverError
from .grids import Field, Grid2D
from .schedule import PiecewiseSchedule, constant_schedule
from .singlephase import DAY, WellLocation

YEAR_DAYS = 365.0

_BOUNDS_GUARD = 1e-9
_MAX_SUBSTEPS = 200_000


@dataclass(frozen=True)
class RelPermModel:
    """Quadratic (Corey-type) relative permeabilities and phase viscosities."""

    a_w: float
    a_o: float
    s_iw: float
    s_or: float
    mu_w: float
    mu_o: float

    def __post_init__(self):
        if not (0 < self.a_w <= 1 and 0 < self.a_o <= 1):
            raise ValueError("endpoint relative permeabilities must lie in (0, 1]")
        if not (0 <= self.s_iw < 1 and 0 <= self.s_or < 1):
            raise ValueError("residual saturations must lie in [0, 1)")
        if not self.s_iw + self.s_or < 1:
            raise ValueError("s_iw + s_or must be below 1")
        if not (self.mu_w > 0 and self.mu_o > 0):
            raise ValueError("viscosities must be positive")

    @property
    def s_min(self) -> float:
        return self.s_iw

    @property
    def s_max(self) -> float:
        return 1.0 - self.s_or

    def _effective(self, s):
        return (np.asarray(s) - self.s_iw) / (1.0 - self.s_iw - self.s_or)

    def krw(self, s):
        return self.a_w * self._effective(s) ** 2

    def kro(self, s):
        return self.a_o * (1.0 - self._effective(s)) ** 2

    def lambda_w(self, s):
        return self.krw(s) / self.mu_w

    def lambda_total(self, s):
        return self.kro(s) / self.mu_o + self.lambda_w(s)

    def fractional_flow(self, s):
        return self.lambda_w(s) / self.lambda_total(s)

    def fw_lipschitz(self) -> float:
        """Max |d f_w / d s| over the physical range (dense sampling)."""
        s = np.linspace(self.s_min, self.s_max, 2001)
        fw = self.fractional_flow(s)
        return float(np.max(np.abs(np.diff(fw) / np.diff(s))))

    def check_range(self, s):
        s = np.asarray(s)
        if np.any(s < self.s_min - _BOUNDS_GUARD) or np.any(s > self.s_max + _BOUNDS_GUARD):
            raise ValueError(
                f"saturation outside physical range [{self.s_min}, {self.s_max}]"
            )


def mobilities(s, rp: RelPermModel):
    """Water and total mobility (lambda_w, lambda) at saturation s."""
    rp.check_range(s)
    lam_w = rp.lambda_w(s)
    return lam_w, rp.kro(s) / rp.mu_o + lam_w


@dataclass(frozen=True)
class InjectorSpec:
    """Rate-controlled injector (pure water); rate schedule in m^3/day, positive injects."""

    name: str
    x: float
    y: float
    schedule: PiecewiseSchedule
    well_index: float | None = None  # Peaceman default when None


@dataclass(frozen=True)
class ProducerSpec:
    """Bottom-hole-pressure controlled producer; BHP schedule in Pa.

    start_day > 0 models a well drilled during the run: its source term is
    absent until then.
    """

    name: str
    x: float
    y: float
    bhp: PiecewiseSchedule
    well_index: float | None = None
    start_day: float = 0.0

    def __post_init__(self):
        if self.well_index is not None and not self.well_index > 0:
            raise ValueError("well index must be positive")
        if self.start_day < 0:
            raise ValueError("start day must be nonnegative")


@dataclass(frozen=True)
class TwoPhaseConfig:
    porosity: float
    initial_pressure: float
    initial_saturation: float
    horizon_days: float
    injectors: tuple[InjectorSpec, ...]
    producers: tuple[ProducerSpec, ...]
    relperm: RelPermModel
    pressure_dt_days: float
    cfl_target: float = 0.5
    well_radius: float = 0.1
    snap_times_days: tuple[float, ...] = ()

    def __post_init__(self):
        if not 0 < self.porosity < 1:
            raise ValueError("porosity must lie in (0, 1)")
        rp = self.relperm
        if not rp.s_min <= self.initial_saturation <= rp.s_max:
            raise ValueError("initial saturation outside physical range")
        if not self.horizon_days > 0:
            raise ValueError("horizon must be positive")
        if not self.pressure_dt_days > 0:
            raise ValueError("pressure step target must be positive")
        if not 0 < self.cfl_target <= 1:
            raise ValueError("CFL target must lie in (0, 1]")
        if any(t <= 0 or t > self.horizon_days * (1 + 1e-12) for t in self.snap_times_days):
            raise ValueError("snapshot times must lie in (0, T]")

    @property
    def wells(self):
        return self.injectors + self.producers

    @property
    def n_wells(self) -> int:
        return len(self.injectors) + len(self.producers)

    def step_times(self) -> np.ndarray:
        """Global pressure-step grid: schedule breakpoints and snapshot times
        are step boundaries; intervals are subdivided to the target step."""
        marks = {0.0, self.horizon_days}
        marks.update(t for t in self.snap_times_days)
        for w in self.injectors:
            marks.update(b for b in w.schedule.breakpoints() if 0 < b < self.horizon_days)
        for w in self.producers:
            marks.update(b for b in w.bhp.breakpoints() if 0 < b < self.horizon_days)
            if 0 < w.start_day < self.horizon_days:
                marks.add(w.start_day)
        marks = sorted(marks)
        times = [0.0]
        for a, b in zip(marks, marks[1:]):
            n = max(1, int(np.ceil((b - a) / self.pressure_dt_days - 1e-12)))
            times.extend(a + (b - a) * (k + 1) / n for k in range(n))
        return np.array(times)


class TwoPhaseTrajectory:
    """Snapshots (p solved with s_n, s_n) at every pressure step, plus well records."""

    def __init__(self, grid: Grid2D, times_days, pressures, saturations,
                 injector_bhp, producer_rate, producer_fw, producer_cum_oil,
                 producer_cum_water, injected_cum):
        self.grid = grid
        self.times_days = times_days
        self.pressures = pressures
        self.saturations = saturations
        self.injector_bhp = injector_bhp          # (n+1, N_I) Pa
        self.producer_rate = producer_rate        # (n+1, N_P) m^3/day, negative = production
        self.producer_fw = producer_fw            # water fraction at the producing cell
        self.producer_cum_oil = producer_cum_oil  # (n+1, N_P) m^3 produced
        self.producer_cum_water = producer_cum_water
        self.injected_cum = injected_cum          # (n+1,) m^3 injected

    def step_of(self, t_day: float) -> int:
        idx = int(np.argmin(np.abs(self.times_days - t_day)))
        if abs(self.times_days[idx] - t_day) > 1e-9 * max(1.0, abs(t_day)):
            raise ValueError(f"time {t_day} d does not land on a pressure step")
        return idx


class _TwoPhaseKernel:
    """Vectorized IMPES kernel bound to one (grid, u, config)."""

    def __init__(self, grid: Grid2D, u_values: np.ndarray, cfg: TwoPhaseConfig):
        self.grid = grid
        self.cfg = cfg
        self.rp = cfg.relperm
        self.perm = np.exp(np.asarray(u_values, dtype=float).reshape(grid.nx, grid.ny))
        self.inj_cells = np.array(
            [grid.flat_index(*grid.cell_of(w.x, w.y)) for w in cfg.injectors], dtype=int)
        self.prod_cells = np.array(
            [grid.flat_index(*grid.cell_of(w.x, w.y)) for w in cfg.producers], dtype=int)
        self.inj_omega = np.array(
            [self._well_index(w, c) for w, c in zip(cfg.injectors, self.inj_cells)])
        self.prod_omega = np.array(
            [self._well_index(w, c) for w, c in zip(cfg.producers, self.prod_cells)])
        self.pore_vol = cfg.porosity * grid.cell_area  # per cell, unit thickness
        self.fw_lip = self.rp.fw_lipschitz()

    def _well_index(self, well, cell: int) -> float:
        if well.well_index is not None:
            return float(well.well_index)
        # Peaceman index with equivalent radius 0.2 dx, unit thickness
        r_eq = 0.2 * self.grid.dx
        if r_eq <= self.cfg.well_radius:
            raise ValueError("equivalent radius must exceed the well radius")
        k_cell = self.perm.ravel()[cell]
        return 2.0 * np.pi * k_cell / np.log(r_eq / self.cfg.well_radius)

    def controls(self, t_day: float):
        q_inj = np.array([w.schedule.value_at(t_day) / DAY for w in self.cfg.injectors])
        bhp = np.array([w.bhp.value_at(t_day) for w in self.cfg.producers])
        active = np.array([t_day >= w.start_day - 1e-9 for w in self.cfg.producers],
                          dtype=float)
        return q_inj, bhp, active

    def solve_pressure(self, s: np.ndarray, t_day: float, step: int | None = None):
        """Pressure solve at saturation s; returns (p, producer total rates [m^3/s])."""
        rp = self.rp
        rp.check_range(s)
        lam_cell = rp.lambda_total(np.clip(s, rp.s_min, rp.s_max)).reshape(
            self.grid.nx, self.grid.ny)
        coeff = lam_cell * self.perm
        tx, ty = face_transmissibilities(self.grid, coeff)
        diag = np.zeros(self.grid.n_cells)
        rhs = np.zeros(self.grid.n_cells)
        q_inj, bhp, active = self.controls(t_day)
        np.add.at(rhs, self.inj_cells, q_inj)
        lam_prod = rp.lambda_total(np.clip(s[self.prod_cells], rp.s_min, rp.s_max))
        sink = self.prod_omega * lam_prod * active
        np.add.at(diag, self.prod_cells, sink)
        np.add.at(rhs, self.prod_cells, sink * bhp)
        if len(self.prod_cells) == 0:
            net = rhs.sum()
            scale = np.abs(rhs).sum() + 1e-300
            if abs(net) > 1e-10 * max(scale, 1e-30):
                raise SolverError(
                    "singular pressure system: no producers and nonzero net injection",
                    step=step)
            # pure Neumann: ground one cell at the initial pressure
            penalty = max(coeff.max() * 1.0, 1.0)
            diag = diag.copy()
            diag[0] += penalty
            rhs = rhs.copy()
            rhs[0] += penalty * self.cfg.initial_pressure
        op = BandedOperator(self.grid, tx, ty, diag.reshape(self.grid.nx, self.grid.ny))
        p = op.factor(step=step).solve(rhs, step=step)
        prod_rate = sink * (bhp - p[self.prod_cells])  # m^3/s, negative = production
        self._last = (op, tx, ty, p)
        return p, prod_rate

    def total_fluxes(self, s: np.ndarray, p: np.ndarray):
        """Face fluxes F = T (p_i - p_j) [m^3/s], positive toward increasing index."""
        rp = self.rp
        lam_cell = rp.lambda_total(np.clip(s, rp.s_min, rp.s_max)).reshape(
            self.grid.nx, self.grid.ny)
        coeff = lam_cell * self.perm
        tx, ty = face_transmissibilities(self.grid, coeff)
        p2 = p.reshape(self.grid.nx, self.grid.ny)
        fx = tx * (p2[:-1, :] - p2[1:, :])
        fy = ty * (p2[:, :-1] - p2[:, 1:])
        return fx, fy

    def flux_snapshot(self, s: np.ndarray, p: np.ndarray, t_day: float):
        """Total fluxes and well rates at (s, p), frozen across the substeps of
        one pressure step (classic IMPES total-velocity lagging)."""
        fx, fy = self.total_fluxes(s, p)
        q_inj, bhp, active = self.controls(t_day)
        rp = self.rp
        lam_prod = rp.lambda_total(np.clip(s[self.prod_cells], rp.s_min, rp.s_max))
        prod_rate = self.prod_omega * lam_prod * active * (bhp - p[self.prod_cells])
        return fx, fy, q_inj, prod_rate

    def cfl_bound_frozen(self, fx, fy, prod_rate) -> float:
        """Largest stable substep [s] for the explicit upwind update on frozen fluxes."""
        out = np.zeros((self.grid.nx, self.grid.ny))
        out[:-1, :] += np.maximum(fx, 0.0)
        out[1:, :] += np.maximum(-fx, 0.0)
        out[:, :-1] += np.maximum(fy, 0.0)
        out[:, 1:] += np.maximum(-fy, 0.0)
        out = out.ravel()
        np.add.at(out, self.prod_cells, np.maximum(-prod_rate, 0.0))
        peak = out.max()
        if peak <= 0.0:
            return np.inf
        return float(self.pore_vol / (self.fw_lip * peak))

    def cfl_bound(self, s: np.ndarray, p: np.ndarray, t_day: float) -> float:
        fx, fy, _, prod_rate = self.flux_snapshot(s, p, t_day)
        return self.cfl_bound_frozen(fx, fy, prod_rate)

    def transport_substep(self, s: np.ndarray, fx, fy, q_inj, prod_rate, dt_s: float):
        """One explicit upwind fractional-flow update on frozen total fluxes.

        Returns (s_new, injected m^3, produced water m^3 per producer,
        produced total m^3 per producer)."""
        rp = self.rp
        bound = self.cfl_bound_frozen(fx, fy, prod_rate)
        if dt_s > bound * (1.0 + 1e-9):
            raise CflError(f"saturation substep {dt_s} s exceeds CFL bound {bound} s")
        fw = rp.fractional_flow(np.clip(s, rp.s_min, rp.s_max)).reshape(
            self.grid.nx, self.grid.ny)
        # upwind water flux on the total velocity
        fwx = np.where(fx > 0, fw[:-1, :], fw[1:, :]) * fx
        fwy = np.where(fy > 0, fw[:, :-1], fw[:, 1:]) * fy
        net = np.zeros((self.grid.nx, self.grid.ny))
        net[:-1, :] -= fwx
        net[1:, :] += fwx
        net[:, :-1] -= fwy
        net[:, 1:] += fwy
        net = net.ravel()
        np.add.at(net, self.inj_cells, q_inj)
        fw_prod = rp.fractional_flow(np.clip(s[self.prod_cells], rp.s_min, rp.s_max))
        np.add.at(net, self.prod_cells, fw_prod * prod_rate)
        s_new = s + dt_s * net / self.pore_vol
        if np.any(s_new < rp.s_min - _BOUNDS_GUARD) or np.any(s_new > rp.s_max + _BOUNDS_GUARD):
            worst = float(max(rp.s_min - s_new.min(), s_new.max() - rp.s_max))
            raise CflError(f"saturation bounds violated by {worst} after explicit update")
        s_new = np.clip(s_new, rp.s_min, rp.s_max)
        injected = float(q_inj.sum() * dt_s)
        produced_total = -prod_rate * dt_s  # positive volumes
        produced_water = fw_prod * produced_total
        return s_new, injected, produced_water, produced_total

    def saturation_update(self, s: np.ndarray, p: np.ndarray, t_day: float, dt_s: float):
        """One explicit upwind substep with fluxes evaluated at (s, p)."""
        fx, fy, q_inj, prod_rate = self.flux_snapshot(s, p, t_day)
        return self.transport_substep(s, fx, fy, q_inj, prod_rate, dt_s)

    def advance_window(self, s: np.ndarray, t_a: float, t_b: float, on_substep=None):
        """March saturation from t_a to t_b (days), re-solving pressure at every
        pressure step inside the window; returns s at t_b."""
        # window boundaries land on the global step grid by construction
        for step_t0, step_t1 in self._window_steps(t_a, t_b):
            s = self._pressure_step(s, step_t0, step_t1, on_substep)
        return s

    def _window_steps(self, t_a, t_b):
        times = self.cfg.step_times()
        ia = int(np.argmin(np.abs(times - t_a)))
        ib = int(np.argmin(np.abs(times - t_b)))
        if abs(times[ia] - t_a) > 1e-9 * max(1.0, abs(t_a)) or \
           abs(times[ib] - t_b) > 1e-9 * max(1.0, abs(t_b)):
            raise ValueError("window boundaries must land on pressure steps")
        return list(zip(times[ia:ib], times[ia + 1:ib + 1]))

    def _pressure_step(self, s, t0, t1, on_substep=None):
        p, _ = self.solve_pressure(s, t0, step=None)
        fx, fy, q_inj, prod_rate = self.flux_snapshot(s, p, t0)
        bound_day = self.cfg.cfl_target * self.cfl_bound_frozen(fx, fy, prod_rate) / DAY
        t = t0
        n_sub = 0
        while t < t1 - 1e-12:
            dt_day = min(bound_day, t1 - t)
            if dt_day <= 0 or n_sub > _MAX_SUBSTEPS:
                raise CflError("saturation substepping stalled")
            s, injected, pw, pt = self.transport_substep(
                s, fx, fy, q_inj, prod_rate, dt_day * DAY)
            if on_substep is not None:
                on_substep(injected, pw, pt)
            t += dt_day
            n_sub += 1
        return s


def solve_pressure(u: Field, s: Field, cfg: TwoPhaseConfig, t_day: float = 0.0) -> Field:
    """Pressure field at saturation s (elliptic solve, BHP producers anchor it)."""
    kernel = _TwoPhaseKernel(u.grid, u.values, cfg)
    p, _ = kernel.solve_pressure(s.values, t_day)
    return Field(u.grid, p)


def advance_saturation(u: Field, s: Field, p: Field, cfg: TwoPhaseConfig,
                       dt_days: float, t_day: float = 0.0) -> Field:
    """One explicit upwind transport step of length dt_days using fluxes from p."""
    kernel = _TwoPhaseKernel(u.grid, u.values, cfg)
    s_new, _, _, _ = kernel.saturation_update(s.values, p.values, t_day, dt_days * DAY)
    return Field(u.grid, s_new)


def simulate(u: Field, cfg: TwoPhaseConfig) -> TwoPhaseTrajectory:
    """IMPES run over [0, T]; snapshots and well records at every pressure step."""
    grid = u.grid
    kernel = _TwoPhaseKernel(grid, u.values, cfg)
    times = cfg.step_times()
    n = len(times) - 1
    n_i, n_p = len(cfg.injectors), len(cfg.producers)
    pressures = np.empty((n + 1, grid.n_cells))
    saturations = np.empty((n + 1, grid.n_cells))
    inj_bhp = np.empty((n + 1, n_i))
    prod_rate = np.empty((n + 1, n_p))
    prod_fw = np.empty((n + 1, n_p))
    cum_oil = np.zeros((n + 1, n_p))
    cum_water = np.zeros((n + 1, n_p))
    cum_inj = np.zeros(n + 1)

    s = np.full(grid.n_cells, cfg.initial_saturation)
    oil_acc = np.zeros(n_p)
    water_acc = np.zeros(n_p)
    inj_acc = 0.0
    for k in range(n + 1):
        t = times[k]
        p, rate = kernel.solve_pressure(s, t, step=k)
        pressures[k] = p
        saturations[k] = s
        q_inj, _, _ = kernel.controls(t)
        lam_inj = cfg.relperm.lambda_total(
            np.clip(s[kernel.inj_cells], cfg.relperm.s_min, cfg.relperm.s_max))
        inj_bhp[k] = q_inj / (kernel.inj_omega * lam_inj) + p[kernel.inj_cells]
        prod_rate[k] = rate * DAY  # m^3/day, negative while producing
        prod_fw[k] = cfg.relperm.fractional_flow(
            np.clip(s[kernel.prod_cells], cfg.relperm.s_min, cfg.relperm.s_max))
        cum_oil[k] = oil_acc
        cum_water[k] = water_acc
        cum_inj[k] = inj_acc
        if k == n:
            break

        def record(injected, pw, pt):
            nonlocal inj_acc
            inj_acc += injected
            water_acc[:] += pw
            oil_acc[:] += pt - pw

        s = kernel._pressure_step(s, times[k], times[k + 1], on_substep=record)
    return TwoPhaseTrajectory(grid, times, pressures, saturations, inj_bhp,
                              prod_rate, prod_fw, cum_oil, cum_water, cum_inj)


def measure_two_phase(traj: TwoPhaseTrajectory, cfg: TwoPhaseConfig,
                      times_days) -> np.ndarray:
    """Stack per-time blocks (injector BHPs then producer total rates), time-major.

    Producer rates are signed as in the pressure equation source
    (negative while producing); BHPs in Pa, rates in m^3/day.
    """
    out = []
    for t in times_days:
        k = traj.step_of(t)
        out.append(traj.injector_bhp[k])
        out.append(traj.producer_rate[k])
    return np.concatenate(out) if out else np.zeros(0)


class TwoPhaseForward:
    """Picklable forward operator u-values -> stacked measurements, with eval counter."""

    def __init__(self, grid: Grid2D, cfg: TwoPhaseConfig, times_days):
        self.grid = grid
        self.cfg = cfg
        self.times_days = tuple(times_days)
        self.n_evals = 0

    @property
    def n_data(self) -> int:
        return len(self.times_days) * self.cfg.n_wells

    def __call__(self, u_values: np.ndarray) -> np.ndarray:
        self.n_evals += 1
        traj = simulate(Field(self.grid, u_values), self.cfg)
        return measure_two_phase(traj, self.cfg, self.times_days)

    def field_call(self, u: Field) -> np.ndarray:
        return self(u.values)


class TwoPhaseModel:
    """Sequential-filter adapter; state v = concat(p, s)."""

    def __init__(self, grid: Grid2D, cfg: TwoPhaseConfig, times_days):
        self.grid = grid
        self.cfg = cfg
        self.times_days = tuple(times_days)
        step_times = cfg.step_times()
        self._bounds = [0.0] + list(self.times_days)
        for t in self.times_days:
            if np.min(np.abs(step_times - t)) > 1e-9 * max(1.0, t):
                raise ValueError(f"measurement time {t} d does not land on a pressure step")
        self.steps_per_run = len(step_times) - 1
        self._step_times = step_times

    @property
    def n_windows(self) -> int:
        return len(self.times_days)

    @property
    def n_wells(self) -> int:
        return self.cfg.n_wells

    @property
    def state_dim(self) -> int:
        return 2 * self.grid.n_cells

    def initial_state(self) -> np.ndarray:
        n = self.grid.n_cells
        return np.concatenate([np.full(n, self.cfg.initial_pressure),
                               np.full(n, self.cfg.initial_saturation)])

    def clamp_state(self, v: np.ndarray) -> np.ndarray:
        """Project analyzed saturations back into the physical range."""
        n = self.grid.n_cells
        rp = self.cfg.relperm
        out = v.copy()
        out[n:] = np.clip(v[n:], rp.s_min, rp.s_max)
        return out

    def window_steps(self, window: int) -> int:
        t0, t1 = self._bounds[window], self._bounds[window + 1]
        i0 = int(np.argmin(np.abs(self._step_times - t0)))
        i1 = int(np.argmin(np.abs(self._step_times - t1)))
        return i1 - i0

    def advance(self, u_values: np.ndarray, v: np.ndarray, window: int) -> np.ndarray:
        n = self.grid.n_cells
        kernel = _TwoPhaseKernel(self.grid, u_values, self.cfg)
        s = np.clip(v[n:], self.cfg.relperm.s_min, self.cfg.relperm.s_max)
        t0, t1 = self._bounds[window], self._bounds[window + 1]
        s = kernel.advance_window(s, t0, t1)
        p, _ = kernel.solve_pressure(s, t1)
        return np.concatenate([p, s])

    def measure_state(self, u_values: np.ndarray, v: np.ndarray, window: int) -> np.ndarray:
        n = self.grid.n_cells
        kernel = _TwoPhaseKernel(self.grid, u_values, self.cfg)
        rp = self.cfg.relperm
        p = v[:n]
        s = np.clip(v[n:], rp.s_min, rp.s_max)
        t = self._bounds[window + 1]
        q_inj, bhp, active = kernel.controls(t)
        lam_inj = rp.lambda_total(s[kernel.inj_cells])
        inj_bhp = q_inj / (kernel.inj_omega * lam_inj) + p[kernel.inj_cells]
        lam_prod = rp.lambda_total(s[kernel.prod_cells])
        rate = kernel.prod_omega * lam_prod * active * (bhp - p[kernel.prod_cells]) * DAY
        return np.concatenate([inj_bhp, rate])


def source_balance_residual(u: Field, s: Field, cfg: TwoPhaseConfig,
                            t_day: float = 0.0) -> float:
    """Relative residual of sum_injectors q + sum_producers omega lam (Pbh - p) = 0."""
    kernel = _TwoPhaseKernel(u.grid, u.values, cfg)
    p, rate = kernel.solve_pressure(s.values, t_day)
    q_inj, _, _ = kernel.controls(t_day)
    total_in = q_inj.sum()
    scale = abs(total_in) + np.abs(rate).sum() + 1e-300
    return float(abs(total_in + rate.sum()) / scale)
