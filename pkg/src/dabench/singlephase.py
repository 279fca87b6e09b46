"""Slightly compressible single-phase Darcy flow with rate-controlled wells.

Backward-Euler time stepping of

    c phi dp/dt - div( e^u grad p ) = sum_l q_l delta(x - x_l)

with no-flow boundaries, two-point flux approximation and harmonic-mean
face coefficients.  Dirac well sources are mollified as uniform sources
over the containing cell, so the total rate is grid independent.
Production rates are entered as positive numbers and applied with a
negative sign (wells withdraw fluid).

Units: configs carry days and m^3/day; the solver works in SI seconds.
e^u is the full flow coefficient (permeability over viscosity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .band import BandedOperator, face_transmissibilities
from .fd import central_jacobian
from .grids import Field, Grid2D
from .schedule import PiecewiseSchedule, constant_schedule

DAY = 86400.0

# a rate schedule is a piecewise-constant control in m^3/day
RateSchedule = PiecewiseSchedule


def constant_rate(rate: float) -> RateSchedule:
    return constant_schedule(rate)


@dataclass(frozen=True)
class WellSpec:
    """A rate-controlled well at a point strictly inside the domain."""

    name: str
    x: float
    y: float
    schedule: RateSchedule


@dataclass(frozen=True)
class WellLocation:
    name: str
    x: float
    y: float


@dataclass(frozen=True)
class SinglePhaseConfig:
    compressibility: float  # c [1/Pa]
    porosity: float
    initial_pressure: float  # p0 [Pa]
    horizon_days: float  # T
    dt_days: float
    wells: tuple[WellSpec, ...]

    def __post_init__(self):
        if not self.compressibility > 0:
            raise ValueError("compressibility must be positive")
        if not 0 < self.porosity < 1:
            raise ValueError("porosity must lie in (0, 1)")
        if not self.dt_days > 0:
            raise ValueError("time step must be positive")
        n = round(self.horizon_days / self.dt_days)
        if n < 1 or abs(n * self.dt_days - self.horizon_days) > 1e-9 * self.horizon_days:
            raise ValueError(
                f"horizon {self.horizon_days} d is not a multiple of dt {self.dt_days} d"
            )

    @property
    def n_steps(self) -> int:
        return round(self.horizon_days / self.dt_days)

    def step_times(self) -> np.ndarray:
        """Time grid 0, dt, ..., T in days."""
        return np.arange(self.n_steps + 1) * self.dt_days


@dataclass(frozen=True)
class MeasurementSchedule:
    times_days: tuple[float, ...]
    wells: tuple[WellLocation, ...]

    def __post_init__(self):
        t = self.times_days
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("measurement times must be strictly increasing")
        if t and t[0] <= 0:
            raise ValueError("measurement times must be positive")

    @property
    def n_times(self) -> int:
        return len(self.times_days)

    @property
    def n_wells(self) -> int:
        return len(self.wells)

    @property
    def n_data(self) -> int:
        return self.n_times * self.n_wells


class PressureTrajectory:
    """Pressure at every backward-Euler step, shape (n_steps + 1, n_cells)."""

    def __init__(self, grid: Grid2D, times_days: np.ndarray, pressures: np.ndarray):
        self.grid = grid
        self.times_days = times_days
        self.pressures = pressures

    def step_of(self, t_day: float) -> int:
        idx = int(np.argmin(np.abs(self.times_days - t_day)))
        if abs(self.times_days[idx] - t_day) > 1e-9 * max(1.0, abs(t_day)):
            raise ValueError(f"time {t_day} d does not land on a solver step")
        return idx

    def at_time(self, t_day: float) -> Field:
        return Field(self.grid, self.pressures[self.step_of(t_day)])


def well_cells(grid: Grid2D, wells) -> np.ndarray:
    """Flat cell index of each well; locations must be strictly inside D."""
    return np.array([grid.flat_index(*grid.cell_of(w.x, w.y)) for w in wells], dtype=int)


class _Stepper:
    """One factorization of (c phi |cell|/dt) I + A(u), reused across steps.

    Per-step source vectors depend only on the schedules, so they are
    precomputed once and shared when a precomputed list is supplied.
    """

    def __init__(self, grid: Grid2D, u_arr: np.ndarray, cfg: SinglePhaseConfig,
                 sources: np.ndarray | None = None):
        self.grid = grid
        self.cfg = cfg
        self.accum = cfg.compressibility * cfg.porosity * grid.cell_area / (cfg.dt_days * DAY)
        tx, ty = face_transmissibilities(grid, np.exp(u_arr))
        self.op = BandedOperator(grid, tx, ty, np.full((grid.nx, grid.ny), self.accum))
        self.op.factor()
        self.cells = well_cells(grid, cfg.wells)
        self.sources = sources if sources is not None else step_sources(grid, cfg)

    def advance(self, p: np.ndarray, step_a: int, step_b: int, record=None) -> np.ndarray:
        for n in range(step_a, step_b):
            rhs = self.accum * p + self.sources[n]
            p = self.op.solve(rhs, step=n + 1)
            if record is not None:
                record[n + 1 - step_a] = p
        return p


def step_sources(grid: Grid2D, cfg: SinglePhaseConfig) -> np.ndarray:
    """Net source per cell and step in m^3/s; production rates withdraw fluid.

    Rates are evaluated at step midpoints, exact for schedules whose
    breakpoints land on the step grid.
    """
    cells = well_cells(grid, cfg.wells)
    q = np.zeros((cfg.n_steps, grid.n_cells))
    for n in range(cfg.n_steps):
        t_mid = (n + 0.5) * cfg.dt_days
        for cell, well in zip(cells, cfg.wells):
            q[n, cell] -= well.schedule.value_at(t_mid) / DAY
    return q


def simulate(u: Field, cfg: SinglePhaseConfig) -> PressureTrajectory:
    """Run the backward-Euler solver over [0, T] and return p at every step."""
    stepper = _Stepper(u.grid, u.as_array(), cfg)
    n = cfg.n_steps
    record = np.empty((n + 1, u.grid.n_cells))
    record[0] = np.full(u.grid.n_cells, cfg.initial_pressure)
    stepper.advance(record[0], 0, n, record=record)
    return PressureTrajectory(u.grid, cfg.step_times(), record)


def measure(traj: PressureTrajectory, sched: MeasurementSchedule) -> np.ndarray:
    """Stack well pressures time-major then well-major: (M_1, ..., M_NM)."""
    cells = well_cells(traj.grid, sched.wells)
    steps = [traj.step_of(t) for t in sched.times_days]
    return np.concatenate([traj.pressures[s][cells] for s in steps])


def forward_G(u: Field, cfg: SinglePhaseConfig, sched: MeasurementSchedule) -> np.ndarray:
    """Forward operator: stacked well pressures at the measurement times."""
    return measure(simulate(u, cfg), sched)


class SinglePhaseForward:
    """Picklable forward-operator handle on raw value vectors, with an eval counter."""

    def __init__(self, grid: Grid2D, cfg: SinglePhaseConfig, sched: MeasurementSchedule):
        self.grid = grid
        self.cfg = cfg
        self.sched = sched
        self._cells = well_cells(grid, sched.wells)
        self._steps = [round(t / cfg.dt_days) for t in sched.times_days]
        for t, s in zip(sched.times_days, self._steps):
            if abs(s * cfg.dt_days - t) > 1e-9 * max(1.0, t):
                raise ValueError(f"measurement time {t} d does not land on a solver step")
        self.n_evals = 0

    @property
    def n_data(self) -> int:
        return self.sched.n_data

    def __call__(self, u_values: np.ndarray) -> np.ndarray:
        self.n_evals += 1
        stepper = _Stepper(self.grid, np.asarray(u_values).reshape(self.grid.nx, self.grid.ny),
                           self.cfg)
        p = np.full(self.grid.n_cells, self.cfg.initial_pressure)
        out = np.empty(self.sched.n_data)
        prev = 0
        for k, s in enumerate(self._steps):
            p = stepper.advance(p, prev, s)
            out[k * len(self._cells):(k + 1) * len(self._cells)] = p[self._cells]
            prev = s
        return out

    def field_call(self, u: Field) -> np.ndarray:
        return self(u.values)


def jacobian_fd(u: Field, cfg: SinglePhaseConfig, sched: MeasurementSchedule,
                h: float) -> np.ndarray:
    """Central finite-difference Jacobian of forward_G, one column per cell of u."""
    fwd = SinglePhaseForward(u.grid, cfg, sched)
    return central_jacobian(fwd, u.values, h)


class SinglePhaseModel:
    """Sequential-filter adapter: windowed propagation between measurement times."""

    def __init__(self, grid: Grid2D, cfg: SinglePhaseConfig, sched: MeasurementSchedule):
        self.grid = grid
        self.cfg = cfg
        self.sched = sched
        self._cells = well_cells(grid, sched.wells)
        bounds = [0] + [round(t / cfg.dt_days) for t in sched.times_days]
        for t, s in zip(sched.times_days, bounds[1:]):
            if abs(s * cfg.dt_days - t) > 1e-9 * max(1.0, t):
                raise ValueError(f"measurement time {t} d does not land on a solver step")
        self.window_bounds = bounds
        self.steps_per_run = cfg.n_steps

    @property
    def n_windows(self) -> int:
        return self.sched.n_times

    @property
    def n_wells(self) -> int:
        return len(self._cells)

    @property
    def state_dim(self) -> int:
        return self.grid.n_cells

    def initial_state(self) -> np.ndarray:
        return np.full(self.grid.n_cells, self.cfg.initial_pressure)

    def advance(self, u_values: np.ndarray, v: np.ndarray, window: int) -> np.ndarray:
        stepper = _Stepper(self.grid, np.asarray(u_values).reshape(self.grid.nx, self.grid.ny),
                           self.cfg)
        return stepper.advance(v, self.window_bounds[window], self.window_bounds[window + 1])

    def window_steps(self, window: int) -> int:
        return self.window_bounds[window + 1] - self.window_bounds[window]

    def measure_state(self, u_values: np.ndarray, v: np.ndarray, window: int) -> np.ndarray:
        return v[self._cells]

    def clamp_state(self, v: np.ndarray) -> np.ndarray:
        return v


def mass_balance_residuals(u: Field, cfg: SinglePhaseConfig,
                           traj: PressureTrajectory) -> np.ndarray:
    """Relative residual of c*phi*integral(p) dx = c*phi*|D|*p0 + cumulative source, per step."""
    grid = traj.grid
    cphi = cfg.compressibility * cfg.porosity
    vol = grid.cell_area
    cells = well_cells(grid, cfg.wells)
    stored0 = cphi * vol * traj.pressures[0].sum()
    scale = abs(stored0) + 1e-300
    injected = 0.0
    res = np.zeros(cfg.n_steps)
    for n in range(cfg.n_steps):
        t_mid = (n + 0.5) * cfg.dt_days
        net = 0.0
        for cell, w in zip(cells, cfg.wells):
            net -= w.schedule.value_at(t_mid) / DAY
        injected += net * cfg.dt_days * DAY
        stored = cphi * vol * traj.pressures[n + 1].sum()
        res[n] = abs(stored - stored0 - injected) / scale
    return res
