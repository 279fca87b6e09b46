import numpy as np
import pytest

from dabench.fd import central_jacobian, directional_difference
from dabench.grids import Field, Grid2D, constant_field
from dabench.prior import GaussianPrior
from dabench.singlephase import (
    MeasurementSchedule,
    PressureTrajectory,
    RateSchedule,
    SinglePhaseConfig,
    SinglePhaseForward,
    WellLocation,
    WellSpec,
    constant_rate,
    forward_G,
    jacobian_fd,
    mass_balance_residuals,
    measure,
    simulate,
)


def make_cfg(wells, horizon=10.0, dt=1.0, c=1e-8, phi=0.2, p0=3.5e7):
    return SinglePhaseConfig(
        compressibility=c,
        porosity=phi,
        initial_pressure=p0,
        horizon_days=horizon,
        dt_days=dt,
        wells=tuple(wells),
    )


def heterogeneous_u(grid, seed=0, mean=-20.0, kappa=0.5):
    prior = GaussianPrior(constant_field(grid, mean), kappa=kappa, alpha=1.3)
    return prior.sample(np.random.default_rng(seed))


def test_config_validation():
    with pytest.raises(ValueError):
        make_cfg([], horizon=10.0, dt=3.0)  # horizon not a multiple of dt
    with pytest.raises(ValueError):
        make_cfg([], c=0.0)
    with pytest.raises(ValueError):
        make_cfg([], phi=1.0)


def test_rate_schedule():
    sched = RateSchedule(((0.0, 85.0), (50.0, 0.0), (100.0, 60.0)))
    assert sched.value_at(0.0) == 85.0
    assert sched.value_at(49.9) == 85.0
    assert sched.value_at(51.0) == 0.0
    assert sched.value_at(125.0) == 60.0
    with pytest.raises(ValueError):
        RateSchedule(((5.0, 1.0),))  # does not cover t=0
    with pytest.raises(ValueError):
        RateSchedule(((0.0, 1.0), (0.0, 2.0)))


def test_no_wells_stays_at_initial_pressure():
    grid = Grid2D(8, 8, 1000.0)
    cfg = make_cfg([])
    traj = simulate(constant_field(grid, -20.0), cfg)
    np.testing.assert_allclose(traj.pressures, cfg.initial_pressure, rtol=1e-13)


def test_mass_balance_single_well():
    grid = Grid2D(10, 10, 1000.0)
    cfg = make_cfg([WellSpec("P1", 500.0, 500.0, constant_rate(85.0))])
    u = heterogeneous_u(grid, seed=3)
    traj = simulate(u, cfg)
    res = mass_balance_residuals(u, cfg, traj)
    assert np.all(res <= 1e-8)


def test_richardson_self_convergence_in_dt():
    # backward Euler is first order: consecutive dt-halving differences
    # shrink by a factor of about 2
    grid = Grid2D(8, 8, 640.0)
    u = heterogeneous_u(grid, seed=12, mean=-20.1)
    wells = [WellSpec("P1", 200.0, 320.0, constant_rate(40.0))]
    sols = {}
    for dt in (1.0, 0.5, 0.25):
        cfg = make_cfg(wells, horizon=4.0, dt=dt)
        sols[dt] = simulate(u, cfg).pressures[-1]
    d1 = np.linalg.norm(sols[1.0] - sols[0.5])
    d2 = np.linalg.norm(sols[0.5] - sols[0.25])
    assert d1 / d2 == pytest.approx(2.0, abs=0.4)


def test_measure_constant_trajectory():
    grid = Grid2D(8, 8, 1000.0)
    times = np.arange(11) * 1.0
    traj = PressureTrajectory(grid, times, np.full((11, grid.n_cells), 3.5e7))
    sched = MeasurementSchedule(
        times_days=(2.0, 5.0, 9.0),
        wells=(WellLocation("a", 300.0, 300.0), WellLocation("b", 700.0, 700.0)),
    )
    vec = measure(traj, sched)
    np.testing.assert_array_equal(vec, 3.5e7)
    assert vec.shape == (6,)


def test_measurement_vector_length_nine_wells_five_times():
    # paper layout: 9 production wells, times t1=5, tn=10n days
    grid = Grid2D(8, 8, 1000.0)
    times = np.arange(0, 21) * 2.5
    traj = PressureTrajectory(grid, times, np.tile(np.arange(21)[:, None], (1, grid.n_cells)).astype(float))
    wells = tuple(
        WellLocation(f"P{i*3+j+1}", 250.0 * (i + 1), 250.0 * (j + 1))
        for i in range(3)
        for j in range(3)
    )
    sched = MeasurementSchedule(times_days=(5.0, 20.0, 30.0, 40.0, 50.0), wells=wells)
    vec = measure(traj, sched)
    assert vec.shape == (45,)


def test_measure_well_permutation_permutes_blocks():
    grid = Grid2D(8, 8, 1000.0)
    times = np.arange(6) * 1.0
    rng = np.random.default_rng(0)
    traj = PressureTrajectory(grid, times, rng.normal(size=(6, grid.n_cells)))
    wells = (
        WellLocation("a", 150.0, 150.0),
        WellLocation("b", 500.0, 500.0),
        WellLocation("c", 850.0, 850.0),
    )
    sched = MeasurementSchedule(times_days=(2.0, 4.0), wells=wells)
    perm = (2, 0, 1)
    sched_p = MeasurementSchedule(times_days=(2.0, 4.0), wells=tuple(wells[i] for i in perm))
    v = measure(traj, sched).reshape(2, 3)
    v_p = measure(traj, sched_p).reshape(2, 3)
    np.testing.assert_array_equal(v_p, v[:, perm])


def test_measure_rejects_off_grid_time():
    grid = Grid2D(8, 8, 1000.0)
    traj = PressureTrajectory(grid, np.arange(6) * 1.0, np.zeros((6, grid.n_cells)))
    sched = MeasurementSchedule(times_days=(2.5,), wells=(WellLocation("a", 500.0, 500.0),))
    with pytest.raises(ValueError):
        measure(traj, sched)


def default_problem(nx=8, seed=5):
    grid = Grid2D(nx, nx, 1000.0)
    wells = [
        WellSpec("P1", 300.0, 300.0, constant_rate(50.0)),
        WellSpec("P2", 700.0, 600.0, constant_rate(30.0)),
    ]
    cfg = make_cfg(wells, horizon=10.0, dt=2.0, c=1e-8)
    sched = MeasurementSchedule(
        times_days=(4.0, 10.0),
        wells=tuple(WellLocation(w.name, w.x, w.y) for w in wells),
    )
    u = heterogeneous_u(grid, seed=seed, mean=-20.5)
    return grid, cfg, sched, u


def test_forward_is_deterministic_and_pure():
    _, cfg, sched, u = default_problem()
    a = forward_G(u, cfg, sched)
    b = forward_G(u, cfg, sched)
    np.testing.assert_array_equal(a, b)


def test_forward_responds_to_uniform_shift():
    _, cfg, sched, u = default_problem()
    base = forward_G(u, cfg, sched)
    shifted = forward_G(u + 1.0, cfg, sched)
    assert not np.allclose(shifted, base)


def test_reflection_symmetry():
    # mirror-symmetric u, wells and p0 give a mirror-symmetric pressure
    grid = Grid2D(9, 6, 900.0)
    rng = np.random.default_rng(8)
    half = rng.normal(-20.0, 0.3, size=(5, 6))
    u_arr = np.concatenate([half, half[-2::-1]], axis=0)
    u = Field(grid, u_arr.ravel())
    cfg = make_cfg([WellSpec("C", 450.0, 250.0, constant_rate(20.0))], horizon=6.0, dt=2.0)
    traj = simulate(u, cfg)
    p = traj.pressures[-1].reshape(9, 6)
    np.testing.assert_allclose(p, p[::-1, :], rtol=1e-9)


def test_jacobian_linear_operator_hook():
    rng = np.random.default_rng(1)
    B = rng.normal(size=(4, 9))
    jac = central_jacobian(lambda x: B @ x, np.zeros(9), h=0.1)
    np.testing.assert_allclose(jac, B, atol=1e-12)


def test_jacobian_directional_agreement():
    _, cfg, sched, u = default_problem()
    Q = jacobian_fd(u, cfg, sched, h=0.01)
    rng = np.random.default_rng(2)
    fwd = SinglePhaseForward(u.grid, cfg, sched)
    d = rng.normal(size=u.grid.n_cells)
    d /= np.linalg.norm(d)
    oracle = directional_difference(fwd, u.values, d, h=0.01)
    assert np.linalg.norm(Q @ d - oracle) <= 1e-4 * np.linalg.norm(oracle)


def test_jacobian_second_order_in_h():
    _, cfg, sched, u = default_problem()
    fwd = SinglePhaseForward(u.grid, cfg, sched)
    rng = np.random.default_rng(4)
    d = rng.normal(size=u.grid.n_cells)
    d /= np.linalg.norm(d)
    oracle = directional_difference(fwd, u.values, d, h=0.005)
    errs = []
    for h in (0.4, 0.2):
        Q = jacobian_fd(u, cfg, sched, h=h)
        errs.append(np.linalg.norm(Q @ d - oracle))
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=1.2)


def test_forward_counts_evaluations():
    grid, cfg, sched, u = default_problem()
    fwd = SinglePhaseForward(grid, cfg, sched)
    fwd(u.values)
    fwd(u.values)
    assert fwd.n_evals == 2
