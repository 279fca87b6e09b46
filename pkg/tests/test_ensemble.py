"""EnKF / EnSRF updates, the mean-preserving rotation and localization."""

import numpy as np
import pytest

from dabench.gaussian import (
    EnsembleZ,
    build_localization,
    enkf_analyze,
    enkf_predict,
    ensrf_analyze,
    gaspari_cohn,
    initial_ensemble,
    mean_preserving_rotation,
    sample_moments,
)
from dabench.gaussian.ensemble import _apply_rotation_transpose
from dabench.grids import Grid2D, constant_field
from dabench.prior import GaussianPrior
from dabench.singlephase import (
    MeasurementSchedule,
    SinglePhaseConfig,
    SinglePhaseModel,
    WellLocation,
    WellSpec,
    constant_rate,
)

GRID = Grid2D(4, 4, 1.0)


def toy_ensemble(n=6, n_w=3, dim_v=5, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n, GRID.n_cells))
    v = rng.normal(size=(n, dim_v))
    w = rng.normal(size=(n, n_w))
    return EnsembleZ(GRID, u, v, w), rng


def test_ensemble_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        EnsembleZ(GRID, rng.normal(size=(1, GRID.n_cells)),
                  rng.normal(size=(1, 2)), rng.normal(size=(1, 2)))
    with pytest.raises(ValueError):
        EnsembleZ(GRID, rng.normal(size=(3, GRID.n_cells)),
                  rng.normal(size=(2, 2)), rng.normal(size=(3, 2)))


def test_sample_moments_identical_members_vanish():
    row_u = np.arange(GRID.n_cells, dtype=float)
    ens = EnsembleZ(GRID, np.tile(row_u, (4, 1)), np.ones((4, 2)), np.ones((4, 3)))
    mom = sample_moments(ens)
    assert np.all(mom.c_uw == 0) and np.all(mom.c_vw == 0) and np.all(mom.c_ww == 0)


def test_sample_moments_two_member_hand_case():
    rng = np.random.default_rng(1)
    w1, w2 = rng.normal(size=3), rng.normal(size=3)
    u = rng.normal(size=(2, GRID.n_cells))
    ens = EnsembleZ(GRID, u, np.zeros((2, 0)), np.stack([w1, w2]))
    mom = sample_moments(ens)
    dw = w1 - w2
    np.testing.assert_allclose(mom.c_ww, np.outer(dw, dw) / 2.0, rtol=1e-13)


def test_sample_moments_recover_generating_covariance():
    rng = np.random.default_rng(7)
    n_w = 3
    a = rng.normal(size=(n_w, n_w))
    cov = a @ a.T + np.eye(n_w)
    w = rng.multivariate_normal(np.zeros(n_w), cov, size=20_000)
    ens = EnsembleZ(GRID, rng.normal(size=(20_000, GRID.n_cells)),
                    np.zeros((20_000, 0)), w)
    mom = sample_moments(ens)
    assert np.linalg.norm(mom.c_ww - cov) <= 0.05 * np.linalg.norm(cov)


def test_enkf_analyze_zero_spread_does_nothing():
    row_u = np.linspace(0, 1, GRID.n_cells)
    ens = EnsembleZ(GRID, np.tile(row_u, (5, 1)), np.zeros((5, 2)),
                    np.tile(np.array([1.0, 2.0, 3.0]), (5, 1)))
    out = enkf_analyze(ens, np.array([2.0, 2.0, 2.0]), np.ones(3),
                       np.random.default_rng(0))
    np.testing.assert_array_equal(out.u, ens.u)
    np.testing.assert_array_equal(out.v, ens.v)


def test_enkf_analyze_huge_noise_does_almost_nothing():
    ens, _ = toy_ensemble()
    out = enkf_analyze(ens, np.zeros(3), np.full(3, 1e12),
                       np.random.default_rng(3))
    assert np.max(np.abs(out.u - ens.u)) < 1e-4


def test_enkf_one_step_matches_kalman_oracle():
    # scalar u observed directly: w = u; compare the analyzed first two
    # moments with the exact Kalman update
    rng = np.random.default_rng(11)
    n = 10_000
    prior_mean, prior_var, gamma, y = 1.0, 2.0, 0.5, 2.5
    u = prior_mean + np.sqrt(prior_var) * rng.standard_normal((n, 1))
    big_grid = Grid2D(2, 2, 1.0)
    u4 = np.tile(u, (1, 4))  # broadcast the scalar into a 4-cell field
    ens = EnsembleZ(big_grid, u4, np.zeros((n, 0)), u.copy())
    out = enkf_analyze(ens, np.array([y]), np.array([gamma]), rng)
    k = prior_var / (prior_var + gamma)
    post_mean = prior_mean + k * (y - prior_mean)
    post_var = (1 - k) * prior_var
    assert out.u[:, 0].mean() == pytest.approx(post_mean, abs=0.02 * np.sqrt(prior_var))
    assert out.u[:, 0].var(ddof=1) == pytest.approx(post_var, rel=0.05)


def test_ensrf_mean_preservation_and_covariance_identity():
    ens, rng = toy_ensemble(n=8, n_w=3, dim_v=4, seed=21)
    gamma = np.array([0.5, 1.0, 2.0])
    y = np.array([0.3, -0.2, 0.1])
    mom = sample_moments(ens)
    z = np.concatenate([ens.u, ens.v, ens.w], axis=1)
    dz = z - z.mean(axis=0)
    c_f = dz.T @ dz / (ens.n_members - 1)
    n_w = 3
    c_zw = c_f[:, -n_w:]
    s = c_f[-n_w:, -n_w:] + np.diag(gamma)
    gain = np.linalg.solve(s, c_zw.T).T
    expected_cov = c_f - gain @ c_zw.T  # (I - K H) C^f
    out = ensrf_analyze(ens, y, gamma, np.random.default_rng(5))
    z_a = np.concatenate([out.u, out.v, out.w], axis=1)
    dev_a = z_a - z_a.mean(axis=0)
    # mean preservation: deviations sum to zero
    assert np.max(np.abs(dev_a.sum(axis=0))) <= 1e-10 * np.abs(z_a).max()
    c_a = dev_a.T @ dev_a / (ens.n_members - 1)
    assert np.linalg.norm(c_a - expected_cov) <= 1e-8 * np.linalg.norm(expected_cov)
    # mean follows the standard gain update
    z_mean_expected = z.mean(axis=0) + gain @ (y - z.mean(axis=0)[-n_w:])
    np.testing.assert_allclose(z_a.mean(axis=0), z_mean_expected, rtol=1e-10)


def test_ensrf_huge_noise_keeps_sample_covariance():
    ens, _ = toy_ensemble(n=7, seed=2)
    gamma = np.full(3, 1e14)
    out = ensrf_analyze(ens, np.zeros(3), gamma, np.random.default_rng(9))
    z = np.concatenate([ens.u, ens.v, ens.w], axis=1)
    z_a = np.concatenate([out.u, out.v, out.w], axis=1)
    dz = z - z.mean(axis=0)
    dz_a = z_a - z_a.mean(axis=0)
    c_f = dz.T @ dz
    c_a = dz_a.T @ dz_a
    assert np.linalg.norm(c_a - c_f) <= 1e-6 * np.linalg.norm(c_f)


def test_mean_preserving_rotation_two_members():
    seen = set()
    for seed in range(12):
        theta = mean_preserving_rotation(2, np.random.default_rng(seed))
        if np.allclose(theta, np.eye(2), atol=1e-14):
            seen.add("identity")
        elif np.allclose(theta, np.array([[0.0, 1.0], [1.0, 0.0]]), atol=1e-14):
            seen.add("swap")
        else:
            raise AssertionError(f"unexpected rotation {theta}")
        np.testing.assert_allclose(theta @ np.ones(2), np.ones(2), atol=1e-14)
    assert seen == {"identity", "swap"}


def test_mean_preserving_rotation_properties():
    rng = np.random.default_rng(31)
    theta = mean_preserving_rotation(50, rng)
    assert np.max(np.abs(theta @ theta.T - np.eye(50))) <= 1e-12
    np.testing.assert_allclose(theta @ np.ones(50), np.ones(50), atol=1e-12)
    np.testing.assert_allclose(theta.sum(axis=0), np.ones(50), atol=1e-12)


def test_rotation_action_large_path_preserves_gram_and_zero_sum():
    rng = np.random.default_rng(4)
    n, d = 900, 6  # beyond the dense materialization cap
    dev = rng.normal(size=(n, d))
    dev -= dev.mean(axis=0)
    rotated = _apply_rotation_transpose(dev, rng)
    assert np.max(np.abs(rotated.sum(axis=0))) <= 1e-9
    np.testing.assert_allclose(rotated.T @ rotated, dev.T @ dev, rtol=1e-9)


def test_gaspari_cohn_values():
    assert gaspari_cohn(0.0, 2.0) == 1.0
    assert gaspari_cohn(4.0, 2.0) == 0.0
    assert gaspari_cohn(7.3, 2.0) == 0.0
    assert gaspari_cohn(2.0, 2.0) == pytest.approx(5.0 / 24.0, abs=1e-12)
    r = np.linspace(0, 5, 200)
    w = gaspari_cohn(r, 1.3)
    assert np.all((0.0 <= w) & (w <= 1.0))
    with pytest.raises(ValueError):
        gaspari_cohn(1.0, 0.0)
    with pytest.raises(ValueError):
        gaspari_cohn(-1.0, 1.0)


def test_build_localization_limits_and_psd():
    grid = Grid2D(10, 10, 1000.0)
    wells = [(200.0, 300.0), (800.0, 500.0), (400.0, 900.0)]
    wide = build_localization(grid, wells, 1e9)
    np.testing.assert_allclose(wide.rho_uw, 1.0, atol=1e-10)
    np.testing.assert_allclose(wide.rho_ww, 1.0, atol=1e-10)
    # wells 3c apart decorrelate entirely
    two = build_localization(grid, [(100.0, 500.0), (700.0, 500.0)], 200.0)
    assert two.rho_ww[0, 1] == 0.0
    assert two.rho_ww[0, 0] == 1.0
    rng = np.random.default_rng(17)
    for _ in range(5):
        pts = rng.uniform(50.0, 950.0, size=(6, 2))
        spec = build_localization(grid, [tuple(p) for p in pts], 250.0)
        eigs = np.linalg.eigvalsh(spec.rho_ww)
        assert eigs.min() >= -1e-12


def test_localized_gain_equals_unlocalized_for_unit_taper():
    ens, _ = toy_ensemble(n=9, n_w=2, dim_v=3, seed=6)
    grid = GRID
    loc = build_localization(grid, [(0.3, 0.3), (0.7, 0.7)], 1e9)
    y = np.array([0.1, -0.4])
    gamma = np.array([0.8, 0.6])
    a = enkf_analyze(ens, y, gamma, np.random.default_rng(8), loc=None)
    b = enkf_analyze(ens, y, gamma, np.random.default_rng(8), loc=loc)
    np.testing.assert_allclose(a.u, b.u, rtol=1e-10)
    c = ensrf_analyze(ens, y, gamma, np.random.default_rng(8), loc=None)
    d = ensrf_analyze(ens, y, gamma, np.random.default_rng(8), loc=loc)
    np.testing.assert_allclose(c.u, d.u, rtol=1e-10)


def _single_phase_model(grid):
    wells = (WellSpec("P1", 300.0, 300.0, constant_rate(40.0)),
             WellSpec("P2", 700.0, 600.0, constant_rate(25.0)))
    cfg = SinglePhaseConfig(compressibility=1e-8, porosity=0.2,
                            initial_pressure=3.5e7, horizon_days=8.0,
                            dt_days=2.0, wells=wells)
    sched = MeasurementSchedule(
        times_days=(4.0, 8.0),
        wells=tuple(WellLocation(w.name, w.x, w.y) for w in wells))
    return cfg, SinglePhaseModel(grid, cfg, sched)


def test_enkf_predict_keeps_u_and_matches_direct_simulation():
    grid = Grid2D(8, 8, 1000.0)
    cfg, model = _single_phase_model(grid)
    prior = GaussianPrior(constant_field(grid, -20.5), kappa=0.5, alpha=1.3)
    rng = np.random.default_rng(9)
    ens = initial_ensemble(prior, model, 3, rng)
    out = enkf_predict(ens, model, 0)
    np.testing.assert_array_equal(out.u, ens.u)
    # member 0 must match stepping the model directly (same code path)
    from dabench.singlephase import _Stepper

    stepper = _Stepper(grid, ens.u[0].reshape(8, 8), cfg)
    p = stepper.advance(model.initial_state(), 0, 2)
    np.testing.assert_array_equal(out.v[0], p)
    np.testing.assert_array_equal(out.w[0], model.measure_state(ens.u[0], out.v[0], 0))


def test_enkf_updates_stay_in_initial_u_span():
    grid = Grid2D(8, 8, 1000.0)
    cfg, model = _single_phase_model(grid)
    prior = GaussianPrior(constant_field(grid, -20.5), kappa=0.5, alpha=1.3)
    rng = np.random.default_rng(10)
    n_e = 5
    ens = initial_ensemble(prior, model, n_e, rng)
    u0 = ens.u.copy()
    y_obs = [np.array([3.4e7, 3.45e7]), np.array([3.3e7, 3.41e7])]
    gamma = np.full(2, (2e5) ** 2)
    for window in range(2):
        ens = enkf_predict(ens, model, window)
        ens = enkf_analyze(ens, y_obs[window], gamma, rng)
    dev0 = u0 - u0.mean(axis=0)
    updates = ens.u - u0
    before = np.linalg.matrix_rank(dev0, tol=1e-8 * np.abs(dev0).max())
    combined = np.concatenate([dev0, updates], axis=0)
    after = np.linalg.matrix_rank(combined, tol=1e-8 * np.abs(combined).max())
    assert after == before
