"""MAP / LMAP / RML against closed-form and brute-force oracles."""

import numpy as np
import pytest

from dabench.errors import DivergenceError
from dabench.gaussian import (
    LMOptions,
    cmap,
    linear_gaussian_posterior,
    lm_minimize,
    lmap_sample,
    map_estimate,
    prior_covariance_matrix,
    rml_sample,
    rml_solve_member,
)
from dabench.grids import Grid2D, constant_field
from dabench.mcmc import Likelihood
from dabench.prior import GaussianPrior

from .oracles import gaussian_condition

OPTS = LMOptions()
# near-exact settings for tests that compare against closed forms
TIGHT = LMOptions(initial_damping=1e-6, damping_decrease=100.0,
                  rel_objective_tol=1e-13, rel_step_tol=1e-11, max_iterations=80)


def small_prior(n=4, kappa=1.0, alpha=1.2, mean=0.0):
    grid = Grid2D(n, n, 1.0)
    return GaussianPrior(constant_field(grid, mean), kappa=kappa, alpha=alpha)


def linear_problem(seed=0, n=4, n_data=4, noise_scale=0.5):
    prior = small_prior(n)
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(n_data, prior.grid.n_cells))
    cov = prior_covariance_matrix(prior)
    sig = noise_scale * np.sqrt(np.diag(B @ cov @ B.T))
    gamma = sig**2
    truth = prior.sample(rng)
    y = B @ truth.values + sig * rng.standard_normal(n_data)
    lik = Likelihood(y, gamma, lambda v: B @ v)
    jac = lambda v: B
    return prior, lik, B, jac, cov


# ---------------------------------------------------------------- lm core


def test_lm_scalar_linear_matches_analytic_posterior_mean():
    # minimize 0.5 (y - b c)^2 / gamma + 0.5 c^2 / lam:
    # c* = lam b y / (b^2 lam + gamma)
    y, b, gamma, lam = 2.0, 1.5, 0.5, 2.0
    res = lm_minimize(lambda c: b * c, lambda c: np.array([[b]]),
                      np.array([y]), np.array([gamma]), np.array([lam]),
                      np.zeros(1), np.zeros(1), TIGHT)
    expected = lam * b * y / (b * b * lam + gamma)
    assert res.coeffs[0] == pytest.approx(expected, rel=1e-8)


def test_lm_converges_fast_for_linear_maps():
    prior, lik, B, jac, _ = linear_problem()
    res = map_estimate(prior, lik, TIGHT, jacobian=jac)
    assert res.lm.iterations <= 3
    assert res.lm.converged
    damped = map_estimate(prior, lik, OPTS, jacobian=jac)
    assert damped.lm.converged


def test_lm_scalar_cubic_against_grid_search():
    # tight prior keeps the objective unimodal near the anchor
    y, gamma, lam = 1.5, 0.1, 0.05
    g = lambda c: c**3
    jac = lambda c: np.array([[3.0 * c[0] ** 2]])
    res = lm_minimize(g, jac, np.array([y]), np.array([gamma]), np.array([lam]),
                      np.array([1.0]), np.array([1.0]), LMOptions(max_iterations=60))
    grid = np.linspace(0.0, 2.0, 2_000_001)
    j = 0.5 * (y - grid**3) ** 2 / gamma + 0.5 * (grid - 1.0) ** 2 / lam
    brute = grid[np.argmin(j)]
    assert res.coeffs[0] == pytest.approx(brute, abs=1e-4)


def test_lm_divergence_error_on_bad_jacobian():
    # a wrong-sign Jacobian makes every damped step uphill
    g = lambda c: np.array([c[0]])
    bad_jac = lambda c: np.array([[-1.0]])
    with pytest.raises(DivergenceError):
        lm_minimize(g, bad_jac, np.array([3.0]), np.array([0.1]), np.array([1.0]),
                    np.zeros(1), np.zeros(1), LMOptions(max_retries=4))


# ---------------------------------------------------------------- map / cmap


def test_map_matches_linear_gaussian_mean():
    prior, lik, B, jac, cov = linear_problem(seed=3)
    res = map_estimate(prior, lik, TIGHT, jacobian=jac)
    mean, _ = linear_gaussian_posterior(B, prior.mean.values, cov, lik.y, lik.gamma)
    np.testing.assert_allclose(res.u.values, mean, atol=1e-6 * np.abs(mean).max())


def test_map_returns_prior_mean_for_exact_data():
    prior, lik, B, jac, _ = linear_problem(seed=4)
    lik0 = Likelihood(B @ prior.mean.values, lik.gamma, lik.forward)
    res = map_estimate(prior, lik0, OPTS, jacobian=jac)
    np.testing.assert_allclose(res.u.values, prior.mean.values, atol=1e-12)
    assert res.lm.objective <= 1e-20


def test_map_objective_never_exceeds_start_and_gradient_shrinks():
    prior, lik, B, jac, _ = linear_problem(seed=5, noise_scale=0.3)
    res = map_estimate(prior, lik, TIGHT, jacobian=jac)
    phi0 = lik.phi(prior.mean)
    assert res.lm.objective <= phi0
    # finite-difference gradient of J in whitened coordinates at the solution
    lam = prior.eigenvalues

    def j_of(c):
        u = prior.mean.values + prior.basis.values_from_spectral(c)
        r = lik.y - lik.forward(u)
        return 0.5 * np.sum(r**2 / lik.gamma) + 0.5 * np.sum(c**2 / lam)

    def whitened_grad(c):
        g = np.zeros_like(c)
        h = 1e-6
        for k in range(c.size):
            cp, cm = c.copy(), c.copy()
            cp[k] += h
            cm[k] -= h
            g[k] = (j_of(cp) - j_of(cm)) / (2 * h)
        return g * np.sqrt(lam)

    g_end = np.linalg.norm(whitened_grad(res.coeffs))
    g_start = np.linalg.norm(whitened_grad(np.zeros(prior.n_modes)))
    assert g_end <= 1e-3 * g_start


def test_cmap_with_zero_jacobian_returns_prior_covariance():
    prior = small_prior()
    lik = Likelihood(np.zeros(3), np.ones(3), lambda v: np.zeros(3))
    factor = cmap(prior.mean, prior, lik,
                  b_matrix=np.zeros((3, prior.n_modes)))
    np.testing.assert_allclose(factor.spectral_covariance(),
                               np.diag(prior.eigenvalues), atol=1e-14)


def test_cmap_large_noise_limit_returns_prior_covariance():
    prior, lik, B, jac, _ = linear_problem(seed=6)
    big = Likelihood(lik.y, lik.gamma * 1e14, lik.forward)
    factor = cmap(prior.mean, prior, big, jacobian=jac)
    np.testing.assert_allclose(factor.spectral_covariance(),
                               np.diag(prior.eigenvalues),
                               atol=1e-6 * prior.eigenvalues.max())


def test_cmap_matches_independent_conditioning_oracle():
    prior, lik, B, jac, cov = linear_problem(seed=7)
    factor = cmap(prior.mean, prior, lik, jacobian=jac)
    _, cov_post = gaussian_condition(prior.mean.values, cov, B, lik.y, lik.gamma)
    modes = prior.basis.values_from_spectral(np.eye(prior.n_modes))
    cell_cov = modes.T @ factor.spectral_covariance() @ modes
    np.testing.assert_allclose(cell_cov, cov_post, atol=1e-10 * np.abs(cov_post).max())
    np.testing.assert_allclose(factor.variance_field().values, np.diag(cov_post),
                               rtol=1e-8)


def test_scalar_conditioning_arithmetic():
    mean, cov = linear_gaussian_posterior(np.array([[1.0]]), np.zeros(1),
                                          np.ones((1, 1)), np.array([2.0]),
                                          np.ones(1))
    assert mean[0] == pytest.approx(1.0, rel=1e-14)
    assert cov[0, 0] == pytest.approx(0.5, rel=1e-14)


def test_linear_gaussian_posterior_trivials():
    prior = small_prior()
    cov = prior_covariance_matrix(prior)
    mean, post_cov = linear_gaussian_posterior(
        np.zeros((2, prior.grid.n_cells)), prior.mean.values, cov,
        np.zeros(2), np.ones(2))
    np.testing.assert_allclose(mean, prior.mean.values, atol=1e-14)
    np.testing.assert_allclose(post_cov, cov, atol=1e-14)


# ---------------------------------------------------------------- lmap draws


class _ZeroRng:
    def standard_normal(self, shape):
        return np.zeros(shape)


def test_lmap_zero_noise_stream_returns_map():
    prior, lik, B, jac, _ = linear_problem(seed=8)
    res = map_estimate(prior, lik, OPTS, jacobian=jac)
    factor = cmap(res.u, prior, lik, b_matrix=res.b_matrix)
    samples = lmap_sample(res.u, factor, 5, _ZeroRng())
    for s in samples:
        np.testing.assert_array_equal(s.values, res.u.values)


def test_lmap_sample_variance_matches_cmap_diagonal():
    prior, lik, B, jac, _ = linear_problem(seed=9)
    res = map_estimate(prior, lik, OPTS, jacobian=jac)
    factor = cmap(res.u, prior, lik, b_matrix=res.b_matrix)
    rng = np.random.default_rng(123)
    samples = lmap_sample(res.u, factor, 10_000, rng)
    stack = np.stack([s.values for s in samples])
    target = factor.variance_field().values
    emp = stack.var(axis=0, ddof=1)
    for cell in (0, 5, 10, 15):
        assert emp[cell] == pytest.approx(target[cell], rel=0.05)
    np.testing.assert_allclose(stack.mean(axis=0), res.u.values,
                               atol=4 * np.sqrt(target.max() / 10_000) * 3)


# ---------------------------------------------------------------- rml


def test_rml_member_with_consistent_data_returns_anchor():
    prior, lik, B, jac, _ = linear_problem(seed=10)
    rng = np.random.default_rng(0)
    u_anchor = prior.sample(rng)
    lik_j = lik.with_data(B @ u_anchor.values)
    res = rml_solve_member(prior, lik_j, u_anchor, OPTS, jacobian=jac)
    c_anchor = prior.basis.to_spectral(u_anchor - prior.mean)
    np.testing.assert_allclose(res.coeffs, c_anchor, atol=1e-10)
    assert res.objective <= 1e-18


def test_rml_samples_linear_posterior():
    prior, lik, B, jac, cov = linear_problem(seed=11, noise_scale=0.4)
    rng = np.random.default_rng(2)
    out = rml_sample(prior, lik, 4000, TIGHT, rng, jacobian=jac)
    assert out.n_failed == 0
    mean, cov_post = linear_gaussian_posterior(B, prior.mean.values, cov,
                                               lik.y, lik.gamma)
    stack = np.stack([m.values for m in out.members])
    est_mean = stack.mean(axis=0)
    est_var = stack.var(axis=0, ddof=1)
    scale = np.linalg.norm(mean - prior.mean.values)
    assert np.linalg.norm(est_mean - mean) <= 0.05 * scale
    assert np.linalg.norm(est_var - np.diag(cov_post)) <= 0.08 * np.linalg.norm(
        np.diag(cov_post))
    print(f"RML mean LM iterations: {out.lm_iterations.mean():.2f}")


def test_rml_divergent_members_are_excluded_and_counted():
    prior, lik, B, jac, _ = linear_problem(seed=12)
    bad_jac = lambda v: -B  # wrong sign: every member diverges
    rng = np.random.default_rng(3)
    out = rml_sample(prior, lik, 5, LMOptions(max_retries=3), rng, jacobian=bad_jac)
    assert out.n_failed == 5
    assert out.members == []
