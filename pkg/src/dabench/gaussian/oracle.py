"""Closed-form Gaussian conditioning, used as the validation oracle for the
linear case in which every estimator here samples the exact posterior."""

from __future__ import annotations

import numpy as np

from ..prior import GaussianPrior


def linear_gaussian_posterior(B: np.ndarray, prior_mean: np.ndarray,
                              prior_cov: np.ndarray, y: np.ndarray,
                              gamma: np.ndarray):
    """Posterior mean and covariance for y = B u + eta, eta ~ N(0, diag(gamma)).

    Returns (mean, covariance).  Raises on a singular innovation covariance.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    prior_mean = np.asarray(prior_mean, dtype=float).reshape(-1)
    prior_cov = np.atleast_2d(np.asarray(prior_cov, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    s = B @ prior_cov @ B.T + np.diag(gamma)
    try:
        k = np.linalg.solve(s, B @ prior_cov).T
    except np.linalg.LinAlgError:
        raise ValueError("singular innovation covariance") from None
    mean = prior_mean + k @ (y - B @ prior_mean)
    cov = prior_cov - k @ B @ prior_cov
    return mean, 0.5 * (cov + cov.T)


def prior_covariance_matrix(prior: GaussianPrior) -> np.ndarray:
    """Dense cell-space prior covariance E diag(lam) E^T (small grids only)."""
    k = prior.n_modes
    modes = prior.basis.values_from_spectral(np.eye(k))  # (K, n_cells)
    return modes.T @ (prior.eigenvalues[:, None] * modes)
