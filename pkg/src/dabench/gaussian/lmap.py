"""MAP estimation and the Gaussian linearization around it.

The posterior is approximated by N(u_map, C_map) with

    C_map = C - C Q^T (Q C Q^T + Gamma)^-1 Q C,

Q the forward Jacobian at the MAP point.  Everything is carried in the
prior-diagonal spectral coordinates, where C is diagonal and the factor
of C_map comes from one symmetric eigendecomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fd import central_jacobian
from ..grids import Field
from ..mcmc import Likelihood
from ..prior import GaussianPrior
from .levmar import LMOptions, LMResult, lm_minimize


def _grid_jacobian(lik: Likelihood, h: float):
    return lambda u_values: central_jacobian(lik.forward, u_values, h)


def _spectral_problem(prior: GaussianPrior, lik: Likelihood, jacobian, h: float):
    """Forward and Jacobian as functions of spectral coefficients."""
    basis = prior.basis
    mean = prior.mean.values
    jac_grid = jacobian if jacobian is not None else _grid_jacobian(lik, h)

    def g_fun(c):
        return np.asarray(lik.forward(mean + basis.values_from_spectral(c)))

    def jac_fun(c):
        q = np.asarray(jac_grid(mean + basis.values_from_spectral(c)))
        return basis.rows_to_modes(q)

    return g_fun, jac_fun


@dataclass
class MapResult:
    u: Field
    coeffs: np.ndarray
    b_matrix: np.ndarray  # spectral Jacobian at the returned point
    lm: LMResult


def map_estimate(prior: GaussianPrior, lik: Likelihood, opts: LMOptions,
                 jacobian=None) -> MapResult:
    """Minimize Phi(u, y) + 0.5 ||u - u_bar||_C^2 by Levenberg-Marquardt.

    `jacobian` optionally supplies grid-space forward Jacobians (defaults
    to central finite differences with opts.fd_step).  The returned
    objective never exceeds the value at the prior mean, where the
    iteration starts.
    """
    g_fun, jac_fun = _spectral_problem(prior, lik, jacobian, opts.fd_step)
    k = prior.n_modes
    lm = lm_minimize(g_fun, jac_fun, lik.y, lik.gamma, prior.eigenvalues,
                     np.zeros(k), np.zeros(k), opts)
    u = prior.mean + prior.basis.from_spectral(lm.coeffs)
    b_matrix = jac_fun(lm.coeffs)
    return MapResult(u=u, coeffs=lm.coeffs, b_matrix=b_matrix, lm=lm)


class CmapFactor:
    """Square-root factor of the linearized posterior covariance.

    Holds C_map = F F^T in spectral coordinates; samples and the pointwise
    variance field are reconstructed through the basis.
    """

    def __init__(self, prior: GaussianPrior, factor: np.ndarray):
        self.prior = prior
        self.factor = factor

    def spectral_covariance(self) -> np.ndarray:
        return self.factor @ self.factor.T

    def variance_field(self) -> Field:
        fields = self.prior.basis.values_from_spectral(self.factor.T)  # (K, n_cells)
        return Field(self.prior.grid, np.sum(fields**2, axis=0))

    def sample_values(self, n: int, rng) -> np.ndarray:
        z = rng.standard_normal((n, self.factor.shape[1]))
        return self.prior.basis.values_from_spectral(z @ self.factor.T)


def cmap(u_map: Field, prior: GaussianPrior, lik: Likelihood,
         jacobian=None, b_matrix=None, fd_step: float = 1e-2) -> CmapFactor:
    """Factor C_map at u_map; reuses a precomputed spectral Jacobian if given."""
    if b_matrix is None:
        jac_grid = jacobian if jacobian is not None else _grid_jacobian(lik, fd_step)
        q = np.asarray(jac_grid(u_map.values))
        b_matrix = prior.basis.rows_to_modes(q)
    lam = prior.eigenvalues
    w = b_matrix * lam[None, :]  # Q C in spectral coordinates
    s = w @ b_matrix.T
    s[np.diag_indices_from(s)] += lik.gamma
    c_sp = np.diag(lam) - w.T @ np.linalg.solve(s, w)
    vals, vecs = np.linalg.eigh(0.5 * (c_sp + c_sp.T))
    vals = np.clip(vals, 0.0, None)
    return CmapFactor(prior, vecs * np.sqrt(vals)[None, :])


def lmap_sample(u_map: Field, factor: CmapFactor, n: int, rng) -> list[Field]:
    """n draws from N(u_map, C_map)."""
    fluct = factor.sample_values(n, rng)
    grid = u_map.grid
    return [Field(grid, u_map.values + fluct[i]) for i in range(n)]
