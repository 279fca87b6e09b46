"""Gaussian prior N(u_bar, C) with covariance C = kappa * A^(-alpha).

A is the Neumann Laplacian restricted to zero-average functions, so C is
diagonal in the cosine spectral basis with eigenvalues
lam_k = kappa * lam_A(k)^(-alpha).  The spatial-mean component of a draw
is fixed to that of the prior mean (zero prior variance).
"""

from __future__ import annotations

import numpy as np

from .grids import Field, SpectralBasis, _check_same_grid


class GaussianPrior:
    """Gaussian measure on fields, diagonalized by a SpectralBasis.

    Parameters
    ----------
    mean : Field
        Prior mean u_bar (carries the constant component of draws).
    kappa : float
        Covariance amplitude, > 0.
    alpha : float
        Spectral decay exponent, > 1 so that C is trace class on the
        2-D domain and draws are square integrable.
    basis : SpectralBasis, optional
        Defaults to the basis of the mean's grid.
    """

    def __init__(self, mean: Field, kappa: float, alpha: float, basis: SpectralBasis | None = None):
        if not kappa > 0:
            raise ValueError(f"kappa must be positive, got {kappa}")
        if not alpha > 1:
            raise ValueError(f"alpha must exceed 1, got {alpha}")
        self.mean = mean
        self.kappa = float(kappa)
        self.alpha = float(alpha)
        self.basis = basis if basis is not None else SpectralBasis(mean.grid)
        _check_same_grid(self.basis.grid, mean.grid)
        self.eigenvalues = self.kappa * self.basis.eigenvalues ** (-self.alpha)

    @property
    def grid(self):
        return self.mean.grid

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes

    def sample(self, rng: np.random.Generator) -> Field:
        """One draw u_bar + sum_k sqrt(lam_k) xi_k e_k with xi_k iid standard normal."""
        xi = rng.standard_normal(self.n_modes)
        return self.mean + self.basis.from_spectral(np.sqrt(self.eigenvalues) * xi)

    def sample_values(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n draws as a (n, n_cells) value array (same law as sample)."""
        xi = rng.standard_normal((n, self.n_modes))
        fluct = self.basis.values_from_spectral(np.sqrt(self.eigenvalues) * xi)
        return self.mean.values + fluct

    def c_norm_sq(self, f: Field) -> float:
        """Squared Cameron-Martin norm ||C^(-1/2) f||^2 = sum_k c_k^2 / lam_k.

        Inputs with a nonzero spatial average carry infinite prior energy
        and are rejected.
        """
        _check_same_grid(f.grid, self.grid)
        mean = f.spatial_mean()
        scale = max(1.0, float(np.max(np.abs(f.values))))
        if abs(mean) > 1e-10 * scale:
            raise ValueError(f"nonzero spatial average {mean}: not in the Cameron-Martin space")
        c = self.basis.to_spectral(f)
        return float(np.sum(c**2 / self.eigenvalues))

    def energy_fraction(self, j: int) -> float:
        """Fraction of total prior energy in the j largest covariance eigenvalues."""
        if not 1 <= j <= self.n_modes:
            raise ValueError(f"J must be in [1, {self.n_modes}], got {j}")
        # eigenvalues are sorted descending (basis sorts lam_A ascending)
        return float(np.sum(self.eigenvalues[:j]) / np.sum(self.eigenvalues))

    def pointwise_variance(self) -> Field:
        """Marginal variance field sum_k lam_k e_k(x)^2."""
        var = np.zeros(self.grid.n_cells)
        for k in range(self.n_modes):
            e_k = self.basis.mode_field(k).values
            var += self.eigenvalues[k] * e_k**2
        return Field(self.grid, var)

    def whiten(self, f: Field) -> np.ndarray:
        """Coefficients of f in the prior-whitened basis, c_k / sqrt(lam_k)."""
        return self.basis.to_spectral(f) / np.sqrt(self.eigenvalues)
