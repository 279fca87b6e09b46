"""dabench: a desk-scale benchmark lab for Gaussian data-assimilation
approximations (MAP linearization, randomized maximum likelihood, ensemble
Kalman and square-root filters, with localization) measured against a
fully resolved pCN-MCMC posterior on 2-D subsurface-flow inverse problems.
"""

from . import diagnostics, gaussian, grids, mcmc, prior, singlephase, twophase
from .grids import Field, Grid2D, SpectralBasis
from .mcmc import Likelihood, PosteriorMoments, posterior_moments, run_chain
from .observations import ObservationSet
from .prior import GaussianPrior

__version__ = "0.1.0"

__all__ = [
    "Field",
    "GaussianPrior",
    "Grid2D",
    "Likelihood",
    "ObservationSet",
    "PosteriorMoments",
    "SpectralBasis",
    "diagnostics",
    "gaussian",
    "grids",
    "mcmc",
    "posterior_moments",
    "prior",
    "run_chain",
    "singlephase",
    "twophase",
]
