"""Gaussian approximations of the Bayesian posterior: LMAP, RML, EnKF and
EnSRF, with distance-based localization and the linear-case oracle."""

from .ensemble import (
    AugmentedState,
    EnsembleError,
    EnsembleZ,
    enkf_analyze,
    enkf_predict,
    ensrf_analyze,
    initial_ensemble,
    mean_preserving_rotation,
    sample_moments,
)
from .levmar import LMOptions, LMResult, lm_minimize
from .lmap import CmapFactor, MapResult, cmap, lmap_sample, map_estimate
from .localization import LocalizationSpec, build_localization, gaspari_cohn
from .oracle import linear_gaussian_posterior, prior_covariance_matrix
from .rml import RmlResult, rml_sample, rml_solve_member

__all__ = [
    "AugmentedState",
    "CmapFactor",
    "EnsembleError",
    "EnsembleZ",
    "LMOptions",
    "LMResult",
    "LocalizationSpec",
    "MapResult",
    "RmlResult",
    "build_localization",
    "cmap",
    "enkf_analyze",
    "enkf_predict",
    "ensrf_analyze",
    "gaspari_cohn",
    "initial_ensemble",
    "linear_gaussian_posterior",
    "lm_minimize",
    "lmap_sample",
    "map_estimate",
    "mean_preserving_rotation",
    "prior_covariance_matrix",
    "rml_sample",
    "rml_solve_member",
    "sample_moments",
]
