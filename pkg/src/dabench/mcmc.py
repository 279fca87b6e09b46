"""Preconditioned Crank-Nicolson MCMC for the function-space posterior.

The proposal v = sqrt(1-beta^2) u + (1 - sqrt(1-beta^2)) u_bar + beta xi
with xi ~ N(0, C) is prior reversible, so the acceptance probability
min{1, exp(Phi(u) - Phi(v))} involves only data-misfit differences and the
chain remains well defined as the grid is refined.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import CflError, SolverError
from .grids import Field
from .prior import GaussianPrior

log = logging.getLogger(__name__)


class Likelihood:
    """Data misfit Phi(u, y) = 0.5 ||y - G(u)||^2_Gamma with diagonal Gamma.

    Parameters
    ----------
    y : array
        Observed data vector.
    gamma : array
        Per-component noise variances (diagonal of Gamma), all positive.
    forward : callable
        Maps a flat parameter-value vector to the model data vector.
    """

    def __init__(self, y, gamma, forward):
        self.y = np.asarray(y, dtype=float).reshape(-1)
        self.gamma = np.asarray(gamma, dtype=float).reshape(-1)
        if self.gamma.shape != self.y.shape:
            raise ValueError("noise variance vector must match the data length")
        if np.any(self.gamma <= 0):
            raise ValueError("noise variances must be positive")
        self.forward = forward

    @property
    def n_data(self) -> int:
        return self.y.size

    def phi_values(self, u_values: np.ndarray) -> float:
        if self.n_data == 0:
            return 0.0
        r = self.y - np.asarray(self.forward(u_values)).reshape(-1)
        return 0.5 * float(np.sum(r * r / self.gamma))

    def phi(self, u: Field) -> float:
        return self.phi_values(u.values)

    def with_data(self, y) -> "Likelihood":
        return Likelihood(y, self.gamma, self.forward)


@dataclass(frozen=True)
class ChainState:
    u: Field
    phi: float
    step_count: int
    accept_count: int
    beta: float

    def __post_init__(self):
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / self.step_count if self.step_count else 0.0


def chain_state(u: Field, lik: Likelihood, beta: float) -> ChainState:
    return ChainState(u=u, phi=lik.phi(u), step_count=0, accept_count=0, beta=beta)


def pcn_propose(u: Field, prior: GaussianPrior, beta: float,
                rng: np.random.Generator) -> Field:
    """Draw the pCN proposal; beta = 1 reduces to an independent prior draw."""
    xi = prior.basis.from_spectral(
        np.sqrt(prior.eigenvalues) * rng.standard_normal(prior.n_modes))
    contract = np.sqrt(1.0 - beta * beta)
    return Field(u.grid, contract * u.values + (1.0 - contract) * prior.mean.values
                 + beta * xi.values)


def pcn_step(state: ChainState, prior: GaussianPrior, lik: Likelihood,
             rng: np.random.Generator) -> ChainState:
    """One Metropolis step; on rejection only the counters change.

    A forward-solver failure on the proposal counts as a rejection and is
    logged, preserving chain validity when failures are measure-zero
    pathologies.
    """
    v = pcn_propose(state.u, prior, state.beta, rng)
    unif = rng.random()
    try:
        phi_v = lik.phi(v)
    except (SolverError, CflError) as exc:
        log.warning("forward solve failed on pCN proposal, rejecting: %s", exc)
        return replace(state, step_count=state.step_count + 1)
    log_a = state.phi - phi_v
    if log_a >= 0.0 or unif < np.exp(log_a):
        return ChainState(u=v, phi=phi_v, step_count=state.step_count + 1,
                          accept_count=state.accept_count + 1, beta=state.beta)
    return replace(state, step_count=state.step_count + 1)


@dataclass
class ChainResult:
    samples: list[Field]
    acceptance_rate: float
    phi_trace: np.ndarray
    accept_trace: np.ndarray
    coeff_trace: np.ndarray  # (n_steps, n_trace_modes) spectral coefficients
    n_forward_evals: int


def run_chain(init: Field, n_steps: int, burn_in: int, thin: int,
              prior: GaussianPrior, lik: Likelihood, rng: np.random.Generator,
              beta: float, trace_modes: int = 0) -> ChainResult:
    """Run one pCN chain; returns post-burn-in thinned samples and traces.

    Samples are taken every `thin` post-burn-in steps, so
    thin = n_steps - burn_in yields exactly one sample.
    """
    if not n_steps > burn_in >= 0:
        raise ValueError("need n_steps > burn_in >= 0")
    if thin < 1:
        raise ValueError("thin must be at least 1")
    state = chain_state(init, lik, beta)
    samples: list[Field] = []
    phi_trace = np.empty(n_steps)
    accept_trace = np.zeros(n_steps, dtype=bool)
    coeff_trace = np.empty((n_steps, trace_modes))
    for i in range(1, n_steps + 1):
        prev_accepts = state.accept_count
        state = pcn_step(state, prior, lik, rng)
        phi_trace[i - 1] = state.phi
        accept_trace[i - 1] = state.accept_count > prev_accepts
        if trace_modes:
            coeff_trace[i - 1] = prior.basis.to_spectral(state.u)[:trace_modes]
        if i > burn_in and (i - burn_in) % thin == 0:
            samples.append(state.u)
    return ChainResult(samples=samples,
                       acceptance_rate=state.acceptance_rate,
                       phi_trace=phi_trace,
                       accept_trace=accept_trace,
                       coeff_trace=coeff_trace,
                       n_forward_evals=n_steps + 1)


@dataclass(frozen=True)
class PosteriorMoments:
    mean: Field
    variance: Field
    n_samples: int

    def __post_init__(self):
        if np.any(self.variance.values < 0):
            raise ValueError("variance field must be nonnegative")


def posterior_moments(samples) -> PosteriorMoments:
    """Pointwise sample mean and unbiased (1/(N-1)) variance of a field sequence."""
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("need at least two samples for moments")
    grid = samples[0].grid
    stack = np.stack([s.values for s in samples])
    mean = stack.mean(axis=0)
    var = stack.var(axis=0, ddof=1)
    return PosteriorMoments(Field(grid, mean), Field(grid, np.maximum(var, 0.0)),
                            len(samples))


def moments_from_values(grid, stack: np.ndarray) -> PosteriorMoments:
    """Moments from a (n_samples, n_cells) value array."""
    if stack.shape[0] < 2:
        raise ValueError("need at least two samples for moments")
    return PosteriorMoments(Field(grid, stack.mean(axis=0)),
                            Field(grid, np.maximum(stack.var(axis=0, ddof=1), 0.0)),
                            stack.shape[0])
