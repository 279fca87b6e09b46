"""Levenberg-Marquardt minimization of Tikhonov-type history-matching objectives.

Minimizes J(c) = 0.5 ||y - g(c)||^2_Gamma + 0.5 ||c - c_prior||^2_Lambda in
prior-diagonal (spectral) coordinates, damping the prior precision term.
The Gauss-Newton system is solved through the Woodbury identity, so each
iteration costs one N x N dense solve (N = number of data) on top of the
Jacobian evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError


@dataclass(frozen=True)
class LMOptions:
    """Damping schedule, stopping thresholds and finite-difference step."""

    initial_damping: float = 1.0
    damping_increase: float = 10.0
    damping_decrease: float = 10.0
    max_iterations: int = 20
    max_retries: int = 8
    rel_objective_tol: float = 1e-4
    rel_step_tol: float = 1e-3
    fd_step: float = 1e-2

    def __post_init__(self):
        if not self.initial_damping > 0:
            raise ValueError("initial damping must be positive")
        if not (self.damping_increase > 1 and self.damping_decrease > 1):
            raise ValueError("damping factors must exceed 1")
        if not (self.rel_objective_tol > 0 and self.rel_step_tol > 0 and self.fd_step > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("need at least one iteration")


@dataclass
class LMResult:
    coeffs: np.ndarray
    objective: float
    data_misfit: float
    iterations: int
    converged: bool
    hit_iteration_cap: bool


def _objective(resid, gamma, c, c_prior, lam):
    phi = 0.5 * float(np.sum(resid * resid / gamma))
    reg = 0.5 * float(np.sum((c - c_prior) ** 2 / lam))
    return phi + reg, phi


def _damped_step(B, gamma, lam, damping, grad):
    """Solve ((1+damping) Lambda^-1 + B^T Gamma^-1 B) delta = -grad via Woodbury."""
    d = lam / (1.0 + damping)
    t1 = d * (-grad)
    M = B @ (d[:, None] * B.T)
    M[np.diag_indices_from(M)] += gamma
    w = np.linalg.solve(M, B @ t1)
    return t1 - d * (B.T @ w)


def lm_minimize(g_fun, jac_fun, y, gamma, lam, c_prior, c0,
                opts: LMOptions) -> LMResult:
    """Damped Gauss-Newton iteration from c0; monotone in the objective.

    Parameters
    ----------
    g_fun : callable
        Coefficients -> model data vector.
    jac_fun : callable
        Coefficients -> Jacobian of g (N x K).
    y, gamma : arrays
        Data and diagonal noise variances.
    lam : array
        Prior variances (diagonal covariance in these coordinates).
    c_prior, c0 : arrays
        Prior anchor and starting point.

    Raises
    ------
    DivergenceError
        If the objective cannot be decreased within the retry budget.
    """
    y = np.asarray(y, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    lam = np.asarray(lam, dtype=float)
    c = np.asarray(c0, dtype=float).copy()
    c_prior = np.asarray(c_prior, dtype=float)
    scale_floor = float(np.sqrt(np.sum(lam)))

    resid = y - g_fun(c)
    obj, phi = _objective(resid, gamma, c, c_prior, lam)
    damping = opts.initial_damping
    converged = False
    it = 0
    while it < opts.max_iterations:
        it += 1
        B = jac_fun(c)
        grad = -B.T @ (resid / gamma) + (c - c_prior) / lam
        # stationary point (e.g. an exactly fitting start): nothing to do
        if np.linalg.norm(np.sqrt(lam) * grad) <= 1e-13 * max(1.0, abs(obj)):
            converged = True
            break
        accepted = False
        for _ in range(opts.max_retries):
            delta = _damped_step(B, gamma, lam, damping, grad)
            c_trial = c + delta
            resid_trial = y - g_fun(c_trial)
            obj_trial, phi_trial = _objective(resid_trial, gamma, c_trial, c_prior, lam)
            if obj_trial < obj:
                accepted = True
                rel_dj = (obj - obj_trial) / max(abs(obj), 1e-300)
                rel_step = np.linalg.norm(delta) / max(np.linalg.norm(c_trial), scale_floor)
                c, resid, obj, phi = c_trial, resid_trial, obj_trial, phi_trial
                damping = max(damping / opts.damping_decrease, 1e-12)
                if rel_dj < opts.rel_objective_tol and rel_step < opts.rel_step_tol:
                    converged = True
                break
            if np.linalg.norm(delta) <= 1e-15 * max(np.linalg.norm(c), scale_floor):
                # the damped step has collapsed onto the current point
                converged = True
                accepted = True
                break
            damping *= opts.damping_increase
        if not accepted:
            raise DivergenceError(
                f"objective stuck at {obj} after {opts.max_retries} damped retries")
        if converged:
            break
    return LMResult(coeffs=c, objective=obj, data_misfit=phi, iterations=it,
                    converged=converged, hit_iteration_cap=not converged)
