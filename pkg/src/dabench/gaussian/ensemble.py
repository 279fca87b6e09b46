"""Ensemble Kalman filters on the augmented state z = (u, v, w).

u is the (time-invariant) parameter field, v the model state and w the
predicted measurement block; H = (0, 0, I) picks out w.  Members are held
row-wise in dense arrays.  Both the perturbed-observation update and the
deterministic square-root update are provided; localization tapers only
the parameter rows of the gain, leaving the state and measurement rows
untouched.

Sample moments use the centered, unbiased 1/(N_e - 1) normalization
throughout, which makes the square-root filter's covariance identity
exact at finite ensemble size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import ortho_group

from ..errors import CflError, SolverError
from ..grids import Field, Grid2D
from .localization import LocalizationSpec

# ensembles larger than this apply the complement-Haar rotation by its
# action instead of materializing an N_e x N_e matrix
_DENSE_ROTATION_CAP = 600


class EnsembleError(RuntimeError):
    """Raised when ensemble members fail during prediction; carries indices."""

    def __init__(self, message, member_indices):
        super().__init__(f"{message}: members {sorted(member_indices)}")
        self.member_indices = tuple(sorted(member_indices))


@dataclass(frozen=True)
class AugmentedState:
    u: Field
    v: np.ndarray
    w: np.ndarray


class EnsembleZ:
    """Ordered ensemble of augmented states, stored as row-member arrays."""

    def __init__(self, grid: Grid2D, u: np.ndarray, v: np.ndarray, w: np.ndarray):
        u, v, w = (np.asarray(a, dtype=float) for a in (u, v, w))
        if u.ndim != 2 or v.ndim != 2 or w.ndim != 2:
            raise ValueError("member arrays must be 2-D (members x dimension)")
        if not (u.shape[0] == v.shape[0] == w.shape[0]):
            raise ValueError("member counts disagree across components")
        if u.shape[0] < 2:
            raise ValueError("an ensemble needs at least 2 members")
        if u.shape[1] != grid.n_cells:
            raise ValueError("parameter dimension must match the grid")
        self.grid = grid
        self.u = u
        self.v = v
        self.w = w

    @property
    def n_members(self) -> int:
        return self.u.shape[0]

    @property
    def n_wells(self) -> int:
        return self.w.shape[1]

    def member(self, j: int) -> AugmentedState:
        return AugmentedState(Field(self.grid, self.u[j]), self.v[j].copy(),
                              self.w[j].copy())

    def members(self) -> list[AugmentedState]:
        return [self.member(j) for j in range(self.n_members)]

    def u_fields(self) -> list[Field]:
        return [Field(self.grid, self.u[j]) for j in range(self.n_members)]


def initial_ensemble(prior, model, n_members: int, rng) -> EnsembleZ:
    """Prior-drawn parameters with the shared initial state and its measurement."""
    u = prior.sample_values(rng, n_members)
    v0 = model.initial_state()
    w0 = np.stack([model.measure_state(u[j], v0, -1) for j in range(n_members)])
    v = np.tile(v0, (n_members, 1))
    return EnsembleZ(prior.grid, u, v, w0)


def enkf_predict(ens: EnsembleZ, model, window: int) -> EnsembleZ:
    """Propagate every member over one assimilation window; u is untouched."""
    v_new = np.empty_like(ens.v) if ens.v.size else ens.v.copy()
    w_new = np.empty_like(ens.w)
    failed = []
    for j in range(ens.n_members):
        try:
            vj = model.advance(ens.u[j], ens.v[j], window)
            v_new[j] = vj
            w_new[j] = model.measure_state(ens.u[j], vj, window)
        except (SolverError, CflError) as exc:
            failed.append(j)
    if failed:
        raise EnsembleError("forward propagation failed", failed)
    return EnsembleZ(ens.grid, ens.u.copy(), v_new, w_new)


@dataclass
class EnsembleMoments:
    mean_u: np.ndarray
    mean_v: np.ndarray
    mean_w: np.ndarray
    c_uw: np.ndarray
    c_vw: np.ndarray
    c_ww: np.ndarray


def sample_moments(ens: EnsembleZ) -> EnsembleMoments:
    """Centered unbiased mean and the measurement-facing covariance blocks."""
    n = ens.n_members
    mean_u = ens.u.mean(axis=0)
    mean_v = ens.v.mean(axis=0) if ens.v.size else np.zeros(ens.v.shape[1])
    mean_w = ens.w.mean(axis=0)
    du = ens.u - mean_u
    dv = ens.v - mean_v
    dw = ens.w - mean_w
    return EnsembleMoments(
        mean_u=mean_u, mean_v=mean_v, mean_w=mean_w,
        c_uw=du.T @ dw / (n - 1),
        c_vw=dv.T @ dw / (n - 1),
        c_ww=dw.T @ dw / (n - 1),
    )


def _gain_blocks(mom: EnsembleMoments, gamma: np.ndarray,
                 loc: LocalizationSpec | None):
    """Kalman gain rows for (u, v, w); only the u row is localized."""
    s_plain = mom.c_ww.copy()
    s_plain[np.diag_indices_from(s_plain)] += gamma
    k_v = np.linalg.solve(s_plain, mom.c_vw.T).T
    k_w = np.linalg.solve(s_plain, mom.c_ww.T).T
    if loc is None:
        k_u = np.linalg.solve(s_plain, mom.c_uw.T).T
    else:
        s_loc = loc.rho_ww * mom.c_ww
        s_loc[np.diag_indices_from(s_loc)] += gamma
        k_u = np.linalg.solve(s_loc, (loc.rho_uw * mom.c_uw).T).T
    return k_u, k_v, k_w


def enkf_analyze(ens: EnsembleZ, y: np.ndarray, gamma: np.ndarray, rng,
                 loc: LocalizationSpec | None = None) -> EnsembleZ:
    """Perturbed-observation analysis step.

    Each member is nudged by the gain applied to its innovation against
    independently perturbed data y + eta_j, eta_j ~ N(0, diag(gamma)).
    """
    y = np.asarray(y, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    mom = sample_moments(ens)
    k_u, k_v, k_w = _gain_blocks(mom, gamma, loc)
    eta = np.sqrt(gamma) * rng.standard_normal((ens.n_members, y.size))
    innov = (y + eta) - ens.w
    return EnsembleZ(
        ens.grid,
        ens.u + innov @ k_u.T,
        ens.v + innov @ k_v.T if ens.v.size else ens.v.copy(),
        ens.w + innov @ k_w.T,
    )


def _sqrt_spd(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    if np.any(vals < -1e-10 * max(vals.max(), 1.0)):
        raise np.linalg.LinAlgError("matrix is not positive semidefinite")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))[None, :]) @ vecs.T


def _sqrt_gain(c_zw: np.ndarray, c_ww: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """K_tilde = C_zw S^{-1/2} (S^{1/2} + Gamma^{1/2})^{-1} with S = C_ww + Gamma."""
    s = c_ww.copy()
    s[np.diag_indices_from(s)] += gamma
    s_half = _sqrt_spd(s)
    inner = np.linalg.solve(s_half, c_zw.T)          # S^{-1/2} C_zw^T
    outer = s_half + np.diag(np.sqrt(gamma))
    return np.linalg.solve(outer.T, inner).T


def mean_preserving_rotation(n: int, rng) -> np.ndarray:
    """Random orthogonal matrix fixing the ones vector, Haar on its complement."""
    if n < 2:
        raise ValueError("need at least 2 members")
    q = _helmert_basis(n)
    if n == 2:  # O(1) is just a random sign
        r = np.array([[1.0 if rng.random() < 0.5 else -1.0]])
    else:
        r = ortho_group.rvs(n - 1, random_state=rng)
    theta = np.full((n, n), 1.0 / n) + q @ r @ q.T
    return theta


def _helmert_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the ones-complement in R^n (n x (n-1))."""
    q = np.zeros((n, n - 1))
    for i in range(1, n):
        a = 1.0 / np.sqrt(i * (i + 1))
        q[:i, i - 1] = a
        q[i, i - 1] = -i * a
    return q


def _helmert_t_apply(x: np.ndarray) -> np.ndarray:
    """Q^T x for the Helmert basis, O(n d) via cumulative sums."""
    n = x.shape[0]
    i = np.arange(1, n)
    a = 1.0 / np.sqrt(i * (i + 1))
    csum = np.cumsum(x, axis=0)
    return a[:, None] * csum[:-1] - (i * a)[:, None] * x[1:]


def _helmert_apply(y: np.ndarray) -> np.ndarray:
    """Q y for the Helmert basis, O(n d) via reverse cumulative sums."""
    m = y.shape[0]  # n - 1
    n = m + 1
    i = np.arange(1, n)
    a = 1.0 / np.sqrt(i * (i + 1))
    ay = a[:, None] * y
    rev = np.cumsum(ay[::-1], axis=0)[::-1]
    out = np.zeros((n, y.shape[1]))
    out[:m] = rev
    out[1:] -= (i * a)[:, None] * y
    return out


def _apply_rotation_transpose(dev_rows: np.ndarray, rng) -> np.ndarray:
    """Theta^T @ dev_rows for a fresh mean-preserving rotation Theta.

    dev_rows has zero column sums (member deviations), so the ones-space
    component vanishes and only the complement-Haar action matters.  Small
    ensembles materialize Theta; large ones realize the identical
    distribution through an SVD and a uniformly random Stiefel frame.
    """
    n = dev_rows.shape[0]
    if n <= _DENSE_ROTATION_CAP:
        theta = mean_preserving_rotation(n, rng)
        return theta.T @ dev_rows
    yq = _helmert_t_apply(dev_rows)                      # (n-1, d)
    p, sing, wt = np.linalg.svd(yq, full_matrices=False)
    k = sing.size
    z = rng.standard_normal((n - 1, k))
    qf, rf = np.linalg.qr(z)
    qf = qf * np.sign(np.diag(rf))[None, :]
    rotated = qf @ (sing[:, None] * wt)                  # (R^T Q^T X) in distribution
    return _helmert_apply(rotated)


def ensrf_analyze(ens: EnsembleZ, y: np.ndarray, gamma: np.ndarray, rng,
                  loc: LocalizationSpec | None = None) -> EnsembleZ:
    """Deterministic square-root analysis step.

    The mean is updated with the standard gain; deviations are scaled by
    the square-root gain and re-randomized by a mean-preserving orthogonal
    rotation, so the analyzed sample covariance equals (I - K H) C^f
    exactly in the unlocalized case.
    """
    y = np.asarray(y, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    mom = sample_moments(ens)
    k_u, k_v, k_w = _gain_blocks(mom, gamma, loc)
    innov = y - mom.mean_w
    mean_u = mom.mean_u + k_u @ innov
    mean_v = mom.mean_v + k_v @ innov if ens.v.size else mom.mean_v
    mean_w = mom.mean_w + k_w @ innov

    kt_v = _sqrt_gain(mom.c_vw, mom.c_ww, gamma)
    kt_w = _sqrt_gain(mom.c_ww, mom.c_ww, gamma)
    if loc is None:
        kt_u = _sqrt_gain(mom.c_uw, mom.c_ww, gamma)
    else:
        kt_u = _sqrt_gain(loc.rho_uw * mom.c_uw, loc.rho_ww * mom.c_ww, gamma)

    du = ens.u - mom.mean_u
    dv = ens.v - mom.mean_v if ens.v.size else ens.v.copy()
    dw = ens.w - mom.mean_w
    du_a = du - dw @ kt_u.T
    dv_a = dv - dw @ kt_v.T if ens.v.size else dv
    dw_a = dw - dw @ kt_w.T
    stacked = np.concatenate(
        [du_a, dv_a, dw_a] if ens.v.size else [du_a, dw_a], axis=1)
    rotated = _apply_rotation_transpose(stacked, rng)
    nu = du.shape[1]
    nv = dv.shape[1] if ens.v.size else 0
    du_a = rotated[:, :nu]
    dv_a = rotated[:, nu:nu + nv] if nv else ens.v.copy()
    dw_a = rotated[:, nu + nv:]
    return EnsembleZ(ens.grid, mean_u + du_a,
                     mean_v + dv_a if ens.v.size else dv_a,
                     mean_w + dw_a)
