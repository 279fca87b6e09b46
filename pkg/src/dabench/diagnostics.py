"""Gelman-Rubin convergence diagnostics (scalar PSRF and multivariate MPSRF).

Conventions: W is the mean within-chain (co)variance with the unbiased
1/(n-1) normalization, B/n the (co)variance of the chain means, and

    PSRF^2 = (n-1)/n + (m+1)/m * (B/n)/W
    MPSRF  = (n-1)/n + (m+1)/m * lambda_max( W^{-1} B/n )

so MPSRF at one coordinate equals the squared PSRF of that coordinate.
Identical chains give PSRF = sqrt((n-1)/n) exactly.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh


def _stack_chains(chains, ndim):
    arrays = [np.asarray(c, dtype=float) for c in chains]
    if len(arrays) < 2:
        raise ValueError("need at least two chains")
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"chains must have equal shapes, got {shapes}")
    if arrays[0].ndim != ndim:
        raise ValueError(f"expected {ndim}-dimensional chains")
    if arrays[0].shape[0] < 2:
        raise ValueError("chains must have length at least 2")
    return np.stack(arrays)


def psrf(chains) -> float:
    """Potential scale reduction factor of per-chain scalar sequences."""
    stack = _stack_chains(chains, 1)
    m, n = stack.shape
    w = float(np.mean(stack.var(axis=1, ddof=1)))
    if w == 0.0:
        raise ValueError("zero within-chain variance")
    b_over_n = float(stack.mean(axis=1).var(ddof=1))
    v_hat = (n - 1) / n * w + (1.0 + 1.0 / m) * b_over_n
    return float(np.sqrt(v_hat / w))


def mpsrf(chains) -> float:
    """Brooks-Gelman multivariate PSRF of per-chain coefficient sequences (n, J)."""
    stack = _stack_chains(chains, 2)
    m, n, j = stack.shape
    w = np.zeros((j, j))
    for c in range(m):
        dev = stack[c] - stack[c].mean(axis=0)
        w += dev.T @ dev / (n - 1)
    w /= m
    means = stack.mean(axis=1)
    dev_m = means - means.mean(axis=0)
    b_over_n = dev_m.T @ dev_m / (m - 1)
    try:
        lam_max = float(eigh(b_over_n, w, eigvals_only=True,
                             subset_by_index=(j - 1, j - 1))[0])
    except np.linalg.LinAlgError:
        raise ValueError("singular within-chain covariance") from None
    return (n - 1) / n + (m + 1) / m * lam_max
