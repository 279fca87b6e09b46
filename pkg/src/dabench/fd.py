"""Central finite differences for forward-operator Jacobians.

An adjoint solver is deliberately out of scope; these O(dim) stencils are
the workhorse for the Levenberg-Marquardt estimators at desk-scale grids.
"""

from __future__ import annotations

import numpy as np


def central_jacobian(fun, x: np.ndarray, h: float) -> np.ndarray:
    """Dense Jacobian of fun at x, column k = (fun(x + h e_k) - fun(x - h e_k)) / (2h)."""
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        cols.append((np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2.0 * h))
    return np.column_stack(cols)


def directional_difference(fun, x: np.ndarray, d: np.ndarray, h: float) -> np.ndarray:
    """Central difference of fun at x along direction d: (fun(x+h d) - fun(x-h d)) / (2h)."""
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    return (np.asarray(fun(x + h * d)) - np.asarray(fun(x - h * d))) / (2.0 * h)
