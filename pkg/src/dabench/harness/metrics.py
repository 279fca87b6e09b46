"""Relative L2 errors of approximate moments against the gold standard."""

from __future__ import annotations

from ..grids import Field, _check_same_grid


def relative_errors(mean_hat: Field, var_hat: Field, gold_mean: Field,
                    gold_var: Field, u_bar: Field) -> tuple[float, float]:
    """eps_u = ||(u_hat - u_bar) - (u_pos - u_bar)|| / ||u_pos - u_bar|| and
    eps_sigma = ||var_hat - var_pos|| / ||var_pos||, in cell-weighted L2."""
    for f in (var_hat, gold_mean, gold_var, u_bar):
        _check_same_grid(mean_hat.grid, f.grid)
    denom_u = (gold_mean - u_bar).l2_norm()
    if denom_u == 0.0:
        raise ValueError("gold mean coincides with the prior mean")
    denom_s = gold_var.l2_norm()
    if denom_s == 0.0:
        raise ValueError("gold variance is identically zero")
    eps_u = ((mean_hat - u_bar) - (gold_mean - u_bar)).l2_norm() / denom_u
    eps_sigma = (var_hat - gold_var).l2_norm() / denom_s
    return float(eps_u), float(eps_sigma)
