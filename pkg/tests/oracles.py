"""Independent reference computations used by the test suite.

These deliberately avoid the package's solver code paths: the
Buckley-Leverett oracle evaluates the published fractional-flow formula
and the Welge construction directly.
"""

from __future__ import annotations

import numpy as np


def fractional_flow_quadratic(s, a_w, a_o, s_iw, s_or, mu_w, mu_o):
    se = (np.asarray(s, dtype=float) - s_iw) / (1.0 - s_iw - s_or)
    lam_w = a_w * se**2 / mu_w
    lam_o = a_o * (1.0 - se) ** 2 / mu_o
    return lam_w / (lam_w + lam_o)


def buckley_leverett_front(pvi, domain_length, a_w, a_o, s_iw, s_or, mu_w, mu_o,
                           s0=None):
    """Shock position x_f = PVI * L * max_s (f(s) - f(s0)) / (s - s0) (Welge).

    Returns (x_front, s_front) for a waterflood from initial saturation s0
    after `pvi` pore volumes injected.
    """
    s0 = s_iw if s0 is None else s0
    s_max = 1.0 - s_or
    s = np.linspace(s0 + 1e-9, s_max, 200_001)
    f = fractional_flow_quadratic(s, a_w, a_o, s_iw, s_or, mu_w, mu_o)
    f0 = fractional_flow_quadratic(s0, a_w, a_o, s_iw, s_or, mu_w, mu_o)
    secant = (f - f0) / (s - s0)
    k = int(np.argmax(secant))
    return pvi * domain_length * secant[k], float(s[k])


def gelman_rubin_hand(chains):
    """Gelman-Rubin PSRF from the definition, written out step by step."""
    chains = [np.asarray(c, dtype=float) for c in chains]
    m = len(chains)
    n = chains[0].size
    means = np.array([c.mean() for c in chains])
    w = np.mean([c.var(ddof=1) for c in chains])
    b_over_n = means.var(ddof=1)
    v_hat = (n - 1) / n * w + (1.0 + 1.0 / m) * b_over_n
    return float(np.sqrt(v_hat / w))


def gaussian_condition(mean, cov, B, y, gamma_diag):
    """Textbook Gaussian conditioning for y = B u + N(0, diag(gamma))."""
    S = B @ cov @ B.T + np.diag(gamma_diag)
    K = cov @ B.T @ np.linalg.inv(S)
    post_mean = mean + K @ (y - B @ mean)
    post_cov = cov - K @ B @ cov
    return post_mean, post_cov
