import numpy as np
import pytest

from dabench.diagnostics import mpsrf, psrf

from .oracles import gelman_rubin_hand


def test_identical_chains_hit_floor():
    c = np.sin(np.arange(50.0))
    n = c.size
    assert psrf([c, c.copy(), c.copy()]) == pytest.approx(np.sqrt((n - 1) / n), rel=1e-14)


def test_two_chain_hand_case():
    # chains [1,2,3] and [2,3,4]: W = 1, B/n = 0.5,
    # V = 2/3 + 1.5*0.5 = 17/12, PSRF = sqrt(17/12)
    chains = [np.array([1.0, 2.0, 3.0]), np.array([2.0, 3.0, 4.0])]
    expected = np.sqrt(17.0 / 12.0)
    assert psrf(chains) == pytest.approx(expected, rel=1e-14)
    assert gelman_rubin_hand(chains) == pytest.approx(expected, rel=1e-14)


def test_iid_chains_near_one():
    rng = np.random.default_rng(123)
    chains = [rng.standard_normal(10_000) for _ in range(8)]
    assert 0.99 < psrf(chains) < 1.02


def test_psrf_input_validation():
    with pytest.raises(ValueError):
        psrf([np.arange(5.0)])
    with pytest.raises(ValueError):
        psrf([np.arange(5.0), np.arange(4.0)])
    with pytest.raises(ValueError):
        psrf([np.ones(5), np.ones(5)])  # zero within-chain variance


def test_mpsrf_identical_chains():
    rng = np.random.default_rng(0)
    c = rng.standard_normal((40, 3))
    n = c.shape[0]
    assert mpsrf([c, c.copy()]) == pytest.approx((n - 1) / n, abs=1e-12)


def test_mpsrf_reduces_to_squared_psrf_for_one_coefficient():
    rng = np.random.default_rng(5)
    chains2d = [rng.standard_normal((200, 1)) + 0.1 * k for k in range(4)]
    chains1d = [c[:, 0] for c in chains2d]
    assert mpsrf(chains2d) == pytest.approx(psrf(chains1d) ** 2, rel=1e-12)


def test_mpsrf_iid_multivariate_near_one():
    rng = np.random.default_rng(42)
    cov = np.diag([2.0, 1.0, 0.5, 0.1])
    chains = [rng.multivariate_normal(np.zeros(4), cov, size=10_000) for _ in range(8)]
    assert abs(mpsrf(chains) - 1.0) < 0.05


def test_mpsrf_singular_within_covariance():
    base = np.arange(30.0)
    # second coefficient perfectly correlated with the first in every chain
    chains = [np.column_stack([base + k, 2 * (base + k)]) for k in range(3)]
    with pytest.raises(ValueError):
        mpsrf(chains)
