import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlda.diagnostics import (
    MultiChainTrace,
    acceptance_rate,
    autocovariance,
    effective_sample_size,
    rank_normalize,
    split_chains,
    split_rhat,
)
from mlda.hierarchy import MldaStats


def ar1(rng, rho, n, chains=1):
    x = np.empty((chains, n))
    x[:, 0] = rng.standard_normal(chains) / np.sqrt(1 - rho**2)
    eps = rng.standard_normal((chains, n))
    for t in range(1, n):
        x[:, t] = rho * x[:, t - 1] + eps[:, t]
    return x


def test_iid_ess_band():
    x = np.random.default_rng(0).standard_normal((4, 2500))
    assert 8500 <= effective_sample_size(x) <= 11500


def test_ar1_ess_matches_closed_form():
    n = 100_000
    x = ar1(np.random.default_rng(1), 0.9, n)
    target = (1 - 0.9) / (1 + 0.9)
    assert abs(effective_sample_size(x) / n / target - 1) <= 0.25


def test_constant_chain_is_undefined():
    with pytest.warns(RuntimeWarning):
        assert np.isnan(effective_sample_size(np.ones((2, 50))))
    with pytest.warns(RuntimeWarning):
        assert np.isnan(split_rhat(np.ones((2, 50))))


@given(seed=st.integers(0, 2**32 - 1), rho=st.floats(-0.95, 0.99), chains=st.integers(1, 4),
       n=st.integers(4, 400))
@settings(max_examples=60, deadline=None)
def test_ess_positive_and_clipped(seed, rho, chains, n):
    x = ar1(np.random.default_rng(seed), rho, n, chains)
    ess = effective_sample_size(x)
    total = chains * n
    assert 0 < ess <= total * np.log10(total) * (1 + 1e-12)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_ess_invariant_under_monotone_transform(seed):
    x = ar1(np.random.default_rng(seed), 0.5, 300, 3)
    assert effective_sample_size(np.exp(x)) == effective_sample_size(x)
    assert split_rhat(np.exp(x)) == split_rhat(x)


def test_iid_rhat_close_to_one():
    x = np.random.default_rng(2).standard_normal((4, 2500))
    assert split_rhat(x) < 1.01


def test_offset_chain_inflates_rhat():
    x = np.random.default_rng(3).standard_normal((4, 2500))
    x[0] += 10.0
    assert split_rhat(x) > 1.5


def test_identical_halves_give_rhat_exactly_one():
    half = np.random.default_rng(4).standard_normal(500)
    assert split_rhat(np.concatenate([half, half])) == 1.0
    assert split_rhat(np.tile(np.concatenate([half, half]), (3, 1))) == 1.0


def test_split_chains_drops_middle_draw():
    x = np.arange(7.0)
    np.testing.assert_array_equal(split_chains(x), [[0, 1, 2], [4, 5, 6]])


def test_rank_normalize_offset():
    z = rank_normalize(np.array([3.0, 1.0, 2.0, 2.0]))
    from scipy.stats import norm

    expected = norm.ppf((np.array([4.0, 1.0, 2.5, 2.5]) - 0.375) / 4.25)
    np.testing.assert_allclose(z, expected, rtol=1e-14)


def test_autocovariance_matches_direct_sum(rng):
    x = rng.standard_normal(64)
    c = x - x.mean()
    direct = np.array([np.dot(c[: 64 - t], c[t:]) / 64 for t in range(64)])
    np.testing.assert_allclose(autocovariance(x)[0], direct, atol=1e-12)


def test_short_chains_rejected():
    with pytest.raises(ValueError):
        effective_sample_size(np.arange(3.0))


def test_multichain_trace():
    draws = np.random.default_rng(5).standard_normal((2, 100, 3))
    mct = MultiChainTrace(draws)
    assert (mct.n_chains, mct.n_samples) == (2, 100)
    assert effective_sample_size(mct, 2) == effective_sample_size(draws[:, :, 2])
    with pytest.raises(ValueError):
        MultiChainTrace(np.zeros(5))


def test_acceptance_rate_examples():
    stats = MldaStats(1, proposals=np.array([100]), accepted=np.array([100]))
    assert acceptance_rate(stats, 0) == 1.0
    stats.accepted[0] = 66
    assert acceptance_rate(stats, 0) == pytest.approx(0.66)


def test_no_warning_for_regular_chain():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        effective_sample_size(np.random.default_rng(6).standard_normal((2, 100)))
