import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlda.aem import (
    BiasModel,
    BiasTermEstimate,
    bias_sample,
    corrected_log_likelihood,
    on_delayed_acceptance_evaluation,
    total_bias,
    update_moments,
)
from mlda.hierarchy import MLDASampler, ModelHierarchy, Recorder
from mlda.kernel import GaussianNoiseModel, gaussian_log_likelihood
from oracles import fv_pressure, gauss_logpdf
from toys import gaussian_hierarchy


def feed(samples, k=0):
    est = BiasTermEstimate(k, samples.shape[1])
    for b in samples:
        update_moments(est, b)
    return est


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


# -- moments -----------------------------------------------------------------------


def test_constant_stream():
    b = np.array([0.3, -1.0, 2.5])
    est = feed(np.tile(b, (20, 1)))
    np.testing.assert_allclose(est.mean, b, rtol=1e-15)
    np.testing.assert_allclose(est.cov, 0.0, atol=1e-15)
    assert est.count == 20


def test_base_cases():
    b1, b2 = np.array([1.0, 2.0]), np.array([3.0, -1.0])
    est = feed(b1[None, :])
    np.testing.assert_array_equal(est.mean, b1)
    np.testing.assert_array_equal(est.cov, np.zeros((2, 2)))
    update_moments(est, b2)
    d = b1 - b2
    np.testing.assert_allclose(est.cov, 0.5 * np.outer(d, d), rtol=1e-14)


def test_batch_equivalence_500_vectors(rng):
    x = rng.standard_normal((500, 5)) * [1, 2, 0.5, 3, 1] + [0.5, -1, 2, 0, 1]
    est = feed(x)
    assert rel_err(est.mean, x.mean(axis=0)) <= 1e-10
    assert rel_err(est.cov, np.cov(x, rowvar=False, ddof=1)) <= 1e-10


@given(m=st.sampled_from([1, 5, 25]), n=st.integers(2, 1000), seed=st.integers(0, 2**32 - 1),
       offset=st.floats(-3, 3), scale=st.floats(1e-3, 10))
@settings(max_examples=60, deadline=None)
def test_recursive_matches_batch(m, n, seed, offset, scale):
    x = offset + scale * np.random.default_rng(seed).standard_normal((n, m))
    est = feed(x)
    assert rel_err(est.mean, x.mean(axis=0)) <= 1e-10
    assert rel_err(est.cov, np.atleast_2d(np.cov(x, rowvar=False, ddof=1))) <= 1e-10


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 200))
@settings(max_examples=30, deadline=None)
def test_covariance_symmetric_and_psd(seed, n):
    x = np.random.default_rng(seed).standard_normal((n, 6))
    est = BiasTermEstimate(0, 6)
    for b in x:
        update_moments(est, b)
        np.testing.assert_array_equal(est.cov, est.cov.T)
        assert np.linalg.eigvalsh(est.cov).min() >= -1e-10


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_diminishing_adaptation(seed):
    x = np.random.default_rng(seed).uniform(-1, 1, size=(300, 4))
    bmax = np.max(np.linalg.norm(x, axis=1))
    est = BiasTermEstimate(0, 4)
    update_moments(est, x[0])
    for b in x[1:]:
        i = est.count
        before = est.mean.copy()
        update_moments(est, b)
        assert np.linalg.norm(est.mean - before) <= (bmax + np.linalg.norm(before)) / (i + 1) + 1e-15


# -- telescoped bias and corrected likelihood -----------------------------------


def random_model(rng, n_terms=2, m=25):
    model = BiasModel(n_terms, m)
    for term in model.terms:
        feed_into = rng.standard_normal((40, m)) * 0.01 + rng.standard_normal(m) * 0.05
        for b in feed_into:
            update_moments(term, b)
    return model


def test_total_bias_zero_count():
    mu, sigma = total_bias(BiasModel(2, 4), 0)
    assert not mu.any() and not sigma.any()


def test_total_bias_single_term_and_sum(rng):
    model = random_model(rng, n_terms=2)
    mu, sigma = total_bias(model, 1)
    np.testing.assert_array_equal(mu, model.terms[1].mean)
    np.testing.assert_array_equal(sigma, model.terms[1].cov)
    mu0, sigma0 = total_bias(model, 0)
    np.testing.assert_array_equal(mu0, model.terms[0].mean + model.terms[1].mean)
    np.testing.assert_array_equal(sigma0, model.terms[0].cov + model.terms[1].cov)


def test_zero_count_model_equals_raw_likelihood(rng):
    noise = GaussianNoiseModel.isotropic(25, 0.01)
    out, d = rng.standard_normal(25) * 0.01, rng.standard_normal(25) * 0.01
    raw = gaussian_log_likelihood(out, noise, d)
    assert abs(corrected_log_likelihood(0, out, noise, BiasModel(2, 25), d) - raw) <= 1e-14 * abs(raw)


def test_mean_shift_cancels_constant_offset():
    noise = GaussianNoiseModel.isotropic(3, 0.1)
    fine = np.array([0.2, 0.4, 0.6])
    coarse = fine - 0.05
    model = BiasModel(1, 3)
    for _ in range(5):
        update_moments(model.terms[0], bias_sample(0, fine, coarse))
    d = np.array([0.25, 0.35, 0.7])
    assert corrected_log_likelihood(0, coarse, noise, model, d) == pytest.approx(
        gaussian_log_likelihood(fine, noise, d), rel=1e-13)


def test_corrected_likelihood_matches_dense_oracle(rng):
    model = random_model(rng)
    a = rng.standard_normal((25, 25))
    noise = GaussianNoiseModel(0.01**2 * np.eye(25) + 1e-5 * a @ a.T / 25)
    out, d = rng.standard_normal(25) * 0.1, rng.standard_normal(25) * 0.1
    mu, sigma = total_bias(model, 0)
    ref = gauss_logpdf(d - out, noise.mean_shift + mu, noise.covariance + sigma)
    assert corrected_log_likelihood(0, out, noise, model, d) == pytest.approx(ref, rel=1e-10)


def test_finest_level_has_no_correction():
    with pytest.raises(ValueError):
        corrected_log_likelihood(2, np.zeros(3), GaussianNoiseModel.isotropic(3, 1.0), BiasModel(2, 3), np.zeros(3))


def test_covariance_inflation(rng):
    model = random_model(rng)
    noise = GaussianNoiseModel.isotropic(25, 0.01)
    _, sigma = total_bias(model, 0)
    assert np.linalg.eigvalsh(noise.covariance + sigma).min() >= np.linalg.eigvalsh(noise.covariance).min() * (
        1 - 1e-12)


def test_bias_sample_examples():
    f = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(bias_sample(0, f, f), np.zeros(3))
    np.testing.assert_allclose(bias_sample(0, f + 0.25, f), np.full(3, 0.25))


def _bilinear(p, locs):
    m = p.shape[0]
    h = 1.0 / (m - 1)
    out = []
    for x1, x2 in locs:
        i = min(int(x1 / h), m - 2)
        j = min(int(x2 / h), m - 2)
        s, t = x1 / h - i, x2 / h - j
        out.append((1 - s) * (1 - t) * p[j, i] + s * (1 - t) * p[j, i + 1]
                   + (1 - s) * t * p[j + 1, i] + s * t * p[j + 1, i + 1])
    return np.array(out)


@pytest.mark.parametrize("which", ["zero", "random"])
def test_darcy_bias_sample_matches_direct_solves(darcy_problem, which):
    theta = np.zeros(24) if which == "zero" else np.random.default_rng(8).standard_normal(24)
    f0, f1 = darcy_problem.forward_maps[:2]
    locs = darcy_problem.obs.locations
    ref = _bilinear(fv_pressure(f1.log_permeability(theta)), locs) - _bilinear(
        fv_pressure(f0.log_permeability(theta)), locs)
    np.testing.assert_allclose(bias_sample(0, f1(theta), f0(theta)), ref, atol=1e-12)


# -- update trigger ------------------------------------------------------------------


def test_disabled_adaptation_is_noop():
    model = BiasModel(1, 2, adaptation_enabled=False)
    on_delayed_acceptance_evaluation(0, np.ones(2), np.zeros(2), model)
    assert model.terms[0].count == 0


def test_one_update_per_evaluated_level1_proposal():
    h = gaussian_hierarchy([0.3, 0.0], [5])
    sampler = MLDASampler(h, aem=True, rng=0)
    state = sampler.bootstrap(np.zeros(1))
    seen_evaluated = seen_skipped = 0
    for _ in range(200):
        before_count = sampler.bias.terms[0].count
        before = sampler.run_stats.burnin.proposals[1]
        state = sampler.mlda_step(1, state)
        evaluated = sampler.run_stats.burnin.proposals[1] - before
        assert sampler.bias.terms[0].count - before_count == evaluated
        seen_evaluated += evaluated == 1
        seen_skipped += evaluated == 0
    assert seen_evaluated > 0


def test_term_counts_equal_proposal_counts(darcy_problem):
    rng = np.random.default_rng(2)
    d = darcy_problem.forward_maps[-1](rng.standard_normal(24)) + 0.01 * rng.standard_normal(25)
    h = ModelHierarchy(darcy_problem.forward_maps, [5, 5], darcy_problem.noise, d)
    sampler = MLDASampler(h, aem=True, rng=3)
    sampler.sample(30, 20, rng.standard_normal(24))
    total = sampler.run_stats.total
    assert [t.count for t in sampler.bias.terms] == [int(total.proposals[1]), int(total.proposals[2])]


def test_freeze_after_burnin():
    h = gaussian_hierarchy([0.3, 0.1, 0.0], [2, 2])
    sampler = MLDASampler(h, aem=True, freeze_aem_after_burnin=True, rng=4)
    sampler.sample(100, 50, np.zeros(1))
    burn = sampler.run_stats.burnin
    assert [t.count for t in sampler.bias.terms] == [int(burn.proposals[1]), int(burn.proposals[2])]


def test_vanilla_and_aem_share_level0_stream_until_divergence(darcy_problem):
    rng = np.random.default_rng(5)
    d = darcy_problem.forward_maps[-1](rng.standard_normal(24)) + 0.01 * rng.standard_normal(25)
    h = ModelHierarchy(darcy_problem.forward_maps, [5, 5], darcy_problem.noise, d)
    init = rng.standard_normal(24)
    runs = {}
    for aem in (False, True):
        rec = Recorder(kinds=["proposal0", "decision"])
        MLDASampler(h, aem=aem, rng=6, recorder=rec).sample(5, 0, init)
        runs[aem] = rec.events
    first_update = next(i for i, e in enumerate(runs[True]) if e["kind"] == "decision" and not e["skipped"])
    for a, b in zip(runs[False][: first_update + 1], runs[True][: first_update + 1]):
        assert a["kind"] == b["kind"]
        if a["kind"] == "proposal0":
            assert a["accepted"] == b["accepted"]
            if a["accepted"]:
                np.testing.assert_array_equal(a["theta"], b["theta"])
