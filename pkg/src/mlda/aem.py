"""Adaptive error model: on-line Gaussian estimates of inter-level bias.

Each adjacent pair of levels ``(k, k+1)`` gets its own running mean and
covariance of ``F_{k+1}(theta) - F_k(theta)``. The bias on level ``l`` is the
telescoping sum over ``k = l .. L-1``, so every time two adjacent levels
are evaluated at the same parameter one term learns something.
"""

import numpy as np

from .kernel import GaussianLogDensity


class BiasTermEstimate:
    """Running mean and unbiased covariance of one bias term.

    Updated with the recursive formulas

        mu_{i+1}    = (i mu_i + b) / (i + 1)
        Sigma_{i+1} = (i-1)/i Sigma_i
                      + (i mu_i mu_i^T - (i+1) mu_{i+1} mu_{i+1}^T + b b^T) / i

    The covariance step is evaluated in the algebraically identical form
    ``(i-1)/i Sigma_i + (b - mu_i)(b - mu_i)^T / (i+1)``, which avoids the
    cancellation of the rank-one terms when the mean dominates the spread.
    The covariance is zero until two samples exist; the second update yields
    the two-sample unbiased covariance.
    """

    def __init__(self, k, n_obs):
        self.k = k
        self.count = 0
        self.mean = np.zeros(n_obs)
        self.cov = np.zeros((n_obs, n_obs))

    def copy(self):
        out = BiasTermEstimate(self.k, self.mean.size)
        out.count, out.mean, out.cov = self.count, self.mean.copy(), self.cov.copy()
        return out

    def to_dict(self):
        return {"k": self.k, "count": self.count, "mean": self.mean.tolist(), "cov": self.cov.tolist()}


def update_moments(estimate, sample):
    """Fold one bias sample into ``estimate`` in place and return it."""
    b = np.asarray(sample, dtype=np.float64)
    i = estimate.count
    if i == 0:
        estimate.mean = b.copy()
        estimate.cov = np.zeros((b.size, b.size))
    else:
        delta = b - estimate.mean
        cov = (i - 1) / i * estimate.cov + np.outer(delta, delta) / (i + 1)
        estimate.mean = (i * estimate.mean + b) / (i + 1)
        estimate.cov = 0.5 * (cov + cov.T)
    estimate.count = i + 1
    return estimate


class BiasModel:
    """All bias terms ``k = 0 .. L-1`` for an ``(L+1)``-level hierarchy."""

    def __init__(self, n_terms, n_obs, adaptation_enabled=True):
        self.terms = [BiasTermEstimate(k, n_obs) for k in range(n_terms)]
        self.adaptation_enabled = adaptation_enabled
        self._densities = {}

    @property
    def n_terms(self):
        return len(self.terms)

    def key(self, level):
        """Hashable version of the terms feeding level ``level``."""
        return tuple(t.count for t in self.terms[level:])

    def corrected_density(self, level, noise):
        """GaussianLogDensity of the residual ``d - F_level`` with bias correction."""
        key = self.key(level)
        cached = self._densities.get(level)
        if cached is not None and cached[0] == key:
            return cached[1]
        if not any(key):
            density = noise._density
        else:
            mu_b, sigma_b = total_bias(self, level)
            density = GaussianLogDensity(noise.mean_shift + mu_b, noise.covariance + sigma_b)
        self._densities[level] = (key, density)
        return density

    def to_dict(self):
        return {
            "adaptation_enabled": self.adaptation_enabled,
            "terms": [t.to_dict() for t in self.terms],
        }


def total_bias(model, level):
    """Mean and covariance of the telescoped bias on ``level`` (sum over k >= level)."""
    if not 0 <= level < model.n_terms + 1:
        raise ValueError(f"level {level} outside 0..{model.n_terms}")
    n = model.terms[0].mean.size
    mu, sigma = np.zeros(n), np.zeros((n, n))
    for term in model.terms[level:]:
        mu += term.mean
        sigma += term.cov
    return mu, sigma


def corrected_log_likelihood(level, model_output, noise, bias, data):
    """Gaussian log-likelihood with residual ``d - F - mu_eps - mu_B`` and
    covariance ``Sigma_eps + Sigma_B`` (normaliser included)."""
    if level >= bias.n_terms:
        raise ValueError("the finest level has no bias correction")
    density = bias.corrected_density(level, noise)
    return density(np.asarray(data) - np.asarray(model_output))


def bias_sample(k, fine_output, coarse_output):
    """``F_{k+1}(theta) - F_k(theta)`` from the two model outputs."""
    return np.asarray(fine_output) - np.asarray(coarse_output)


def on_delayed_acceptance_evaluation(k, fine_output, coarse_output, bias):
    """Update term ``k`` after a level-``k+1`` proposal was evaluated.

    Fires for accepted and rejected proposals alike; a no-op when
    adaptation is disabled.
    """
    if bias.adaptation_enabled:
        update_moments(bias.terms[k], bias_sample(k, fine_output, coarse_output))
    return bias
