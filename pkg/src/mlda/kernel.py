"""Single-level Metropolis-Hastings machinery.

Standard-normal prior over KL coefficients, a Gaussian likelihood with its
log-normaliser kept (levels with different covariances must stay
comparable), random-walk proposals and multiplicative step-size tuning.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError, EvaluationError

LOG_2PI = float(np.log(2.0 * np.pi))


def log_prior(theta):
    """Log-density of ``N(0, I_R)`` at ``theta``."""
    theta = np.asarray(theta, dtype=np.float64)
    return -0.5 * float(theta @ theta) - 0.5 * theta.size * LOG_2PI


class GaussianLogDensity:
    """Log-density of ``N(mean, cov)`` evaluated at residual vectors.

    The Cholesky factor is computed once; evaluation whitens the residual
    with the inverse factor.
    """

    def __init__(self, mean, cov):
        cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
        mean = np.asarray(mean, dtype=np.float64).ravel()
        if cov.shape != (mean.size, mean.size):
            raise ConfigurationError(f"covariance shape {cov.shape} does not match mean size {mean.size}")
        if not np.allclose(cov, cov.T, rtol=1e-12, atol=0.0):
            raise ConfigurationError("covariance matrix is not symmetric")
        try:
            chol = sla.cholesky(cov, lower=True)
        except (sla.LinAlgError, ValueError) as exc:
            raise ConfigurationError(f"covariance is not positive definite: {exc}") from None
        self.mean = mean
        self.cov = cov
        self.whiten = sla.solve_triangular(chol, np.eye(mean.size), lower=True)
        self.log_norm = -float(np.sum(np.log(np.diag(chol)))) - 0.5 * mean.size * LOG_2PI

    def __call__(self, residual):
        z = self.whiten @ (residual - self.mean)
        return self.log_norm - 0.5 * float(z @ z)


class GaussianNoiseModel:
    """Additive noise ``eps ~ N(mean_shift, covariance)``."""

    def __init__(self, covariance, mean_shift=None):
        covariance = np.atleast_2d(np.asarray(covariance, dtype=np.float64))
        if mean_shift is None:
            mean_shift = np.zeros(covariance.shape[0])
        self._density = GaussianLogDensity(mean_shift, covariance)

    @classmethod
    def isotropic(cls, n_obs, std):
        return cls(std**2 * np.eye(n_obs))

    @property
    def mean_shift(self):
        return self._density.mean

    @property
    def covariance(self):
        return self._density.cov

    @property
    def n_obs(self):
        return self._density.mean.size

    def log_likelihood(self, model_output, data):
        return self._density(np.asarray(data) - model_output)


def gaussian_log_likelihood(model_output, noise, data):
    """``log N(d - F(theta) - mu_eps; 0, Sigma_eps)`` including the normaliser."""
    model_output = np.asarray(model_output, dtype=np.float64)
    data = np.asarray(data, dtype=np.float64)
    if model_output.shape != data.shape or data.size != noise.n_obs:
        raise ConfigurationError(
            f"model output {model_output.shape} and data {data.shape} must both have length {noise.n_obs}"
        )
    return noise.log_likelihood(model_output, data)


@dataclass
class ProposalConfig:
    """Random-walk proposal settings.

    ``coordinatewise`` switches to single-coordinate updates at a uniformly
    chosen index (random scan, so each step stays reversible).
    """

    step_size: float = 0.1
    tune_interval: int = 100
    target_acceptance_band: tuple = (0.2, 0.5)
    tune_factor: float = 0.7
    coordinatewise: bool = False

    def __post_init__(self):
        low, high = self.target_acceptance_band
        if not self.step_size > 0:
            raise ConfigurationError(f"step_size must be positive, got {self.step_size}")
        if not (isinstance(self.tune_interval, (int, np.integer)) and self.tune_interval > 0):
            raise ConfigurationError(f"tune_interval must be a positive integer, got {self.tune_interval}")
        if not 0 < low < high < 1:
            raise ConfigurationError(f"acceptance band must satisfy 0 < low < high < 1, got {(low, high)}")
        if not 0 < self.tune_factor < 1:
            raise ConfigurationError(f"tune_factor must lie in (0, 1), got {self.tune_factor}")
        self.target_acceptance_band = (float(low), float(high))


class ChainState:
    """Parameter vector plus per-level caches.

    ``forward`` maps level -> forward-map output at ``theta``; ``loglik``
    maps level -> ``(key, value)`` where ``key`` identifies the likelihood
    version the value was computed with.
    """

    __slots__ = ("theta", "forward", "loglik")

    def __init__(self, theta, forward=None, loglik=None):
        self.theta = np.asarray(theta, dtype=np.float64)
        self.forward = {} if forward is None else forward
        self.loglik = {} if loglik is None else loglik

    def __repr__(self):
        return f"ChainState(theta={self.theta!r}, levels={sorted(self.forward)})"


def rw_propose(theta, step_size, rng, coordinatewise=False):
    """Gaussian random-walk proposal ``theta + step_size * xi``."""
    if coordinatewise:
        out = np.array(theta, dtype=np.float64)
        i = rng.integers(out.size)
        out[i] += step_size * rng.standard_normal()
        return out
    return theta + step_size * rng.standard_normal(np.shape(theta))


def mh_accept_prob(log_post_proposed, log_post_current, log_q_forward=0.0, log_q_reverse=0.0):
    """Metropolis-Hastings acceptance probability from log-densities."""
    if log_post_proposed == -np.inf:
        return 0.0
    log_ratio = log_post_proposed - log_post_current + log_q_reverse - log_q_forward
    if log_ratio >= 0.0:
        return 1.0
    return float(np.exp(log_ratio))


def _evaluate(target, state):
    try:
        value = float(target(state))
    except EvaluationError:
        raise
    except Exception as exc:
        raise EvaluationError(f"target evaluation failed: {exc}", theta=state.theta.copy()) from exc
    if np.isnan(value):
        raise EvaluationError("target returned NaN", theta=state.theta.copy())
    return value


def mh_step(state, target, config, rng, propose=None):
    """One Metropolis-Hastings transition.

    Parameters
    ----------
    state : ChainState
    target : callable
        Maps a ChainState to its (unnormalised) log-density; may cache on the state.
    config : ProposalConfig
    rng : numpy.random.Generator
    propose : callable, optional
        ``propose(theta, rng) -> (theta', log_q_forward, log_q_reverse)``.
        Defaults to the symmetric Gaussian random walk of ``config``.

    Returns
    -------
    (ChainState, bool)
        The next state (``state`` itself on rejection) and whether the
        proposal was accepted. Exactly one uniform is drawn per call, after
        the proposal, regardless of the outcome.
    """
    if propose is None:
        theta_new = rw_propose(state.theta, config.step_size, rng, config.coordinatewise)
        log_qf = log_qr = 0.0
    else:
        theta_new, log_qf, log_qr = propose(state.theta, rng)
    u = rng.random()
    if log_qr == -np.inf:
        return state, False
    proposed = ChainState(theta_new)
    alpha = mh_accept_prob(_evaluate(target, proposed), _evaluate(target, state), log_qf, log_qr)
    if u < alpha:
        return proposed, True
    return state, False


def tune_step_size(current_step, recent_acceptance, band=(0.2, 0.5), factor=0.7):
    """Shrink the step by ``factor`` below the band, grow by ``1/factor`` above it."""
    low, high = band
    if recent_acceptance < low:
        return current_step * factor
    if recent_acceptance > high:
        return current_step / factor
    return current_step


class StepSizeTuner:
    """Tracks acceptances and retunes every ``tune_interval`` steps while active."""

    def __init__(self, config):
        self.config = config
        self.active = True
        self._window_steps = 0
        self._window_accepts = 0
        self.history = [config.step_size]

    @property
    def step_size(self):
        return self.config.step_size

    def record(self, accepted):
        if not self.active:
            return
        self._window_steps += 1
        self._window_accepts += int(accepted)
        if self._window_steps == self.config.tune_interval:
            rate = self._window_accepts / self._window_steps
            self.config.step_size = tune_step_size(
                self.config.step_size, rate, self.config.target_acceptance_band, self.config.tune_factor
            )
            self.history.append(self.config.step_size)
            self._window_steps = self._window_accepts = 0

    def freeze(self):
        self.active = False
