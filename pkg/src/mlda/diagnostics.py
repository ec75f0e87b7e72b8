"""Chain diagnostics: rank-normalised bulk ESS, split R-hat, acceptance rates.

ESS follows the rank-normalisation recipe: pool and rank the split chains,
map ranks through the normal quantile function with the 3/8 offset, then
sum the multi-chain autocorrelation with Geyer's initial monotone sequence.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

from .hierarchy import acceptance_rate, move_rate

__all__ = [
    "MultiChainTrace",
    "acceptance_rate",
    "autocovariance",
    "effective_sample_size",
    "move_rate",
    "rank_normalize",
    "split_chains",
    "split_rhat",
]


@dataclass
class MultiChainTrace:
    """``C x N x R`` draws plus per-chain statistics."""

    draws: np.ndarray
    stats: list = None

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=np.float64)
        if self.draws.ndim == 2:
            self.draws = self.draws[:, :, None]
        if self.draws.ndim != 3 or self.draws.shape[0] < 1:
            raise ValueError(f"draws must be (chains, samples, parameters), got {self.draws.shape}")

    @property
    def n_chains(self):
        return self.draws.shape[0]

    @property
    def n_samples(self):
        return self.draws.shape[1]

    def parameter(self, index):
        return self.draws[:, :, index]


def _as_chains(x):
    x = np.asarray(x.parameter(0) if isinstance(x, MultiChainTrace) else x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError(f"expected (chains, samples), got shape {x.shape}")
    return x


def split_chains(x):
    """Split each chain in half (the middle draw is dropped for odd lengths)."""
    x = _as_chains(x)
    half = x.shape[1] // 2
    return np.concatenate([x[:, :half], x[:, x.shape[1] - half:]], axis=0)


def rank_normalize(x):
    """Normal scores of pooled average ranks, ``Phi^-1((r - 3/8) / (S + 1/4))``."""
    x = np.asarray(x, dtype=np.float64)
    ranks = rankdata(x, method="average").reshape(x.shape)
    return ndtri((ranks - 0.375) / (x.size + 0.25))


def autocovariance(x):
    """Biased autocovariance of each row (divisor ``n``) via FFT."""
    x = np.atleast_2d(x)
    n = x.shape[-1]
    centred = x - x.mean(axis=-1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centred, size, axis=-1)
    return np.fft.irfft(f * np.conj(f), size, axis=-1)[..., :n] / n


def _undefined(what):
    warnings.warn(f"{what} is undefined for constant chains", RuntimeWarning, stacklevel=3)
    return float("nan")


def _ess_of(chains):
    m, n = chains.shape
    acov = autocovariance(chains)
    chain_mean = chains.mean(axis=1)
    mean_var = np.mean(acov[:, 0]) * n / (n - 1.0)
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus += np.var(chain_mean, ddof=1)

    rho = np.zeros(n)
    rho[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (mean_var - np.mean(acov[:, 1])) / var_plus
    rho[1] = rho_odd
    # Geyer: keep positive pair sums
    t = 1
    while t < n - 3 and rho_even + rho_odd > 0.0:
        rho_even = 1.0 - (mean_var - np.mean(acov[:, t + 1])) / var_plus
        rho_odd = 1.0 - (mean_var - np.mean(acov[:, t + 2])) / var_plus
        if rho_even + rho_odd >= 0.0:
            rho[t + 1] = rho_even
            rho[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0.0:
        rho[max_t + 1] = rho_even
    # ... and make the pair sums monotone
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2
    tau = -1.0 + 2.0 * np.sum(rho[: max_t + 1]) + rho[max_t + 1]
    tau = max(tau, 1.0 / np.log10(m * n))
    return m * n / tau


def effective_sample_size(traces, parameter=None):
    """Rank-normalised bulk ESS of one parameter pooled over chains.

    Parameters
    ----------
    traces : MultiChainTrace or array (chains, samples) or (samples,)
    parameter : int, optional
        Column of a MultiChainTrace.

    Returns NaN (with a RuntimeWarning) for constant input.
    """
    x = traces.parameter(parameter or 0) if isinstance(traces, MultiChainTrace) else _as_chains(traces)
    if x.shape[1] < 4:
        raise ValueError("need at least 4 draws per chain")
    if np.ptp(x) == 0.0 or not np.all(np.isfinite(x)):
        return _undefined("ESS")
    return float(_ess_of(rank_normalize(split_chains(x))))


def split_rhat(traces, parameter=None):
    """Rank-normalised split R-hat, ``sqrt((W_n + B/n) / W_n)``.

    ``W_n`` is the mean within-chain variance with divisor ``n`` and ``B/n``
    the variance of the split-chain means, so identical split chains give
    exactly 1.
    """
    x = traces.parameter(parameter or 0) if isinstance(traces, MultiChainTrace) else _as_chains(traces)
    if x.shape[1] < 4:
        raise ValueError("need at least 4 draws per chain")
    if np.ptp(x) == 0.0 or not np.all(np.isfinite(x)):
        return _undefined("R-hat")
    z = rank_normalize(split_chains(x))
    within = np.mean(np.var(z, axis=1))
    if within == 0.0:
        return _undefined("R-hat")
    between = np.var(z.mean(axis=1), ddof=1) if z.shape[0] > 1 else 0.0
    return float(np.sqrt((within + between) / within))
