"""Small hierarchies with known answers, shared by several test modules."""

import itertools

import numpy as np

from mlda.hierarchy import ModelHierarchy
from mlda.kernel import GaussianNoiseModel, mh_accept_prob
from mlda.hierarchy import delayed_accept_prob


def zero_prior(theta):
    return 0.0


class DiscreteHierarchy(ModelHierarchy):
    """States ``0..n-1`` stored as a length-1 vector; level ``l`` targets ``pis[l]``."""

    def __init__(self, pis, subchain_lengths):
        self.log_pis = [np.log(np.asarray(p, dtype=np.float64)) for p in pis]
        maps = [lambda theta: np.asarray(theta, dtype=np.float64) for _ in pis]
        super().__init__(maps, subchain_lengths, None, None, log_prior=zero_prior)

    def log_likelihood(self, level, output, bias=None):
        return float(self.log_pis[level][int(output[0])])


def discrete_proposal(Q):
    Q = np.asarray(Q, dtype=np.float64)
    cum = np.cumsum(Q, axis=1)

    def propose(theta, rng):
        i = int(theta[0])
        j = int(np.searchsorted(cum[i], rng.random() * cum[i, -1], side="right"))
        j = min(j, Q.shape[0] - 1)
        return np.array([float(j)]), np.log(Q[i, j]), np.log(Q[j, i])

    return propose


def random_discrete_problem(rng, n=3):
    """Fine and coarse targets plus an irreducible proposal with zero diagonal."""
    pi_f = rng.random(n) + 0.05
    pi_c = rng.random(n) + 0.05
    Q = rng.random((n, n)) + 0.05
    np.fill_diagonal(Q, 0.0)
    return pi_f / pi_f.sum(), pi_c / pi_c.sum(), Q / Q.sum(axis=1, keepdims=True)


def library_mlda_matrix(pi_fine, pi_coarse, Q, J):
    """Two-level MLDA kernel assembled from the package's acceptance functions."""
    n = len(pi_fine)
    lf, lc = np.log(pi_fine), np.log(pi_coarse)
    P0 = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and Q[i, j] > 0:
                P0[i, j] = Q[i, j] * mh_accept_prob(lc[j], lc[i], np.log(Q[i, j]), np.log(Q[j, i]))
        P0[i, i] = 1.0 - P0[i].sum()
    K = np.zeros((n, n))
    for i in range(n):
        for path in itertools.product(range(n), repeat=J):
            prob, prev = 1.0, i
            for s in path:
                prob *= P0[prev, s]
                prev = s
            j = path[-1]
            alpha = 1.0 if j == i else delayed_accept_prob(lf[j], lf[i], lc[j], lc[i])
            K[i, j] += prob * alpha
            K[i, i] += prob * (1.0 - alpha)
    return K


def gaussian_hierarchy(shifts, subchain_lengths, data=1.0, noise_var=1.0):
    """1-D maps ``F_l(theta) = theta + shifts[l]`` with one observation.

    With a N(0, 1) prior the finest posterior (shift 0) is
    ``N(data / (1 + noise_var), noise_var / (1 + noise_var))``.
    """
    maps = [(lambda s: (lambda theta: np.asarray(theta, dtype=np.float64) + s))(s) for s in shifts]
    noise = GaussianNoiseModel(np.array([[noise_var]]))
    return ModelHierarchy(maps, subchain_lengths, noise, np.array([data]))
