"""Multilevel delayed acceptance.

A proposal for level ``l`` is the end point of a subchain on level ``l-1``
that starts from the current level-``l`` state. The proposal is screened
with the delayed-acceptance ratio, and after a rejection the next subchain
restarts from the retained state. The recursion bottoms out in random-walk
Metropolis on level 0.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from .aem import BiasModel, on_delayed_acceptance_evaluation
from .errors import ConfigurationError, EvaluationError, InvariantViolation
from .kernel import ChainState, ProposalConfig, StepSizeTuner, log_prior, mh_step


class ModelHierarchy:
    """Forward maps ``F_0 .. F_L`` sharing one prior, noise model and data set.

    Parameters
    ----------
    forward_maps : list of callables
        ``theta -> model output`` ordered coarsest to finest.
    subchain_lengths : list of int
        ``J_0 .. J_{L-1}``.
    noise : GaussianNoiseModel
    data : array
    log_prior : callable, optional
        Shared by every level, so it cancels from the delayed-acceptance ratios.
    """

    def __init__(self, forward_maps, subchain_lengths, noise, data, log_prior=log_prior):
        if len(forward_maps) < 2:
            raise ConfigurationError("a hierarchy needs at least two levels")
        if len(subchain_lengths) != len(forward_maps) - 1:
            raise ConfigurationError(
                f"need {len(forward_maps) - 1} subchain lengths, got {len(subchain_lengths)}"
            )
        if any(int(j) != j or j < 1 for j in subchain_lengths):
            raise ConfigurationError(f"subchain lengths must be positive integers, got {subchain_lengths}")
        self.forward_maps = list(forward_maps)
        self.subchain_lengths = [int(j) for j in subchain_lengths]
        self.noise = noise
        self.data = None if data is None else np.asarray(data, dtype=np.float64)
        self.log_prior = log_prior

    @property
    def n_levels(self):
        return len(self.forward_maps)

    @property
    def finest(self):
        return len(self.forward_maps) - 1

    def log_likelihood(self, level, output, bias=None):
        """Level log-likelihood of a model output; AEM-corrected below the finest level."""
        if bias is not None and level < self.finest:
            return bias.corrected_density(level, self.noise)(self.data - output)
        return self.noise.log_likelihood(output, self.data)


def delayed_accept_prob(log_like_fine_proposed, log_like_fine_current,
                        log_like_coarse_proposed, log_like_coarse_current):
    """``min(1, L_f(θ') L_c(θ) / (L_f(θ) L_c(θ')))`` from log-likelihoods."""
    if log_like_fine_proposed == -np.inf:
        return 0.0
    log_ratio = (log_like_fine_proposed - log_like_fine_current) - (
        log_like_coarse_proposed - log_like_coarse_current
    )
    if log_ratio >= 0.0:
        return 1.0
    return float(np.exp(log_ratio))


@dataclass
class MldaStats:
    """Per-level counters.

    ``proposals`` counts proposals that were evaluated and screened;
    ``skipped`` counts subchains that ended where they started (no new
    point, state retained, nothing evaluated). ``evaluations`` counts
    forward-map calls.
    """

    n_levels: int
    proposals: np.ndarray = None
    accepted: np.ndarray = None
    skipped: np.ndarray = None
    evaluations: np.ndarray = None

    def __post_init__(self):
        for name in ("proposals", "accepted", "skipped", "evaluations"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(self.n_levels, dtype=np.int64))

    def __add__(self, other):
        return MldaStats(
            self.n_levels,
            self.proposals + other.proposals,
            self.accepted + other.accepted,
            self.skipped + other.skipped,
            self.evaluations + other.evaluations,
        )

    def acceptance_rate(self, level):
        return acceptance_rate(self, level)

    def move_rate(self, level):
        return move_rate(self, level)

    def to_dict(self):
        return {
            "proposals": self.proposals.tolist(),
            "accepted": self.accepted.tolist(),
            "skipped": self.skipped.tolist(),
            "evaluations": self.evaluations.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        arrs = {k: np.asarray(d[k], dtype=np.int64) for k in ("proposals", "accepted", "skipped", "evaluations")}
        return cls(len(arrs["proposals"]), **arrs)


def acceptance_rate(stats, level):
    """Accepted / evaluated proposals on ``level``."""
    n = int(stats.proposals[level])
    if n == 0:
        raise ValueError(f"no proposals were evaluated on level {level}")
    return int(stats.accepted[level]) / n


def move_rate(stats, level):
    """Accepted / all transitions on ``level``, skipped subchains counting as rejections."""
    n = int(stats.proposals[level]) + int(stats.skipped[level])
    if n == 0:
        raise ValueError(f"no transitions were made on level {level}")
    return int(stats.accepted[level]) / n


@dataclass
class RunStats:
    burnin: MldaStats
    sampling: MldaStats

    @property
    def total(self):
        return self.burnin + self.sampling

    def to_dict(self):
        return {"burnin": self.burnin.to_dict(), "sampling": self.sampling.to_dict()}


@dataclass
class Trace:
    """Post-burn-in finest-level states in order."""

    samples: np.ndarray
    accepted: np.ndarray
    log_likelihood: np.ndarray
    stats: RunStats = None
    step_sizes: list = field(default_factory=list)
    bias: dict = None

    def __len__(self):
        return len(self.samples)


class Recorder:
    """Collects sampler events for instrumented runs.

    ``kinds`` restricts which event kinds are kept (default: all).
    """

    def __init__(self, kinds=None):
        self.kinds = None if kinds is None else set(kinds)
        self.events = []

    def __call__(self, kind, **data):
        if self.kinds is None or kind in self.kinds:
            data["kind"] = kind
            self.events.append(data)


class MLDASampler:
    """One MLDA chain over a ModelHierarchy.

    Owns the chain's random stream, step-size tuner, statistics and (when
    ``aem`` is on) its BiasModel; the hierarchy itself is never mutated.

    Parameters
    ----------
    hierarchy : ModelHierarchy
    proposal : ProposalConfig, optional
        Level-0 random walk; tuned during burn-in only.
    aem : bool
        Use bias-corrected likelihoods below the finest level.
    freeze_aem_after_burnin : bool
        Stop updating the bias model once sampling starts.
    rng : numpy.random.Generator or int
    propose : callable, optional
        Custom level-0 proposal ``(theta, rng) -> (theta', log_q_fwd, log_q_rev)``.
    recorder : Recorder, optional
    """

    def __init__(self, hierarchy, proposal=None, aem=False, freeze_aem_after_burnin=False,
                 rng=None, propose=None, recorder=None):
        self.hierarchy = hierarchy
        self.config = copy.deepcopy(proposal) if proposal is not None else ProposalConfig()
        self.tuner = StepSizeTuner(self.config)
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.propose = propose
        self.recorder = recorder
        self.freeze_aem_after_burnin = freeze_aem_after_burnin
        self.bias = None
        if aem:
            n_obs = hierarchy.noise.n_obs
            self.bias = BiasModel(hierarchy.finest, n_obs, adaptation_enabled=True)
        self.run_stats = RunStats(MldaStats(hierarchy.n_levels), MldaStats(hierarchy.n_levels))
        self._stats = self.run_stats.burnin

    # -- evaluation with caching -------------------------------------------------

    def forward(self, level, state):
        out = state.forward.get(level)
        if out is None:
            try:
                out = np.asarray(self.hierarchy.forward_maps[level](state.theta), dtype=np.float64)
            except EvaluationError:
                raise
            except Exception as exc:
                raise EvaluationError(
                    f"forward map on level {level} failed: {exc}", theta=state.theta.copy(), level=level
                ) from exc
            state.forward[level] = out
            self._stats.evaluations[level] += 1
        return out

    def log_likelihood(self, level, state):
        bias = self.bias if level < self.hierarchy.finest else None
        key = None if bias is None else bias.key(level)
        cached = state.loglik.get(level)
        if cached is not None and cached[0] == key:
            return cached[1]
        value = float(self.hierarchy.log_likelihood(level, self.forward(level, state), bias))
        state.loglik[level] = (key, value)
        return value

    def _log_target0(self, state):
        return self.hierarchy.log_prior(state.theta) + self.log_likelihood(0, state)

    def bootstrap(self, theta):
        """Initial state with forward maps evaluated on every level."""
        state = ChainState(np.array(theta, dtype=np.float64))
        if not np.all(np.isfinite(state.theta)):
            raise ConfigurationError("initial state must be finite")
        for level in range(self.hierarchy.n_levels):
            self.log_likelihood(level, state)
        return state

    # -- the recursion -----------------------------------------------------------

    def _base_step(self, state):
        new, accepted = mh_step(state, self._log_target0, self.config, self.rng, self.propose)
        if self.recorder is not None:
            self.recorder("proposal0", theta=new.theta.copy() if accepted else None, accepted=accepted)
        self._stats.proposals[0] += 1
        self._stats.accepted[0] += accepted
        self.tuner.record(accepted)
        return new

    def _subchain(self, level, start):
        """Run the level-``level`` chain from ``start``; return its final state."""
        if self.recorder is not None:
            self.recorder("subchain", level=level, start=start.theta.copy())
        state = start
        for _ in range(self.hierarchy.subchain_lengths[level]):
            state = self._base_step(state) if level == 0 else self.mlda_step(level, state)
        return state

    def mlda_step(self, level, state):
        """One delayed-acceptance transition on ``level >= 1``; returns the next state."""
        proposal = self._subchain(level - 1, state)
        u = self.rng.random()
        if proposal is state:
            self._stats.skipped[level] += 1
            if self.recorder is not None:
                self.recorder("decision", level=level, accepted=False, skipped=True, retained=state.theta.copy())
            return state

        ll_fine_prop = self.log_likelihood(level, proposal)
        alpha = delayed_accept_prob(
            ll_fine_prop,
            self.log_likelihood(level, state),
            self.log_likelihood(level - 1, proposal),
            self.log_likelihood(level - 1, state),
        )
        accepted = u < alpha
        self._stats.proposals[level] += 1
        self._stats.accepted[level] += accepted
        if self.bias is not None:
            on_delayed_acceptance_evaluation(
                level - 1, proposal.forward[level], proposal.forward[level - 1], self.bias
            )
        new = proposal if accepted else state
        if self.recorder is not None:
            self.recorder("decision", level=level, accepted=bool(accepted), skipped=False,
                          alpha=alpha, retained=new.theta.copy())
        return new

    # -- driver ------------------------------------------------------------------

    def sample(self, n_samples, n_burnin=0, initial=None):
        """Run burn-in then ``n_samples`` finest-level transitions.

        Tuning and (optionally) AEM adaptation are frozen when burn-in ends.
        """
        if n_samples < 0 or n_burnin < 0:
            raise ConfigurationError("n_samples and n_burnin must be non-negative")
        top = self.hierarchy.finest
        if initial is None:
            raise ConfigurationError("an initial state is required")
        self._stats = self.run_stats.burnin
        state = self.bootstrap(initial)
        for _ in range(n_burnin):
            state = self.mlda_step(top, state)
        self.tuner.freeze()
        if self.freeze_aem_after_burnin and self.bias is not None:
            self.bias.adaptation_enabled = False

        self._stats = self.run_stats.sampling
        dim = state.theta.size
        samples = np.empty((n_samples, dim))
        accepted = np.zeros(n_samples, dtype=bool)
        loglik = np.empty(n_samples)
        for n in range(n_samples):
            new = self.mlda_step(top, state)
            accepted[n] = new is not state
            state = new
            samples[n] = state.theta
            loglik[n] = self.log_likelihood(top, state)
        return Trace(
            samples, accepted, loglik, self.run_stats, list(self.tuner.history),
            None if self.bias is None else self.bias.to_dict(),
        )

def mlda_step(level, state, sampler):
    """Functional form of :meth:`MLDASampler.mlda_step`."""
    return sampler.mlda_step(level, state)


def run_mlda(hierarchy, n_samples, n_burnin, initial, rng, proposal=None, aem=False, **kwargs):
    """Run one MLDA chain; returns ``(Trace, RunStats)``."""
    sampler = MLDASampler(hierarchy, proposal=proposal, aem=aem, rng=rng, **kwargs)
    trace = sampler.sample(n_samples, n_burnin, initial)
    return trace, sampler.run_stats


def run_rwmh(forward_map, noise, data, n_samples, n_burnin, initial, rng, proposal=None,
             log_prior=log_prior):
    """Single-level random-walk Metropolis baseline with burn-in tuning."""
    config = copy.deepcopy(proposal) if proposal is not None else ProposalConfig()
    tuner = StepSizeTuner(config)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    data = np.asarray(data, dtype=np.float64)
    stats = RunStats(MldaStats(1), MldaStats(1))
    current = [stats.burnin]

    def target(state):
        if "lp" not in state.loglik:
            current[0].evaluations[0] += 1
            out = np.asarray(forward_map(state.theta), dtype=np.float64)
            state.forward[0] = out
            ll = noise.log_likelihood(out, data)
            state.loglik[0] = (None, ll)
            state.loglik["lp"] = log_prior(state.theta) + ll
        return state.loglik["lp"]

    state = ChainState(np.array(initial, dtype=np.float64))
    target(state)
    samples = np.empty((n_samples, state.theta.size))
    accepted = np.zeros(n_samples, dtype=bool)
    loglik = np.empty(n_samples)
    for n in range(n_burnin + n_samples):
        if n == n_burnin:
            tuner.freeze()
            current[0] = stats.sampling
        state, acc = mh_step(state, target, config, rng)
        current[0].proposals[0] += 1
        current[0].accepted[0] += acc
        tuner.record(acc)
        if n >= n_burnin:
            samples[n - n_burnin] = state.theta
            accepted[n - n_burnin] = acc
            loglik[n - n_burnin] = state.loglik[0][1]
    return Trace(samples, accepted, loglik, stats, list(tuner.history)), stats


@dataclass
class SubchainCheckReport:
    n_checked: int
    violations: list

    @property
    def ok(self):
        return not self.violations


def effective_subchain_proposal_check(recorder, strict=True):
    """Verify revert-on-reject from an instrumented run.

    After every decision on level ``l`` the next level-``l-1`` subchain
    must start from the state level ``l`` retained. With ``strict`` the first
    violation raises InvariantViolation carrying the event index.
    """
    events = recorder.events if isinstance(recorder, Recorder) else list(recorder)
    # level -> (event index, state that level's chain currently holds, accepted flag)
    current = {}
    violations = []
    n_checked = 0
    for idx, ev in enumerate(events):
        if ev["kind"] == "decision":
            current[ev["level"]] = (idx, ev["retained"], ev["accepted"])
        elif ev["kind"] == "subchain":
            parent = ev["level"] + 1
            if parent in current:
                d_idx, retained, acc = current[parent]
                n_checked += 1
                if not np.array_equal(ev["start"], retained):
                    violations.append({"event": idx, "decision_event": d_idx, "level": parent,
                                       "after_accept": acc})
                    if strict:
                        raise InvariantViolation(
                            f"level-{parent - 1} subchain at event {idx} did not start from the "
                            f"state held by level {parent} (event {d_idx})",
                            step=idx,
                        )
            current[ev["level"]] = (idx, ev["start"], None)
    return SubchainCheckReport(n_checked, violations)
