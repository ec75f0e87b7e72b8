"""Multilevel delayed acceptance MCMC with an adaptive error model."""

__version__ = "0.1.0"

from .aem import BiasModel, BiasTermEstimate, corrected_log_likelihood, total_bias, update_moments
from .config import RunConfig, load_config
from .diagnostics import MultiChainTrace, acceptance_rate, effective_sample_size, move_rate, split_rhat
from .errors import (
    ConfigurationError,
    EvaluationError,
    InvariantViolation,
    NumericalError,
    TruncationError,
)
from .hierarchy import (
    MLDASampler,
    MldaStats,
    ModelHierarchy,
    Recorder,
    Trace,
    delayed_accept_prob,
    effective_subchain_proposal_check,
    run_mlda,
    run_rwmh,
)
from .kernel import (
    ChainState,
    GaussianNoiseModel,
    ProposalConfig,
    gaussian_log_likelihood,
    log_prior,
    mh_accept_prob,
    mh_step,
    rw_propose,
    tune_step_size,
)

__all__ = [
    "BiasModel",
    "BiasTermEstimate",
    "ChainState",
    "ConfigurationError",
    "EvaluationError",
    "GaussianNoiseModel",
    "InvariantViolation",
    "MLDASampler",
    "MldaStats",
    "ModelHierarchy",
    "MultiChainTrace",
    "NumericalError",
    "ProposalConfig",
    "Recorder",
    "RunConfig",
    "Trace",
    "TruncationError",
    "acceptance_rate",
    "corrected_log_likelihood",
    "delayed_accept_prob",
    "effective_sample_size",
    "effective_subchain_proposal_check",
    "gaussian_log_likelihood",
    "load_config",
    "log_prior",
    "mh_accept_prob",
    "mh_step",
    "move_rate",
    "rw_propose",
    "run_mlda",
    "run_rwmh",
    "split_rhat",
    "total_bias",
    "tune_step_size",
    "update_moments",
]
