"""Regime-switching Gaussian-mixture hidden Markov models.

Baum-Welch calibration, Viterbi decoding and a Hamilton-filter baseline for
annual index returns.
"""
__version__ = "0.1.0"

from .core import (
    EstimationError,
    GaussianComponent,
    GaussianMixture,
    GmHmm,
    InitialDistribution,
    ModelError,
    ObservationSeq,
    StateSequence,
    TransitionMatrix,
    check_model,
    load_model,
    save_model,
    validate_model,
)
from .density import gm_logpdf, gm_moments, multinormal_logpdf
from .inference import backward, forward, forward_backward, loglikelihood, posteriors, viterbi
from .baumwelch import FitConfig, FitReport, MonotonicityError, StarvedStateError, fit, heuristic_init
from .hamilton import HamiltonFitConfig, HamiltonTheta, hamilton_fit, hamilton_loglik, invariant_distribution
from .sim import simulate
from .data import DataError, PriceSeries, load_csv, load_returns_csv, to_log_returns

__all__ = [
    "EstimationError", "GaussianComponent", "GaussianMixture", "GmHmm", "InitialDistribution",
    "ModelError", "ObservationSeq", "StateSequence", "TransitionMatrix", "check_model",
    "load_model", "save_model", "validate_model", "gm_logpdf", "gm_moments", "multinormal_logpdf",
    "backward", "forward", "forward_backward", "loglikelihood", "posteriors", "viterbi",
    "FitConfig", "FitReport", "MonotonicityError", "StarvedStateError", "fit", "heuristic_init",
    "HamiltonFitConfig", "HamiltonTheta", "hamilton_fit", "hamilton_loglik",
    "invariant_distribution", "simulate", "DataError", "PriceSeries", "load_csv",
    "load_returns_csv", "to_log_returns",
]
