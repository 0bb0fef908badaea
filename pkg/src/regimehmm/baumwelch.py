"""Baum-Welch (EM) calibration of Gaussian-mixture HMMs.

The E-step is :func:`regimehmm.inference.posteriors`; :func:`m_step`
re-estimates transition probabilities, initial probabilities and every
mixture weight, mean and covariance from those posteriors. :func:`fit`
alternates the two until the relative log-likelihood gain drops below
``rel_tol``.

Initialisation follows the economic heuristics used for annual equity
returns: state 1 is the "up" regime, the first return sets how likely the
chain starts there, the transition prior favours staying up and returning
to up, and emissions are seeded from a sign split of the data.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    EstimationError,
    GaussianComponent,
    GaussianMixture,
    GmHmm,
    InitialDistribution,
    ModelError,
    ObservationSeq,
    TransitionMatrix,
    check_model,
)
from .density import floor_covariance, variance_floor
from .inference import posteriors

logger = logging.getLogger(__name__)

STARVED_TOL = 1e-12
MONOTONE_SLACK = 1e-8


class StarvedStateError(EstimationError):
    def __init__(self, state: int, occupancy: float):
        self.state = state
        self.occupancy = occupancy
        super().__init__(
            f"starved state {state + 1}: expected occupancy {occupancy:.3g} is below {STARVED_TOL:g}; "
            "re-initialise the model (different starting means or fewer states)"
        )


class MonotonicityError(EstimationError):
    pass


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 500
    rel_tol: float = 1e-7
    variance_floor_scale: float = 1e-6
    seed: int = 0
    restarts: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if not self.variance_floor_scale > 0:
            raise ValueError("variance_floor_scale must be > 0")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass
class FitReport:
    model: GmHmm
    loglik_trace: list[float]
    iterations: int
    converged: bool
    restart: int = 0
    restart_logliks: list[float] = field(default_factory=list)

    @property
    def log_likelihood(self) -> float:
        return self.loglik_trace[-1]

    def to_dict(self) -> dict:
        return {
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "restart": self.restart,
            "restart_logliks": list(self.restart_logliks),
            "loglik_trace": list(self.loglik_trace),
        }


def m_step(
    o: ObservationSeq,
    gamma: np.ndarray,
    xi: np.ndarray,
    gamma_mix: np.ndarray,
    variance_floor: float = 0.0,
    previous: GmHmm | None = None,
) -> GmHmm:
    """Re-estimate all model parameters from smoothed posteriors.

    Args:
        o: observations the posteriors were computed on.
        gamma: (T, R) state posteriors.
        xi: (T-1, R, R) pairwise posteriors.
        gamma_mix: (T, R, K) state/component posteriors.
        variance_floor: covariance eigenvalues are raised to at least this.
        previous: model the posteriors came from. Its parameters are kept for
            rows or components that received no expected mass (a transition
            row when T=1, a mixture component nobody chose).

    Raises:
        StarvedStateError: a state's total expected occupancy is below 1e-12.
    """
    X = o.obs
    T, R = gamma.shape
    K = gamma_mix.shape[2]
    n = X.shape[1]

    occupancy = gamma.sum(axis=0)
    for j in range(R):
        if occupancy[j] < STARVED_TOL:
            raise StarvedStateError(j, float(occupancy[j]))

    # transitions: expected i->j counts over expected departures from i
    counts = xi.sum(axis=0) if T > 1 else np.zeros((R, R))
    departures = counts.sum(axis=1)
    A = np.empty((R, R))
    for i in range(R):
        if departures[i] > STARVED_TOL:
            A[i] = counts[i] / departures[i]
        elif previous is not None:
            A[i] = previous.A[i]
        else:
            A[i] = 1.0 / R

    pi = gamma[0] / gamma[0].sum()

    comp_occ = gamma_mix.sum(axis=0)  # (R, K)
    weights = comp_occ / comp_occ.sum(axis=1, keepdims=True)
    means = np.empty((R, K, n))
    covs = np.empty((R, K, n, n))
    for j in range(R):
        for k in range(K):
            w = gamma_mix[:, j, k]
            if comp_occ[j, k] < STARVED_TOL:
                if previous is not None:
                    means[j, k] = previous.means[j, k]
                    covs[j, k] = previous.covs[j, k]
                else:
                    g = gamma[:, j] / occupancy[j]
                    means[j, k] = g @ X
                    d = X - means[j, k]
                    covs[j, k] = floor_covariance((g[:, None] * d).T @ d, variance_floor)
                continue
            mu = (w @ X) / comp_occ[j, k]
            d = X - mu
            means[j, k] = mu
            covs[j, k] = floor_covariance((w[:, None] * d).T @ d / comp_occ[j, k], variance_floor)
    return GmHmm.from_arrays(A, pi, weights, means, covs)


def _relative_gain(new: float, old: float) -> float:
    return (new - old) / max(abs(old), 1.0)


def _fit_once(o: ObservationSeq, init: GmHmm, cfg: FitConfig, floor: float) -> FitReport:
    model = init
    post = posteriors(model, o)
    trace = [post.log_likelihood]
    converged = False
    it = 0
    while it < cfg.max_iters:
        new = m_step(o, post.gamma, post.xi, post.gamma_mix, floor, previous=model)
        post = posteriors(new, o)
        ll = post.log_likelihood
        it += 1
        if not np.isfinite(ll):
            raise EstimationError(f"non-finite log-likelihood at iteration {it}")
        if ll < trace[-1] - MONOTONE_SLACK:
            raise MonotonicityError(
                f"EM monotonicity violated at iteration {it}: log-likelihood fell from "
                f"{trace[-1]:.12g} to {ll:.12g}"
            )
        gain = _relative_gain(ll, trace[-1])
        trace.append(ll)
        model = new
        if gain < cfg.rel_tol:
            converged = True
            break
    return FitReport(model, trace, it, converged)


def perturbed_init(init: GmHmm, o: ObservationSeq, rng: np.random.Generator, spread: float = 0.25) -> GmHmm:
    """Copy of ``init`` with every mixture mean shifted by up to ``spread`` data stds."""
    std = o.obs.std(axis=0)
    shift = rng.uniform(-spread, spread, size=init.means.shape) * std
    return GmHmm.from_arrays(init.A, init.pi.pi, init.weights, init.means + shift, init.covs)


def fit(o: ObservationSeq, init: GmHmm, cfg: FitConfig | None = None) -> FitReport:
    """Calibrate ``init`` to ``o`` by Baum-Welch.

    With ``cfg.restarts > 0`` extra runs start from ``init`` with perturbed
    means (seeded by ``cfg.seed``); the highest final log-likelihood wins,
    ties going to the lowest run index (run 0 is the unperturbed start).

    Raises:
        ModelError: ``init`` is invalid or its dimension differs from ``o``.
        StarvedStateError: a state lost all expected occupancy.
        MonotonicityError: the log-likelihood decreased by more than 1e-8.
    """
    cfg = cfg or FitConfig()
    check_model(init)
    if init.n != o.n:
        raise ModelError(f"model dimension {init.n} does not match observation dimension {o.n}")
    floor = variance_floor(o.obs, cfg.variance_floor_scale)

    best = _fit_once(o, init, cfg, floor)
    lls = [best.log_likelihood]
    for r in range(1, cfg.restarts + 1):
        rng = np.random.default_rng([int(cfg.seed), r])
        try:
            rep = _fit_once(o, perturbed_init(init, o, rng), cfg, floor)
        except StarvedStateError as exc:
            logger.warning("restart %d abandoned: %s", r, exc)
            lls.append(float("-inf"))
            continue
        lls.append(rep.log_likelihood)
        if rep.log_likelihood > best.log_likelihood:
            best = replace(rep, restart=r)
    best.restart_logliks = lls
    return best


# --- initialisation ---------------------------------------------------------

def init_pi(first_return: float, scale: float, R: int = 2) -> InitialDistribution:
    """Initial distribution from the sign and size of the first return.

    State 1 gets probability 0.5 at a zero first return, rising linearly to 1
    at ``+scale`` and falling to 0 at ``-scale``. The other states share the
    remainder equally. A non-positive ``scale`` gives the uniform vector.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if R == 1:
        return InitialDistribution(np.ones(1))
    if not scale > 0:
        return InitialDistribution(np.full(R, 1.0 / R))
    z = first_return / scale
    if first_return > 0:
        p1 = 0.5 + 0.5 * min(max(z, 0.0), 1.0)
    else:
        p1 = 0.5 * min(max(1.0 + z, 0.0), 1.0)
    pi = np.full(R, (1.0 - p1) / (R - 1))
    pi[0] = p1
    return InitialDistribution(pi)


def init_transition(R: int) -> TransitionMatrix:
    """Economic prior: stay up with 0.6, return to up with 0.7."""
    if R < 1:
        raise ValueError("R must be >= 1")
    if R == 1:
        return TransitionMatrix(np.ones((1, 1)))
    A = np.empty((R, R))
    A[0, 0] = 0.6
    A[0, 1:] = 0.4 / (R - 1)
    A[1:, 0] = 0.7
    A[1:, 1:] = 0.3 / (R - 1)
    return TransitionMatrix(A)


def split_by_regime(o: ObservationSeq, R: int) -> list[np.ndarray]:
    """Row indices assigned to each state by the first coordinate.

    R=2 puts positive returns in state 1 and the rest in state 2. For R>2
    the rows are ranked from highest to lowest and cut into R near-equal
    quantile groups, state 1 taking the highest.
    """
    x = o.obs[:, 0]
    if R == 1:
        return [np.arange(o.T)]
    if R == 2:
        return [np.flatnonzero(x > 0), np.flatnonzero(~(x > 0))]
    order = np.argsort(-x, kind="stable")
    return [np.sort(chunk) for chunk in np.array_split(order, R)]


def _moment_mixture(X: np.ndarray, K: int, floor: float, spread: float = 1.0) -> GaussianMixture:
    mu = X.mean(axis=0)
    cov = floor_covariance(np.atleast_2d(np.cov(X, rowvar=False, bias=True)), floor)
    if K == 1:
        return GaussianMixture.single(mu, cov)
    std = np.sqrt(np.diag(cov))
    offsets = np.linspace(-spread, spread, K)
    comps = tuple(GaussianComponent(mu + s * std, cov) for s in offsets)
    return GaussianMixture(np.full(K, 1.0 / K), comps)


def init_emissions(o: ObservationSeq, R: int, K: int, floor: float | None = None) -> tuple[GaussianMixture, ...]:
    """Per-state mixtures seeded from the data split of :func:`split_by_regime`.

    Each state's K components sit at the split mean shifted by evenly spaced
    multiples (from -1 to +1) of the split standard deviation, with equal
    weights and the split covariance. Narrower spreads let EM collapse a
    component onto a single annual return. A split with fewer than n+1 rows falls
    back to the moments of the whole sample and emits a warning.
    """
    if R < 1 or K < 1:
        raise ValueError("R and K must be >= 1")
    if floor is None:
        floor = variance_floor(o.obs)
    out = []
    for j, rows in enumerate(split_by_regime(o, R)):
        if rows.size < o.n + 1:
            warnings.warn(
                f"state {j + 1} initial split has {rows.size} observations; using whole-sample moments",
                RuntimeWarning,
                stacklevel=2,
            )
            rows = np.arange(o.T)
        out.append(_moment_mixture(o.obs[rows], K, floor))
    return tuple(out)


def heuristic_init(o: ObservationSeq, R: int = 2, K: int = 2, variance_floor_scale: float = 1e-6) -> GmHmm:
    """Starting model built from the three initialisation heuristics."""
    floor = variance_floor(o.obs, variance_floor_scale)
    scale = float(o.obs[:, 0].std(ddof=1)) if o.T > 1 else 0.0
    return GmHmm(
        init_transition(R),
        init_pi(float(o.obs[0, 0]), scale, R),
        init_emissions(o, R, K, floor),
    )
