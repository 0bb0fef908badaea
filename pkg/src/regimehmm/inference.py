"""Forward/backward recursions, state posteriors and Viterbi decoding.

The forward and backward variables are kept in scaled form: every forward
step is divided by its own sum ``c_t`` so that each row of ``alpha_hat`` is
the filtered distribution ``p(q_t | O_1..O_t)``. The log-likelihood is
``sum(log c_t)``. Emission densities are shifted by their per-step maximum
before exponentiation, which keeps the recursion finite even when every
state gives an observation a density far below the double-precision range.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EstimationError, GmHmm, ModelError, ObservationSeq, StateSequence
from .density import component_responsibilities, emission_terms

_MAX_EXP = 700.0


@dataclass(frozen=True)
class TrellisResult:
    log_likelihood: float
    alpha_hat: np.ndarray
    beta_hat: np.ndarray | None
    log_scales: np.ndarray

    @property
    def scales(self) -> np.ndarray:
        # may underflow to 0 or overflow for extreme densities; log_scales is exact
        return np.exp(self.log_scales)


@dataclass(frozen=True)
class Posteriors:
    """Smoothed posteriors of one (model, observations) pair.

    gamma[t, i] = p(q_t=i | O), xi[t, i, j] = p(q_t=i, q_{t+1}=j | O) and
    gamma_mix[t, j, k] = p(q_t=j, mixture component k | O).
    """

    gamma: np.ndarray
    xi: np.ndarray
    gamma_mix: np.ndarray
    log_likelihood: float


@dataclass(frozen=True)
class DecodedPath:
    path: StateSequence
    log_joint: float

    @property
    def regimes(self) -> list[int]:
        return self.path.tolist()


def _check(m: GmHmm, o: ObservationSeq) -> None:
    if not isinstance(o, ObservationSeq):
        raise TypeError("observations must be an ObservationSeq")
    if o.T < 1:
        raise ModelError("empty observation sequence")
    if o.n != m.n:
        raise ModelError(f"observation dimension {o.n} does not match model dimension {m.n}")


def _shifted_emissions(m: GmHmm, o: ObservationSeq):
    log_b, terms = emission_terms(m, o.obs)
    shift = log_b.max(axis=1)
    return log_b, np.exp(log_b - shift[:, None]), shift, terms


def _forward(A, pi, log_b, e, shift):
    T, R = e.shape
    alpha = np.empty((T, R))
    log_c = np.empty(T)
    pred = pi
    for t in range(T):
        if t:
            pred = alpha[t - 1] @ A
        a = pred * e[t]
        c = a.sum()
        if c > 0:
            alpha[t] = a / c
            log_c[t] = np.log(c) + shift[t]
            continue
        # the state holding the predicted mass underflowed after the shift
        with np.errstate(divide="ignore"):
            la = np.log(pred) + log_b[t]
        top = la.max()
        if not np.isfinite(top):
            raise EstimationError(f"observation {t + 1} has zero probability under the model")
        a = np.exp(la - top)
        c = a.sum()
        alpha[t] = a / c
        log_c[t] = np.log(c) + top
    return alpha, log_c


def _density_ratio(log_b, log_c):
    # b_j(O_t) / c_t; it only exceeds 1/p(q_t=j | O_1..O_{t-1}), so the cap
    # is reached only by states the filter gives (near) zero mass
    return np.exp(np.minimum(log_b - log_c[:, None], _MAX_EXP))


def _backward(A, log_b, log_c):
    T, R = log_b.shape
    beta = np.empty((T, R))
    beta[-1] = 1.0
    f = _density_ratio(log_b, log_c)
    for t in range(T - 2, -1, -1):
        beta[t] = A @ (f[t + 1] * beta[t + 1])
    return beta


def forward(m: GmHmm, o: ObservationSeq) -> TrellisResult:
    """Scaled forward pass; ``beta_hat`` is left as None."""
    _check(m, o)
    log_b, e, shift, _ = _shifted_emissions(m, o)
    alpha, log_c = _forward(m.A, m.pi.pi, log_b, e, shift)
    return TrellisResult(float(log_c.sum()), alpha, None, log_c)


def backward(m: GmHmm, o: ObservationSeq, log_scales: np.ndarray) -> np.ndarray:
    """Scaled backward variables for the scaling produced by :func:`forward`.

    ``beta_hat[T-1] = 1``; earlier rows follow the usual recursion, each step
    divided by the next step's scale factor, so that
    ``alpha_hat[t] * beta_hat[t]`` equals ``p(q_t | O)``.
    """
    _check(m, o)
    log_scales = np.asarray(log_scales, dtype=float)
    if log_scales.shape != (o.T,):
        raise ModelError(f"expected {o.T} scale factors, got shape {log_scales.shape}")
    log_b, _ = emission_terms(m, o.obs)
    return _backward(m.A, log_b, log_scales)


def forward_backward(m: GmHmm, o: ObservationSeq) -> TrellisResult:
    _check(m, o)
    log_b, e, shift, _ = _shifted_emissions(m, o)
    alpha, log_c = _forward(m.A, m.pi.pi, log_b, e, shift)
    beta = _backward(m.A, log_b, log_c)
    return TrellisResult(float(log_c.sum()), alpha, beta, log_c)


def loglikelihood(m: GmHmm, o: ObservationSeq) -> float:
    """log p(O | M)."""
    return forward(m, o).log_likelihood


def posteriors(m: GmHmm, o: ObservationSeq) -> Posteriors:
    _check(m, o)
    A = m.A
    log_b, e, shift, terms = _shifted_emissions(m, o)
    alpha, log_c = _forward(A, m.pi.pi, log_b, e, shift)
    beta = _backward(A, log_b, log_c)

    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)

    f = _density_ratio(log_b[1:], log_c[1:])
    xi = alpha[:-1, :, None] * A[None, :, :] * (f * beta[1:])[:, None, :]
    if xi.shape[0]:
        xi /= xi.sum(axis=(1, 2), keepdims=True)

    gamma_mix = gamma[:, :, None] * component_responsibilities(terms, m.weights)
    return Posteriors(gamma, xi, gamma_mix, float(log_c.sum()))


def viterbi(m: GmHmm, o: ObservationSeq, log_b: np.ndarray | None = None) -> DecodedPath:
    """Most likely state path, computed in log space.

    Ties go to the lower state index, both for predecessors and for the
    final state.
    """
    _check(m, o)
    if log_b is None:
        log_b, _ = emission_terms(m, o.obs)
    with np.errstate(divide="ignore"):
        logA = np.log(m.A)
        delta = np.log(m.pi.pi) + log_b[0]
    T, R = log_b.shape
    back = np.zeros((T, R), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + logA
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(R)] + log_b[t]
    path = np.empty(T, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return DecodedPath(StateSequence.from_zero_based(path), float(delta[path[-1]]))
