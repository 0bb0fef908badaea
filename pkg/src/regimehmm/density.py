"""Multinormal and Gaussian-mixture log-densities."""
from __future__ import annotations

import logging
import threading

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .core import GaussianComponent, GaussianMixture, GmHmm, ModelError

logger = logging.getLogger(__name__)

LOG_UNDERFLOW = -745.0
_LOG_2PI = np.log(2.0 * np.pi)


class _ClampCounter:
    def __init__(self):
        self._lock = threading.Lock()
        self._n = 0

    def add(self, k: int) -> None:
        if k:
            with self._lock:
                self._n += k
            logger.debug("clamped %d log-densities at %g", k, LOG_UNDERFLOW)

    @property
    def count(self) -> int:
        return self._n

    def reset(self) -> None:
        with self._lock:
            self._n = 0


underflow_clamps = _ClampCounter()


def _clamp(logp):
    logp = np.asarray(logp, dtype=float)
    low = ~(logp >= LOG_UNDERFLOW)  # also catches -inf and nan
    n_low = int(np.count_nonzero(low))
    if n_low:
        underflow_clamps.add(n_low)
        logp = np.where(low, LOG_UNDERFLOW, logp)
    return logp


def variance_floor(obs: np.ndarray, scale: float = 1e-6) -> float:
    """Floor for covariance eigenvalues: ``scale`` times the median data variance."""
    obs = np.asarray(obs, dtype=float)
    if obs.ndim == 1:
        obs = obs[:, None]
    med = float(np.median(obs.var(axis=0))) if obs.shape[0] > 1 else 0.0
    return scale * med if med > 0 else scale


def floor_covariance(cov: np.ndarray, floor: float) -> np.ndarray:
    """Symmetrise ``cov`` and raise any eigenvalue below ``floor`` up to it.

    A covariance whose spectrum already clears the floor is returned
    unchanged (up to symmetrisation), so exact fixed points are preserved.
    """
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    if floor <= 0:
        return cov
    w, v = np.linalg.eigh(cov)
    if np.all(w >= floor):
        return cov
    w = np.maximum(w, floor)
    return (v * w[..., None, :]) @ np.swapaxes(v, -1, -2)


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(0.5 * (cov + cov.T)).min()
        raise ModelError(f"covariance is not positive definite (smallest eigenvalue {eig:.3g})") from None


def _component_logpdf(X: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    # X: (T, n); unclamped log N(x; mean, cov) for every row
    n = mean.size
    L = _cholesky(cov)
    z = solve_triangular(L, (X - mean).T, lower=True, check_finite=False)
    maha = np.einsum("it,it->t", z, z)
    logdet = 2.0 * np.log(np.diag(L)).sum()
    return -0.5 * (n * _LOG_2PI + logdet + maha)


def _as_rows(x, n: int) -> tuple[np.ndarray, bool]:
    # (rows, was_single_vector); a 1-D input of length n is one observation
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim == 1:
        if x.size == n:
            return x.reshape(1, n), True
        if n == 1:
            return x[:, None], False
    elif x.ndim == 2 and x.shape[1] == n:
        return x, False
    raise ModelError(f"observation shape {x.shape} does not match model dimension {n}")


def multinormal_logpdf(x, comp: GaussianComponent):
    """Log-density of a multinormal component.

    ``x`` may be one n-vector (returns a float) or a (T, n) array (returns a
    length-T array). Values below the double-precision underflow threshold
    are clamped to ``LOG_UNDERFLOW``.
    """
    X, single = _as_rows(x, comp.n)
    out = _clamp(_component_logpdf(X, comp.mean, comp.cov))
    return float(out[0]) if single else out


def _mixture_terms(X: np.ndarray, weights: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    # (T, K) array of log(c_k) + log p_k(x_t); zero weights give -inf
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    cols = [_component_logpdf(X, means[k], covs[k]) for k in range(weights.size)]
    return np.stack(cols, axis=1) + logw


def gm_logpdf(x, gm: GaussianMixture):
    """Log-density of a Gaussian mixture via a max-shifted log-sum-exp."""
    X, single = _as_rows(x, gm.n)
    means = np.stack([c.mean for c in gm.components])
    covs = np.stack([c.cov for c in gm.components])
    out = _clamp(logsumexp(_mixture_terms(X, gm.weights, means, covs), axis=1))
    return float(out[0]) if single else out


def gm_moments(gm: GaussianMixture) -> tuple[np.ndarray, np.ndarray]:
    """Overall mean and covariance of a mixture (law of total variance)."""
    c = gm.weights
    means = np.stack([comp.mean for comp in gm.components])
    covs = np.stack([comp.cov for comp in gm.components])
    mu = c @ means
    d = means - mu
    cov = np.einsum("k,kij->ij", c, covs) + np.einsum("k,ki,kj->ij", c, d, d)
    return mu, cov


def emission_terms(m: GmHmm, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-state and per-component emission log-probabilities.

    Returns ``(log_b, log_terms)`` shaped (T, R) and (T, R, K), where
    ``log_terms[t, j, k] = log c_jk + log p_jk(O_t)`` and
    ``log_b[t, j] = log b_j(O_t)`` (clamped at ``LOG_UNDERFLOW``).
    """
    X = np.asarray(obs, dtype=float)
    if X.ndim != 2 or X.shape[1] != m.n:
        raise ModelError(f"observation shape {X.shape} does not match model dimension {m.n}")
    terms = np.stack(
        [_mixture_terms(X, m.weights[j], m.means[j], m.covs[j]) for j in range(m.R)], axis=1
    )
    log_b = _clamp(logsumexp(terms, axis=2))
    return log_b, terms


def component_responsibilities(log_terms: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Normalise ``log_terms`` over the component axis.

    Where a state assigns zero density to an observation the prior weights
    are used instead, which keeps the result finite.
    """
    mx = np.max(log_terms, axis=-1, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    r = np.exp(log_terms - mx)
    s = r.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(s > 0, r / s, np.broadcast_to(weights, r.shape))
    return r
