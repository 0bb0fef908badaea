"""Hamilton filter for the two-regime Gaussian switching model.

This is the classical maximum-likelihood baseline: the chain is assumed to
start in its invariant distribution, the likelihood is accumulated by the
filter's one-step predictive densities, and parameters are found by a
derivative-free search. It covers only R=2, K=1, n=1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .core import GmHmm, ModelError, ObservationSeq, TransitionMatrix
from .density import variance_floor

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class HamiltonTheta:
    """Parameters ``{u1, u2, phi1, phi2, a12, a21}``; ``phi`` are variances.

    Rows of the transition matrix are ``[1-a12, a12]`` and ``[a21, 1-a21]``.
    """

    u1: float
    u2: float
    phi1: float
    phi2: float
    a12: float
    a21: float

    def __post_init__(self):
        if not (self.phi1 > 0 and self.phi2 > 0):
            raise ModelError(f"variances must be positive, got {self.phi1}, {self.phi2}")
        if not (0 <= self.a12 <= 1 and 0 <= self.a21 <= 1):
            raise ModelError(f"a12 and a21 must lie in [0, 1], got {self.a12}, {self.a21}")

    @property
    def transition(self) -> np.ndarray:
        return np.array([[1.0 - self.a12, self.a12], [self.a21, 1.0 - self.a21]])

    def swapped(self) -> "HamiltonTheta":
        return HamiltonTheta(self.u2, self.u1, self.phi2, self.phi1, self.a21, self.a12)

    def to_model(self) -> GmHmm:
        """Equivalent GmHmm with the invariant distribution as ``pi``."""
        A = self.transition
        eta = invariant_distribution(TransitionMatrix(A))
        return GmHmm.from_arrays(
            A, eta, np.ones((2, 1)), [[[self.u1]], [[self.u2]]], [[[[self.phi1]]], [[[self.phi2]]]]
        )

    @classmethod
    def from_model(cls, m: GmHmm) -> "HamiltonTheta":
        if (m.R, m.K, m.n) != (2, 1, 1):
            raise ModelError(f"Hamilton filter needs R=2, K=1, n=1; got R={m.R}, K={m.K}, n={m.n}")
        return cls(
            float(m.means[0, 0, 0]),
            float(m.means[1, 0, 0]),
            float(m.covs[0, 0, 0, 0]),
            float(m.covs[1, 0, 0, 0]),
            float(m.A[0, 1]),
            float(m.A[1, 0]),
        )

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in ("u1", "u2", "phi1", "phi2", "a12", "a21")}


def invariant_distribution(trans: TransitionMatrix, tol: float = 1e-12) -> np.ndarray:
    """Stationary distribution ``eta`` with ``eta @ A == eta``.

    Two states use the closed form ``eta_1 = a21 / (a12 + a21)``. Larger
    chains solve ``(A^T - I) eta = 0`` with the last equation replaced by
    ``sum(eta) = 1``.

    Raises:
        ModelError: the chain is reducible or periodic, so no unique strictly
            positive limit exists.
    """
    A = np.asarray(trans.a, dtype=float)
    R = A.shape[0]
    if R == 1:
        return np.ones(1)
    unit = np.abs(np.linalg.eigvals(A)) > 1.0 - 1e-10
    if np.count_nonzero(unit) > 1:
        raise ModelError("transition matrix is reducible or periodic; no unique invariant distribution")
    if R == 2:
        a12, a21 = A[0, 1], A[1, 0]
        eta1 = a21 / (a12 + a21)
        eta = np.array([eta1, 1.0 - eta1])
    else:
        M = A.T - np.eye(R)
        M[-1] = 1.0
        rhs = np.zeros(R)
        rhs[-1] = 1.0
        eta = np.linalg.solve(M, rhs)
    if not np.all(eta > tol):
        raise ModelError(f"invariant distribution is not strictly positive: {eta}")
    return eta


def hamilton_loglik(theta: HamiltonTheta, o: ObservationSeq) -> float:
    """Log-likelihood accumulated from the filter's predictive densities.

    At t=1 the state probabilities are the invariant distribution. For t>1
    the joint ``f(q_t, q_{t-1}, O_t | O_1..O_{t-1})`` is the filtered
    probability of ``q_{t-1}`` times ``a_{q_{t-1} q_t}`` times the density of
    ``O_t`` in ``q_t``; summing it over both indices gives ``f(O_t | ...)``,
    and summing over ``q_{t-1}`` then dividing gives the next filtered
    probability.
    """
    if o.n != 1:
        raise ModelError("Hamilton filter is univariate")
    x = o.obs[:, 0]
    u = np.array([theta.u1, theta.u2])
    phi = np.array([theta.phi1, theta.phi2])
    logp = -0.5 * (_LOG_2PI + np.log(phi) + (x[:, None] - u) ** 2 / phi)  # (T, 2)
    A = theta.transition
    eta = invariant_distribution(TransitionMatrix(A))

    shift = logp.max(axis=1)
    dens = np.exp(logp - shift[:, None])

    a11, a12, a21, a22 = A[0, 0], A[0, 1], A[1, 0], A[1, 1]
    d1, d2 = dens[:, 0].tolist(), dens[:, 1].tolist()
    # plain floats: two states make numpy's per-call overhead dominate
    j1, j2 = float(eta[0]) * d1[0], float(eta[1]) * d2[0]
    f = j1 + j2
    logs = [f]
    p1, p2 = j1 / f, j2 / f
    try:
        for t in range(1, x.size):
            # joint over (q_{t-1}, q_t), summed over q_{t-1}
            j1 = (p1 * a11 + p2 * a21) * d1[t]
            j2 = (p1 * a12 + p2 * a22) * d2[t]
            f = j1 + j2
            logs.append(f)
            p1, p2 = j1 / f, j2 / f
    except ZeroDivisionError:
        return float("-inf")  # filtered mass sits where the density underflowed
    return float(np.sum(np.log(logs)) + shift.sum())


@dataclass(frozen=True)
class HamiltonFitConfig:
    n_starts: int = 5
    seed: int = 0
    max_iter: int = 4000
    xatol: float = 1e-8
    fatol: float = 1e-10
    perturbation: float = 0.5
    variance_floor_scale: float = 1e-6


@dataclass(frozen=True)
class HamiltonFit:
    theta: HamiltonTheta
    log_likelihood: float
    converged: bool
    n_evals: int


def _logit(p: float) -> float:
    return float(np.log(p) - np.log1p(-p))


def _expit(z: float) -> float:
    return float(0.5 * (1.0 + np.tanh(0.5 * z)))


def _to_free(theta: HamiltonTheta, floor: float) -> np.ndarray:
    return np.array([
        theta.u1,
        theta.u2,
        np.log(max(theta.phi1 - floor, 1e-3 * floor)),
        np.log(max(theta.phi2 - floor, 1e-3 * floor)),
        _logit(min(max(theta.a12, 1e-9), 1 - 1e-9)),
        _logit(min(max(theta.a21, 1e-9), 1 - 1e-9)),
    ])


def _from_free(z: np.ndarray, floor: float) -> HamiltonTheta:
    eps = 1e-12
    a12 = min(max(_expit(z[4]), eps), 1 - eps)
    a21 = min(max(_expit(z[5]), eps), 1 - eps)
    return HamiltonTheta(float(z[0]), float(z[1]), floor + float(np.exp(z[2])), floor + float(np.exp(z[3])), a12, a21)


def hamilton_fit(o: ObservationSeq, init: HamiltonTheta, cfg: HamiltonFitConfig | None = None) -> HamiltonFit:
    """Maximise :func:`hamilton_loglik` with Nelder-Mead in unconstrained space.

    Means are searched directly, variances through ``log(phi - floor)`` and
    the switching probabilities through their log-odds. Start 0 is ``init``;
    the other ``n_starts - 1`` starts add seeded Gaussian noise of scale
    ``cfg.perturbation`` in the transformed space. The best optimum wins.
    If no start beats ``init`` the result is ``init`` with ``converged`` False.
    """
    cfg = cfg or HamiltonFitConfig()
    if o.T < 2:
        raise ModelError("Hamilton fit needs at least two observations")
    floor = variance_floor(o.obs, cfg.variance_floor_scale)
    scale = np.array([o.obs[:, 0].std() or 1.0] * 2 + [1.0] * 4)

    def nll(z):
        try:
            v = hamilton_loglik(_from_free(z, floor), o)
        except (ModelError, FloatingPointError):
            return np.inf
        return -v if np.isfinite(v) else np.inf

    init_ll = hamilton_loglik(init, o)
    z0 = _to_free(init, floor)
    rng = np.random.default_rng(cfg.seed)
    best_z, best_val, best_ok, evals = None, np.inf, False, 0
    for s in range(max(cfg.n_starts, 1)):
        start = z0 if s == 0 else z0 + cfg.perturbation * scale * rng.standard_normal(6)
        with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
            res = minimize(
                nll,
                start,
                method="Nelder-Mead",
                options={"maxiter": cfg.max_iter, "maxfev": 2 * cfg.max_iter,
                         "xatol": cfg.xatol, "fatol": cfg.fatol, "adaptive": True},
            )
        evals += int(res.nfev)
        if res.fun < best_val:
            best_z, best_val, best_ok = res.x, float(res.fun), bool(res.success)

    if best_z is None or -best_val <= init_ll:
        return HamiltonFit(init, init_ll, False, evals)
    theta = _from_free(best_z, floor)
    return HamiltonFit(theta, hamilton_loglik(theta, o), best_ok, evals)
