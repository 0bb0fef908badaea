"""Independent reference computations used by the tests.

Everything here is written without the package's inference code: densities
come from scipy.stats and HMM quantities are obtained by enumerating every
state path in linear space. Only usable for tiny R and T.
"""
import itertools

import numpy as np
from scipy import stats


def emission_density(model, x):
    """b_j(x) for every state, summed in linear space over components."""
    out = np.zeros(model.R)
    for j in range(model.R):
        for k in range(model.K):
            out[j] += model.weights[j, k] * stats.multivariate_normal(
                model.means[j, k], model.covs[j, k]
            ).pdf(x)
    return out


def component_joint(model, x):
    """c_jk p_jk(x) as an (R, K) array."""
    out = np.zeros((model.R, model.K))
    for j in range(model.R):
        for k in range(model.K):
            out[j, k] = model.weights[j, k] * stats.multivariate_normal(
                model.means[j, k], model.covs[j, k]
            ).pdf(x)
    return out


def enumerate_paths(model, X):
    """Yield (path, p(O, Q | M)) for every path Q of length T."""
    X = np.asarray(X, dtype=float)
    B = np.array([emission_density(model, x) for x in X])  # (T, R)
    A, pi = model.A, model.pi.pi
    for path in itertools.product(range(model.R), repeat=len(X)):
        p = pi[path[0]] * B[0, path[0]]
        for t in range(1, len(X)):
            p *= A[path[t - 1], path[t]] * B[t, path[t]]
        yield path, p


def brute_force(model, X):
    """Likelihood, gamma, xi, gamma_mix and best path by full enumeration.

    The best path is the lexicographically smallest among exact ties, which
    matches a lower-index tie-break at every step.
    """
    X = np.asarray(X, dtype=float)
    T, R = len(X), model.R
    total = 0.0
    gamma = np.zeros((T, R))
    xi = np.zeros((max(T - 1, 0), R, R))
    best_p, best_path = -1.0, None
    for path, p in enumerate_paths(model, X):
        total += p
        for t, s in enumerate(path):
            gamma[t, s] += p
        for t in range(T - 1):
            xi[t, path[t], path[t + 1]] += p
        if p > best_p:
            best_p, best_path = p, path
    gamma /= total
    xi /= total
    gamma_mix = np.zeros((T, R, model.K))
    for t, x in enumerate(X):
        cj = component_joint(model, x)
        gamma_mix[t] = gamma[t][:, None] * cj / cj.sum(axis=1, keepdims=True)
    return {
        "loglik": np.log(total),
        "gamma": gamma,
        "xi": xi,
        "gamma_mix": gamma_mix,
        "path": list(best_path),
        "log_joint": np.log(best_p),
        "joint_marginal": gamma * total,
    }


def scalar_normal_logpdf(x, mean, var):
    return float(stats.norm(loc=mean, scale=np.sqrt(var)).logpdf(x))


def iid_normal_loglik(x, mean, var):
    return float(np.sum(stats.norm(loc=mean, scale=np.sqrt(var)).logpdf(x)))
