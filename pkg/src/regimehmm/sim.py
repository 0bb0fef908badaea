"""Seeded simulation of regime paths and observations from a GmHmm.

Random-number contract
----------------------
All draws come from the Philox-4x64 counter-based generator keyed with the
64-bit ``seed``. Two sub-streams are used, selected by the most significant
counter word:

* stream 0 (states): ``T`` uniforms; step ``t`` uses uniform ``t``.
  ``q_1`` is the first index whose cumulative ``pi`` exceeds the uniform,
  ``q_{t+1}`` likewise for row ``q_t`` of ``A``.
* stream 1 (emissions): a fixed block of ``1 + 2*ceil(n/2)`` uniforms per
  step, so step ``t`` always reads the same positions. The first uniform
  picks the mixture component by cumulative weights; the remaining pairs
  ``(u1, u2)`` become standard normals via Box-Muller,
  ``sqrt(-2 log(1-u1)) * (cos, sin)(2 pi u2)``. The draw is
  ``mean + L z`` with ``L`` the lower Cholesky factor of the covariance.

Uniforms are 53-bit doubles in [0, 1). Output is bit-reproducible within
this implementation; another implementation of the same contract matches
it in distribution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GmHmm, ModelError, ObservationSeq, StateSequence, check_model

_STATE_STREAM = 0
_EMISSION_STREAM = 1


@dataclass(frozen=True)
class SimOutput:
    states: StateSequence
    obs: ObservationSeq
    seed: int


def _stream(seed: int, stream: int) -> np.random.Generator:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    counter = np.array([0, 0, 0, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def _pick(cdf: np.ndarray, u: float) -> int:
    # cdf[-1] may round below 1; clip keeps the index in range
    return min(int(np.searchsorted(cdf, u, side="right")), cdf.size - 1)


def simulate_states(m: GmHmm, T: int, seed: int) -> np.ndarray:
    """0-based regime path of length ``T``."""
    u = _stream(seed, _STATE_STREAM).random(T)
    cdf_pi = np.cumsum(m.pi.pi)
    cdf_A = np.cumsum(m.A, axis=1)
    q = np.empty(T, dtype=np.int64)
    s = _pick(cdf_pi, u[0])
    q[0] = s
    for t in range(1, T):
        s = _pick(cdf_A[s], u[t])
        q[t] = s
    return q


def simulate(m: GmHmm, T: int, seed: int) -> SimOutput:
    check_model(m)
    if T < 1:
        raise ModelError("T must be a positive integer")
    n, K = m.n, m.K
    q = simulate_states(m, T, seed)

    n_pairs = (n + 1) // 2
    block = _stream(seed, _EMISSION_STREAM).random((T, 1 + 2 * n_pairs))
    cdf_w = np.cumsum(m.weights, axis=1)
    comp = np.minimum(
        np.array([np.searchsorted(cdf_w[q[t]], block[t, 0], side="right") for t in range(T)]),
        K - 1,
    )

    u1 = block[:, 1::2]
    u2 = block[:, 2::2]
    rad = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.empty((T, 2 * n_pairs))
    z[:, 0::2] = rad * np.cos(2.0 * np.pi * u2)
    z[:, 1::2] = rad * np.sin(2.0 * np.pi * u2)
    z = z[:, :n]

    chol = np.linalg.cholesky(m.covs)  # (R, K, n, n)
    L = chol[q, comp]
    x = m.means[q, comp] + np.einsum("tij,tj->ti", L, z)
    labels = tuple(str(t + 1) for t in range(T))
    return SimOutput(StateSequence.from_zero_based(q), ObservationSeq(x, labels), int(seed))
