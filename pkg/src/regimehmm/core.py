"""Parameter containers for Gaussian-mixture hidden Markov models.

Regimes are 0-based everywhere inside the library. Anything that leaves the
process (CLI tables, CSV files, :class:`StateSequence`) uses 1-based regime
numbers.

Constructors only check shapes. Value constraints (stochastic rows, positive
definite covariances, ...) are reported by :func:`validate_model` so that a
broken model can still be built, inspected and diagnosed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

PROB_TOL = 1e-9
SYM_TOL = 1e-9


class ModelError(ValueError):
    """Raised when a model is structurally invalid or fails validation."""


class EstimationError(RuntimeError):
    """Numerical failure during inference or calibration."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix, ``a[i, j] = p(q_{t+1}=j | q_t=i)``."""

    a: np.ndarray

    def __post_init__(self):
        a = _readonly(self.a)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ModelError(f"transition matrix must be square R x R with R >= 1, got shape {a.shape}")
        object.__setattr__(self, "a", a)

    @property
    def R(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class InitialDistribution:
    pi: np.ndarray

    def __post_init__(self):
        pi = _readonly(self.pi)
        if pi.ndim != 1 or pi.size < 1:
            raise ModelError(f"initial distribution must be a non-empty vector, got shape {pi.shape}")
        object.__setattr__(self, "pi", pi)

    @property
    def R(self) -> int:
        return self.pi.size


@dataclass(frozen=True)
class GaussianComponent:
    """One multinormal component: mean vector and covariance matrix."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _readonly(np.atleast_1d(self.mean))
        cov = _readonly(np.atleast_2d(self.cov))
        if mean.ndim != 1:
            raise ModelError(f"component mean must be a vector, got shape {mean.shape}")
        n = mean.size
        if cov.shape != (n, n):
            raise ModelError(f"component covariance must be {n}x{n}, got shape {cov.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class GaussianMixture:
    """Weighted sum of K multinormal components sharing one dimension."""

    weights: np.ndarray
    components: tuple[GaussianComponent, ...]

    def __post_init__(self):
        weights = _readonly(np.atleast_1d(self.weights))
        components = tuple(self.components)
        if weights.ndim != 1 or weights.size != len(components) or not components:
            raise ModelError(
                f"mixture needs one weight per component, got {weights.size} weights "
                f"and {len(components)} components"
            )
        dims = {c.n for c in components}
        if len(dims) != 1:
            raise ModelError(f"mixture components disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", components)

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def n(self) -> int:
        return self.components[0].n

    @classmethod
    def single(cls, mean, cov) -> "GaussianMixture":
        return cls(np.ones(1), (GaussianComponent(mean, cov),))


@dataclass(frozen=True)
class GmHmm:
    """Full model: transition matrix, initial distribution and per-state mixtures.

    The stacked arrays ``weights`` (R, K), ``means`` (R, K, n) and
    ``covs`` (R, K, n, n) are built once at construction for the vectorised
    inference code.
    """

    trans: TransitionMatrix
    pi: InitialDistribution
    emissions: tuple[GaussianMixture, ...]
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    means: np.ndarray = field(init=False, repr=False, compare=False)
    covs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        emissions = tuple(self.emissions)
        object.__setattr__(self, "emissions", emissions)
        if len(emissions) != self.trans.R:
            raise ModelError(f"{len(emissions)} emission mixtures for {self.trans.R} states")
        if self.pi.R != self.trans.R:
            raise ModelError(f"initial distribution has {self.pi.R} entries for {self.trans.R} states")
        if len({g.n for g in emissions}) != 1:
            raise ModelError("emission mixtures disagree on observation dimension")
        if len({g.K for g in emissions}) != 1:
            raise ModelError("all states must use the same number of mixture components")
        object.__setattr__(self, "weights", _readonly(np.stack([g.weights for g in emissions])))
        object.__setattr__(
            self, "means", _readonly(np.stack([[c.mean for c in g.components] for g in emissions]))
        )
        object.__setattr__(
            self, "covs", _readonly(np.stack([[c.cov for c in g.components] for g in emissions]))
        )

    @property
    def R(self) -> int:
        return self.trans.R

    @property
    def K(self) -> int:
        return self.emissions[0].K

    @property
    def n(self) -> int:
        return self.emissions[0].n

    @property
    def A(self) -> np.ndarray:
        return self.trans.a

    @classmethod
    def from_arrays(cls, A, pi, weights, means, covs) -> "GmHmm":
        """Build a model from stacked arrays shaped (R,R), (R,), (R,K), (R,K,n), (R,K,n,n)."""
        weights = np.asarray(weights, dtype=float)
        means = np.asarray(means, dtype=float)
        covs = np.asarray(covs, dtype=float)
        R, K = weights.shape
        if means.ndim == 2:
            means = means[..., None]
        n = means.shape[-1]
        covs = covs.reshape(R, K, n, n)
        emissions = tuple(
            GaussianMixture(
                weights[j], tuple(GaussianComponent(means[j, k], covs[j, k]) for k in range(K))
            )
            for j in range(R)
        )
        return cls(TransitionMatrix(A), InitialDistribution(pi), emissions)

    def permuted(self, perm: Sequence[int]) -> "GmHmm":
        """Relabel states so that new state ``i`` is old state ``perm[i]``."""
        p = np.asarray(perm)
        return GmHmm(
            TransitionMatrix(self.A[np.ix_(p, p)]),
            InitialDistribution(self.pi.pi[p]),
            tuple(self.emissions[i] for i in p),
        )

    def with_pi(self, pi) -> "GmHmm":
        return GmHmm(self.trans, InitialDistribution(pi), self.emissions)


@dataclass(frozen=True)
class ObservationSeq:
    """T observation vectors of dimension n, with optional row labels."""

    obs: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        obs = np.array(self.obs, dtype=float)
        if obs.ndim == 1:
            obs = obs[:, None]
        if obs.ndim != 2 or obs.shape[0] < 1 or obs.shape[1] < 1:
            raise ModelError(f"observations must be a non-empty T x n array, got shape {obs.shape}")
        if not np.all(np.isfinite(obs)):
            raise ModelError("observations contain non-finite values")
        obs.setflags(write=False)
        object.__setattr__(self, "obs", obs)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != obs.shape[0]:
                raise ModelError(f"{len(labels)} labels for {obs.shape[0]} observations")
            object.__setattr__(self, "labels", labels)

    @property
    def T(self) -> int:
        return self.obs.shape[0]

    @property
    def n(self) -> int:
        return self.obs.shape[1]

    def __len__(self) -> int:
        return self.T

    def __getitem__(self, s: slice) -> "ObservationSeq":
        if not isinstance(s, slice):
            raise TypeError("ObservationSeq supports slicing only")
        labels = None if self.labels is None else self.labels[s]
        return ObservationSeq(self.obs[s], labels)

    def concat(self, other: "ObservationSeq") -> "ObservationSeq":
        labels = None
        if self.labels is not None and other.labels is not None:
            labels = self.labels + other.labels
        return ObservationSeq(np.vstack([self.obs, other.obs]), labels)


@dataclass(frozen=True)
class StateSequence:
    """Regime path in user-facing 1-based numbering."""

    states: np.ndarray

    def __post_init__(self):
        s = np.array(self.states, dtype=np.int64)
        if s.ndim != 1:
            raise ModelError("state sequence must be one-dimensional")
        if s.size and s.min() < 1:
            raise ModelError("regime numbers are 1-based")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    @classmethod
    def from_zero_based(cls, idx) -> "StateSequence":
        return cls(np.asarray(idx, dtype=np.int64) + 1)

    @property
    def zero_based(self) -> np.ndarray:
        return self.states - 1

    def __len__(self) -> int:
        return self.states.size

    def tolist(self) -> list[int]:
        return [int(s) for s in self.states]


# --- validation -------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    field: str
    constraint: str
    residual: float

    def __str__(self) -> str:
        return f"{self.field}: {self.constraint} (residual {self.residual:.3g})"


def _check_prob_vector(name: str, p: np.ndarray, out: list[Violation]) -> None:
    lo, hi = float(p.min()), float(p.max())
    if lo < 0.0:
        out.append(Violation(name, "entries must be >= 0", lo))
    if hi > 1.0:
        out.append(Violation(name, "entries must be <= 1", hi - 1.0))
    s = float(p.sum())
    if abs(s - 1.0) > PROB_TOL:
        out.append(Violation(name, f"sum {s:.6g} != 1", s - 1.0))


def validate_model(m: GmHmm, variance_floor: float = 0.0) -> list[Violation]:
    """Check every value constraint of ``m``.

    Returns an empty list when the model is valid; otherwise one
    :class:`Violation` per failed constraint (1-based indices in the field
    names). Never raises and never modifies ``m``.
    """
    out: list[Violation] = []
    for i, row in enumerate(m.A):
        _check_prob_vector(f"transition row {i + 1}", row, out)
    _check_prob_vector("pi", m.pi.pi, out)
    for j, gm in enumerate(m.emissions):
        _check_prob_vector(f"state {j + 1} weights", gm.weights, out)
        for k, comp in enumerate(gm.components):
            name = f"state {j + 1} component {k + 1} cov"
            if not np.all(np.isfinite(comp.mean)) or not np.all(np.isfinite(comp.cov)):
                out.append(Violation(name, "parameters must be finite", float("nan")))
                continue
            asym = float(np.max(np.abs(comp.cov - comp.cov.T)))
            if asym > SYM_TOL:
                out.append(Violation(name, "must be symmetric", asym))
            eig = float(np.linalg.eigvalsh(0.5 * (comp.cov + comp.cov.T)).min())
            if eig <= 0.0 or eig < variance_floor * (1 - 1e-9):
                out.append(Violation(name, "must be positive definite above the variance floor", eig))
    return out


def check_model(m: GmHmm, variance_floor: float = 0.0) -> GmHmm:
    """Raise :class:`ModelError` listing all violations; return ``m`` otherwise."""
    problems = validate_model(m, variance_floor)
    if problems:
        raise ModelError("invalid model: " + "; ".join(str(p) for p in problems))
    return m


# --- serialization ----------------------------------------------------------

def _dump(obj, indent: int = 0) -> str:
    # floats at 17 significant digits so files round-trip bit-exactly
    pad = "  " * indent
    if isinstance(obj, dict):
        items = [f'{pad}  {json.dumps(k)}: {_dump(v, indent + 1).lstrip()}' for k, v in obj.items()]
        return pad + "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if all(isinstance(v, (int, float)) for v in obj):
            return pad + "[" + ", ".join(_dump(v) for v in obj) + "]"
        items = [_dump(v, indent + 1) for v in obj]
        return pad + "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return pad + json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return pad + str(int(obj))
    x = float(obj)
    if not np.isfinite(x):
        raise ModelError("cannot serialise non-finite parameter")
    return pad + "%.17g" % x


def model_to_dict(m: GmHmm) -> dict:
    return {
        "R": m.R,
        "n": m.n,
        "K": m.K,
        "transition": m.A.tolist(),
        "pi": m.pi.pi.tolist(),
        "mixtures": [
            {
                "weights": gm.weights.tolist(),
                "means": [c.mean.tolist() for c in gm.components],
                "covs": [c.cov.tolist() for c in gm.components],
            }
            for gm in m.emissions
        ],
    }


def model_from_dict(d: dict) -> GmHmm:
    try:
        R, n, K = int(d["R"]), int(d["n"]), int(d["K"])
        mixtures = d["mixtures"]
        if len(mixtures) != R:
            raise ModelError(f"'mixtures' has {len(mixtures)} entries, expected R={R}")
        weights = np.array([mx["weights"] for mx in mixtures], dtype=float).reshape(R, K)
        means = np.array([mx["means"] for mx in mixtures], dtype=float).reshape(R, K, n)
        covs = np.array([mx["covs"] for mx in mixtures], dtype=float).reshape(R, K, n, n)
        A = np.array(d["transition"], dtype=float).reshape(R, R)
        pi = np.array(d["pi"], dtype=float).reshape(R)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed model document: {exc}") from exc
    return GmHmm.from_arrays(A, pi, weights, means, covs)


def model_to_json(m: GmHmm) -> str:
    return _dump(model_to_dict(m)) + "\n"


def save_model(m: GmHmm, path: str | Path) -> None:
    Path(path).write_text(model_to_json(m), encoding="utf-8")


def load_model(path: str | Path) -> GmHmm:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(doc)
