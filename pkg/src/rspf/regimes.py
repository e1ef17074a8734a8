"""Model-sequence priors p(M_t | M_{0:t-1}) and model-index proposals.

Histories are kept as the sufficient statistic (last model, visit counts),
batched over particles, which covers independent, Markov and Polya urn
dynamics.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

PROPOSALS = ("bootstrap", "uniform", "deterministic")

_ROW_TOL = 1e-12


@dataclass(frozen=True)
class RegimeHistory:
    """Batched summary of ``M_{0:t-1}`` for N particles.

    ``last_model`` is -1 while ``t == 0`` (no model drawn yet); ``counts[n, k]``
    counts how often model k occurs among ``M_0 .. M_{t-1}`` of particle n.
    """

    last_model: np.ndarray
    counts: np.ndarray
    t: int

    @classmethod
    def empty(cls, n, n_models):
        return cls(np.full(n, -1, dtype=np.int64), np.zeros((n, n_models), dtype=np.int64), 0)

    @classmethod
    def from_sequences(cls, sequences, n_models):
        """Build the summary from an ``(N, t)`` array of full model sequences."""
        sequences = np.asarray(sequences, dtype=np.int64)
        n, t = sequences.shape
        if t == 0:
            return cls.empty(n, n_models)
        counts = np.zeros((n, n_models), dtype=np.int64)
        for k in range(n_models):
            counts[:, k] = (sequences == k).sum(axis=1)
        return cls(sequences[:, -1].copy(), counts, t)

    @property
    def n_models(self):
        return self.counts.shape[1]

    def __len__(self):
        return self.last_model.shape[0]

    def append(self, models):
        """History after observing ``M_t = models``."""
        models = np.asarray(models, dtype=np.int64)
        counts = self.counts.copy()
        counts[np.arange(len(models)), models] += 1
        return RegimeHistory(models.copy(), counts, self.t + 1)

    def take(self, index):
        return RegimeHistory(self.last_model[index], self.counts[index], self.t)

    def validate(self):
        if np.any(self.counts < 0) or np.any(self.counts.sum(axis=1) != self.t):
            raise ValueError("visit counts inconsistent with t")
        if self.t == 0:
            if np.any(self.last_model != -1):
                raise ValueError("empty history cannot have a last model")
        else:
            if np.any(self.last_model < 0) or np.any(self.last_model >= self.n_models):
                raise ValueError("last model out of range")
            if np.any(self.counts[np.arange(len(self)), self.last_model] < 1):
                raise ValueError("last model has zero visit count")


def _probability_vector(p, name):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError(f"{name} must be a non-empty vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > _ROW_TOL:
        raise ValueError(f"{name} must be a probability vector")
    return p


class RegimeDynamics:
    """Base class for a prior over model sequences.

    Subclasses implement :meth:`_transition_probabilities` for ``t >= 1``;
    at ``t == 0`` the initial distribution is used.
    """

    def __init__(self, n_models, initial=None):
        if n_models < 1:
            raise ValueError("need at least one model")
        self.n_models = int(n_models)
        if initial is None:
            initial = np.full(self.n_models, 1.0 / self.n_models)
        self.initial = _probability_vector(initial, "initial distribution")
        if self.initial.size != self.n_models:
            raise ValueError("initial distribution has wrong length")

    def probabilities(self, hist):
        """``(N, K)`` matrix of ``p(M_t = k | history of particle n)``."""
        if hist.n_models != self.n_models:
            raise ValueError("history built for a different K")
        if hist.t == 0:
            return np.broadcast_to(self.initial, (len(hist), self.n_models))
        return self._transition_probabilities(hist)

    def log_probabilities(self, hist):
        with np.errstate(divide="ignore"):
            return np.log(self.probabilities(hist))

    def _transition_probabilities(self, hist):
        raise NotImplementedError


class IndependentDynamics(RegimeDynamics):
    """Models drawn i.i.d. from ``probs`` at every ``t >= 1``."""

    def __init__(self, probs, initial=None):
        probs = _probability_vector(probs, "prior")
        super().__init__(probs.size, initial)
        self.probs = probs

    def _transition_probabilities(self, hist):
        return np.broadcast_to(self.probs, (len(hist), self.n_models))


class MarkovDynamics(RegimeDynamics):
    """First-order chain with ``P[i, j] = p(M_t = j | M_{t-1} = i)``."""

    def __init__(self, transition, initial=None):
        transition = np.asarray(transition, dtype=float)
        if transition.ndim != 2 or transition.shape[0] != transition.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(transition < 0) or np.any(transition > 1):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if np.any(np.abs(transition.sum(axis=1) - 1.0) > _ROW_TOL):
            raise ValueError("transition matrix rows must sum to 1")
        super().__init__(transition.shape[0], initial)
        self.transition = transition

    def _transition_probabilities(self, hist):
        return self.transition[hist.last_model]


class PolyaDynamics(RegimeDynamics):
    """Polya urn: ``p(M_t = k) ∝ beta_k + #{tau < t : M_tau = k}``.

    The count includes ``M_0``.
    """

    def __init__(self, beta, initial=None):
        beta = np.asarray(beta)
        if beta.ndim != 1 or beta.size == 0:
            raise ValueError("beta must be a non-empty vector")
        if not np.all(np.equal(np.mod(beta, 1), 0)) or np.any(beta < 1):
            raise ValueError("beta entries must be positive integers")
        super().__init__(beta.size, initial)
        self.beta = beta.astype(np.int64)

    def _transition_probabilities(self, hist):
        weights = (self.beta + hist.counts).astype(float)
        return weights / weights.sum(axis=1, keepdims=True)


def banded_transition_matrix(n_models=8, stay=0.80, advance=0.15):
    """Matrix with ``stay`` on the diagonal, ``advance`` on the cyclic
    super-diagonal and the remaining mass spread evenly over the other
    entries (1/120 each for the defaults).
    """
    if n_models < 3:
        raise ValueError("banded matrix needs at least three models")
    eps = (1.0 - stay - advance) / (n_models - 2)
    if eps < 0:
        raise ValueError("stay + advance must not exceed 1")
    P = np.full((n_models, n_models), eps)
    idx = np.arange(n_models)
    P[idx, idx] = stay
    P[idx, (idx + 1) % n_models] = advance
    return P


def dynamics_from_dict(data):
    """Build dynamics from ``{"kind": "markov"|"polya"|"independent", ...}``."""
    kind = data.get("kind")
    initial = data.get("initial")
    if kind == "markov":
        return MarkovDynamics(data["transition"], initial)
    if kind == "polya":
        return PolyaDynamics(data["beta"], initial)
    if kind == "independent":
        return IndependentDynamics(data["probs"], initial)
    raise ConfigurationError(f"unknown dynamics kind {kind!r}")


def dynamics_from_json(path):
    return dynamics_from_dict(json.loads(Path(path).read_text()))


def log_prior(k, hist, dyn):
    """``log p(M_t = k | M_{0:t-1})`` for every particle in ``hist``.

    ``k`` may be a scalar or an ``(N,)`` array of model indices.
    """
    logp = dyn.log_probabilities(hist)
    k = np.broadcast_to(np.asarray(k, dtype=np.int64), (len(hist),))
    if np.any(k < 0) or np.any(k >= dyn.n_models):
        raise IndexError("model index out of range")
    return logp[np.arange(len(hist)), k]


def sample_categorical(probs, rng):
    """One draw per row of an ``(N, K)`` probability matrix by inverse CDF.

    Consumes one uniform per row, or nothing at all when ``K == 1``.
    """
    n, n_models = probs.shape
    if n_models == 1:
        return np.zeros(n, dtype=np.int64)
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(n)[:, None] * cdf[:, -1:]
    return np.minimum((cdf <= u).sum(axis=1), n_models - 1).astype(np.int64)


def sample_prior(hist, dyn, rng):
    return sample_categorical(dyn.probabilities(hist), rng)


def deterministic_allocation(n, n_models):
    """Particle n gets model ``n mod K``; the first ``N mod K`` models get one extra."""
    return np.arange(n, dtype=np.int64) % n_models


def propose_models(strategy, hist, dyn, rng):
    """Draw ``M_t`` for every particle and return ``(models, log_q)``.

    ``uniform`` and ``deterministic`` both report ``log_q = -log K``.
    """
    n, n_models = len(hist), dyn.n_models
    if strategy == "bootstrap":
        probs = dyn.probabilities(hist)
        models = sample_categorical(probs, rng)
        with np.errstate(divide="ignore"):
            return models, np.log(probs[np.arange(n), models])
    if strategy == "uniform":
        if n_models == 1:
            models = np.zeros(n, dtype=np.int64)
        else:
            models = rng.integers(0, n_models, size=n, dtype=np.int64)
    elif strategy == "deterministic":
        models = deterministic_allocation(n, n_models)
    else:
        raise ConfigurationError(f"unknown proposal strategy {strategy!r}; expected one of {PROPOSALS}")
    return models, np.full(n, -np.log(n_models))
