"""Exact filtering posteriors for small linear-Gaussian regime-switching models.

Conditional on a full model sequence the model is linear-Gaussian, so a
Kalman filter gives the exact evidence ``p(y_{1:t} | M_{0:t})`` and the state
posterior. Summing over all ``K^(t+1)`` sequences, weighted by their prior
probability under the regime dynamics, yields the exact filtering marginals
``p(M_t | y_{1:t})`` and ``E[x_t | y_{1:t}]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceTooLargeError
from .models import CandidateModelSet, gaussian_log_pdf
from .regimes import RegimeHistory

MAX_SEQUENCES = 10**6


def _per_model(value, k):
    return np.broadcast_to(np.asarray(value, dtype=float), (k,)).copy()


@dataclass(frozen=True)
class LinearGaussianModelSet(CandidateModelSet):
    """Scalar models ``x_t = a_k x_{t-1} + c_k + u``, ``y_t = h_k x_t + d_k + v``.

    ``x_0 ~ N(m0_k, s02_k)``. Noise variances and initial moments may be
    scalars or per-model sequences.
    """

    a: tuple
    c: tuple
    h: tuple
    d: tuple
    sigma_u2: float | tuple = 1.0
    sigma_v2: float | tuple = 1.0
    m0: float | tuple = 0.0
    s02: float | tuple = 1.0
    state_dim: int = field(default=1, init=False)
    obs_dim: int = field(default=1, init=False)

    def __post_init__(self):
        k = len(self.a)
        if k < 1:
            raise ValueError("need at least one model")
        for name in ("a", "c", "h", "d", "sigma_u2", "sigma_v2", "m0", "s02"):
            arr = _per_model(getattr(self, name), k)
            object.__setattr__(self, "_" + name, arr)
        if np.any(self._sigma_u2 <= 0) or np.any(self._sigma_v2 <= 0) or np.any(self._s02 <= 0):
            raise ValueError("variances must be positive")

    @property
    def n_models(self):
        return len(self.a)

    def sample_initial(self, models, rng):
        models = self.check_models(models)
        z = rng.standard_normal(models.shape[0])
        return (self._m0[models] + np.sqrt(self._s02[models]) * z)[:, None]

    def log_initial(self, x, models):
        models = self.check_models(models)
        return gaussian_log_pdf(np.asarray(x)[:, 0], self._m0[models], self._s02[models])

    def sample_transition(self, x_prev, models, rng):
        models = self.check_models(models)
        mean = self._a[models] * np.asarray(x_prev)[:, 0] + self._c[models]
        return (mean + np.sqrt(self._sigma_u2[models]) * rng.standard_normal(mean.shape[0]))[:, None]

    def log_transition(self, x, x_prev, models):
        models = self.check_models(models)
        mean = self._a[models] * np.asarray(x_prev)[:, 0] + self._c[models]
        return gaussian_log_pdf(np.asarray(x)[:, 0], mean, self._sigma_u2[models])

    def sample_observation(self, x, models, rng):
        models = self.check_models(models)
        mean = self._h[models] * np.asarray(x)[:, 0] + self._d[models]
        return (mean + np.sqrt(self._sigma_v2[models]) * rng.standard_normal(mean.shape[0]))[:, None]

    def log_likelihood(self, y, x, models):
        models = self.check_models(models)
        mean = self._h[models] * np.asarray(x)[:, 0] + self._d[models]
        y = float(np.asarray(y, float).reshape(-1)[0])
        return gaussian_log_pdf(y, mean, self._sigma_v2[models])


@dataclass(frozen=True)
class ExactPosterior:
    """Filtering marginals for ``t = 1..T`` (row ``t-1`` holds time ``t``)."""

    model_probs: np.ndarray  # (T, K)
    state_mean: np.ndarray  # (T,)
    state_var: np.ndarray  # (T,)


def conditional_gaussian_filter(observations, model_sequence, models):
    """Kalman filter along fixed model sequence(s).

    ``model_sequence`` is ``(T+1,)`` or a batch ``(S, T+1)``. Returns
    ``(means, variances, log_evidence)``, each ``(S, T+1)`` (or ``(T+1,)``):
    column 0 is the prior of ``x_0`` and ``log_evidence[:, t]`` is
    ``log p(y_{1:t} | M_{0:t})``.
    """
    y = np.asarray(observations, dtype=float).reshape(-1)
    seq = np.asarray(model_sequence, dtype=np.int64)
    single = seq.ndim == 1
    seq = np.atleast_2d(seq)
    n_seq, length = seq.shape
    if length != y.size + 1:
        raise ValueError("model sequence must have length T+1")

    means = np.empty((n_seq, length))
    variances = np.empty((n_seq, length))
    log_ev = np.zeros((n_seq, length))
    m = models._m0[seq[:, 0]]
    p = models._s02[seq[:, 0]]
    means[:, 0], variances[:, 0] = m, p
    for t in range(1, length):
        k = seq[:, t]
        a, h = models._a[k], models._h[k]
        m = a * m + models._c[k]
        p = a * a * p + models._sigma_u2[k]
        pred_y = h * m + models._d[k]
        s = h * h * p + models._sigma_v2[k]
        log_ev[:, t] = log_ev[:, t - 1] + gaussian_log_pdf(y[t - 1], pred_y, s)
        gain = p * h / s
        m = m + gain * (y[t - 1] - pred_y)
        p = (1.0 - gain * h) * p
        means[:, t], variances[:, t] = m, p
    if single:
        return means[0], variances[0], log_ev[0]
    return means, variances, log_ev


def all_sequences(n_models, length):
    if n_models**length > MAX_SEQUENCES:
        raise InstanceTooLargeError(
            f"{n_models}^{length} model sequences exceeds the limit of {MAX_SEQUENCES}"
        )
    return np.array(list(itertools.product(range(n_models), repeat=length)), dtype=np.int64)


def sequence_log_prior(sequences, dyn):
    """``log p(M_{0:t})`` for each row of an ``(S, t+1)`` sequence array."""
    sequences = np.asarray(sequences, dtype=np.int64)
    n_seq, length = sequences.shape
    rows = np.arange(n_seq)
    out = np.zeros(n_seq)
    hist = RegimeHistory.empty(n_seq, dyn.n_models)
    for t in range(length):
        with np.errstate(divide="ignore"):
            out += dyn.log_probabilities(hist)[rows, sequences[:, t]]
        hist = hist.append(sequences[:, t])
    return out


def enumerate_exact(observations, models, dyn):
    """Exact filtering marginals by summing over every model sequence.

    The time-t marginal uses only the length-(t+1) sequences and ``y_{1:t}``.
    """
    y = np.asarray(observations, dtype=float).reshape(-1)
    n_steps, k = y.size, models.n_models
    if dyn.n_models != k:
        raise ValueError("dynamics and model set disagree on K")
    if k ** (n_steps + 1) > MAX_SEQUENCES:
        raise InstanceTooLargeError(f"K^(T+1) = {k}^{n_steps + 1} exceeds {MAX_SEQUENCES}")

    probs = np.empty((n_steps, k))
    mean = np.empty(n_steps)
    var = np.empty(n_steps)
    for t in range(1, n_steps + 1):
        seqs = all_sequences(k, t + 1)
        m, v, log_ev = conditional_gaussian_filter(y[:t], seqs, models)
        log_post = sequence_log_prior(seqs, dyn) + log_ev[:, t]
        log_post -= np.max(log_post)
        post = np.exp(log_post)
        post /= post.sum()
        probs[t - 1] = np.bincount(seqs[:, t], weights=post, minlength=k)
        mean[t - 1] = post @ m[:, t]
        var[t - 1] = post @ (v[:, t] + m[:, t] ** 2) - mean[t - 1] ** 2
    return ExactPosterior(probs, mean, var)
