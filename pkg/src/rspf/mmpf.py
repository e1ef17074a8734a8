"""Multiple model particle filter (bank of per-model bootstrap filters).

Filter k always runs model k. After each step its incremental evidence
``L_k`` (weighted mean of the particle likelihoods) updates the model
probabilities with forgetting factor ``gamma``:

    pi_k,t ∝ pi_k,t-1 ** gamma * L_k,t

``gamma = 0`` keeps only the current likelihood, ``gamma = 1`` accumulates
the full evidence product. The fused estimate is ``sum_k pi_k xhat_k``.

Resampling comes in two flavours:

* ``"pooled"`` (default): every filter draws its next particle cloud from the
  fused posterior ``sum_k pi_k sum_n w_kn delta(x_kn)``, so all filters restart
  each step from the same approximation of the filtering distribution. There
  is no model-transition mixing as in IMM; the model probabilities alone
  drive the pooling.
* ``"independent"``: each filter resamples its own particles and never sees
  the others.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateWeightsError
from .filter import FilterOutput, effective_sample_size, map_model, multinomial_indices


@dataclass
class FilterBank:
    states: np.ndarray  # (K * n_per_model, state_dim), filter k owns rows k*n .. (k+1)*n
    log_weights: np.ndarray  # (K, n_per_model), normalised per filter
    log_model_probs: np.ndarray  # (K,)
    gamma: float
    t: int
    resampling: str = "pooled"

    @property
    def n_models(self):
        return self.log_weights.shape[0]

    @property
    def n_per_model(self):
        return self.log_weights.shape[1]

    @property
    def models(self):
        return np.repeat(np.arange(self.n_models), self.n_per_model)

    @property
    def model_probabilities(self):
        return np.exp(self.log_model_probs)


def _logsumexp(a, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else out.item()


RESAMPLING = ("pooled", "independent")


def mmpf_initialize(model_set, gamma, n_per_model, rng, resampling="pooled"):
    if resampling not in RESAMPLING:
        raise ConfigurationError(f"unknown MMPF resampling {resampling!r}")
    if not 0 <= gamma <= 1:
        raise ConfigurationError("gamma must lie in [0, 1]")
    if n_per_model < 1:
        raise ConfigurationError("n_per_model must be >= 1")
    k = model_set.n_models
    models = np.repeat(np.arange(k), n_per_model)
    states = model_set.sample_initial(models, rng)
    log_w = np.full((k, n_per_model), -np.log(n_per_model))
    return FilterBank(states, log_w, np.full(k, -np.log(k)), float(gamma), 0, resampling)


def mmpf_step(bank, y, model_set, rng):
    t = bank.t + 1
    k, n = bank.n_models, bank.n_per_model
    models = bank.models
    states = model_set.sample_transition(bank.states, models, rng)
    log_lik = model_set.log_likelihood(y, states, models).reshape(k, n)

    log_unnorm = bank.log_weights + log_lik
    log_evidence = _logsumexp(log_unnorm, axis=1)
    if not np.any(np.isfinite(log_evidence)):
        raise DegenerateWeightsError(t)

    if bank.gamma == 0:
        log_pi = log_evidence.copy()
    else:
        log_pi = bank.gamma * bank.log_model_probs + log_evidence
    log_pi = log_pi - _logsumexp(log_pi)
    pi = np.exp(log_pi)

    # A filter with zero evidence carries no mass; keep its weights uniform.
    alive = np.isfinite(log_evidence)
    log_w = np.where(alive[:, None], log_unnorm - np.where(alive, log_evidence, 0.0)[:, None], -np.log(n))
    w = np.exp(log_w)

    blocks = states.reshape(k, n, -1)
    per_model = np.stack([w[j] @ blocks[j] for j in range(k)])
    estimate = pi @ per_model
    ess = float(effective_sample_size((pi[:, None] * w).ravel()))
    out = FilterOutput(t, estimate, pi, map_model(pi), ess)

    if bank.resampling == "pooled":
        idx = multinomial_indices((pi[:, None] * w).ravel(), rng)
    else:
        idx = np.concatenate([multinomial_indices(w[j], rng) + j * n for j in range(k)])
    new = FilterBank(states[idx], np.full((k, n), -np.log(n)), log_pi, bank.gamma, t, bank.resampling)
    return new, out


def mmpf_run(observations, model_set, gamma, n_per_model, seed=None, rng=None, resampling="pooled"):
    observations = np.asarray(observations, dtype=float)
    if observations.ndim == 1:
        observations = observations[:, None]
    if rng is None:
        rng = np.random.default_rng(seed)
    bank = mmpf_initialize(model_set, gamma, n_per_model, rng, resampling)
    outputs = []
    for y in observations:
        bank, out = mmpf_step(bank, y, model_set, rng)
        outputs.append(out)
    return outputs
