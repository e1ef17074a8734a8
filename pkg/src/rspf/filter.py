"""Regime switching particle filter.

Each particle carries a state, its current model index and a summary of
its model history. A step proposes a model per particle, propagates the
state through that model's transition density, and reweights by

    log w_t = log w_{t-1} + log p(y_t | x_t, M_t)
              + log p(M_t | M_{0:t-1}) - log q(M_t | M_{0:t-1}).

With the default ``resample="always"`` the previous weights are uniform, so
the increment alone defines the weight.

Random-stream discipline: one ``numpy.random.Generator`` per run, consumed in
the fixed order (model proposal, state propagation, resampling) at every step.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DegenerateWeightsError
from .regimes import PROPOSALS, RegimeHistory, propose_models, sample_prior

RESAMPLE_POLICIES = ("always", "ess")


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int = 2000
    proposal: str = "bootstrap"
    state_proposal: str = "bootstrap"
    resample: str = "always"
    ess_fraction: float = 0.5
    seed: int | None = None

    def __post_init__(self):
        if self.n_particles < 1:
            raise ConfigurationError("n_particles must be >= 1")
        if self.proposal not in PROPOSALS:
            raise ConfigurationError(f"unknown proposal strategy {self.proposal!r}")
        if self.state_proposal != "bootstrap":
            raise ConfigurationError("only the bootstrap state proposal is available")
        if self.resample not in RESAMPLE_POLICIES:
            raise ConfigurationError(f"unknown resample policy {self.resample!r}")
        if not 0 < self.ess_fraction <= 1:
            raise ConfigurationError("ess_fraction must lie in (0, 1]")

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        return asdict(self)


@dataclass
class ParticleSystem:
    states: np.ndarray  # (N, state_dim)
    models: np.ndarray  # (N,)
    history: RegimeHistory  # summary of M_{0:t}
    log_weights: np.ndarray  # (N,)
    t: int

    @property
    def n_particles(self):
        return self.states.shape[0]


@dataclass(frozen=True)
class FilterOutput:
    t: int
    state_estimate: np.ndarray
    model_posteriors: np.ndarray
    map_model: int
    ess: float


def normalize_weights(log_weights, t=None):
    """Shift log-weights so that their exponentials sum to one."""
    log_weights = np.asarray(log_weights, dtype=float)
    m = np.max(log_weights)
    if not np.isfinite(m):
        raise DegenerateWeightsError(t)
    return log_weights - (m + np.log(np.sum(np.exp(log_weights - m))))


def effective_sample_size(weights):
    weights = np.asarray(weights, dtype=float)
    return 1.0 / np.sum(weights * weights)


def model_posterior(weights, models, n_models):
    """Weighted share of particles sitting on each model."""
    return np.bincount(models, weights=weights, minlength=n_models)


def map_model(posteriors):
    """Index of the largest posterior; ties go to the smallest index."""
    return int(np.argmax(posteriors))


def state_estimate(weights, states):
    return weights @ states


def multinomial_indices(weights, rng):
    """N ancestor indices drawn i.i.d. from the categorical over particles."""
    cdf = np.cumsum(weights)
    u = rng.random(cdf.shape[0]) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), cdf.shape[0] - 1)


def multinomial_resample(sys, rng):
    """Copy survivors (state, model and history) and reset weights to 1/N."""
    idx = multinomial_indices(np.exp(sys.log_weights), rng)
    n = sys.n_particles
    return ParticleSystem(
        states=sys.states[idx],
        models=sys.models[idx],
        history=sys.history.take(idx),
        log_weights=np.full(n, -np.log(n)),
        t=sys.t,
    )


def weight_increment(log_lik, log_prior_m, log_proposal_m):
    """Per-particle log-weight increment for the bootstrap state proposal."""
    return log_lik + log_prior_m - log_proposal_m


def initialize(model_set, dyn, cfg, rng):
    """Draw ``M_0`` from the initial model distribution and ``x_0`` given it."""
    n = cfg.n_particles
    if dyn.n_models != model_set.n_models:
        raise ConfigurationError("dynamics and model set disagree on K")
    empty = RegimeHistory.empty(n, dyn.n_models)
    models = sample_prior(empty, dyn, rng)
    states = model_set.sample_initial(models, rng)
    return ParticleSystem(states, models, empty.append(models), np.full(n, -np.log(n)), 0)


def step(sys, y, model_set, dyn, cfg, rng):
    """Advance the particle system by one observation.

    Returns the new system and the filter output at the new time index.
    """
    t = sys.t + 1
    hist = sys.history
    n = sys.n_particles
    models, log_q = propose_models(cfg.proposal, hist, dyn, rng)
    with np.errstate(divide="ignore"):
        log_p = dyn.log_probabilities(hist)[np.arange(n), models]
    states = model_set.sample_transition(sys.states, models, rng)
    log_lik = model_set.log_likelihood(y, states, models)
    log_w = sys.log_weights + weight_increment(log_lik, log_p, log_q)
    log_w = normalize_weights(log_w, t)
    w = np.exp(log_w)

    posteriors = model_posterior(w, models, dyn.n_models)
    ess = float(effective_sample_size(w))
    out = FilterOutput(t, state_estimate(w, states), posteriors, map_model(posteriors), ess)

    new = ParticleSystem(states, models, hist.append(models), log_w, t)
    if cfg.resample == "always" or ess < cfg.ess_fraction * n:
        new = multinomial_resample(new, rng)
    return new, out


def run_filter(observations, model_set, dyn, cfg, rng=None):
    """Filter a ``(T, obs_dim)`` (or length-T) observation sequence."""
    observations = np.asarray(observations, dtype=float)
    if observations.ndim == 1:
        observations = observations[:, None]
    if observations.shape[0] < 1:
        raise ValueError("need at least one observation")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    sys = initialize(model_set, dyn, cfg, rng)
    outputs = []
    for y in observations:
        sys, out = step(sys, y, model_set, dyn, cfg, rng)
        outputs.append(out)
    return outputs
