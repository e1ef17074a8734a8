"""State-space model families used by the filters.

Model indices are 0-based throughout the Python API: model ``k`` here is
model ``k + 1`` in the usual 1..K notation. CSV output converts back to
1-based labels.

Every :class:`CandidateModelSet` is vectorised over particles. States are
``(N, state_dim)`` arrays, observations for a single time step are
``(obs_dim,)`` arrays and ``models`` is an ``(N,)`` integer array giving
the model each particle is conditioned on.
"""
from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))


def gaussian_log_pdf(y, mean, variance):
    """Log density of ``N(mean, variance)`` evaluated at ``y``.

    Broadcasts over array arguments; returns a Python float for scalar input.
    """
    variance = np.asarray(variance, dtype=float)
    if np.any(~(variance > 0)):
        raise ValueError(f"variance must be positive, got {variance}")
    resid = np.asarray(y, dtype=float) - np.asarray(mean, dtype=float)
    out = -0.5 * (LOG_2PI + np.log(variance)) - 0.5 * resid * resid / variance
    if out.ndim == 0:
        return float(out)
    return out


class CandidateModelSet(ABC):
    """The K candidate models of a regime-switching state-space model.

    Each model pairs a sampler with the matching log-density for the
    initial state, the state transition and the observation. Implementations
    must be immutable; all randomness comes from the ``rng`` argument.
    """

    n_models: int
    state_dim: int
    obs_dim: int

    @abstractmethod
    def sample_initial(self, models, rng):
        """Draw ``x_0 ~ p(x_0 | M_0 = models[n])`` for each particle."""

    @abstractmethod
    def log_initial(self, x, models):
        """``log p(x_0 | M_0)`` per particle."""

    @abstractmethod
    def sample_transition(self, x_prev, models, rng):
        """Draw ``x_t ~ p(x_t | x_{t-1}, M_t)`` per particle."""

    @abstractmethod
    def log_transition(self, x, x_prev, models):
        """``log p(x_t | x_{t-1}, M_t)`` per particle."""

    @abstractmethod
    def sample_observation(self, x, models, rng):
        """Draw ``y_t ~ p(y_t | x_t, M_t)`` per particle."""

    @abstractmethod
    def log_likelihood(self, y, x, models):
        """``log p(y_t | x_t, M_t)`` per particle for one observation ``y``."""

    def check_models(self, models):
        models = np.asarray(models)
        if models.size and (models.min() < 0 or models.max() >= self.n_models):
            raise IndexError(f"model index out of range for K={self.n_models}")
        return models


BENCHMARK_A = (-0.1, -0.3, -0.5, -0.9, 0.1, 0.3, 0.5, 0.9)
BENCHMARK_C = (0.0, -2.0, 2.0, -4.0, 0.0, 2.0, -2.0, 4.0)


@dataclass(frozen=True)
class SyntheticModelParams:
    """Coefficients of the scalar family

        x_t = a_k x_{t-1} + c_k + u_t,      u_t ~ N(0, sigma_u2)
        y_t = b_k sqrt(|x_t|) + d_k + v_t,  v_t ~ N(0, sigma_v2)

    with ``x_0 ~ Uniform(x0_low, x0_high)``. ``x0_low`` and ``x0_high`` may be
    scalars or per-model sequences.
    """

    a: tuple = BENCHMARK_A
    b: tuple = BENCHMARK_A
    c: tuple = BENCHMARK_C
    d: tuple = BENCHMARK_C
    sigma_u2: float = 0.1
    sigma_v2: float = 0.1
    x0_low: float | tuple = -0.5
    x0_high: float | tuple = 0.5

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        for name in ("x0_low", "x0_high"):
            value = getattr(self, name)
            if np.ndim(value):
                object.__setattr__(self, name, tuple(float(v) for v in value))
        k = len(self.a)
        if k < 1:
            raise ValueError("need at least one model")
        if any(len(getattr(self, n)) != k for n in ("b", "c", "d")):
            raise ValueError("coefficient arrays must all have length K")
        if not (self.sigma_u2 > 0 and self.sigma_v2 > 0):
            raise ValueError("noise variances must be positive")
        low = np.broadcast_to(np.asarray(self.x0_low, float), (k,))
        high = np.broadcast_to(np.asarray(self.x0_high, float), (k,))
        if np.any(low >= high):
            raise ValueError("x0_low must be below x0_high")

    @property
    def n_models(self):
        return len(self.a)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        return asdict(self)


def synthetic_state_step(x_prev, k, params, rng=None):
    """Propagate ``x_prev`` through model ``k``; ``rng=None`` means no noise."""
    _check_index(k, params.n_models)
    mean = params.a[k] * np.asarray(x_prev, float) + params.c[k]
    if rng is not None:
        mean = mean + np.sqrt(params.sigma_u2) * rng.standard_normal(np.shape(mean))
    return float(mean) if np.ndim(mean) == 0 else mean


def synthetic_observe(x, k, params, rng=None):
    """Observe state ``x`` through model ``k``; ``rng=None`` means no noise."""
    _check_index(k, params.n_models)
    mean = params.b[k] * np.sqrt(np.abs(np.asarray(x, float))) + params.d[k]
    if rng is not None:
        mean = mean + np.sqrt(params.sigma_v2) * rng.standard_normal(np.shape(mean))
    return float(mean) if np.ndim(mean) == 0 else mean


def synthetic_obs_log_likelihood(y, x, k, params):
    _check_index(k, params.n_models)
    mean = params.b[k] * np.sqrt(np.abs(np.asarray(x, float))) + params.d[k]
    return gaussian_log_pdf(y, mean, params.sigma_v2)


def _check_index(k, n_models):
    if not 0 <= k < n_models:
        raise IndexError(f"model index {k} out of range for K={n_models}")


@dataclass(frozen=True)
class SyntheticModelSet(CandidateModelSet):
    """Vectorised candidate set built from :class:`SyntheticModelParams`."""

    params: SyntheticModelParams = field(default_factory=SyntheticModelParams)
    state_dim: int = field(default=1, init=False)
    obs_dim: int = field(default=1, init=False)

    def __post_init__(self):
        p = self.params
        k = p.n_models
        object.__setattr__(self, "_a", np.array(p.a))
        object.__setattr__(self, "_b", np.array(p.b))
        object.__setattr__(self, "_c", np.array(p.c))
        object.__setattr__(self, "_d", np.array(p.d))
        object.__setattr__(self, "_low", np.broadcast_to(np.asarray(p.x0_low, float), (k,)).copy())
        object.__setattr__(self, "_high", np.broadcast_to(np.asarray(p.x0_high, float), (k,)).copy())

    @property
    def n_models(self):
        return self.params.n_models

    def sample_initial(self, models, rng):
        models = self.check_models(models)
        low, high = self._low[models], self._high[models]
        return (low + (high - low) * rng.random(models.shape[0]))[:, None]

    def log_initial(self, x, models):
        models = self.check_models(models)
        low, high = self._low[models], self._high[models]
        x = np.asarray(x, float)[:, 0]
        inside = (x >= low) & (x <= high)
        return np.where(inside, -np.log(high - low), -np.inf)

    def _transition_mean(self, x_prev, models):
        return self._a[models] * x_prev[:, 0] + self._c[models]

    def sample_transition(self, x_prev, models, rng):
        models = self.check_models(models)
        mean = self._transition_mean(np.asarray(x_prev, float), models)
        noise = rng.standard_normal(mean.shape[0])
        return (mean + np.sqrt(self.params.sigma_u2) * noise)[:, None]

    def log_transition(self, x, x_prev, models):
        models = self.check_models(models)
        mean = self._transition_mean(np.asarray(x_prev, float), models)
        return gaussian_log_pdf(np.asarray(x, float)[:, 0], mean, self.params.sigma_u2)

    def _obs_mean(self, x, models):
        return self._b[models] * np.sqrt(np.abs(x[:, 0])) + self._d[models]

    def sample_observation(self, x, models, rng):
        models = self.check_models(models)
        mean = self._obs_mean(np.asarray(x, float), models)
        noise = rng.standard_normal(mean.shape[0])
        return (mean + np.sqrt(self.params.sigma_v2) * noise)[:, None]

    def log_likelihood(self, y, x, models):
        models = self.check_models(models)
        mean = self._obs_mean(np.asarray(x, float), models)
        y = float(np.asarray(y, float).reshape(-1)[0])
        return gaussian_log_pdf(y, mean, self.params.sigma_v2)


def make_benchmark_model_set():
    """The eight-model benchmark family (sigma_u2 = sigma_v2 = 0.1, x_0 ~ U(-0.5, 0.5))."""
    return SyntheticModelSet(SyntheticModelParams())
