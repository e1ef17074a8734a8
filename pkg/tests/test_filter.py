import json
import math

import numpy as np
import pytest
from scipy import stats

from rspf.errors import ConfigurationError, DegenerateWeightsError
from rspf.filter import (
    FilterConfig,
    ParticleSystem,
    effective_sample_size,
    initialize,
    map_model,
    model_posterior,
    multinomial_indices,
    multinomial_resample,
    normalize_weights,
    run_filter,
    state_estimate,
    step,
    weight_increment,
)
from rspf.models import SyntheticModelParams, SyntheticModelSet, make_benchmark_model_set
from rspf.regimes import MarkovDynamics, PolyaDynamics, RegimeHistory, banded_transition_matrix

BENCH_SET = make_benchmark_model_set()
BENCHMARK_MARKOV = MarkovDynamics(banded_transition_matrix())


def test_normalize_weights():
    np.testing.assert_allclose(normalize_weights([math.log(2), math.log(2)]), [math.log(0.5)] * 2)
    out = normalize_weights([0.0, -np.inf])
    assert out[0] == 0.0 and out[1] == -np.inf
    for a in (-800.0, 0.0, 700.0):
        np.testing.assert_allclose(normalize_weights([a] * 4), [math.log(0.25)] * 4, atol=1e-12)


def test_normalize_weights_degenerate():
    with pytest.raises(DegenerateWeightsError) as exc:
        normalize_weights([-np.inf, -np.inf], t=7)
    assert exc.value.t == 7


def test_model_posterior_and_map():
    post = model_posterior(np.array([0.5, 0.3, 0.2]), np.array([0, 0, 1]), 2)
    np.testing.assert_allclose(post, [0.8, 0.2])
    assert map_model(post) == 0
    np.testing.assert_array_equal(model_posterior(np.full(4, 0.25), np.full(4, 2), 4), [0, 0, 1, 0])
    assert map_model(np.array([0.5, 0.5])) == 0
    assert map_model(3.7 * np.array([0.1, 0.6, 0.3])) == map_model(np.array([0.1, 0.6, 0.3])) == 1


def test_state_estimate():
    assert state_estimate(np.array([0.5, 0.5]), np.array([[1.0], [3.0]]))[0] == 2.0
    assert state_estimate(np.array([0.0, 1.0, 0.0]), np.array([[1.0], [3.0], [9.0]]))[0] == 3.0
    xs = np.array([[1.0], [2.0], [6.0]])
    assert state_estimate(np.full(3, 1 / 3), xs)[0] == pytest.approx(3.0)


def test_effective_sample_size():
    assert effective_sample_size(np.full(10, 0.1)) == pytest.approx(10)
    assert effective_sample_size(np.array([0, 1.0, 0])) == 1
    assert effective_sample_size(np.array([0.5, 0.5, 0, 0])) == 2


def test_initialize():
    cfg = FilterConfig(n_particles=4)
    sys = initialize(BENCH_SET, BENCHMARK_MARKOV, cfg, np.random.default_rng(0))
    np.testing.assert_array_equal(sys.log_weights, np.log(0.25))
    assert sys.t == 0 and sys.history.t == 1

    n = 1_000_000
    sys = initialize(BENCH_SET, BENCHMARK_MARKOV, FilterConfig(n_particles=n), np.random.default_rng(1))
    freq = np.bincount(sys.models, minlength=8) / n
    assert np.all(np.abs(freq - 1 / 8) < 4 * math.sqrt(1 / 8 * 7 / 8 / n))
    assert sys.states.min() >= -0.5 and sys.states.max() <= 0.5
    np.testing.assert_array_equal(sys.history.last_model, sys.models)


def test_weight_increment_example():
    lik = 0.037
    inc = weight_increment(math.log(lik), math.log(0.80), -math.log(8))
    assert math.exp(inc) == pytest.approx(6.4 * lik, rel=1e-12)
    assert weight_increment(-1.25, -0.4, -0.4) == -1.25


def _expected_log_weights(prev_log_w, hist, models, states, y, dyn, proposal, params):
    """Independent evaluation of the weight recursion with scipy densities."""
    a = np.array(params.b)[models] * np.sqrt(np.abs(states[:, 0])) + np.array(params.d)[models]
    loglik = stats.norm.logpdf(y, loc=a, scale=math.sqrt(params.sigma_v2))
    if isinstance(dyn, MarkovDynamics):
        prior = dyn.transition[hist.last_model, models]
    else:
        num = dyn.beta[models] + hist.counts[np.arange(len(models)), models]
        prior = num / (dyn.beta.sum() + hist.t)
    k = dyn.n_models
    q = prior if proposal == "bootstrap" else np.full(len(models), 1 / k)
    lw = prev_log_w + loglik + np.log(prior) - np.log(q)
    return lw - np.logaddexp.reduce(lw)


@pytest.mark.parametrize("proposal", ["bootstrap", "uniform", "deterministic"])
@pytest.mark.parametrize("dyn", [BENCHMARK_MARKOV, PolyaDynamics([3, 1, 4, 1, 5, 9, 2, 6])], ids=["markov", "polya"])
def test_step_weights_match_independent_formula(proposal, dyn):
    rng = np.random.default_rng(11)
    cfg = FilterConfig(n_particles=300, proposal=proposal, resample="ess", ess_fraction=1e-9)
    sys = initialize(BENCH_SET, dyn, cfg, rng)
    for y in (0.4, -2.2, 3.1):
        prev = sys
        sys, out = step(prev, np.array([y]), BENCH_SET, dyn, cfg, rng)
        expected = _expected_log_weights(prev.log_weights, prev.history, sys.models, sys.states, y, dyn,
                                         proposal, BENCH_SET.params)
        np.testing.assert_allclose(sys.log_weights, expected, rtol=1e-10, atol=1e-10)
        np.testing.assert_array_equal(sys.history.last_model, sys.models)
        assert out.model_posteriors.sum() == pytest.approx(1.0, abs=1e-9)


def test_bootstrap_weights_are_likelihood_only():
    rng = np.random.default_rng(3)
    cfg = FilterConfig(n_particles=200, proposal="bootstrap", resample="ess", ess_fraction=1e-9)
    sys = initialize(BENCH_SET, BENCHMARK_MARKOV, cfg, rng)
    sys, _ = step(sys, np.array([1.0]), BENCH_SET, BENCHMARK_MARKOV, cfg, rng)
    lik = BENCH_SET.log_likelihood(np.array([1.0]), sys.states, sys.models)
    np.testing.assert_allclose(sys.log_weights, lik - np.logaddexp.reduce(lik), atol=1e-12)


def test_outputs_are_convex_and_normalised():
    rng = np.random.default_rng(5)
    cfg = FilterConfig(n_particles=500, proposal="uniform")
    sys = initialize(BENCH_SET, BENCHMARK_MARKOV, cfg, rng)
    for y in np.linspace(-5, 5, 8):
        sys, out = step(sys, np.array([y]), BENCH_SET, BENCHMARK_MARKOV, cfg, rng)
        assert out.model_posteriors.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(out.model_posteriors >= 0)
        assert 1.0 <= out.ess <= 500 + 1e-9
        assert out.map_model == int(np.argmax(out.model_posteriors))


def test_state_estimate_within_particle_range():
    rng = np.random.default_rng(8)
    cfg = FilterConfig(n_particles=50, resample="ess", ess_fraction=1e-9)
    sys = initialize(BENCH_SET, BENCHMARK_MARKOV, cfg, rng)
    for y in (0.2, 1.5, -3.0):
        sys, out = step(sys, np.array([y]), BENCH_SET, BENCHMARK_MARKOV, cfg, rng)
        assert sys.states.min() - 1e-12 <= out.state_estimate[0] <= sys.states.max() + 1e-12


class _BoundedSupport(SyntheticModelSet):
    """Observation density that is zero for |y| > 5."""

    def log_likelihood(self, y, x, models):
        out = super().log_likelihood(y, x, models)
        return out if abs(float(y[0])) <= 5 else np.full_like(out, -np.inf)


def test_degenerate_step_reports_time():
    ms = _BoundedSupport(SyntheticModelParams(a=(0.5,), b=(1.0,), c=(0.0,), d=(0.0,)))
    cfg = FilterConfig(n_particles=10)
    with pytest.raises(DegenerateWeightsError) as exc:
        run_filter([0.1, 10.0, 0.2], ms, PolyaDynamics([1]), cfg, rng=np.random.default_rng(0))
    assert exc.value.t == 2


def _system(weights, n_models=2):
    n = len(weights)
    models = np.arange(n) % n_models
    hist = RegimeHistory.empty(n, n_models).append(models)
    with np.errstate(divide="ignore"):
        lw = np.log(np.asarray(weights, float))
    return ParticleSystem(np.arange(n, dtype=float)[:, None], models, hist, lw, 3)


def test_resample_one_hot():
    sys = multinomial_resample(_system([0, 0, 1, 0]), np.random.default_rng(0))
    np.testing.assert_array_equal(sys.states[:, 0], 2.0)
    np.testing.assert_array_equal(sys.models, 0)
    np.testing.assert_array_equal(sys.history.last_model, 0)
    np.testing.assert_allclose(sys.log_weights, math.log(0.25))


def test_resample_two_uniform_ancestors():
    rng = np.random.default_rng(1)
    reps = 1_000_000
    first = np.empty(reps, dtype=np.int64)
    w = np.array([0.5, 0.5])
    for r in range(reps):
        first[r] = multinomial_indices(w, rng)[0]
    assert abs(first.mean() - 0.5) < 4 * math.sqrt(0.25 / reps)


def test_resample_offspring_counts_and_unbiasedness():
    rng = np.random.default_rng(2)
    w = np.array([0.05, 0.4, 0.15, 0.3, 0.1])
    f = np.array([3.0, -1.0, 0.5, 2.0, 10.0])
    reps = 10_000
    counts = np.zeros((reps, 5))
    means = np.zeros(reps)
    for r in range(reps):
        idx = multinomial_indices(w, rng)
        counts[r] = np.bincount(idx, minlength=5)
        means[r] = f[idx].mean()
    n = len(w)
    se = np.sqrt(n * w * (1 - w) / reps)
    assert np.all(np.abs(counts.mean(axis=0) - n * w) < 4 * se)
    assert abs(means.mean() - w @ f) < 4 * means.std(ddof=1) / math.sqrt(reps)


def test_resample_copies_history():
    n = 6
    models = np.array([0, 1, 2, 0, 1, 2])
    hist = RegimeHistory.empty(n, 3).append(models).append(models[::-1])
    lw = np.log(np.array([0, 0, 0, 0, 1.0, 0]) + 1e-300)
    sys = ParticleSystem(np.zeros((n, 1)), models[::-1].copy(), hist, lw, 2)
    out = multinomial_resample(sys, np.random.default_rng(0))
    np.testing.assert_array_equal(out.history.counts, np.tile(hist.counts[4], (n, 1)))
    np.testing.assert_array_equal(out.history.last_model, hist.last_model[4])


def test_run_filter_deterministic():
    obs = [0.3, -1.0, 2.5, 4.1, -0.2]
    cfg = FilterConfig(n_particles=300, proposal="uniform", seed=42)
    a = run_filter(obs, BENCH_SET, BENCHMARK_MARKOV, cfg)
    b = run_filter(obs, BENCH_SET, BENCHMARK_MARKOV, cfg)
    for oa, ob in zip(a, b):
        assert oa.state_estimate.tobytes() == ob.state_estimate.tobytes()
        assert oa.model_posteriors.tobytes() == ob.model_posteriors.tobytes()
        assert oa.ess == ob.ess and oa.map_model == ob.map_model
    assert [o.t for o in a] == [1, 2, 3, 4, 5]


def test_ess_policy_resamples_only_when_needed():
    rng = np.random.default_rng(0)
    cfg = FilterConfig(n_particles=400, resample="ess", ess_fraction=0.5)
    sys = initialize(BENCH_SET, BENCHMARK_MARKOV, cfg, rng)
    for y in (0.1, 0.2, 5.0, -4.0):
        sys, out = step(sys, np.array([y]), BENCH_SET, BENCHMARK_MARKOV, cfg, rng)
        uniform = np.allclose(sys.log_weights, -math.log(400))
        assert uniform == (out.ess < 200)


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_particles=0), dict(proposal="optimal"), dict(state_proposal="ekf"),
     dict(resample="systematic"), dict(ess_fraction=0.0)],
)
def test_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        FilterConfig(**kwargs)


def test_config_json_roundtrip(tmp_path):
    cfg = FilterConfig(n_particles=123, proposal="deterministic", resample="ess", ess_fraction=0.3, seed=9)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert FilterConfig.from_json(path) == cfg


def test_k_mismatch_rejected():
    with pytest.raises(ConfigurationError):
        initialize(BENCH_SET, PolyaDynamics([1, 1]), FilterConfig(n_particles=5), np.random.default_rng(0))
