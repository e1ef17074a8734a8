import numpy as np
import pytest

from rspf.experiment import (
    Method,
    Scenario,
    derive_seed,
    generate_trajectory,
    model_accuracy,
    mse,
    benchmark_methods,
    run_experiment,
    run_single,
)
from rspf.io import emit_outputs
from rspf.models import SyntheticModelParams, SyntheticModelSet


def test_mse_examples():
    assert mse([1.0, 2.0], [1.0, 2.0])[0] == 0
    assert mse(np.arange(5.0), np.arange(5.0) + 0.3)[0] == pytest.approx(0.09)
    err, cum = mse([0.0, 0.0], [1.0, 3.0])
    assert err == 5.0
    np.testing.assert_array_equal(cum, [1.0, 10.0])


def test_accuracy_examples():
    truth = np.arange(50) % 8
    assert model_accuracy(truth, truth) == 1
    assert model_accuracy(truth, (truth + 1) % 8) == 0
    est = truth.copy()
    est[:4] = (est[:4] + 1) % 8
    assert model_accuracy(truth, est) == pytest.approx(0.92)


def test_markov_trajectory_self_transition_rate():
    traj = generate_trajectory(Scenario("markov", horizon=100_000), derive_seed(1, 0, 0))
    m = traj.models
    stay = np.mean(m[1:] == m[:-1])
    assert abs(stay - 0.80) < 0.01
    advance = np.mean(m[1:] == (m[:-1] + 1) % 8)
    assert abs(advance - 0.15) < 0.01


def test_trajectory_shapes_and_initial_state():
    for r in range(50):
        traj = generate_trajectory(Scenario("polya"), derive_seed(0, r, 0))
        assert traj.models.shape == (51,) and traj.states.shape == (51, 1) and traj.observations.shape == (50, 1)
        assert -0.5 <= traj.states[0, 0] <= 0.5
        assert sorted(traj.dynamics.beta) == list(range(1, 9))


def test_trajectory_deterministic():
    a = generate_trajectory(Scenario("polya"), derive_seed(3, 1, 0))
    b = generate_trajectory(Scenario("polya"), derive_seed(3, 1, 0))
    assert a.observations.tobytes() == b.observations.tobytes()
    np.testing.assert_array_equal(a.dynamics.beta, b.dynamics.beta)


def test_polya_reinforcement():
    beta = [8, 1, 1, 1, 1, 1, 1, 1]
    freq = np.mean([generate_trajectory(Scenario("polya", horizon=20), derive_seed(5, r, 0), beta=beta).models == 0
                    for r in range(400)])
    assert freq > 1 / 8 + 0.1


SMALL = dict(runs=4, n_particles=200, base_seed=11)


def test_paired_design_and_method_isolation():
    methods = benchmark_methods()
    base = run_single(Scenario("markov", horizon=10), 2, 7, methods[:2], 100)
    more = run_single(Scenario("markov", horizon=10), 2, 7, methods, 100)
    assert base.trajectory.observations.tobytes() == more.trajectory.observations.tobytes()
    for name in base.results:
        assert base.results[name].state_estimates.tobytes() == more.results[name].state_estimates.tobytes()


def test_summary_invariants():
    res = run_experiment(Scenario("markov", horizon=20), **SMALL)
    assert [r.method for r in res.summary] == [m.name for m in benchmark_methods()]
    for row in res.summary:
        assert row.mse_best <= row.mse_average <= row.mse_worst
        assert row.accuracy_worst <= row.accuracy_average <= row.accuracy_best
        assert 0 <= row.accuracy_worst and row.accuracy_best <= 1
        assert row.failures == 0
        assert np.all(np.diff(res.cumulative_mse[row.method]) >= 0)


def test_jobs_do_not_change_results():
    a = run_experiment(Scenario("polya", horizon=8), **SMALL, jobs=1)
    b = run_experiment(Scenario("polya", horizon=8), **SMALL, jobs=2)
    for ra, rb in zip(a.summary, b.summary):
        assert ra == rb


class _Picky(SyntheticModelSet):
    def log_likelihood(self, y, x, models):
        out = super().log_likelihood(y, x, models)
        return out if float(y[0]) < 1.0 else np.full_like(out, -np.inf)


def test_failed_runs_are_recorded_not_fatal():
    ms = _Picky(SyntheticModelParams())
    scenario = Scenario("markov", horizon=15, model_set=ms)
    methods = [Method("rspf-uniform", "rspf", proposal="uniform"), Method("mmpf-gamma0", "mmpf")]
    res = run_experiment(scenario, methods, runs=6, n_particles=80, base_seed=1)
    for row in res.summary:
        assert row.failures > 0
    failed = [r.results["rspf-uniform"] for r in res.records if r.results["rspf-uniform"].failed]
    assert all(f.error.startswith("degenerate weights at t=") for f in failed)


def test_emit_outputs(tmp_path):
    res = run_experiment(Scenario("markov", horizon=50), **SMALL)
    emit_outputs(res, tmp_path)
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert len(summary) == 1 + 7
    assert summary[0].startswith("method,mse_average")
    cumulative = (tmp_path / "cumulative_mse.csv").read_text().splitlines()
    assert len(cumulative) == 1 + 50
    assert len((tmp_path / "runs.csv").read_text().splitlines()) == 1 + 4 * 7
    assert len((tmp_path / "estimates.csv").read_text().splitlines()) == 1 + 4 * 7 * 50
    svg = (tmp_path / "cumulative_mse.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 7

    first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
    emit_outputs(run_experiment(Scenario("markov", horizon=50), **SMALL), tmp_path)
    assert first == {p.name: p.read_bytes() for p in tmp_path.iterdir()}


def test_mismatched_filter_dynamics():
    from rspf.regimes import IndependentDynamics

    res = run_experiment(Scenario("markov", horizon=10), benchmark_methods()[:1], runs=2, n_particles=100,
                         filter_dynamics=IndependentDynamics(np.full(8, 1 / 8)))
    assert res.summary[0].failures == 0
