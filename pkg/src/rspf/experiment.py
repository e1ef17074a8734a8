"""Monte Carlo reproduction of the eight-model switching benchmark.

Each run draws one trajectory and feeds the same data to every method, so
comparisons are paired. Seeds are derived from ``(base_seed, run, stream)``
via :class:`numpy.random.SeedSequence` spawn keys: adding a method never
changes the random numbers any other method sees, and results do not depend
on how runs are spread over worker processes.
"""
from __future__ import annotations

import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateWeightsError
from .filter import FilterConfig, run_filter
from .mmpf import mmpf_run
from .models import CandidateModelSet, make_benchmark_model_set
from .oracle import LinearGaussianModelSet, enumerate_exact
from .regimes import (
    PROPOSALS,
    IndependentDynamics,
    MarkovDynamics,
    PolyaDynamics,
    RegimeHistory,
    banded_transition_matrix,
    sample_prior,
)

SCENARIOS = ("markov", "polya")
BENCHMARK_GAMMAS = (0.0, 0.5, 0.9, 1.0)


@dataclass(frozen=True)
class Scenario:
    dynamics: str = "markov"
    horizon: int = 50
    model_set: CandidateModelSet = field(default_factory=make_benchmark_model_set)

    def __post_init__(self):
        if self.dynamics not in SCENARIOS:
            raise ConfigurationError(f"unknown scenario {self.dynamics!r}")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be >= 1")

    def make_dynamics(self, rng=None, beta=None):
        """Dynamics for one run. The Polya urn draws ``beta`` as a random
        permutation of ``1..K`` from ``rng`` unless ``beta`` is given."""
        k = self.model_set.n_models
        if self.dynamics == "markov":
            return MarkovDynamics(banded_transition_matrix(k))
        if beta is None:
            beta = rng.permutation(np.arange(1, k + 1))
        return PolyaDynamics(beta)


@dataclass(frozen=True)
class Method:
    name: str
    kind: str  # "rspf" or "mmpf"
    proposal: str = "bootstrap"
    gamma: float = 0.0

    def __post_init__(self):
        if self.kind not in ("rspf", "mmpf"):
            raise ConfigurationError(f"unknown method kind {self.kind!r}")

    @property
    def stream_id(self):
        return zlib.crc32(self.name.encode())


def benchmark_methods():
    methods = [Method(f"rspf-{p}", "rspf", proposal=p) for p in ("deterministic", "uniform", "bootstrap")]
    methods += [Method(f"mmpf-gamma{g:g}", "mmpf", gamma=g) for g in BENCHMARK_GAMMAS]
    return methods


_DATA_STREAM = zlib.crc32(b"trajectory")


def derive_seed(base_seed, run, stream):
    return np.random.SeedSequence(entropy=base_seed, spawn_key=(run, stream))


@dataclass(frozen=True)
class Trajectory:
    models: np.ndarray  # (T+1,) M_0..M_T
    states: np.ndarray  # (T+1, state_dim) x_0..x_T
    observations: np.ndarray  # (T, obs_dim) y_1..y_T
    dynamics: object


def generate_trajectory(scenario, seed, beta=None, dynamics=None):
    """Ancestral sample of ``(M_{0:T}, x_{0:T}, y_{1:T})``."""
    rng = np.random.default_rng(seed)
    ms = scenario.model_set
    dyn = dynamics if dynamics is not None else scenario.make_dynamics(rng, beta)
    hist = RegimeHistory.empty(1, dyn.n_models)
    m = sample_prior(hist, dyn, rng)
    hist = hist.append(m)
    x = ms.sample_initial(m, rng)
    models, states, obs = [m[0]], [x[0]], []
    for _ in range(scenario.horizon):
        m = sample_prior(hist, dyn, rng)
        hist = hist.append(m)
        x = ms.sample_transition(x, m, rng)
        y = ms.sample_observation(x, m, rng)
        models.append(m[0])
        states.append(x[0])
        obs.append(y[0])
    return Trajectory(np.array(models), np.array(states), np.array(obs), dyn)


def mse(truth, estimate):
    """Mean squared error over time and the cumulative squared-error curve."""
    err = np.asarray(estimate, float) - np.asarray(truth, float)
    sq = err * err
    if sq.ndim > 1:
        sq = sq.sum(axis=tuple(range(1, sq.ndim)))
    return float(sq.mean()), np.cumsum(sq)


def model_accuracy(truth, estimate):
    return float(np.mean(np.asarray(truth) == np.asarray(estimate)))


@dataclass
class MethodResult:
    state_estimates: np.ndarray | None
    map_models: np.ndarray | None
    mse: float = float("nan")
    accuracy: float = float("nan")
    cumulative_se: np.ndarray | None = None
    error: str | None = None

    @property
    def failed(self):
        return self.error is not None


@dataclass
class RunRecord:
    run: int
    trajectory: Trajectory
    results: dict  # method name -> MethodResult


def run_method(method, traj, model_set, n_particles, seed, dynamics=None):
    dyn = dynamics if dynamics is not None else traj.dynamics
    rng = np.random.default_rng(seed)
    try:
        if method.kind == "rspf":
            cfg = FilterConfig(n_particles=n_particles, proposal=method.proposal)
            outputs = run_filter(traj.observations, model_set, dyn, cfg, rng=rng)
        else:
            n_per_model = max(1, n_particles // model_set.n_models)
            outputs = mmpf_run(traj.observations, model_set, method.gamma, n_per_model, rng=rng)
    except DegenerateWeightsError as exc:
        return MethodResult(None, None, error=f"degenerate weights at t={exc.t}")
    xhat = np.array([o.state_estimate for o in outputs])
    mhat = np.array([o.map_model for o in outputs])
    err, cum = mse(traj.states[1:], xhat)
    return MethodResult(xhat, mhat, err, model_accuracy(traj.models[1:], mhat), cum)


def run_single(scenario, run, base_seed, methods, n_particles, filter_dynamics=None):
    traj = generate_trajectory(scenario, derive_seed(base_seed, run, _DATA_STREAM))
    results = {
        m.name: run_method(m, traj, scenario.model_set, n_particles,
                           derive_seed(base_seed, run, m.stream_id), filter_dynamics)
        for m in methods
    }
    return RunRecord(run, traj, results)


def _run_single_star(args):
    return run_single(*args)


@dataclass
class SummaryRow:
    method: str
    mse_average: float
    mse_best: float
    mse_worst: float
    accuracy_average: float
    accuracy_best: float
    accuracy_worst: float
    failures: int


@dataclass
class ExperimentResult:
    scenario: Scenario
    methods: list
    records: list
    summary: list
    cumulative_mse: dict  # method name -> (T,) mean cumulative squared error

    def row(self, name):
        return next(r for r in self.summary if r.method == name)


def summarize(records, methods, horizon):
    summary, curves = [], {}
    for m in methods:
        ok = [r.results[m.name] for r in records if not r.results[m.name].failed]
        failures = len(records) - len(ok)
        if ok:
            e = np.array([o.mse for o in ok])
            a = np.array([o.accuracy for o in ok])
            summary.append(SummaryRow(m.name, e.mean(), e.min(), e.max(), a.mean(), a.max(), a.min(), failures))
            curves[m.name] = np.mean([o.cumulative_se for o in ok], axis=0)
        else:
            nan = float("nan")
            summary.append(SummaryRow(m.name, nan, nan, nan, nan, nan, nan, failures))
            curves[m.name] = np.full(horizon, np.nan)
    return summary, curves


def run_experiment(scenario, methods=None, runs=500, n_particles=2000, base_seed=0, jobs=1,
                   filter_dynamics=None):
    """Run ``runs`` paired Monte Carlo replications of every method.

    ``filter_dynamics`` replaces the true regime dynamics inside the filters
    (mismatch studies); by default each filter is given the run's true
    dynamics.
    """
    if runs < 1:
        raise ConfigurationError("runs must be >= 1")
    methods = list(methods) if methods is not None else benchmark_methods()
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ConfigurationError("method names must be unique")
    tasks = [(scenario, r, base_seed, methods, n_particles, filter_dynamics) for r in range(runs)]
    if jobs is None or jobs <= 1:
        records = [_run_single_star(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_single_star, tasks, chunksize=max(1, runs // (4 * jobs))))
    summary, curves = summarize(records, methods, scenario.horizon)
    return ExperimentResult(scenario, methods, records, summary, curves)


def oracle_instance():
    """The K=2, T=5 linear-Gaussian validation instance and its three dynamics."""
    models = LinearGaussianModelSet(a=(0.9, 0.5), c=(1.0, -1.0), h=(1.0, 1.0), d=(0.0, 0.0),
                                    sigma_u2=0.5, sigma_v2=0.5, m0=0.0, s02=1.0)
    dynamics = {
        "markov": MarkovDynamics([[0.9, 0.1], [0.1, 0.9]]),
        "polya": PolyaDynamics([2, 1]),
        "independent": IndependentDynamics([0.3, 0.7]),
    }
    return models, dynamics


@dataclass
class OracleCheckRow:
    dynamics: str
    proposal: str
    max_tv: float
    max_z: float
    tv_tol: float
    z_tol: float

    @property
    def passed(self):
        return self.max_tv <= self.tv_tol and self.max_z <= self.z_tol


def oracle_check(n_particles=100_000, repetitions=20, horizon=5, seed=0, tv_tol=0.05, z_tol=3.0):
    """Compare RSPF against exact enumeration for every dynamics/proposal pair.

    ``max_tv`` is the worst total-variation distance between a single run's
    model posterior and the exact one; ``max_z`` is the worst
    ``|mean_r xhat - E[x_t | y_1:t]|`` in units of the standard error of that
    mean, estimated from the spread over repetitions.
    """
    models, dynamics = oracle_instance()
    scenario = Scenario("markov", horizon, models)
    traj = generate_trajectory(scenario, np.random.SeedSequence(seed), dynamics=dynamics["markov"])
    rows = []
    for dname, dyn in dynamics.items():
        exact = enumerate_exact(traj.observations, models, dyn)
        for proposal in PROPOSALS:
            cfg = FilterConfig(n_particles=n_particles, proposal=proposal)
            post, xhat = [], []
            for r in range(repetitions):
                key = (zlib.crc32(dname.encode()), zlib.crc32(proposal.encode()), r)
                rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
                outs = run_filter(traj.observations, models, dyn, cfg, rng=rng)
                post.append([o.model_posteriors for o in outs])
                xhat.append([o.state_estimate[0] for o in outs])
            post, xhat = np.array(post), np.array(xhat)
            tv = 0.5 * np.abs(post - exact.model_probs).sum(axis=2)
            se = xhat.std(axis=0, ddof=1) / np.sqrt(repetitions)
            z = np.abs(xhat.mean(axis=0) - exact.state_mean) / se
            rows.append(OracleCheckRow(dname, proposal, float(tv.max()), float(z.max()), tv_tol, z_tol))
    return rows
