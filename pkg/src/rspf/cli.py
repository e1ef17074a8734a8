"""Command line entry point: ``rspf {simulate,filter,experiment,oracle-check}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DegenerateWeightsError
from .experiment import (
    Method,
    Scenario,
    derive_seed,
    generate_trajectory,
    oracle_check,
    benchmark_methods,
    run_experiment,
)
from .filter import FilterConfig, run_filter
from .io import emit_outputs, read_trajectory, write_filter_outputs, write_trajectory
from .mmpf import mmpf_run
from .models import SyntheticModelParams, SyntheticModelSet
from .regimes import MarkovDynamics, PolyaDynamics, banded_transition_matrix, dynamics_from_dict


def _add_common(p, particles=2000):
    p.add_argument("--config", help="JSON file whose keys override command-line flags")
    p.add_argument("--params", help="JSON file with synthetic model parameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--particles", type=int, default=particles)
    p.add_argument("--horizon", type=int, default=50)


def build_parser():
    parser = argparse.ArgumentParser(prog="rspf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw one trajectory and write it as CSV")
    _add_common(p)
    p.add_argument("--scenario", choices=("markov", "polya"), default="markov")
    p.add_argument("--beta", help="comma-separated Polya pseudo-counts (default: random permutation)")
    p.add_argument("--out", default="trajectory.csv")

    p = sub.add_parser("filter", help="run one method on a trajectory CSV")
    _add_common(p)
    p.add_argument("trajectory")
    p.add_argument("--method", choices=("rspf", "mmpf"), default="rspf")
    p.add_argument("--proposal", choices=("bootstrap", "uniform", "deterministic"), default="bootstrap")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--scenario", choices=("markov", "polya"),
                   help="dynamics to assume when the trajectory has no sidecar")
    p.add_argument("--dynamics", help="JSON file describing the regime dynamics")
    p.add_argument("--out", help="output CSV (default: stdout)")

    p = sub.add_parser("experiment", help="Monte Carlo reproduction of the benchmark")
    _add_common(p)
    p.add_argument("--scenario", choices=("markov", "polya", "both"), default="both")
    p.add_argument("--runs", type=int, default=500)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results")

    p = sub.add_parser("oracle-check", help="validate RSPF against exact enumeration")
    p.add_argument("--config")
    p.add_argument("--particles", type=int, default=100_000)
    p.add_argument("--repetitions", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _apply_config(args):
    if not getattr(args, "config", None):
        return args
    data = json.loads(Path(args.config).read_text())
    for key, value in data.items():
        setattr(args, key.replace("-", "_"), value)
    return args


def _model_set(args):
    params = getattr(args, "params", None)
    if params is None:
        return SyntheticModelSet(SyntheticModelParams())
    if isinstance(params, dict):
        return SyntheticModelSet(SyntheticModelParams.from_dict(params))
    return SyntheticModelSet(SyntheticModelParams.from_json(params))


def cmd_simulate(args):
    ms = _model_set(args)
    scenario = Scenario(args.scenario, args.horizon, ms)
    beta = None
    if args.beta:
        beta = args.beta if isinstance(args.beta, list) else [int(b) for b in args.beta.split(",")]
    traj = generate_trajectory(scenario, derive_seed(args.seed, 0, 0), beta=beta)
    meta = {"scenario": args.scenario, "seed": args.seed, "horizon": args.horizon}
    if args.scenario == "polya":
        meta["beta"] = [int(b) for b in traj.dynamics.beta]
    write_trajectory(args.out, traj, meta)
    return 0


def _filter_dynamics(args, meta, n_models):
    if args.dynamics:
        data = args.dynamics if isinstance(args.dynamics, dict) else json.loads(Path(args.dynamics).read_text())
        return dynamics_from_dict(data)
    scenario = args.scenario or meta.get("scenario", "markov")
    if scenario == "markov":
        return MarkovDynamics(banded_transition_matrix(n_models))
    if "beta" not in meta:
        raise ConfigurationError("Polya dynamics need beta: pass --dynamics or use a trajectory sidecar")
    return PolyaDynamics(meta["beta"])


def cmd_filter(args):
    ms = _model_set(args)
    _, _, observations, meta = read_trajectory(args.trajectory)
    if args.method == "rspf":
        if isinstance(getattr(args, "filter", None), dict):
            cfg = FilterConfig.from_dict(args.filter)
        else:
            cfg = FilterConfig(n_particles=args.particles, proposal=args.proposal, seed=args.seed)
        dyn = _filter_dynamics(args, meta, ms.n_models)
        outputs = run_filter(observations, ms, dyn, cfg, rng=np.random.default_rng(cfg.seed))
    else:
        outputs = mmpf_run(observations, ms, args.gamma, max(1, args.particles // ms.n_models), seed=args.seed)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_filter_outputs(fh, outputs)
    else:
        write_filter_outputs(sys.stdout, outputs)
    return 0


def cmd_experiment(args):
    ms = _model_set(args)
    scenarios = ("markov", "polya") if args.scenario == "both" else (args.scenario,)
    methods = benchmark_methods()
    if getattr(args, "methods", None):
        methods = [Method(**m) for m in args.methods]
    for name in scenarios:
        scenario = Scenario(name, args.horizon, ms)
        result = run_experiment(scenario, methods, runs=args.runs, n_particles=args.particles,
                                base_seed=args.seed, jobs=args.jobs)
        out = Path(args.out) / name if len(scenarios) > 1 else Path(args.out)
        emit_outputs(result, out)
        print(f"[{name}] runs={args.runs} particles={args.particles} -> {out}")
        print(f"{'method':<22}{'mse avg':>10}{'best':>10}{'worst':>10}{'acc avg':>10}{'best':>8}{'worst':>8}{'fail':>6}")
        for r in result.summary:
            print(f"{r.method:<22}{r.mse_average:>10.4f}{r.mse_best:>10.4f}{r.mse_worst:>10.4f}"
                  f"{r.accuracy_average:>10.4f}{r.accuracy_best:>8.2f}{r.accuracy_worst:>8.2f}{r.failures:>6d}")
    return 0


def cmd_oracle_check(args):
    rows = oracle_check(n_particles=args.particles, repetitions=args.repetitions, seed=args.seed)
    print(f"{'dynamics':<13}{'proposal':<15}{'max TV':>9}{'max |z|':>9}  result")
    for r in rows:
        print(f"{r.dynamics:<13}{r.proposal:<15}{r.max_tv:>9.4f}{r.max_z:>9.2f}  {'PASS' if r.passed else 'FAIL'}")
    return 0 if all(r.passed for r in rows) else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "filter": cmd_filter,
    "experiment": cmd_experiment,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None):
    args = _apply_config(build_parser().parse_args(argv))
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, DegenerateWeightsError, ValueError) as exc:
        print(f"rspf: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
