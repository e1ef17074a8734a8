"""CSV/JSON serialisation and the cumulative-MSE chart.

Floats are written with 17 significant digits so values round-trip exactly.
Model indices are written 1-based.

Schemas
-------
trajectory:      t, model, state, observation   (t = 0 row has an empty observation)
filter output:   t, x_hat, map_model, ess, p_1 .. p_K
summary:         method, mse_average, mse_best, mse_worst,
                 accuracy_average, accuracy_best, accuracy_worst, failures
runs:            run, method, mse, accuracy, error
estimates:       run, method, t, true_state, true_model, x_hat, map_model
cumulative_mse:  t, <one column per method>
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def fmt(x):
    x = float(x)
    if np.isnan(x):
        return "nan"
    return format(x, ".17g")


def _writer(path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_trajectory(path, traj, meta=None):
    """Trajectory CSV plus a ``<path>.json`` sidecar describing the dynamics."""
    path = Path(path)
    fh, w = _writer(path)
    with fh:
        w.writerow(["t", "model", "state", "observation"])
        for t in range(traj.models.shape[0]):
            obs = "" if t == 0 else fmt(traj.observations[t - 1, 0])
            w.writerow([t, int(traj.models[t]) + 1, fmt(traj.states[t, 0]), obs])
    if meta is not None:
        Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_trajectory(path):
    """Return ``(models, states, observations, meta)``; ``meta`` is ``{}`` without a sidecar."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    models = np.array([int(r["model"]) - 1 for r in rows])
    states = np.array([float(r["state"]) for r in rows])[:, None]
    observations = np.array([float(r["observation"]) for r in rows[1:]])[:, None]
    sidecar = Path(str(path) + ".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    return models, states, observations, meta


def write_filter_outputs(fh, outputs):
    w = csv.writer(fh, lineterminator="\n")
    k = outputs[0].model_posteriors.shape[0]
    w.writerow(["t", "x_hat", "map_model", "ess"] + [f"p_{j + 1}" for j in range(k)])
    for o in outputs:
        w.writerow([o.t, fmt(o.state_estimate[0]), o.map_model + 1, fmt(o.ess)]
                   + [fmt(p) for p in o.model_posteriors])


def emit_outputs(result, out_dir):
    """Write summary, per-run, per-step and cumulative-MSE files plus an SVG chart."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = [m.name for m in result.methods]

    fh, w = _writer(out / "summary.csv")
    with fh:
        w.writerow(["method", "mse_average", "mse_best", "mse_worst",
                    "accuracy_average", "accuracy_best", "accuracy_worst", "failures"])
        for r in result.summary:
            w.writerow([r.method, fmt(r.mse_average), fmt(r.mse_best), fmt(r.mse_worst),
                        fmt(r.accuracy_average), fmt(r.accuracy_best), fmt(r.accuracy_worst), r.failures])

    fh, w = _writer(out / "runs.csv")
    with fh:
        w.writerow(["run", "method", "mse", "accuracy", "error"])
        for rec in result.records:
            for name in names:
                res = rec.results[name]
                w.writerow([rec.run, name, fmt(res.mse), fmt(res.accuracy), res.error or ""])

    fh, w = _writer(out / "estimates.csv")
    with fh:
        w.writerow(["run", "method", "t", "true_state", "true_model", "x_hat", "map_model"])
        for rec in result.records:
            traj = rec.trajectory
            for name in names:
                res = rec.results[name]
                if res.failed:
                    continue
                for t in range(1, traj.models.shape[0]):
                    w.writerow([rec.run, name, t, fmt(traj.states[t, 0]), int(traj.models[t]) + 1,
                                fmt(res.state_estimates[t - 1, 0]), int(res.map_models[t - 1]) + 1])

    fh, w = _writer(out / "cumulative_mse.csv")
    with fh:
        w.writerow(["t"] + names)
        for t in range(result.scenario.horizon):
            w.writerow([t + 1] + [fmt(result.cumulative_mse[n][t]) for n in names])

    (out / "cumulative_mse.svg").write_text(
        cumulative_mse_svg(result.cumulative_mse, names, title=f"Cumulative MSE ({result.scenario.dynamics})")
    )


_COLOURS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def cumulative_mse_svg(curves, names, title="", width=720, height=440, log_scale=True):
    """Static line chart, log-scaled y axis by default (MMPF curves span decades)."""
    left, right, top, bottom = 70, 190, 40, 50
    pw, ph = width - left - right, height - top - bottom
    data = [np.asarray(curves[n], float) for n in names]
    horizon = max(len(d) for d in data)
    finite = np.concatenate([d[np.isfinite(d) & (d > 0)] for d in data] or [np.array([1.0])])
    if finite.size == 0:
        finite = np.array([1.0])
    if log_scale:
        lo, hi = np.floor(np.log10(finite.min())), np.ceil(np.log10(finite.max()))
        hi = max(hi, lo + 1)
        yt = lambda v: top + ph * (1 - (np.log10(v) - lo) / (hi - lo))
        ticks = [10.0**e for e in range(int(lo), int(hi) + 1)]
    else:
        lo, hi = 0.0, float(finite.max())
        yt = lambda v: top + ph * (1 - (v - lo) / (hi - lo))
        ticks = list(np.linspace(lo, hi, 5))
    xt = lambda t: left + pw * (t - 1) / max(horizon - 1, 1)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="15">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">t</text>',
    ]
    for v in ticks:
        y = yt(v)
        parts.append(f'<line x1="{left - 4}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{v:g}</text>')
    for t in range(1, horizon + 1, max(1, horizon // 10)):
        parts.append(f'<text x="{xt(t):.2f}" y="{top + ph + 18}" text-anchor="middle">{t}</text>')
    for i, (name, d) in enumerate(zip(names, data)):
        colour = _COLOURS[i % len(_COLOURS)]
        pts = " ".join(f"{xt(t + 1):.2f},{yt(v):.2f}" for t, v in enumerate(d) if np.isfinite(v) and v > 0)
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.8" points="{pts}"/>')
        ly = top + 16 * i + 8
        parts.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 35}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        parts.append(f'<text x="{left + pw + 40}" y="{ly + 4}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
