"""Method sweeps: run every (variant, beta, seed), write traces, curves and aggregates.

Output layout under the output directory::

    config.txt
    traces/<label>/seed<k>.csv
    curves/<label>/seed<k>.csv
    aggregate/beta<b>/<variant>.csv
    summary.json

A label is the variant name, suffixed with ``_beta<b>`` for satisficing
variants. Thompson runs do not depend on beta, so they run once and appear in
every beta panel.
"""
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import gp, metrics
from .acquisition import SatisficingPolicy, ThompsonPolicy
from .config import VARIANT_NAMES, parse_axis
from .errors import NumericalError
from .grid import build_protocol_grid
from .objective import NoiseModel, SynthParams, load_csv, synth_battery
from .scheduler import TimeModel, read_trace_csv, run_mode, write_trace_csv


class RunFailed(RuntimeError):
    def __init__(self, label, seed, cause):
        super().__init__(f"run {label} seed {seed} failed: {cause}")
        self.label = label
        self.seed = seed


@dataclass(frozen=True)
class RunSpec:
    label: str
    variant: str
    policy: str
    mode: str
    beta: object
    seed: int


def run_label(policy, mode, beta=None):
    name = VARIANT_NAMES[(policy, mode)]
    return name if policy == "ts" else f"{name}_beta{beta!r}"


def build_objective(cfg):
    if cfg.objective != "synth":
        return load_csv(cfg.objective)
    grid, _ = build_protocol_grid(parse_axis("grid_i1", cfg.grid_i1),
                                  parse_axis("grid_i2", cfg.grid_i2),
                                  cfg.t_f, tuple(cfg.dq), cfg.i3_max)
    return synth_battery(grid, SynthParams.from_mapping(cfg.synth))


def build_kernel(cfg, objective):
    kernel, nv = gp.default_kernel(objective.grid, objective.values, kind=cfg.kernel)
    ls = kernel.lengthscales if cfg.lengthscales == "auto" else tuple(cfg.lengthscales)
    if len(ls) == 1 and objective.grid.dims > 1:
        ls = ls * objective.grid.dims
    sv = kernel.signal_variance if cfg.signal_variance == "auto" else float(cfg.signal_variance)
    if cfg.noise_variance == "auto":
        nv = (0.05 * np.sqrt(sv)) ** 2
    else:
        nv = float(cfg.noise_variance)
    return gp.KernelSpec(cfg.kernel, ls, sv), nv


def build_time_model(cfg, objective):
    if cfg.time_scale == "auto":
        return TimeModel.normalized(objective, cfg.time_target_rounds, cfg.duration_source)
    return TimeModel(float(cfg.time_scale), cfg.duration_source)


def plan_runs(cfg):
    specs = []
    for policy in cfg.policies:
        for mode in cfg.modes:
            betas = [None] if policy == "ts" else list(cfg.betas)
            for beta in betas:
                label = run_label(policy, mode, beta)
                for seed in cfg.seeds:
                    specs.append(RunSpec(label, VARIANT_NAMES[(policy, mode)], policy, mode,
                                         beta, int(seed)))
    return specs


_CACHE = {}


def _setup(cfg):
    key = cfg.to_text()
    if key not in _CACHE:
        objective = build_objective(cfg)
        _CACHE.clear()
        _CACHE[key] = (objective, *build_kernel(cfg, objective), build_time_model(cfg, objective))
    return _CACHE[key]


def _paths(out_dir, label, seed):
    return (os.path.join(out_dir, "traces", label, f"seed{seed}.csv"),
            os.path.join(out_dir, "curves", label, f"seed{seed}.csv"))


def _final(curve):
    return {"final_mean_regret": float(curve.mean_regret[-1]),
            "final_min_regret": float(curve.min_regret[-1]),
            "eval_count": int(curve.eval_counts[-1])}


def execute_run(cfg, spec, out_dir, dump_ba=0):
    """Simulate one run, write its trace and curve, return its summary row."""
    objective, kernel, nv, time_model = _setup(cfg)
    if spec.policy == "ts":
        policy = ThompsonPolicy()
    else:
        dump_dir = None
        if dump_ba > 0:
            dump_dir = os.path.join(out_dir, "ba_dump", spec.label)
            os.makedirs(dump_dir, exist_ok=True)
        policy = SatisficingPolicy(spec.beta, cfg.z_count, cfg.ba_k_max, cfg.ba_tol,
                                   dump_dir=dump_dir, dump_limit=dump_ba)
    start = time.perf_counter()
    try:
        trace = run_mode(spec.mode, policy, objective, NoiseModel(cfg.noise_ratio), time_model,
                         cfg.m_workers, cfg.budget_rounds, spec.seed,
                         kernel=kernel, noise_variance=nv)
    except NumericalError as exc:
        raise RunFailed(spec.label, spec.seed, exc) from exc
    wall = time.perf_counter() - start
    trace_path, curve_path = _paths(out_dir, spec.label, spec.seed)
    os.makedirs(os.path.dirname(trace_path), exist_ok=True)
    os.makedirs(os.path.dirname(curve_path), exist_ok=True)
    write_trace_csv(trace, trace_path)
    # curves come from the file so that `report` reproduces them exactly
    curve = metrics.regret_curve(read_trace_csv(trace_path), objective,
                                 metrics.default_time_grid(cfg.budget_rounds, cfg.curve_points))
    metrics.write_curve_csv(curve, curve_path)
    return dict(label=spec.label, seed=spec.seed, wall_time_s=wall, **_final(curve))


def _execute_star(args):
    return execute_run(*args)


def _fmt_beta(beta):
    return f"beta{beta!r}"


def aggregate(cfg, out_dir, rows, wall_time=None):
    """Single-writer step: aggregate curves per label and write summary.json."""
    specs = plan_runs(cfg)
    labels = list(dict.fromkeys(s.label for s in specs))
    agg = {}
    for label in labels:
        curves = [metrics.read_curve_csv(_paths(out_dir, label, s)[1]) for s in cfg.seeds]
        agg[label] = metrics.aggregate_seeds(curves)
    betas = list(cfg.betas) if "sts" in cfg.policies else [None]
    panels = {}
    for beta in betas:
        panel_dir = os.path.join(out_dir, "aggregate", _fmt_beta(beta) if beta is not None else "all")
        os.makedirs(panel_dir, exist_ok=True)
        panel = {}
        for policy in cfg.policies:
            for mode in cfg.modes:
                label = run_label(policy, mode, beta)
                name = VARIANT_NAMES[(policy, mode)]
                metrics.write_aggregate_csv(*agg[label], os.path.join(panel_dir, f"{name}.csv"))
                panel[name] = label
        panels["all" if beta is None else repr(beta)] = panel

    by_label = {}
    for label in labels:
        mine = sorted((r for r in rows if r["label"] == label), key=lambda r: r["seed"])
        entry = {"per_seed": [{k: r[k] for k in ("seed", "final_mean_regret",
                                                  "final_min_regret", "eval_count")}
                              for r in mine]}
        for key in ("final_mean_regret", "final_min_regret", "eval_count"):
            vals = np.array([r[key] for r in mine], dtype=float)
            entry[f"{key}_mean"] = float(vals.mean())
            entry[f"{key}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        walls = [r.get("wall_time_s") for r in mine]
        entry["wall_time_s"] = None if None in walls else float(sum(walls))
        by_label[label] = entry
    summary = {"labels": by_label, "panels": panels, "wall_time_s": wall_time,
               "n_runs": len(specs)}
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def run_experiment(cfg, out_dir=None, jobs=1, dump_ba=0, progress=None):
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write(cfg.to_text())
    specs = plan_runs(cfg)
    start = time.perf_counter()
    rows = []
    tasks = [(cfg, s, out_dir, dump_ba) for s in specs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for row in pool.map(_execute_star, tasks):
                rows.append(row)
                if progress:
                    progress(row)
    else:
        for task in tasks:
            row = _execute_star(task)
            rows.append(row)
            if progress:
                progress(row)
    return aggregate(cfg, out_dir, rows, wall_time=time.perf_counter() - start)


def report(cfg, out_dir):
    """Recompute curves, aggregates and the summary from existing traces."""
    objective = _setup(cfg)[0]
    grid = metrics.default_time_grid(cfg.budget_rounds, cfg.curve_points)
    rows = []
    for spec in plan_runs(cfg):
        trace_path, curve_path = _paths(out_dir, spec.label, spec.seed)
        curve = metrics.regret_curve(read_trace_csv(trace_path), objective, grid)
        os.makedirs(os.path.dirname(curve_path), exist_ok=True)
        metrics.write_curve_csv(curve, curve_path)
        rows.append(dict(label=spec.label, seed=spec.seed, wall_time_s=None, **_final(curve)))
    return aggregate(cfg, out_dir, rows)
