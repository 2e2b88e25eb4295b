"""Regret curves over simulated time and their aggregation across seeds."""
import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

CURVE_HEADER = ["time", "mean_regret", "min_regret", "eval_count"]
DEFAULT_POINTS = 200


@dataclass(frozen=True)
class RegretCurve:
    """Regret of the evaluations completed by each time.

    ``mean_regret`` is cumulative regret over the number of completed
    evaluations, ``min_regret`` the simple regret. Both are NaN while nothing
    has completed.
    """

    times: np.ndarray
    mean_regret: np.ndarray
    min_regret: np.ndarray
    eval_counts: np.ndarray


def default_time_grid(budget, points=DEFAULT_POINTS):
    return np.linspace(0.0, float(budget), points)


def regret_curve(trace, objective, time_grid):
    times = np.asarray(time_grid, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0):
        raise DomainError("time grid must be strictly increasing")
    if not np.isnan(trace.best_value) and not np.isclose(trace.best_value, objective.best_value,
                                                         rtol=1e-12, atol=0):
        raise DomainError("trace and objective disagree on the optimum")
    if any(not 0 <= r.point_index < objective.grid.size for r in trace.records):
        raise DomainError("trace refers to points outside the objective grid")
    recs = sorted(trace.records, key=lambda r: r.finish)
    finish = np.array([r.finish for r in recs])
    regret = np.array([objective.best_value - objective.values[r.point_index] for r in recs])
    counts = np.searchsorted(finish, times, side="right")
    cum = np.concatenate([[0.0], np.cumsum(regret)])
    best = np.concatenate([[np.nan], np.minimum.accumulate(regret)]) if len(regret) else np.array([np.nan])
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(counts > 0, cum[counts] / np.maximum(counts, 1), np.nan)
    return RegretCurve(times, mean, best[counts], counts)


def aggregate_seeds(curves):
    """Pointwise mean and sample standard deviation (ddof=1).

    Time points where any seed has no completed evaluation are NaN in both
    outputs. Returns ``(mean_curve, std_curve)``; the std curve's
    ``eval_counts`` holds the sample std of the counts.
    """
    if not curves:
        raise DomainError("no curves to aggregate")
    times = curves[0].times
    for c in curves[1:]:
        if c.times.shape != times.shape or np.any(c.times != times):
            raise DomainError("curves have different time grids")
    ddof = 1 if len(curves) > 1 else 0

    def stats(name):
        stack = np.vstack([getattr(c, name) for c in curves]).astype(float)
        masked = np.isnan(stack).any(axis=0)
        mean = np.where(masked, np.nan, np.nanmean(np.where(np.isnan(stack), 0, stack), axis=0))
        std = np.where(masked, np.nan, np.std(np.where(np.isnan(stack), 0, stack), axis=0, ddof=ddof))
        return mean, std

    mm, ms = stats("mean_regret")
    sm, ss = stats("min_regret")
    cm, cs = stats("eval_counts")
    return RegretCurve(times, mm, sm, cm), RegretCurve(times, ms, ss, cs)


def _fmt(v):
    return "" if np.isnan(v) else repr(float(v))


def write_curve_csv(curve, path, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for t, m, s, n in zip(curve.times, curve.mean_regret, curve.min_regret, curve.eval_counts):
            writer.writerow([repr(float(t)), _fmt(m), _fmt(s), int(n)])


def write_aggregate_csv(mean, std, path, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_HEADER + ["mean_regret_std", "min_regret_std", "eval_count_std"])
        for k in range(len(mean.times)):
            writer.writerow([repr(float(mean.times[k])), _fmt(mean.mean_regret[k]),
                             _fmt(mean.min_regret[k]), _fmt(mean.eval_counts[k]),
                             _fmt(std.mean_regret[k]), _fmt(std.min_regret[k]),
                             _fmt(std.eval_counts[k])])


def read_curve_csv(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    if rows[0][:4] != CURVE_HEADER:
        raise DomainError(f"{path}: not a curve file")
    cols = list(zip(*rows[1:]))

    def num(col):
        return np.array([float(v) if v else np.nan for v in col])

    return RegretCurve(num(cols[0]), num(cols[1]), num(cols[2]), num(cols[3]))
