"""Simulated-time execution of a selection policy on M workers.

Time is measured in rounds. Each evaluation lasts ``scale * y`` rounds where
``y`` is the realised (noisy) cycle life. Nothing is dispatched once the clock
reaches the budget, and evaluations still running at the budget are dropped.

Randomness is keyed by selection ordinal (``derive(seed, "noise", t)`` and the
policy's own streams), so a run with one worker is identical in all modes.
"""
import csv
import heapq
from dataclasses import dataclass, replace

import numpy as np

from . import gp
from .errors import DomainError
from .objective import observe
from .rng import STREAM_VERSION, derive

MODES = ("sequential", "synchronous", "asynchronous")
TRACE_HEADER = ["ordinal", "worker", "point_index", "start", "finish", "observed_y", "true_f"]


@dataclass(frozen=True)
class EvaluationRecord:
    ordinal: int
    worker: int
    point_index: int
    start: float
    finish: float
    observed_y: float
    true_f: float
    policy_tag: str
    completion_ordinal: int = 0
    snapshot_size: int = 0


@dataclass(frozen=True)
class EvaluationTrace:
    records: tuple
    mode: str
    m_workers: int
    budget: float
    seed: int
    policy_tag: str = ""
    best_value: float = float("nan")

    def completion_order(self):
        return sorted(self.records, key=lambda r: r.completion_ordinal)


@dataclass(frozen=True)
class TimeModel:
    """Rounds per unit of cycle life.

    ``duration_source`` picks whether the observed or the true lifetime sets
    the duration. Observed values are floored at 1% of the true value so the
    clock always advances.
    """

    scale: float
    duration_source: str = "observed"

    def __post_init__(self):
        if not (self.scale > 0):
            raise DomainError("time scale must be positive")
        if self.duration_source not in ("observed", "true"):
            raise DomainError("duration_source must be 'observed' or 'true'")

    @classmethod
    def normalized(cls, objective, target_rounds=100.0, duration_source="observed"):
        """Scale such that the grid-mean lifetime lasts ``target_rounds``."""
        return cls(target_rounds / float(np.mean(objective.values)), duration_source)

    def duration(self, observed_y, true_f):
        v = true_f if self.duration_source == "true" else max(observed_y, 0.01 * true_f)
        return self.scale * v


class _Run:
    def __init__(self, policy, objective, noise, time_model, seed, kernel, noise_variance):
        self.policy = policy
        self.objective = objective
        self.grid = objective.grid
        self.noise = noise
        self.time_model = time_model
        self.seed = int(seed)
        if kernel is None:
            kernel, default_nv = gp.default_kernel(self.grid, objective.values)
            noise_variance = default_nv if noise_variance is None else noise_variance
        elif noise_variance is None:
            raise DomainError("noise_variance is required with an explicit kernel")
        self.model = gp.empty_posterior(kernel, noise_variance)
        self.prior_cov = kernel(self.grid.points, self.grid.points)

    def select(self, ordinals):
        idx = self.policy.select(self.model, self.grid, list(ordinals), self.seed, self.prior_cov)
        for i in idx:
            if not 0 <= i < self.grid.size:
                raise DomainError(f"policy returned invalid index {i}")
        return idx

    def evaluate(self, ordinal, index):
        f = float(self.objective.values[index])
        y = observe(self.objective, self.noise, index, derive(self.seed, "noise", ordinal))
        return y, f, self.time_model.duration(y, f)

    def learn(self, index, y):
        self.model = gp.update(self.model, self.grid.points[index], y)

    def trace(self, records, mode, m_workers, budget):
        records = sorted(records, key=lambda r: r.ordinal)
        return EvaluationTrace(tuple(records), mode, m_workers, float(budget), self.seed,
                               self.policy.tag, self.objective.best_value)


def _check(budget, m_workers=1):
    if not (budget > 0):
        raise DomainError("budget must be positive")
    if int(m_workers) != m_workers or m_workers < 1:
        raise DomainError("m_workers must be a positive integer")


def run_sequential(policy, objective, noise, time_model, budget, seed,
                   kernel=None, noise_variance=None):
    """One evaluation at a time; the model sees every completed result."""
    _check(budget)
    run = _Run(policy, objective, noise, time_model, seed, kernel, noise_variance)
    records, clock, t = [], 0.0, 1
    while clock < budget:
        (idx,) = run.select([t])
        y, f, dur = run.evaluate(t, idx)
        finish = clock + dur
        if finish > budget:
            break
        records.append(EvaluationRecord(t, 0, idx, clock, finish, y, f, policy.tag,
                                        completion_ordinal=t, snapshot_size=run.model.n_obs))
        run.learn(idx, y)
        clock = finish
        t += 1
    return run.trace(records, "sequential", 1, budget)


def run_synchronous(policy, objective, noise, time_model, m_workers, budget, seed,
                    kernel=None, noise_variance=None):
    """Batches of M from one snapshot, with a barrier at the slowest worker."""
    _check(budget, m_workers)
    run = _Run(policy, objective, noise, time_model, seed, kernel, noise_variance)
    records, clock, t, done = [], 0.0, 1, 0
    while clock < budget:
        ordinals = range(t, t + m_workers)
        batch = []
        for w, (ordinal, idx) in enumerate(zip(ordinals, run.select(ordinals))):
            y, f, dur = run.evaluate(ordinal, idx)
            batch.append(EvaluationRecord(ordinal, w, idx, clock, clock + dur, y, f,
                                          policy.tag, snapshot_size=run.model.n_obs))
        finished = sorted((r for r in batch if r.finish <= budget),
                          key=lambda r: (r.finish, r.worker))
        for r in finished:
            done += 1
            records.append(replace(r, completion_ordinal=done))
        if len(finished) < len(batch):
            break
        for r in batch:
            run.learn(r.point_index, r.observed_y)
        clock = max(r.finish for r in batch)
        t += m_workers
    return run.trace(records, "synchronous", m_workers, budget)


def run_asynchronous(policy, objective, noise, time_model, m_workers, budget, seed,
                     kernel=None, noise_variance=None):
    """Each worker is re-dispatched the moment it finishes.

    The first M selections come from the prior. Points still in flight never
    enter the model. Completions at the same instant are all absorbed before
    any re-dispatch, in ascending worker order.
    """
    _check(budget, m_workers)
    run = _Run(policy, objective, noise, time_model, seed, kernel, noise_variance)
    records, events, t, done = [], [], 0, 0

    def dispatch(worker, clock):
        nonlocal t
        t += 1
        (idx,) = run.select([t])
        y, f, dur = run.evaluate(t, idx)
        rec = EvaluationRecord(t, worker, idx, clock, clock + dur, y, f, policy.tag,
                               snapshot_size=run.model.n_obs)
        heapq.heappush(events, (rec.finish, worker, rec.ordinal, rec))

    for w in range(m_workers):
        dispatch(w, 0.0)
    while events:
        now = events[0][0]
        if now > budget:
            break
        freed = []
        while events and events[0][0] == now:
            rec = heapq.heappop(events)[3]
            done += 1
            records.append(replace(rec, completion_ordinal=done))
            run.learn(rec.point_index, rec.observed_y)
            freed.append(rec.worker)
        if now < budget:
            for w in freed:
                dispatch(w, now)
    return run.trace(records, "asynchronous", m_workers, budget)


def run_mode(mode, policy, objective, noise, time_model, m_workers, budget, seed, **kw):
    if mode == "sequential":
        return run_sequential(policy, objective, noise, time_model, budget, seed, **kw)
    if mode == "synchronous":
        return run_synchronous(policy, objective, noise, time_model, m_workers, budget, seed, **kw)
    if mode == "asynchronous":
        return run_asynchronous(policy, objective, noise, time_model, m_workers, budget, seed, **kw)
    raise DomainError(f"unknown mode {mode!r}; expected one of {MODES}")


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed={trace.seed} mode={trace.mode} m_workers={trace.m_workers} "
                 f"budget={trace.budget!r} policy={trace.policy_tag} "
                 f"best_value={trace.best_value!r} stream={STREAM_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in trace.records:
            writer.writerow([r.ordinal, r.worker, r.point_index, f"{r.start:.6f}",
                             f"{r.finish:.6f}", repr(r.observed_y), repr(r.true_f)])


def read_trace_csv(path):
    """Inverse of :func:`write_trace_csv` (times at 6-decimal precision)."""
    meta = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            for tok in line[1:].split():
                key, _, val = tok.partition("=")
                meta[key] = val
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or rows[0] != TRACE_HEADER:
        raise DomainError(f"{path}: not a trace file")
    tag = meta.get("policy", "")
    recs = [EvaluationRecord(int(r[0]), int(r[1]), int(r[2]), float(r[3]), float(r[4]),
                             float(r[5]), float(r[6]), tag) for r in rows[1:]]
    order = sorted(recs, key=lambda r: (r.finish, r.worker))
    rank = {r.ordinal: k + 1 for k, r in enumerate(order)}
    recs = [replace(r, completion_ordinal=rank[r.ordinal]) for r in recs]
    return EvaluationTrace(tuple(recs), meta.get("mode", ""), int(meta.get("m_workers", 1)),
                           float(meta.get("budget", "nan")), int(meta.get("seed", 0)), tag,
                           float(meta.get("best_value", "nan")))
