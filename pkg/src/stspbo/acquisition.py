"""Thompson sampling and satisficing Thompson sampling over a finite grid.

The satisficing target is the rate-distortion optimal conditional
p(x | g_z) for an ensemble of joint posterior samples g_1..g_Z, found by
Blahut-Arimoto sweeps from a uniform start.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .gp import JointSampler
from .kernels import ba_iterate, lagrangian_terms
from .rng import derive

DEFAULT_Z = 64
DEFAULT_K_MAX = 100
DEFAULT_TOL = 1e-6


def distortion_matrix(values):
    """Squared gap of every point to its own sample's maximum."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    gap = values.max(axis=1, keepdims=True) - values
    return gap * gap


@dataclass(frozen=True)
class SampleEnsemble:
    values: np.ndarray
    argmax_per_sample: np.ndarray
    distortion: np.ndarray

    @property
    def z_count(self):
        return len(self.values)

    @classmethod
    def from_values(cls, values):
        values = np.atleast_2d(np.asarray(values, dtype=float))
        return cls(values, np.argmax(values, axis=1), distortion_matrix(values))


def build_ensemble(model, grid, z_count, rng, prior_cov=None, sampler=None):
    """Draw ``z_count`` joint posterior samples and their distortion matrix."""
    if z_count < 1:
        raise DomainError("z_count must be at least 1")
    if sampler is None:
        sampler = JointSampler(model, grid.points, prior_cov)
    return SampleEnsemble.from_values(sampler.draw(rng, z_count))


@dataclass(frozen=True)
class TargetDistribution:
    conditional: np.ndarray
    marginal: np.ndarray
    iterations_used: int
    final_delta: float
    weights: np.ndarray
    history: np.ndarray = field(default=None, repr=False)

    @property
    def z_count(self):
        return self.conditional.shape[0]


def blahut_arimoto(distortion, beta, k_max=DEFAULT_K_MAX, tol=DEFAULT_TOL,
                   weights=None, init=None, track=False):
    """Rate-distortion target for a (mixture of) sampled functions.

    Parameters
    ----------
    distortion : (Z, n) array
        ``d[z, x]``, nonnegative and finite.
    beta : float
        Lagrange multiplier on the distortion term, ``beta >= 0``.
    k_max, tol :
        At most ``k_max`` sweeps; stop early once the largest change of any
        conditional entry drops below ``tol``.
    weights : (Z,) array, optional
        Mixture weights of the rows; uniform ``1/Z`` for a sample ensemble.
    init : (Z, n) array, optional
        Starting conditional; uniform by default.
    track : bool
        Record the Lagrangian after every sweep in ``history``.
    """
    dist = np.atleast_2d(np.asarray(distortion, dtype=float))
    if not np.all(np.isfinite(dist)):
        raise DomainError("distortion contains NaN or infinite entries")
    if np.any(dist < 0):
        raise DomainError("distortion must be nonnegative")
    if not (beta >= 0) or not np.isfinite(beta):
        raise DomainError("beta must be a finite nonnegative number")
    if k_max < 1:
        raise DomainError("k_max must be at least 1")
    n_rows, n_cols = dist.shape
    if weights is None:
        weights = np.full(n_rows, 1.0 / n_rows)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (n_rows,) or np.any(weights < 0) or not np.isclose(weights.sum(), 1.0):
            raise DomainError("weights must be a probability vector over rows")
    p0 = np.full((n_rows, n_cols), 1.0 / n_cols) if init is None else np.array(init, dtype=float)
    p, iters, delta, hist = ba_iterate(dist, beta, weights, p0, k_max, tol, track)
    marginal = weights @ p
    return TargetDistribution(p, marginal, iters, delta, weights, hist if track else None)


def lagrangian(td, distortion, beta):
    """Mutual information plus ``beta`` times expected distortion, in nats."""
    dist = np.atleast_2d(np.asarray(distortion, dtype=float))
    if dist.shape != td.conditional.shape:
        raise DomainError("distortion shape does not match the target")
    info, dbar = lagrangian_terms(dist, beta, td.weights, td.conditional)
    return max(info, 0.0) + beta * dbar


def sts_select(td, rng, return_sample=False):
    """Pick a sample uniformly, then a point from its target conditional."""
    z = int(rng.integers(td.z_count))
    cdf = np.cumsum(td.conditional[z])
    u = rng.random() * cdf[-1]
    index = min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)
    return (index, z) if return_sample else index


def ts_select(model, grid, rng, prior_cov=None):
    """Argmax of one joint posterior sample; ties go to the lowest index."""
    if grid.size == 0:
        raise DomainError("grid is empty")
    return int(np.argmax(JointSampler(model, grid.points, prior_cov).draw(rng)))


def dump_ba_csv(path, distortion, td):
    """Write ``sample,index,distortion,conditional,marginal`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample", "index", "distortion", "conditional", "marginal"])
        for z in range(td.z_count):
            for x in range(td.conditional.shape[1]):
                writer.writerow([z, x, f"{distortion[z, x]:.17g}",
                                 f"{td.conditional[z, x]:.17g}", f"{td.marginal[x]:.17g}"])


class ThompsonPolicy:
    """Classic Thompson sampling: one posterior sample per selection."""

    tag = "TS"

    def select(self, model, grid, ordinals, root_seed, prior_cov=None):
        sampler = JointSampler(model, grid.points, prior_cov)
        return [int(np.argmax(sampler.draw(derive(root_seed, "ts-sample", t))))
                for t in ordinals]


class SatisficingPolicy:
    """Satisficing Thompson sampling with a Blahut-Arimoto target.

    One ensemble and one target serve every selection made from the same
    snapshot; each selection then draws its own sample index and point.
    """

    tag = "STS"

    def __init__(self, beta, z_count=DEFAULT_Z, k_max=DEFAULT_K_MAX, tol=DEFAULT_TOL,
                 dump_dir=None, dump_limit=0):
        if not (beta >= 0):
            raise DomainError("beta must be nonnegative")
        self.beta = float(beta)
        self.z_count = int(z_count)
        self.k_max = int(k_max)
        self.tol = float(tol)
        self.dump_dir = dump_dir
        self.dump_limit = int(dump_limit)

    def select(self, model, grid, ordinals, root_seed, prior_cov=None):
        first = ordinals[0]
        ens = build_ensemble(model, grid, self.z_count,
                             derive(root_seed, "sts-ensemble", first), prior_cov)
        td = blahut_arimoto(ens.distortion, self.beta, self.k_max, self.tol)
        if self.dump_dir is not None and first <= self.dump_limit:
            dump_ba_csv(f"{self.dump_dir}/ba_seed{root_seed}_t{first}.csv", ens.distortion, td)
        return [sts_select(td, derive(root_seed, "sts-pick", t)) for t in ordinals]
