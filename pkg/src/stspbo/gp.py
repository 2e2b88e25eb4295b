"""Zero-mean Gaussian-process regression on finite domains.

Models are immutable snapshots: ``update`` returns a new posterior that
shares nothing mutable with the old one.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpstrf

from .errors import DomainError, NumericalError

KERNELS = ("se", "matern52")

# Joint-sampling safeguards, relative to the signal variance.
PIVOT_TOL = 1e-10
JITTER_START = 1e-10
JITTER_MAX = 1e-4
# Pre-clamp variances below this (relative) indicate broken algebra.
NEGATIVE_VAR_TOL = 1e-6


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    lengthscales: tuple
    signal_variance: float

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise DomainError(f"unknown kernel kind {self.kind!r}; expected one of {KERNELS}")
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        if not ls or any(not (v > 0) for v in ls):
            raise DomainError("lengthscales must be positive")
        if not (self.signal_variance > 0):
            raise DomainError("signal_variance must be positive")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))

    @property
    def dims(self):
        return len(self.lengthscales)

    def __call__(self, a, b):
        """Covariance matrix between point sets ``a`` (n×d) and ``b`` (m×d)."""
        ls = np.asarray(self.lengthscales)
        a = np.asarray(a, dtype=float) / ls
        b = np.asarray(b, dtype=float) / ls
        sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
        np.maximum(sq, 0.0, out=sq)
        if self.kind == "se":
            return self.signal_variance * np.exp(-0.5 * sq)
        r = np.sqrt(5.0 * sq)
        return self.signal_variance * (1.0 + r + r * r / 3.0) * np.exp(-r)


def default_kernel(grid, values, kind="se", steps=4.0):
    """Fixed hyperparameters for a grid objective.

    Lengthscale is ``steps`` lattice spacings per axis. The prior has zero
    mean, so the signal variance is the second moment of the values rather
    than their variance. Returns ``(kernel, noise_variance)`` with the noise
    standard deviation at 5% of the signal scale.
    """
    ls = []
    for axis in grid.axes:
        ls.append(steps * float(np.median(np.diff(axis))) if len(axis) > 1 else 1.0)
    values = np.asarray(values, dtype=float)
    sv = float(np.mean(values ** 2))
    return KernelSpec(kind, tuple(ls), sv), (0.05 * np.sqrt(sv)) ** 2


@dataclass(frozen=True)
class GpPosterior:
    kernel: KernelSpec
    noise_variance: float
    train_x: np.ndarray
    train_y: np.ndarray
    factor: np.ndarray
    alpha: np.ndarray

    @property
    def n_obs(self):
        return len(self.train_y)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_points(kernel, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != kernel.dims:
        raise DomainError(f"points have dimension {x.shape[1]}, kernel expects {kernel.dims}")
    return x


def empty_posterior(kernel, noise_variance):
    if not (noise_variance >= 0):
        raise DomainError("noise_variance must be non-negative")
    d = kernel.dims
    return GpPosterior(kernel, float(noise_variance), _frozen(np.zeros((0, d))),
                       _frozen(np.zeros(0)), _frozen(np.zeros((0, 0))), _frozen(np.zeros(0)))


def fit(kernel, noise_variance, x, y):
    """Posterior from scratch via one Cholesky factorization."""
    model = empty_posterior(kernel, noise_variance)
    x = _check_points(kernel, x) if len(x) else np.zeros((0, kernel.dims))
    y = np.asarray(y, dtype=float).ravel()
    if len(x) != len(y):
        raise DomainError("train_x and train_y lengths differ")
    if len(y) == 0:
        return model
    gram = kernel(x, x) + model.noise_variance * np.eye(len(y))
    try:
        factor = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise NumericalError(
            f"kernel matrix of {len(y)} observations is singular "
            f"(noise_variance={noise_variance}); duplicate inputs need noise") from None
    alpha = cho_solve((factor, True), y)
    return GpPosterior(kernel, model.noise_variance, _frozen(x), _frozen(y),
                       _frozen(factor), _frozen(alpha))


def update(model, x, y):
    """Posterior with one more observation, via a rank-one factor extension."""
    x = _check_points(model.kernel, x)
    if len(x) != 1:
        raise DomainError("update takes a single point")
    n = model.n_obs
    kxx = model.kernel(x, x)[0, 0] + model.noise_variance
    if n == 0:
        pivot2, row = kxx, np.zeros(0)
    else:
        kx = model.kernel(model.train_x, x)[:, 0]
        row = solve_triangular(model.factor, kx, lower=True)
        pivot2 = kxx - row @ row
    if not (pivot2 > 1e-14 * model.kernel.signal_variance):
        raise NumericalError(
            f"rank-one update lost positive definiteness (pivot^2={pivot2:.3e}); "
            "duplicate inputs need noise")
    factor = np.zeros((n + 1, n + 1))
    factor[:n, :n] = model.factor
    factor[n, :n] = row
    factor[n, n] = np.sqrt(pivot2)
    train_x = np.vstack([model.train_x, x])
    train_y = np.append(model.train_y, float(y))
    alpha = cho_solve((factor, True), train_y)
    return GpPosterior(model.kernel, model.noise_variance, _frozen(train_x),
                       _frozen(train_y), _frozen(factor), _frozen(alpha))


def _clamp_variance(var, sv):
    worst = var.min() if var.size else 0.0
    if worst < -NEGATIVE_VAR_TOL * sv:
        raise NumericalError(f"posterior variance {worst:.3e} is negative beyond roundoff")
    return np.clip(var, 0.0, sv)


def posterior_mean_var(model, query):
    """Pointwise posterior mean and variance at ``query`` points."""
    q = _check_points(model.kernel, query)
    sv = model.kernel.signal_variance
    prior_var = np.full(len(q), sv)
    if model.n_obs == 0:
        return np.zeros(len(q)), prior_var
    kq = model.kernel(model.train_x, q)
    mean = kq.T @ model.alpha
    v = solve_triangular(model.factor, kq, lower=True)
    return mean, _clamp_variance(prior_var - (v * v).sum(0), sv)


def posterior_mean_cov(model, points, prior_cov=None):
    """Joint posterior mean and covariance over ``points``.

    ``prior_cov`` may carry a precomputed kernel matrix of ``points``.
    """
    p = _check_points(model.kernel, points)
    if prior_cov is None:
        prior_cov = model.kernel(p, p)
    if model.n_obs == 0:
        return np.zeros(len(p)), np.array(prior_cov, dtype=float)
    kq = model.kernel(model.train_x, p)
    mean = kq.T @ model.alpha
    v = solve_triangular(model.factor, kq, lower=True)
    cov = prior_cov - v.T @ v
    cov = 0.5 * (cov + cov.T)
    return mean, cov


def psd_factor(cov, signal_variance):
    """Factor ``cov = F F^T`` for a PSD, possibly singular, matrix.

    Uses pivoted Cholesky, which stops once the remaining diagonal falls below
    ``PIVOT_TOL * signal_variance``. Falls back to plain Cholesky with jitter
    escalation if LAPACK reports an error. Returns ``(perm, F)`` with rows of
    ``F`` aligned to ``perm``.
    """
    n = len(cov)
    c, piv, rank, info = dpstrf(cov, tol=PIVOT_TOL * signal_variance, lower=1)
    if info >= 0 and np.all(np.isfinite(c)):
        perm, factor = piv - 1, np.tril(c)[:, :rank]
        # pivoting stops on a small diagonal; an indefinite matrix leaves a
        # clearly negative residual there and must not be silently truncated
        resid = np.diag(cov)[perm] - (factor * factor).sum(1)
        if resid.min() >= -NEGATIVE_VAR_TOL * signal_variance:
            return perm, factor
    jitter = JITTER_START * signal_variance
    while jitter <= JITTER_MAX * signal_variance * (1 + 1e-9):
        try:
            return np.arange(n), np.linalg.cholesky(cov + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    diag = np.diag(cov)
    raise NumericalError(
        f"covariance factorization failed (n={n}, min diag={diag.min():.3e}, "
        f"max diag={diag.max():.3e}, jitter up to {JITTER_MAX * signal_variance:.3e})")


class JointSampler:
    """Draws joint posterior samples over a fixed point set.

    One factorization serves any number of draws, which is what a batch of
    Thompson samples from one snapshot needs.
    """

    def __init__(self, model, points, prior_cov=None):
        self.mean, cov = posterior_mean_cov(model, points, prior_cov)
        _clamp_variance(np.diag(cov).copy(), model.kernel.signal_variance)
        self.perm, self.factor = psd_factor(cov, model.kernel.signal_variance)

    @property
    def size(self):
        return len(self.mean)

    def draw(self, rng, n_samples=None):
        """``(n_samples, size)`` array of samples, or one vector if ``n_samples`` is None."""
        count = 1 if n_samples is None else int(n_samples)
        u = rng.standard_normal((count, self.size))
        rank = self.factor.shape[1]
        out = np.empty((count, self.size))
        out[:, self.perm] = self.mean[self.perm] + u[:, :rank] @ self.factor.T
        return out[0] if n_samples is None else out


def posterior_joint_sample(model, grid, rng, n_samples=None, prior_cov=None):
    """Sample the posterior jointly over every grid point."""
    if grid.size == 0:
        raise DomainError("grid is empty")
    return JointSampler(model, grid.points, prior_cov).draw(rng, n_samples)
