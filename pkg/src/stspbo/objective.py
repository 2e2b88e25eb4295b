"""Black-box objectives on a grid and the observation noise model."""
import csv
import itertools
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import DomainError, FormatError
from .grid import build_grid


@dataclass(frozen=True)
class TabularObjective:
    """Noiseless objective values (cycle life) for every grid point."""

    grid: object
    values: np.ndarray
    best_index: int = field(init=False)
    best_value: float = field(init=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.shape != (self.grid.size,):
            raise DomainError(f"expected {self.grid.size} values, got {values.size}")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise DomainError("objective values must be finite and positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        best = int(np.argmax(values))
        object.__setattr__(self, "best_index", best)
        object.__setattr__(self, "best_value", float(values[best]))

    def regret(self, index):
        return self.best_value - self.values[index]


@dataclass(frozen=True)
class NoiseModel:
    """Multiplicative Gaussian noise: ``y = f (1 + ratio * u)``."""

    ratio: float = 0.05

    def __post_init__(self):
        if not (self.ratio >= 0):
            raise DomainError("noise ratio must be nonnegative")


def observe(objective, noise, index, rng):
    """Noisy evaluation at ``index``. Not clamped at zero."""
    f = objective.values[index]
    if noise.ratio == 0:
        return float(f)
    return float(f * (1.0 + noise.ratio * rng.standard_normal()))


def write_csv(objective, path, comment=None):
    """Write ``coord_0,...,coord_{d-1},value`` rows in index order."""
    grid = objective.grid
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"coord_{j}" for j in range(grid.dims)] + ["value"])
        for p, v in zip(grid.points, objective.values):
            writer.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def _data_lines(fh):
    return (line for line in fh if line.strip() and not line.lstrip().startswith("#"))


def load_csv(path):
    """Read a complete Cartesian grid table written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(_data_lines(fh)))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    dims = len(header) - 1
    expected = [f"coord_{j}" for j in range(dims)] + ["value"]
    if dims < 1 or header != expected:
        raise FormatError(f"{path}: header must be {','.join(expected) or 'coord_0,...,value'}")
    table = {}
    for lineno, row in enumerate(body, start=2):
        if len(row) != dims + 1:
            raise FormatError(f"{path}:{lineno}: expected {dims + 1} fields")
        try:
            nums = [float(v) for v in row]
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric field") from None
        key = tuple(nums[:dims])
        if key in table:
            raise FormatError(f"{path}:{lineno}: duplicate coordinate {key}")
        if not (np.isfinite(nums[-1]) and nums[-1] > 0):
            raise FormatError(f"{path}:{lineno}: value must be finite and positive")
        table[key] = nums[-1]
    if not table:
        raise FormatError(f"{path}: no data rows")
    axes = [sorted({k[j] for k in table}) for j in range(dims)]
    missing = [c for c in itertools.product(*axes) if c not in table]
    if missing:
        shown = ", ".join(str(c) for c in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise FormatError(f"{path}: grid incomplete, missing {shown}{more}")
    grid = build_grid(axes)
    values = [table[tuple(p)] for p in grid.points.tolist()]
    return TabularObjective(grid, values)


@dataclass(frozen=True)
class SynthParams:
    """Synthetic cycle-life landscape over (I1, I2).

    ``baseline`` plus two Gaussian bumps. The bump layer carries a linear tilt
    of relative size ``tilt`` along I1 + I2 (positive favours low currents).
    Defaults give roughly 250-1150 cycles with one interior maximum near
    the main bump centre.
    """

    baseline: float = 250.0
    amp1: float = 850.0
    center1_i1: float = 3.8
    center1_i2: float = 4.6
    width1: float = 0.9
    amp2: float = 450.0
    center2_i1: float = 5.2
    center2_i2: float = 2.8
    width2: float = 0.6
    tilt: float = 0.1

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise DomainError(f"unknown synthetic parameters: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in mapping.items()})


def synth_battery(grid, params=None):
    """Deterministic smooth positive landscape on a 2-D grid."""
    if grid.dims != 2:
        raise DomainError("synthetic battery landscape needs a 2-D grid")
    p = params or SynthParams()
    i1, i2 = grid.points[:, 0], grid.points[:, 1]

    def bump(amp, c1, c2, width):
        return amp * np.exp(-((i1 - c1) ** 2 + (i2 - c2) ** 2) / (2.0 * width ** 2))

    layer = bump(p.amp1, p.center1_i1, p.center1_i2, p.width1)
    layer = layer + bump(p.amp2, p.center2_i1, p.center2_i2, p.width2)
    lo = np.array([a[0] for a in grid.axes])
    hi = np.array([a[-1] for a in grid.axes])
    span = np.where(hi > lo, hi - lo, 1.0)
    u = ((grid.points - lo) / span * 2.0 - 1.0).mean(axis=1)
    values = p.baseline + layer * (1.0 - p.tilt * u)
    return TabularObjective(grid, values)
