"""Finite search domains and fast-charging protocol geometry."""
import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# Defaults of the benchmark problem: two free currents (C-rate) on a 0.2 C
# lattice, an 800 s charge from 0% to 80% SOC split 20/20/40.
DEFAULT_CURRENTS = tuple(round(2.2 + 0.2 * k, 10) for k in range(20))
DEFAULT_CHARGE_TIME = 800.0
DEFAULT_DQ = (0.2, 0.2, 0.4)


@dataclass(frozen=True)
class GridDomain:
    """Indexed finite set of points on a Cartesian lattice.

    ``points`` lists lattice points in row-major order over ``axes``. A
    masked domain keeps only a subset of the lattice, still in row-major
    order; ``mask`` then marks which lattice cells survived.
    """

    axes: tuple
    points: np.ndarray
    mask: np.ndarray = None
    _lookup: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        lookup = {tuple(p): k for k, p in enumerate(self.points.tolist())}
        if len(lookup) != len(self.points):
            raise DomainError("grid points are not unique")
        object.__setattr__(self, "_lookup", lookup)
        self.points.setflags(write=False)

    @property
    def dims(self):
        return len(self.axes)

    @property
    def size(self):
        return len(self.points)

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    @property
    def is_complete(self):
        return self.size == math.prod(self.shape)

    def coord_of(self, index):
        return self.points[index]

    def index_of(self, coord):
        key = tuple(float(c) for c in coord)
        try:
            return self._lookup[key]
        except KeyError:
            raise DomainError(f"{key} is not a grid point") from None

    def to_csv(self, path):
        """Write ``index,coord_0,...,coord_{d-1}`` rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["index"] + [f"coord_{j}" for j in range(self.dims)])
            for k, p in enumerate(self.points):
                writer.writerow([k] + [repr(float(c)) for c in p])


def _check_axis(axis, j):
    arr = np.asarray(axis, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError(f"axis {j} is empty")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"axis {j} has non-finite coordinates")
    if np.any(np.diff(arr) <= 0):
        raise DomainError(f"axis {j} is not strictly increasing")
    return arr


def build_grid(axes, mask=None):
    """Row-major lattice over ``axes``; index 0 is the smallest point.

    ``mask``, if given, is a boolean vector over the full lattice selecting
    the cells to keep.
    """
    if len(axes) == 0:
        raise DomainError("at least one axis is required")
    axes = tuple(_check_axis(a, j) for j, a in enumerate(axes))
    for a in axes:
        a.setflags(write=False)
    points = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(axes))
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).ravel()
        if mask.shape != (len(points),):
            raise DomainError("mask length must equal the lattice size")
        if not mask.any():
            raise DomainError("mask removes every grid point")
        points = points[mask]
    return GridDomain(axes=axes, points=np.ascontiguousarray(points), mask=mask)


@dataclass(frozen=True)
class ChargingProtocol:
    """Three-step constant-current protocol. Currents in C-rate, times in s."""

    i1: float
    i2: float
    i3: float
    t1: float
    t2: float
    t3: float
    feasible: bool


def protocol_from_currents(i1, i2, t_f=DEFAULT_CHARGE_TIME, dq=DEFAULT_DQ, i3_max=math.inf):
    """Complete a protocol from its two free currents.

    Step durations follow from the SOC increments, the third step fills the
    remaining charge time. If the first two steps already use up ``t_f`` the
    protocol is infeasible and ``t3``/``i3`` are NaN.
    """
    dq1, dq2, dq3 = (float(v) for v in dq)
    if not (i1 > 0 and i2 > 0):
        raise DomainError("currents must be positive")
    if not (t_f > 0):
        raise DomainError("t_f must be positive")
    if not all(0 < v < 1 for v in (dq1, dq2, dq3)):
        raise DomainError("SOC increments must lie in (0, 1)")
    t1 = 3600.0 * dq1 / i1
    t2 = 3600.0 * dq2 / i2
    t3 = t_f - t1 - t2
    if t3 <= 0:
        return ChargingProtocol(i1, i2, math.nan, t1, t2, math.nan, False)
    i3 = 3600.0 * dq3 / t3
    return ChargingProtocol(i1, i2, i3, t1, t2, t3, bool(i3 <= i3_max))


def build_protocol_grid(i1_axis=DEFAULT_CURRENTS, i2_axis=DEFAULT_CURRENTS,
                        t_f=DEFAULT_CHARGE_TIME, dq=DEFAULT_DQ, i3_max=math.inf):
    """Grid over (I1, I2) with infeasible protocols masked out.

    Returns the domain and the list of protocols aligned with its indices.
    """
    full = build_grid([i1_axis, i2_axis])
    protocols = [protocol_from_currents(a, b, t_f, dq, i3_max) for a, b in full.points]
    keep = np.array([p.feasible for p in protocols])
    if keep.all():
        return full, protocols
    grid = build_grid([i1_axis, i2_axis], mask=keep)
    return grid, [p for p, k in zip(protocols, keep) if k]
