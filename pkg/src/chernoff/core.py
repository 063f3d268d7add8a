"""Function-space substrate: grids, grid functions, weights, norms.

Everything downstream (step operators, mollification, rate measurement)
works with piecewise-multilinear functions tabulated on a uniform box
grid, extended beyond the box by constant continuation of the boundary
value.  Constant extension never increases the sup norm or the Lipschitz
constant, which the error analysis relies on.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "Grid",
    "GridFunction",
    "WeightFunction",
    "SpaceTimeFunction",
    "weighted_norm",
    "positive_part_norm",
    "negative_part_norm",
    "lipschitz_estimate",
    "kappa_constant",
]


class DomainError(ValueError):
    """Raised when inputs leave the documented domain of an operation."""


def _frozen_array(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform grid on a box in dimension 1 or 2.

    Parameters
    ----------
    lower, upper : tuple of float
        Per-axis bounds, ``lower[i] < upper[i]``.
    counts : tuple of int
        Points per axis, at least 2 each and at least 4 in total.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lower", tuple(float(x) for x in self.lower))
        object.__setattr__(self, "upper", tuple(float(x) for x in self.upper))
        object.__setattr__(self, "counts", tuple(int(n) for n in self.counts))
        d = len(self.counts)
        if d not in (1, 2):
            raise DomainError(f"grid dimension must be 1 or 2, got {d}")
        if len(self.lower) != d or len(self.upper) != d:
            raise DomainError("bounds and counts must have the same length")
        if any(n < 2 for n in self.counts):
            raise DomainError("need at least 2 points per axis")
        if int(np.prod(self.counts)) < 4:
            raise DomainError("need at least 4 grid points in total")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise DomainError("lower bound must lie strictly below upper bound")

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @cached_property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (n - 1)
            for lo, hi, n in zip(self.lower, self.upper, self.counts)
        )

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            _frozen_array(np.linspace(lo, hi, n))
            for lo, hi, n in zip(self.lower, self.upper, self.counts)
        )

    @cached_property
    def points(self) -> np.ndarray:
        """All grid points as an (size, dim) array in C order."""
        if self.dim == 1:
            return _frozen_array(self.axes[0][:, None])
        xx, yy = np.meshgrid(self.axes[0], self.axes[1], indexing="ij")
        return _frozen_array(np.column_stack([xx.ravel(), yy.ravel()]))

    def interpolate(self, values: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Piecewise-multilinear interpolation with constant extension.

        ``x`` has shape (..., dim); for dim 1 a bare (...,) array is
        also accepted.
        """
        values = np.asarray(values)
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            xs = x[..., 0] if x.ndim >= 2 and x.shape[-1] == 1 else x
            return np.interp(xs, self.axes[0], values)
        if x.shape[-1] != 2:
            raise DomainError("interpolation points must have shape (..., 2)")
        out_shape = x.shape[:-1]
        pts = x.reshape(-1, 2)
        idx = []
        frac = []
        for ax in range(2):
            t = (pts[:, ax] - self.lower[ax]) / self.spacing[ax]
            t = np.clip(t, 0.0, self.counts[ax] - 1.0)
            i0 = np.minimum(t.astype(int), self.counts[ax] - 2)
            idx.append(i0)
            frac.append(t - i0)
        i, j = idx
        u, v = frac
        v00 = values[i, j]
        v10 = values[i + 1, j]
        v01 = values[i, j + 1]
        v11 = values[i + 1, j + 1]
        out = (
            v00 * (1 - u) * (1 - v)
            + v10 * u * (1 - v)
            + v01 * (1 - u) * v
            + v11 * u * v
        )
        return out.reshape(out_shape)

    def interior_mask(self, margin: float) -> np.ndarray:
        """Boolean mask of points at least ``margin`` from every face."""
        masks = [
            (ax >= lo + margin) & (ax <= hi - margin)
            for ax, lo, hi in zip(self.axes, self.lower, self.upper)
        ]
        if self.dim == 1:
            return masks[0]
        return masks[0][:, None] & masks[1][None, :]


@dataclass(frozen=True)
class GridFunction:
    """Real-valued function tabulated on a :class:`Grid`.

    Values are validated finite and stored read-only, so the cached
    sup-norm and Lipschitz estimate can never go stale.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.size != self.grid.size:
            raise DomainError(
                f"value array has {vals.size} entries, grid has {self.grid.size} points"
            )
        vals = vals.reshape(self.grid.counts)
        if not np.all(np.isfinite(vals)):
            raise DomainError("grid function values must be finite")
        object.__setattr__(self, "values", _frozen_array(vals))

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable) -> "GridFunction":
        arg = grid.axes[0] if grid.dim == 1 else grid.points
        vals = np.asarray(fn(arg), dtype=float)
        if vals.size == 1:
            vals = np.full(grid.counts, float(vals))
        return cls(grid, vals.reshape(grid.counts))

    @cached_property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    @cached_property
    def lipschitz(self) -> float:
        return lipschitz_estimate(self)

    def sample(self, x: np.ndarray) -> np.ndarray:
        return self.grid.interpolate(self.values, x)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values)

    def _check_same_grid(self, other: "GridFunction") -> None:
        if other.grid != self.grid:
            raise DomainError("grid functions live on different grids")

    def __add__(self, other):
        if isinstance(other, GridFunction):
            self._check_same_grid(other)
            return GridFunction(self.grid, self.values + other.values)
        return GridFunction(self.grid, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            self._check_same_grid(other)
            return GridFunction(self.grid, self.values - other.values)
        return GridFunction(self.grid, self.values - float(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def maximum(self, other) -> "GridFunction":
        if isinstance(other, GridFunction):
            self._check_same_grid(other)
            return GridFunction(self.grid, np.maximum(self.values, other.values))
        return GridFunction(self.grid, np.maximum(self.values, float(other)))

    # -- serialization ---------------------------------------------------

    _BINARY_MAGIC = b"CGF1"

    def to_csv(self, path) -> None:
        """Write points and values as CSV (columns x1[, x2], value)."""
        pts = self.grid.points
        flat = self.values.ravel()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i + 1}" for i in range(self.grid.dim)] + ["value"])
            for row, v in zip(pts, flat):
                writer.writerow([repr(float(c)) for c in row] + [repr(float(v))])

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            d = len(header) - 1
            if d not in (1, 2) or header[-1] != "value":
                raise DomainError(f"unrecognized CSV header {header!r}")
            rows = np.array([[float(c) for c in row] for row in reader])
        axes = [np.unique(rows[:, i]) for i in range(d)]
        grid = Grid(
            tuple(ax[0] for ax in axes),
            tuple(ax[-1] for ax in axes),
            tuple(len(ax) for ax in axes),
        )
        # place values by index rather than trusting row order
        vals = np.empty(grid.counts)
        idx = tuple(
            np.rint((rows[:, i] - grid.lower[i]) / grid.spacing[i]).astype(int)
            for i in range(d)
        )
        vals[idx] = rows[:, -1]
        return cls(grid, vals)

    def to_binary(self, path) -> None:
        """Compact format: magic, dim, per-axis (count, lo, hi), float64 payload."""
        with open(path, "wb") as fh:
            fh.write(self._BINARY_MAGIC)
            fh.write(struct.pack("<B", self.grid.dim))
            for n, lo, hi in zip(self.grid.counts, self.grid.lower, self.grid.upper):
                fh.write(struct.pack("<qdd", n, lo, hi))
            fh.write(self.values.astype("<f8").tobytes(order="C"))

    @classmethod
    def from_binary(cls, path) -> "GridFunction":
        raw = Path(path).read_bytes()
        if raw[:4] != cls._BINARY_MAGIC:
            raise DomainError("not a grid-function binary file")
        (d,) = struct.unpack_from("<B", raw, 4)
        off = 5
        counts, lower, upper = [], [], []
        for _ in range(d):
            n, lo, hi = struct.unpack_from("<qdd", raw, off)
            off += 24
            counts.append(n)
            lower.append(lo)
            upper.append(hi)
        grid = Grid(tuple(lower), tuple(upper), tuple(counts))
        vals = np.frombuffer(raw, dtype="<f8", offset=off).reshape(grid.counts)
        return cls(grid, vals)


@dataclass(frozen=True)
class WeightFunction:
    """Weight for the weighted sup-norm, tabulated on a grid.

    Two closed forms: constant one, and the inverse polynomial
    ``(1 + |x|^2)^(-q/2)`` with q > 0.  Both satisfy 0 < kappa <= 1.
    """

    grid: Grid
    kind: str
    q: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "inverse_poly"):
            raise DomainError(f"unknown weight kind {self.kind!r}")
        if self.kind == "inverse_poly" and not self.q > 0:
            raise DomainError("inverse-polynomial weight needs q > 0")

    @classmethod
    def constant(cls, grid: Grid) -> "WeightFunction":
        return cls(grid, "constant")

    @classmethod
    def inverse_poly(cls, grid: Grid, q: float) -> "WeightFunction":
        return cls(grid, "inverse_poly", float(q))

    @cached_property
    def values(self) -> np.ndarray:
        if self.kind == "constant":
            return _frozen_array(np.ones(self.grid.counts))
        sq = np.sum(self.grid.points**2, axis=1).reshape(self.grid.counts)
        return _frozen_array((1.0 + sq) ** (-self.q / 2.0))

    @cached_property
    def c_kappa(self) -> float:
        return kappa_constant(self)


@dataclass(frozen=True)
class SpaceTimeFunction:
    """Time-indexed family of grid functions on a shared grid."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray  # shape (len(times), *grid.counts)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or len(times) < 1:
            raise DomainError("need a one-dimensional, non-empty time array")
        if np.any(np.diff(times) <= 0):
            raise DomainError("time samples must be strictly increasing")
        expected = (len(times),) + tuple(self.grid.counts)
        if vals.shape != expected:
            raise DomainError(f"value array shape {vals.shape}, expected {expected}")
        if not np.all(np.isfinite(vals)):
            raise DomainError("space-time values must be finite")
        object.__setattr__(self, "times", _frozen_array(times))
        object.__setattr__(self, "values", _frozen_array(vals))

    @classmethod
    def from_functions(
        cls, times: Sequence[float], funcs: Sequence[GridFunction]
    ) -> "SpaceTimeFunction":
        if len(times) != len(funcs):
            raise DomainError("times and functions must pair up")
        grid = funcs[0].grid
        for f in funcs[1:]:
            if f.grid != grid:
                raise DomainError("all slices must share one grid")
        return cls(grid, np.asarray(times, float), np.stack([f.values for f in funcs]))

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def slice(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.values[i])

    def at_time(self, t: float, tol: float = 1e-9) -> GridFunction:
        """Slice at an exactly sampled time (within ``tol``)."""
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol:
            raise DomainError(f"time {t} is not a sample (nearest: {self.times[i]})")
        return self.slice(i)

    def interp_time(self, t: float) -> np.ndarray:
        """Values at time ``t``, linear interpolation between samples."""
        tol = 1e-12 * max(1.0, abs(self.t_max))
        if t < self.t_min - tol or t > self.t_max + tol:
            raise DomainError(
                f"time {t} outside sampled range [{self.t_min}, {self.t_max}]"
            )
        t = min(max(t, self.t_min), self.t_max)
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.times) - 2)
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]


# ---------------------------------------------------------------------------
# norms and constants


def _weight_values(f: GridFunction, weight: WeightFunction | None) -> np.ndarray:
    if weight is None:
        return np.ones_like(f.values)
    if weight.grid != f.grid:
        raise DomainError("function and weight live on different grids")
    return weight.values


def weighted_norm(
    f: GridFunction, weight: WeightFunction | None, where: np.ndarray | None = None
) -> float:
    """sup of |f(x)| kappa(x) over the grid (optionally masked)."""
    w = _weight_values(f, weight)
    prod = np.abs(f.values) * w
    if where is not None:
        prod = prod[where]
    return float(np.max(prod))


def positive_part_norm(
    f: GridFunction, weight: WeightFunction | None, where: np.ndarray | None = None
) -> float:
    w = _weight_values(f, weight)
    prod = np.maximum(f.values, 0.0) * w
    if where is not None:
        prod = prod[where]
    return float(np.max(prod))


def negative_part_norm(
    f: GridFunction, weight: WeightFunction | None, where: np.ndarray | None = None
) -> float:
    w = _weight_values(f, weight)
    prod = np.maximum(-f.values, 0.0) * w
    if where is not None:
        prod = prod[where]
    return float(np.max(prod))


def lipschitz_estimate(f: GridFunction) -> float:
    """Max slope between adjacent grid points.

    This lower-bounds the Lipschitz constant of the underlying function
    and equals the Lipschitz constant of the multilinear interpolant
    along the axes.
    """
    best = 0.0
    for ax in range(f.grid.dim):
        d = np.diff(f.values, axis=ax)
        if d.size:
            best = max(best, float(np.max(np.abs(d))) / f.grid.spacing[ax])
    return best


def kappa_constant(weight: WeightFunction) -> float:
    """Discrete sup of kappa(x)/kappa(x - y) over grid offsets |y| <= 1.

    The scan resolution equals the grid spacing, so the result is a
    lower bound of the continuum constant; tests compare against a
    refined scan.
    """
    if weight.kind == "constant":
        return 1.0
    grid = weight.grid
    extents = [hi - lo for lo, hi in zip(grid.lower, grid.upper)]
    if min(extents) < 1.0:
        raise DomainError("grid narrower than the offset radius 1")
    vals = weight.values
    best = 1.0
    if grid.dim == 1:
        dx = grid.spacing[0]
        for j in range(1, int(np.floor(1.0 / dx + 1e-12)) + 1):
            a, b = vals[j:], vals[:-j]
            best = max(best, float(np.max(a / b)), float(np.max(b / a)))
        return best
    dx, dy = grid.spacing
    jmax = int(np.floor(1.0 / dx + 1e-12))
    kmax = int(np.floor(1.0 / dy + 1e-12))
    for j in range(0, jmax + 1):
        for k in range(-kmax, kmax + 1):
            if (j, k) == (0, 0) or (j * dx) ** 2 + (k * dy) ** 2 > 1.0 + 1e-12:
                continue
            a = vals[j:, :] if j else vals
            b = vals[:-j, :] if j else vals
            if k > 0:
                a, b = a[:, k:], b[:, :-k]
            elif k < 0:
                a, b = a[:, :k], b[:, -k:]
            best = max(best, float(np.max(a / b)), float(np.max(b / a)))
    return best
