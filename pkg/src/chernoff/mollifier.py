"""Space-time smoothing kernel, its derivative constants, and mollification.

The kernel is a fixed tensor product of 1D bumps,

    eta(s, y) = tau(s) * prod_i varsigma(y_i),
    tau(s) = 2 beta(2s - 1) / I,    varsigma(y) = sqrt(d) beta(sqrt(d) y) / I,
    beta(z) = exp(-1/(1 - z^2)) for |z| < 1,   I = integral of beta,

supported in [0,1] x B(1) and normalized to unit mass.  All rate
constants downstream depend on the L1 norms of its derivatives

    b(k, l) = max over multi-indices |alpha| = l of
              || d^k/ds^k  D^alpha eta ||_{L1},

which factor into 1D integrals of |beta^{(n)}|.  The n-th derivative of
the bump is beta * Q_n / (1 - z^2)^{2n} with a polynomial Q_n obtained
by differentiating the previous one, so each 1D integral is split at
the real roots of Q_n and handled by adaptive quadrature per smooth
piece.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import comb

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import quad

from .core import DomainError, GridFunction, SpaceTimeFunction

__all__ = [
    "MollifierKernel",
    "Epsilon",
    "kernel_constant",
    "mollify",
    "derivative_bound_check",
    "DerivativeBoundReport",
    "bump",
    "bump_derivative",
]

MAX_TIME_ORDER = 2
MAX_SPACE_ORDER = 3


def bump(z):
    """exp(-1/(1-z^2)) inside (-1, 1), zero outside."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    zi = z[inside]
    out[inside] = np.exp(-1.0 / (1.0 - zi * zi))
    return out


@lru_cache(maxsize=None)
def _bump_poly(n: int) -> Polynomial:
    """Polynomial Q_n with beta^(n) = beta * Q_n / (1-z^2)^(2n)."""
    if n < 1:
        raise DomainError("derivative order must be >= 1")
    if n == 1:
        return Polynomial([0.0, -2.0])
    q = _bump_poly(n - 1)
    one_minus = Polynomial([1.0, 0.0, -1.0])
    z = Polynomial([0.0, 1.0])
    return -2.0 * z * q + q.deriv() * one_minus**2 + 4.0 * (n - 1) * z * q * one_minus


def bump_derivative(n: int, z):
    """n-th derivative of the bump, vectorized, zero outside (-1, 1)."""
    if n == 0:
        return bump(z)
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    zi = z[inside]
    q = _bump_poly(n)
    out[inside] = (
        np.exp(-1.0 / (1.0 - zi * zi)) * q(zi) / (1.0 - zi * zi) ** (2 * n)
    )
    return out


@lru_cache(maxsize=None)
def _bump_mass() -> float:
    val, _ = quad(lambda z: bump(np.array(z)).item(), -1.0, 1.0, epsabs=1e-14)
    return val


@lru_cache(maxsize=None)
def _bump_deriv_l1(n: int) -> float:
    """Integral of |beta^(n)| over (-1, 1)."""
    if n == 0:
        return _bump_mass()
    roots = _bump_poly(n).roots()
    cuts = sorted(
        float(r.real) for r in roots if abs(r.imag) < 1e-12 and -1.0 < r.real < 1.0
    )
    edges = [-1.0] + cuts + [1.0]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        piece, _ = quad(
            lambda z: bump_derivative(n, np.array(z)).item(),
            a,
            b,
            epsabs=1e-14,
            limit=300,
        )
        total += abs(piece)
    return total


def _space_multi_indices(d: int, l: int):
    if d == 1:
        return [(l,)]
    return [(a, l - a) for a in range(l + 1)]


@dataclass(frozen=True)
class MollifierKernel:
    """The fixed tensor-product bump kernel in dimension ``dim``."""

    dim: int = 1

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise DomainError("kernel dimension must be 1 or 2")

    @property
    def normalization(self) -> float:
        mass = _bump_mass()
        return 2.0 * self.dim ** (self.dim / 2.0) / mass ** (self.dim + 1)

    def time_factor(self, s):
        """tau(s), the density of the time variable on [0, 1]."""
        return 2.0 * bump(2.0 * np.asarray(s, float) - 1.0) / _bump_mass()

    def space_factor(self, y):
        """varsigma(y), per-axis space density on [-1/sqrt(d), 1/sqrt(d)]."""
        rd = np.sqrt(self.dim)
        return rd * bump(rd * np.asarray(y, float)) / _bump_mass()

    def density(self, s, y):
        """eta(s, y) with y of shape (..., dim)."""
        y = np.asarray(y, dtype=float)
        out = self.time_factor(s)
        for ax in range(self.dim):
            out = out * self.space_factor(y[..., ax])
        return out

    @cached_property
    def constants(self) -> dict[tuple[int, int], float]:
        """The full b(k, l) table for k <= 2, l <= 3."""
        return {
            (k, l): kernel_constant(self, k, l)
            for k in range(MAX_TIME_ORDER + 1)
            for l in range(MAX_SPACE_ORDER + 1)
        }

    def b(self, k: int, l: int) -> float:
        return self.constants[(k, l)]


def kernel_constant(kernel: MollifierKernel, k: int, l: int) -> float:
    """L1 norm of the (k, alpha) kernel derivative, maximized over |alpha| = l.

    The kernel factors, so the norm is a product of 1D integrals:
    the time factor contributes 2^k ||beta^(k)||_1 / I and each space
    axis with derivative order j contributes d^(j/2) ||beta^(j)||_1 / I.
    """
    if not (0 <= k <= MAX_TIME_ORDER and 0 <= l <= MAX_SPACE_ORDER):
        raise DomainError(
            f"kernel constants are tabulated for k <= {MAX_TIME_ORDER}, "
            f"l <= {MAX_SPACE_ORDER}; got (k, l) = ({k}, {l})"
        )
    mass = _bump_mass()
    time_part = 2.0**k * _bump_deriv_l1(k) / mass
    d = kernel.dim
    best = 0.0
    for alpha in _space_multi_indices(d, l):
        part = 1.0
        for j in alpha:
            part *= d ** (j / 2.0) * _bump_deriv_l1(j) / mass
        best = max(best, part)
    return time_part * best


@dataclass(frozen=True)
class Epsilon:
    """Smoothing radii: eps1 in time, eps2 in space."""

    eps1: float
    eps2: float

    def __post_init__(self) -> None:
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise DomainError("smoothing radii must be positive")

    @classmethod
    def coupled(cls, eps2: float, p: float) -> "Epsilon":
        """Tie the widths as eps1 = eps2^(1+p), balancing the error addends."""
        return cls(float(eps2) ** (1.0 + p), float(eps2))


# ---------------------------------------------------------------------------
# mollification


_TIME_NODES = 32


@lru_cache(maxsize=None)
def _time_rule() -> tuple[np.ndarray, np.ndarray]:
    # nodes on [0, 1], weights include the density and are normalized
    z, w = np.polynomial.legendre.leggauss(_TIME_NODES)
    s = (z + 1.0) / 2.0
    kernel = MollifierKernel(1)
    wt = w * kernel.time_factor(s)
    return s, wt / wt.sum()


@lru_cache(maxsize=None)
def _space_taps(dim: int, eps2: float, dx: float) -> tuple[np.ndarray, np.ndarray]:
    """Space kernel sampled on the grid lattice, normalized.

    Sampling at grid resolution (rather than at a handful of quadrature
    nodes) keeps the smoothed function free of spurious kinks between
    sample offsets, which matters when finite differences of the output
    are taken at grid spacing.  The taps are nonnegative and sum to
    one, so constants, monotonicity, sup norms, and Lipschitz bounds
    are preserved exactly.
    """
    radius = eps2 / np.sqrt(dim)
    j_max = int(np.ceil(radius / dx))
    offsets = np.arange(-j_max, j_max + 1)
    weights = MollifierKernel(dim).space_factor(offsets * dx / eps2)
    total = weights.sum()
    if total <= 0.0:  # radius below grid resolution: identity
        return np.array([0]), np.array([1.0])
    return offsets, weights / total


def _apply_taps(values: np.ndarray, offsets: np.ndarray, weights: np.ndarray, ax: int):
    n = values.shape[ax]
    idx = np.arange(n)
    acc = np.zeros_like(values)
    for j, wj in zip(offsets, weights):
        acc += wj * np.take(values, np.clip(idx + j, 0, n - 1), axis=ax)
    return acc


def _smooth_space(values: np.ndarray, grid, eps2: float) -> np.ndarray:
    """Average over the space kernel, one axis at a time."""
    out = values
    for ax in range(grid.dim):
        offsets, weights = _space_taps(grid.dim, eps2, grid.spacing[ax])
        out = _apply_taps(out, offsets, weights, ax)
    return out


def _mollified_values(u: SpaceTimeFunction, eps: Epsilon, t: float) -> np.ndarray:
    s_nodes, s_weights = _time_rule()
    agg = np.zeros(u.grid.counts)
    for si, wi in zip(s_nodes, s_weights):
        agg += wi * u.interp_time(t + eps.eps1 * si)
    return _smooth_space(agg, u.grid, eps.eps2)


def _coverage_check(u: SpaceTimeFunction, eps: Epsilon, times: np.ndarray) -> None:
    tol = 1e-12 * max(1.0, abs(u.t_max))
    bad = [t for t in times if t < u.t_min - tol or t + eps.eps1 > u.t_max + tol]
    if bad:
        t = bad[0]
        raise DomainError(
            f"mollification at t = {t} needs samples on [{t}, {t + eps.eps1}], "
            f"but u is sampled on [{u.t_min}, {u.t_max}]"
        )


def mollify(
    u: SpaceTimeFunction, eps: Epsilon, times: np.ndarray | None = None
) -> SpaceTimeFunction:
    """Forward-in-time space-time average of u against the kernel.

    Output time t uses samples of u on [t, t + eps1], so by default the
    output keeps exactly those input times with full coverage.  Explicit
    ``times`` may be any increasing sequence with coverage; values in
    time come from the piecewise-linear interpolant of the stored
    slices.
    """
    if eps.eps2 > min(hi - lo for lo, hi in zip(u.grid.lower, u.grid.upper)):
        raise DomainError("space radius exceeds the grid extent")
    if times is None:
        tol = 1e-12 * max(1.0, abs(u.t_max))
        times = np.array([t for t in u.times if t + eps.eps1 <= u.t_max + tol])
        if times.size == 0:
            raise DomainError(
                f"no sample time has coverage [t, t + {eps.eps1}] inside "
                f"[{u.t_min}, {u.t_max}]"
            )
    else:
        times = np.asarray(times, dtype=float)
        _coverage_check(u, eps, times)
    vals = np.stack([_mollified_values(u, eps, t) for t in times])
    return SpaceTimeFunction(u.grid, times, vals)


# ---------------------------------------------------------------------------
# derivative bound check


@dataclass(frozen=True)
class DerivativeBoundReport:
    k: int
    l: int
    measured: float
    bound: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.measured <= self.bound * (1.0 + self.tol)


def _divided_difference(values: np.ndarray, axis: int, order: int, step: float):
    out = values
    for _ in range(order):
        out = np.diff(out, axis=axis)
    return out / step**order


def derivative_bound_check(
    u: SpaceTimeFunction,
    eps: Epsilon,
    k: int,
    l: int,
    r,
    tol: float = 0.05,
    n_times: int = 5,
) -> DerivativeBoundReport:
    """Compare finite differences of the mollified u against the bound

        d^(l/2) * r(t + eps1) * b(k, l-1) * eps1^(-k) * eps2^(1-l).

    The bound needs l >= 1 (its constant is b(k, l-1)); pure-time
    orders are rejected.  ``r`` is the Lipschitz/bound radius of
    u(t, .), a float or a non-decreasing callable of t.

    Divided differences of order k (time) and l (space) are mean values
    of the true derivatives, so the measured sup is a lower estimate of
    the derivative sup and the comparison is meaningful without
    finite-difference inflation.  The time step is eps1/50, far below
    the scale on which the mollified function varies.
    """
    if l == 0:
        if k == 0:
            raise DomainError("(k, l) = (0, 0) is the identity bound; nothing to check")
        raise DomainError(
            "time-only orders (l = 0) are outside the bound's domain (it uses b(k, l-1))"
        )
    if not (0 <= k <= MAX_TIME_ORDER and 1 <= l <= MAX_SPACE_ORDER):
        raise DomainError(f"unsupported derivative order (k, l) = ({k}, {l})")
    radius = r if callable(r) else (lambda _t: float(r))

    kernel = MollifierKernel(u.grid.dim)
    dt = eps.eps1 / 50.0
    lo = u.t_min + k * dt
    hi = u.t_max - eps.eps1 - k * dt
    if hi < lo:
        raise DomainError("trajectory too short for the requested time stencil")
    centers = np.linspace(lo, hi, n_times) if hi > lo else np.array([lo])

    worst_ratio = -np.inf
    best = None
    for t in centers:
        stencil = np.stack(
            [
                _mollified_values(u, eps, t + (j - k / 2.0) * dt)
                for j in range(k + 1)
            ]
        )
        dk = _divided_difference(stencil, 0, k, dt)[0]
        measured = 0.0
        for alpha in _space_multi_indices(u.grid.dim, l):
            block = dk
            for ax, order in enumerate(alpha):
                if order:
                    block = _divided_difference(
                        block, ax, order, u.grid.spacing[ax]
                    )
            count = comb(l, alpha[0]) if u.grid.dim == 2 else 1
            measured += count * float(np.max(np.abs(block))) ** 2
        measured = float(np.sqrt(measured))
        bound = (
            u.grid.dim ** (l / 2.0)
            * radius(t + eps.eps1)
            * kernel.b(k, l - 1)
            * eps.eps1 ** (-k)
            * eps.eps2 ** (1 - l)
        )
        if measured / bound > worst_ratio:
            worst_ratio = measured / bound
            best = (measured, bound)
    assert best is not None
    return DerivativeBoundReport(k, l, best[0], best[1], tol)
