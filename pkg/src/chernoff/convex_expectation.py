"""Finite scenario-based convex expectations and their one-step operators.

A convex expectation is represented as a finite max of linear
expectations minus penalties,

    E[X] = max_i ( E_i[X] - alpha_i ),     min_i alpha_i = 0,

with each E_i a point mass, an isotropic Gaussian, or a finite discrete
distribution.  This class is closed under everything the iteration
needs and makes E computable: scalar functionals by Gauss-Hermite
quadrature or direct enumeration, grid steps by exact discrete
convolutions, and the maximally distributed limit by a discrete
Legendre transform plus sup-convolution.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .core import DomainError, Grid, GridFunction
from .kernels import apply_taps, gaussian_convolve, shift_taps

__all__ = [
    "Scenario",
    "ScenarioConvexExpectation",
    "GrowthCertificate",
    "cexp_eval",
    "lln_step",
    "clt_step",
    "maximally_distributed_limit",
    "g_function",
    "growth_certificate",
    "load_scenarios",
    "parse_scenarios",
]

DEFAULT_GH_ORDER = 32


@dataclass(frozen=True)
class Scenario:
    """One linear expectation with a penalty.

    ``kind`` is "point", "gaussian" (isotropic, std ``sigma``), or
    "discrete"; ``mean`` is the location for the first two; atoms carry
    their own probabilities for the third.
    """

    kind: str
    mean: tuple[float, ...] = (0.0,)
    sigma: float = 0.0
    atoms: tuple[tuple[float, ...], ...] = ()
    weights: tuple[float, ...] = ()
    penalty: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("point", "gaussian", "discrete"):
            raise DomainError(f"unknown scenario kind {self.kind!r}")
        if not (np.isfinite(self.penalty) and self.penalty >= 0):
            raise DomainError("scenario penalty must be finite and >= 0")
        if self.kind == "gaussian" and self.sigma < 0:
            raise DomainError("gaussian scenario needs sigma >= 0")
        if self.kind == "discrete":
            if not self.atoms:
                raise DomainError("discrete scenario needs at least one atom")
            w = np.asarray(self.weights, dtype=float)
            if len(w) != len(self.atoms) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
                raise DomainError("atom probabilities must be >= 0 and sum to 1")
            dims = {len(a) for a in self.atoms}
            if len(dims) != 1:
                raise DomainError("atoms must share one dimension")

    # -- constructors ------------------------------------------------------

    @classmethod
    def point(cls, mean, penalty: float = 0.0) -> "Scenario":
        return cls("point", _as_vector(mean), penalty=float(penalty))

    @classmethod
    def gaussian(cls, mean, sigma: float, penalty: float = 0.0) -> "Scenario":
        return cls("gaussian", _as_vector(mean), sigma=float(sigma), penalty=float(penalty))

    @classmethod
    def discrete(cls, atoms, weights, penalty: float = 0.0) -> "Scenario":
        return cls(
            "discrete",
            mean=_as_vector(atoms[0]),  # placeholder; mean_vector is derived
            atoms=tuple(_as_vector(a) for a in atoms),
            weights=tuple(float(w) for w in weights),
            penalty=float(penalty),
        )

    # -- geometry ----------------------------------------------------------

    @property
    def dim(self) -> int:
        if self.kind == "discrete":
            return len(self.atoms[0])
        return len(self.mean)

    @cached_property
    def mean_vector(self) -> np.ndarray:
        if self.kind == "discrete":
            w = np.asarray(self.weights)
            return w @ np.asarray(self.atoms, dtype=float)
        return np.asarray(self.mean, dtype=float)

    @cached_property
    def covariance(self) -> np.ndarray:
        d = self.dim
        if self.kind == "point":
            return np.zeros((d, d))
        if self.kind == "gaussian":
            return self.sigma**2 * np.eye(d)
        pts = np.asarray(self.atoms, dtype=float) - self.mean_vector
        return (np.asarray(self.weights)[:, None] * pts).T @ pts

    # -- integration -------------------------------------------------------

    def support_points(self, gh_order: int = DEFAULT_GH_ORDER):
        """Quadrature points and weights for E_i (exact for point/discrete)."""
        d = self.dim
        if self.kind == "point":
            return self.mean_vector[None, :], np.array([1.0])
        if self.kind == "discrete":
            return np.asarray(self.atoms, dtype=float), np.asarray(self.weights)
        nodes, w = np.polynomial.hermite.hermgauss(gh_order)
        pts1 = [self.mean_vector[ax] + self.sigma * np.sqrt(2.0) * nodes for ax in range(d)]
        if d == 1:
            return pts1[0][:, None], w / np.sqrt(np.pi)
        xx, yy = np.meshgrid(pts1[0], pts1[1], indexing="ij")
        ww = np.outer(w, w).ravel() / np.pi
        return np.column_stack([xx.ravel(), yy.ravel()]), ww

    def expectation(self, payoff: Callable, gh_order: int = DEFAULT_GH_ORDER) -> float:
        """E_i[payoff(xi)]; 1D payoffs receive a flat array."""
        pts, w = self.support_points(gh_order)
        arg = pts[:, 0] if self.dim == 1 else pts
        vals = np.asarray(payoff(arg), dtype=float)
        out = float(np.dot(w, vals))
        if not np.isfinite(out):
            raise DomainError("scenario expectation is not finite")
        return out

    def abs_moment(self, order: int, gh_order: int = DEFAULT_GH_ORDER) -> float:
        pts, w = self.support_points(gh_order)
        return float(np.dot(w, np.linalg.norm(pts, axis=1) ** order))

    def raw_moment_1d(self, order: int, gh_order: int = DEFAULT_GH_ORDER) -> float:
        if self.dim != 1:
            raise DomainError("raw moments are implemented for d = 1 only")
        pts, w = self.support_points(gh_order)
        return float(np.dot(w, pts[:, 0] ** order))


def _as_vector(x) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1 or len(arr) not in (1, 2):
        raise DomainError("scenario locations must be scalars or 1-2 dim vectors")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class ScenarioConvexExpectation:
    """max-of-linear-minus-penalty convex expectation on R^d, d <= 2."""

    scenarios: tuple[Scenario, ...]

    def __post_init__(self) -> None:
        if not self.scenarios:
            raise DomainError("need at least one scenario")
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        dims = {s.dim for s in self.scenarios}
        if len(dims) != 1:
            raise DomainError("scenarios must share one dimension")
        if min(s.penalty for s in self.scenarios) > 1e-12:
            raise DomainError("the smallest penalty must be 0 (so that E[0] = 0)")

    @property
    def dim(self) -> int:
        return self.scenarios[0].dim

    @property
    def is_sublinear(self) -> bool:
        return all(s.penalty == 0.0 for s in self.scenarios)

    @property
    def zero_mean(self) -> bool:
        return all(np.max(np.abs(s.mean_vector)) < 1e-12 for s in self.scenarios)

    @property
    def third_moments_zero(self) -> bool:
        if self.dim != 1:
            return False
        return all(abs(s.raw_moment_1d(3)) < 1e-9 for s in self.scenarios)

    def evaluate(self, payoff: Callable, gh_order: int = DEFAULT_GH_ORDER) -> float:
        return max(
            s.expectation(payoff, gh_order) - s.penalty for s in self.scenarios
        )

    def abs_moment_combination(
        self, coefficients: dict[int, float], gh_order: int = DEFAULT_GH_ORDER
    ) -> float:
        """E[ sum_k c_k |xi|^k ] evaluated as one payoff (E is not linear)."""

        def payoff(xi):
            xi = np.asarray(xi, dtype=float)
            mag = np.abs(xi) if xi.ndim == 1 else np.linalg.norm(xi, axis=-1)
            out = np.zeros_like(mag)
            for k, c in coefficients.items():
                out += c * mag**k
            return out

        return self.evaluate(payoff, gh_order)


def cexp_eval(
    ce: ScenarioConvexExpectation, payoff: Callable, gh_order: int = DEFAULT_GH_ORDER
) -> float:
    """max_i (E_i[payoff] - alpha_i)."""
    return ce.evaluate(payoff, gh_order)


# ---------------------------------------------------------------------------
# one-step operators on grid functions


def _scenario_grid_expectation(
    s: Scenario, f: GridFunction, scale: float, std_scale: float, cut: float
) -> np.ndarray:
    """E_i[f(x + displacement)] with displacement scale applied to the scenario."""
    grid = f.grid
    if s.kind == "gaussian":
        return gaussian_convolve(
            f.values, grid, s.sigma * std_scale, scale * s.mean_vector, cut
        )
    if s.kind == "point":
        out = f.values
        for ax in range(grid.dim):
            offs, w = shift_taps(scale * s.mean_vector[ax], grid.spacing[ax])
            out = apply_taps(out, offs, w, ax)
        return out
    acc = np.zeros(grid.counts)
    for atom, prob in zip(s.atoms, s.weights):
        out = f.values
        for ax in range(grid.dim):
            offs, w = shift_taps(scale * atom[ax], grid.spacing[ax])
            out = apply_taps(out, offs, w, ax)
        acc += prob * out
    return acc


def _penalized_max_step(
    ce: ScenarioConvexExpectation,
    f: GridFunction,
    t: float,
    scale: float,
    std_scale: float,
    cut: float,
) -> GridFunction:
    best = None
    for s in ce.scenarios:  # fixed order for deterministic tie-breaking
        vals = _scenario_grid_expectation(s, f, scale, std_scale, cut) - t * s.penalty
        best = vals if best is None else np.maximum(best, vals)
    return GridFunction(f.grid, best)


def lln_step(
    ce: ScenarioConvexExpectation, f: GridFunction, t: float, cut: float = 8.0
) -> GridFunction:
    """Large-numbers step: pointwise max_i (E_i[f(x + t xi)] - t alpha_i)."""
    if t < 0:
        raise DomainError("step size must be nonnegative")
    if t == 0:
        return f
    if ce.dim != f.grid.dim:
        raise DomainError("expectation and grid dimensions differ")
    return _penalized_max_step(ce, f, t, scale=t, std_scale=t, cut=cut)


def clt_step(
    ce: ScenarioConvexExpectation, f: GridFunction, t: float, cut: float = 8.0
) -> GridFunction:
    """Central-limit step: as lln_step with sqrt(t) spatial scaling."""
    if t < 0:
        raise DomainError("step size must be nonnegative")
    if t == 0:
        return f
    if ce.dim != f.grid.dim:
        raise DomainError("expectation and grid dimensions differ")
    rt = float(np.sqrt(t))
    return _penalized_max_step(ce, f, t, scale=rt, std_scale=rt, cut=cut)


# ---------------------------------------------------------------------------
# limits and certificates


def _legendre_phi(
    ce: ScenarioConvexExpectation, y_axes: list[np.ndarray], z_points: int
):
    """Discrete Legendre transform of z -> max_i (z . m_i - alpha_i).

    Returns phi on the tensor grid of y_axes, +inf where the inner sup
    is not certified (argmax on the z-grid boundary).
    """
    d = ce.dim
    means = np.array([s.mean_vector for s in ce.scenarios])
    pens = np.array([s.penalty for s in ce.scenarios])
    radius = 4.0 * float(np.max(np.abs(means))) + 4.0
    per_axis = z_points if d == 1 else int(round(np.sqrt(z_points)))
    per_axis = max(per_axis, 3)
    if per_axis % 2 == 0:
        per_axis += 1  # keep z = 0 on the grid so phi never dips below 0 - min alpha
    z1 = np.linspace(-radius, radius, per_axis)
    if d == 1:
        z = z1[:, None]
    else:
        zz = np.meshgrid(z1, z1, indexing="ij")
        z = np.column_stack([a.ravel() for a in zz])
    psi = np.max(z @ means.T - pens[None, :], axis=1)

    if d == 1:
        y = y_axes[0][:, None]
    else:
        yy = np.meshgrid(*y_axes, indexing="ij")
        y = np.column_stack([a.ravel() for a in yy])
    idx = np.arange(len(z))
    if d == 1:
        on_edge = (idx == 0) | (idx == per_axis - 1)
    else:
        ai, aj = np.unravel_index(idx, (per_axis, per_axis))
        on_edge = (ai == 0) | (ai == per_axis - 1) | (aj == 0) | (aj == per_axis - 1)
    inner_cols = ~on_edge
    if not np.any(inner_cols):
        raise DomainError("z-grid has no interior points; increase z_points")
    phi = np.empty(len(y))
    boundary = np.empty(len(y), dtype=bool)
    for start in range(0, len(y), 512):  # block to keep the objective small
        block = y[start : start + 512] @ z.T - psi[None, :]
        full = np.max(block, axis=1)
        inner = np.max(block[:, inner_cols], axis=1)
        phi[start : start + 512] = full
        # the edge only matters when it strictly beats every interior z,
        # i.e. the conjugate is still climbing at the grid boundary
        boundary[start : start + 512] = full > inner + 1e-9 * (1.0 + np.abs(full))
    phi[boundary] = np.inf
    shape = tuple(len(ax) for ax in y_axes)
    return phi.reshape(shape), boundary.reshape(shape)


def maximally_distributed_limit(
    ce: ScenarioConvexExpectation,
    f: GridFunction,
    z_points: int = 4096,
    y_points: int = 4096,
) -> GridFunction:
    """The limit functional as a grid function: x -> sup_y (f(x+y) - phi(y)).

    phi is the convex conjugate of z -> E[z . xi], computed on a z-grid
    of radius 4 max|m_i| + 4 and set to +inf outside the certified
    domain.  The y search runs over the convex hull of the scenario
    means (phi is +inf beyond it).
    """
    d = ce.dim
    if f.grid.dim != d:
        raise DomainError("expectation and grid dimensions differ")
    means = np.array([s.mean_vector for s in ce.scenarios])
    per_axis = y_points if d == 1 else int(round(np.sqrt(y_points)))
    y_axes = []
    for ax in range(d):
        lo, hi = float(means[:, ax].min()), float(means[:, ax].max())
        y_axes.append(np.linspace(lo, hi, per_axis) if hi > lo else np.array([lo]))
    phi, boundary = _legendre_phi(ce, y_axes, z_points)
    # the y search never leaves the hull of the means, where the inner
    # sup must be attained away from the z-grid edge
    if np.any(boundary):
        raise DomainError(
            "z-grid too narrow: conjugate still increasing at the grid edge"
        )

    out = np.full(f.grid.counts, -np.inf)
    if d == 1:
        axis = f.grid.axes[0]
        for yv, pv in zip(y_axes[0], phi):
            if not np.isfinite(pv):
                continue
            shifted = np.interp(axis + yv, axis, f.values)
            np.maximum(out, shifted - pv, out=out)
    else:
        ys = np.meshgrid(*y_axes, indexing="ij")
        ylist = np.column_stack([a.ravel() for a in ys])
        pts = f.grid.points
        for yv, pv in zip(ylist, phi.ravel()):
            if not np.isfinite(pv):
                continue
            shifted = f.grid.interpolate(f.values, pts + yv[None, :])
            np.maximum(out, shifted.reshape(f.grid.counts) - pv, out=out)
    return GridFunction(f.grid, out)


def g_function(ce: ScenarioConvexExpectation, a) -> float:
    """E[(1/2) xi^T a xi] = max_i ((1/2) tr(a Cov_i) - alpha_i), zero-mean scenarios."""
    if not ce.zero_mean:
        raise DomainError("this quadratic functional requires zero-mean scenarios")
    a_mat = np.atleast_2d(np.asarray(a, dtype=float))
    if a_mat.shape != (ce.dim, ce.dim):
        raise DomainError(f"coefficient matrix must be {ce.dim}x{ce.dim}")
    if not np.allclose(a_mat, a_mat.T):
        raise DomainError("coefficient matrix must be symmetric")
    return max(
        0.5 * float(np.trace(a_mat @ s.covariance)) - s.penalty for s in ce.scenarios
    )


@dataclass(frozen=True)
class GrowthCertificate:
    """Certified (a, p): E[lambda g] <= a lambda^p E[g] for lambda >= 1,
    g in the tested cone of |xi|^2 / |xi|^3 combinations."""

    a: float
    p: float
    lambda_grid: tuple[float, ...]
    c_grid: tuple[tuple[float, float], ...]
    max_ratio: float
    sublinear: bool

    def __post_init__(self) -> None:
        if not (self.a >= 0 and self.p >= 1):
            raise DomainError("certificate needs a >= 0 and p >= 1")


_DEFAULT_C_GRID = (
    (1.0, 0.0),
    (0.0, 1.0),
    (1.0, 1.0),
    (0.25, 2.0),
    (2.0, 0.25),
    (4.0, 0.5),
    (0.5, 4.0),
)


def growth_certificate(
    ce: ScenarioConvexExpectation,
    lambda_grid: Sequence[float] | None = None,
    c_grid: Sequence[tuple[float, float]] | None = None,
    gh_order: int = DEFAULT_GH_ORDER,
) -> GrowthCertificate:
    """Search the smallest p in {1, 2, 3} and the ratio sup a on a grid."""
    lam = (
        np.geomspace(1.0, 100.0, 25)
        if lambda_grid is None
        else np.asarray(lambda_grid, dtype=float)
    )
    if np.any(lam < 1.0):
        raise DomainError("the growth condition is quantified over lambda >= 1")
    cs = _DEFAULT_C_GRID if c_grid is None else tuple(tuple(c) for c in c_grid)

    base = {}
    for c1, c2 in cs:
        base[(c1, c2)] = ce.abs_moment_combination({2: c1, 3: c2}, gh_order)

    tiny = 1e-300
    for p in (1.0, 2.0, 3.0):
        worst = 0.0
        feasible = True
        for c1, c2 in cs:
            b = base[(c1, c2)]
            for lv in lam:
                scaled = ce.abs_moment_combination({2: lv * c1, 3: lv * c2}, gh_order)
                if b <= tiny:
                    if scaled > 1e-12:
                        feasible = False
                        break
                    continue
                worst = max(worst, scaled / (lv**p * b))
            if not feasible:
                break
        if feasible and worst <= 1e12:
            return GrowthCertificate(
                a=worst,
                p=p,
                lambda_grid=tuple(float(v) for v in lam),
                c_grid=cs,
                max_ratio=worst,
                sublinear=ce.is_sublinear,
            )
        if ce.is_sublinear:
            break  # sublinear always certifies at p = 1; do not mask a bug
    raise DomainError("no growth certificate with p <= 3 on the tested grids")


# ---------------------------------------------------------------------------
# scenario files


def parse_scenarios(obj) -> ScenarioConvexExpectation:
    if not isinstance(obj, list) or not obj:
        raise DomainError("scenario file must hold a non-empty JSON list")
    out = []
    for i, entry in enumerate(obj):
        if not isinstance(entry, dict) or "type" not in entry:
            raise DomainError(f"scenario {i}: expected an object with a 'type' field")
        kind = entry["type"]
        if kind not in ("point", "gaussian", "discrete"):
            raise DomainError(f"scenario {i}: unknown type {kind!r}")
        penalty = entry.get("penalty", 0.0)
        try:
            if kind == "point":
                out.append(Scenario.point(entry["mean"], penalty))
            elif kind == "gaussian":
                out.append(Scenario.gaussian(entry["mean"], entry["sigma"], penalty))
            else:
                out.append(Scenario.discrete(entry["atoms"], entry["weights"], penalty))
        except KeyError as exc:
            raise DomainError(f"scenario {i}: missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise DomainError(f"scenario {i}: {exc}") from exc
    return ScenarioConvexExpectation(tuple(out))


def load_scenarios(path) -> ScenarioConvexExpectation:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"scenario file {path}: invalid JSON ({exc})") from exc
    return parse_scenarios(obj)
