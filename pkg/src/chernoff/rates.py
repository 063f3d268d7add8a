"""Empirical convergence measurement against references.

measure_errors runs the iteration at each step size and splits the
signed error against a reference on an interior subdomain, verify_bound
compares the curve with a closed-form constant, fit_rate estimates the
observed order, and rate_report folds everything into one verdict.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bounds import BoundReport
from .core import (
    DomainError,
    GridFunction,
    SpaceTimeFunction,
    WeightFunction,
    negative_part_norm,
    positive_part_norm,
    weighted_norm,
)
from .iterate import StepOperator, chernoff_iterate
from .reference import OracleResult


class InconclusiveError(RuntimeError):
    """The data cannot support a rate estimate."""


_CSV_HEADER = "h,e_plus,e_minus,bound_value,pass"


@dataclass(frozen=True)
class ErrorPoint:
    """One step size: signed errors, the oracle's slack, and wall time."""

    h: float
    e_plus: float
    e_minus: float
    oracle_uncertainty: float = 0.0
    wall_time: float = 0.0

    def __post_init__(self):
        vals = (self.h, self.e_plus, self.e_minus, self.oracle_uncertainty)
        if any(not math.isfinite(v) for v in vals):
            raise DomainError("error-curve entries must be finite")
        if self.h <= 0:
            raise DomainError("step sizes must be positive")
        if self.e_plus < 0 or self.e_minus < 0 or self.oracle_uncertainty < 0:
            raise DomainError("errors and uncertainty must be non-negative")

    @property
    def max_error(self) -> float:
        return max(self.e_plus, self.e_minus)

    def error(self, side: str) -> float:
        if side == "plus":
            return self.e_plus
        if side == "minus":
            return self.e_minus
        raise DomainError(f"side must be 'minus' or 'plus', got {side!r}")


@dataclass(frozen=True)
class ErrorCurve:
    """Errors along a strictly refining step-size list."""

    points: tuple[ErrorPoint, ...]
    interior_margin: float | None = None

    def __post_init__(self):
        hs = [pt.h for pt in self.points]
        if any(b >= a for a, b in zip(hs, hs[1:])):
            raise DomainError("step sizes must be strictly decreasing")

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def h_values(self) -> np.ndarray:
        return np.array([pt.h for pt in self.points])

    @property
    def uncertainty(self) -> float:
        return max((pt.oracle_uncertainty for pt in self.points), default=0.0)

    def to_csv(self, bound: BoundReport | None = None) -> str:
        lines = [_CSV_HEADER]
        for pt in self.points:
            if bound is None:
                tail = ","
            else:
                value = bound.bound_at(pt.h)
                if bound.admissible(pt.h):
                    ok = "true" if pt.error(bound.side) <= value else "false"
                else:
                    ok = "skipped"
                tail = f"{value!r},{ok}"
            lines.append(f"{pt.h!r},{pt.e_plus!r},{pt.e_minus!r},{tail}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, uncertainty: float = 0.0) -> "ErrorCurve":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != _CSV_HEADER:
            raise DomainError(f"expected header {_CSV_HEADER!r}")
        points = []
        for ln in lines[1:]:
            cells = ln.split(",")
            if len(cells) != 5:
                raise DomainError(f"malformed error-curve row {ln!r}")
            points.append(
                ErrorPoint(
                    h=float(cells[0]),
                    e_plus=float(cells[1]),
                    e_minus=float(cells[2]),
                    oracle_uncertainty=uncertainty,
                )
            )
        return cls(points=tuple(points))


def write_error_curve(path, curve: ErrorCurve, bound: BoundReport | None = None):
    with open(path, "w") as fh:
        fh.write(curve.to_csv(bound))


def read_error_curve(path, uncertainty: float = 0.0) -> ErrorCurve:
    with open(path) as fh:
        return ErrorCurve.from_csv(fh.read(), uncertainty=uncertainty)


def worker_count(n_tasks: int, requested: int | None = None) -> int:
    """Worker pool size: explicit argument, else CHERNOFF_WORKERS, else cores."""
    if requested is None:
        env = os.environ.get("CHERNOFF_WORKERS", "").strip()
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise DomainError(f"CHERNOFF_WORKERS must be an integer, got {env!r}")
        else:
            requested = os.cpu_count() or 1
    if requested < 1:
        raise DomainError("worker count must be at least 1")
    return max(1, min(requested, n_tasks))


def measure_errors(
    op: StepOperator,
    f: GridFunction,
    t: float,
    h_list,
    reference: OracleResult,
    weight: WeightFunction | None = None,
    margin: float | None = None,
    workers: int | None = None,
) -> ErrorCurve:
    """Signed errors of the iteration against a reference, per step size.

    The split is measured on the interior of the grid only; the margin
    swallows the band where truncated convolutions pollute both runs.
    """
    if not op.admitted:
        raise DomainError(
            "operator has not passed the admission suite; admit it before measuring"
        )
    hs = [float(h) for h in h_list]
    if not hs:
        raise DomainError("need at least one step size")
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise DomainError("step sizes must be strictly decreasing")
    if t <= 0:
        raise DomainError("need a positive terminal time")
    if reference.h_fine is not None and reference.h_fine > min(hs) / 8 * (1 + 1e-12):
        raise DomainError(
            "the fine oracle must be at least 8x finer than the smallest step"
        )
    if margin is None:
        margin = 3.0 * op.reach(t)
    mask = f.grid.interior_mask(margin)
    if not mask.any():
        raise DomainError("interior margin leaves no grid points to compare on")
    ref = reference.values

    def one(h: float) -> ErrorPoint:
        start = time.perf_counter()
        approx = chernoff_iterate(op, f, t, h)
        diff = ref - approx
        return ErrorPoint(
            h=h,
            e_plus=positive_part_norm(diff, weight, where=mask),
            e_minus=negative_part_norm(diff, weight, where=mask),
            oracle_uncertainty=reference.uncertainty,
            wall_time=time.perf_counter() - start,
        )

    n = worker_count(len(hs), workers)
    if n == 1:
        points = [one(h) for h in hs]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            points = list(pool.map(one, hs))
    return ErrorCurve(points=tuple(points), interior_margin=margin)


@dataclass(frozen=True)
class RateFit:
    """Least-squares order estimate over the finest usable points."""

    gamma_hat: float
    intercept: float
    n_fit: int
    n_usable: int
    plus_slope: float | None
    minus_slope: float | None

    def to_dict(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "intercept": self.intercept,
            "n_fit": self.n_fit,
            "n_usable": self.n_usable,
            "plus_slope": self.plus_slope,
            "minus_slope": self.minus_slope,
        }


def _point_floor(pt: ErrorPoint, multiplier: float, absolute: float) -> float:
    return max(multiplier * pt.oracle_uncertainty, absolute)


def _loglog_slope(points, pick) -> float | None:
    es = [pick(pt) for pt in points]
    if len(es) < 2:
        return None
    coef = np.polyfit(np.log([pt.h for pt in points]), np.log(es), 1)
    return float(coef[0])


def fit_rate(
    curve: ErrorCurve,
    noise_floor_multiplier: float = 10.0,
    absolute_floor: float = 1e-11,
) -> RateFit:
    """Slope and intercept of log max(e+, e-) against log h.

    Only points clearly above the oracle noise floor count, and the fit
    uses the finest half of those so the pre-asymptotic head does not
    drag the estimate.
    """
    usable = [
        pt
        for pt in curve.points
        if pt.max_error > _point_floor(pt, noise_floor_multiplier, absolute_floor)
    ]
    if len(usable) < 3:
        raise InconclusiveError(
            f"only {len(usable)} of {len(curve)} points rise above the noise floor; "
            "need 3 for a rate estimate"
        )
    fit_points = usable[-((len(usable) + 1) // 2) :]
    coef = np.polyfit(
        np.log([pt.h for pt in fit_points]),
        np.log([pt.max_error for pt in fit_points]),
        1,
    )

    def side_pick(side):
        pts = [
            pt
            for pt in fit_points
            if pt.error(side) > _point_floor(pt, noise_floor_multiplier, absolute_floor)
        ]
        return _loglog_slope(pts, lambda pt: pt.error(side))

    return RateFit(
        gamma_hat=float(coef[0]),
        intercept=float(coef[1]),
        n_fit=len(fit_points),
        n_usable=len(usable),
        plus_slope=side_pick("plus"),
        minus_slope=side_pick("minus"),
    )


@dataclass(frozen=True)
class BoundCheck:
    """Per-point comparison of one error side against c * h^gamma."""

    side: str
    gamma: float
    constant: float
    rows: tuple[tuple[float, float, float, bool], ...]  # (h, error, bound, ok)
    skipped: int
    max_ratio: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "gamma": self.gamma,
            "constant": self.constant,
            "max_ratio": self.max_ratio,
            "passed": self.passed,
            "skipped": self.skipped,
            "points": [
                {"h": h, "error": e, "bound": b, "ok": ok} for h, e, b, ok in self.rows
            ],
        }


def verify_bound(curve: ErrorCurve, bound: BoundReport) -> BoundCheck:
    """Check the bound's error side at every admissible step size.

    Steps with h^gamma > eps0 are outside the bound's claim and are
    skipped, not failed.
    """
    rows = []
    skipped = 0
    worst = 0.0
    for pt in curve.points:
        if not bound.admissible(pt.h):
            skipped += 1
            continue
        err = pt.error(bound.side)
        value = bound.bound_at(pt.h)
        ok = err <= value
        if value > 0:
            worst = max(worst, err / value)
        elif err > 0:
            worst = math.inf
        rows.append((pt.h, err, value, ok))
    return BoundCheck(
        side=bound.side,
        gamma=bound.gamma,
        constant=bound.total,
        rows=tuple(rows),
        skipped=skipped,
        max_ratio=worst,
        passed=all(ok for _, _, _, ok in rows),
    )


@dataclass(frozen=True)
class HolderReport:
    alpha: float
    limit: float
    max_ratio: float
    worst_pair: tuple[float, float] | None
    passed: bool

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "limit": self.limit,
            "max_ratio": self.max_ratio,
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
            "passed": self.passed,
        }


def holder_check(
    trajectory: SpaceTimeFunction,
    pairs,
    alpha: float,
    limit: float,
    h: float,
    weight: WeightFunction | None = None,
    tol: float = 0.01,
) -> HolderReport:
    """Time regularity along a recorded trajectory.

    Each pair (s, t) contributes ||u(s) - u(t)|| / (|s - t| + h)^alpha;
    the discrete trajectory only resolves times to one step, hence the
    +h in the denominator.
    """
    if not 0 < alpha <= 1:
        raise DomainError("the regularity exponent must lie in (0, 1]")
    if h < 0 or tol < 0:
        raise DomainError("h and tol must be non-negative")
    horizon = trajectory.t_max
    worst = 0.0
    worst_pair = None
    for s, t in pairs:
        if not (0 <= min(s, t) and max(s, t) <= horizon + 1e-12):
            raise DomainError(f"pair ({s}, {t}) leaves the recorded horizon")
        if abs(s - t) > 1 + 1e-12:
            raise DomainError("the regularity bound is stated for |s - t| <= 1")
        gap = weighted_norm(trajectory.at_time(s) - trajectory.at_time(t), weight)
        ratio = gap / (abs(s - t) + h) ** alpha
        if ratio > worst:
            worst = ratio
            worst_pair = (float(s), float(t))
    return HolderReport(
        alpha=alpha,
        limit=limit,
        max_ratio=worst,
        worst_pair=worst_pair,
        passed=worst <= limit * (1 + tol),
    )


@dataclass(frozen=True)
class RateReport:
    """Verdict over an error curve: bound checks plus the slope floor."""

    status: str  # "pass" | "fail" | "inconclusive"
    fit: RateFit | None
    fit_reason: str | None
    target_gamma: float | None
    checks: tuple[BoundCheck, ...]
    slope_tolerance: float
    noise_floor_multiplier: float
    absolute_floor: float
    interior_margin: float | None

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @property
    def inconclusive(self) -> bool:
        return self.status == "inconclusive"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "fit": self.fit.to_dict() if self.fit else None,
            "fit_reason": self.fit_reason,
            "target_gamma": self.target_gamma,
            "checks": [c.to_dict() for c in self.checks],
            "settings": {
                "slope_tolerance": self.slope_tolerance,
                "noise_floor_multiplier": self.noise_floor_multiplier,
                "absolute_floor": self.absolute_floor,
                "interior_margin": self.interior_margin,
            },
        }


def rate_report(
    curve: ErrorCurve,
    bounds=(),
    slope_tolerance: float = 0.05,
    noise_floor_multiplier: float = 10.0,
    absolute_floor: float = 1e-11,
    target_gamma: float | None = None,
    interior_margin: float | None = None,
) -> RateReport:
    """Aggregate verdict: every bound holds and the fitted slope is not
    materially below the slowest guaranteed exponent.

    A curve whose every point sits at the noise floor cannot be fitted;
    if the bounds still hold, that is the exact-scheme case and passes
    with no slope estimate.
    """
    if slope_tolerance < 0:
        raise DomainError("slope_tolerance must be non-negative")
    checks = tuple(verify_bound(curve, b) for b in bounds)
    bounds_ok = all(c.passed for c in checks)
    if target_gamma is None and checks:
        target_gamma = min(c.gamma for c in checks)
    fit = None
    reason = None
    try:
        fit = fit_rate(curve, noise_floor_multiplier, absolute_floor)
    except InconclusiveError as exc:
        reason = str(exc)
    if not bounds_ok:
        status = "fail"
    elif fit is not None:
        slope_ok = target_gamma is None or fit.gamma_hat >= target_gamma - slope_tolerance
        status = "pass" if slope_ok else "fail"
    else:
        at_floor = all(
            pt.max_error <= _point_floor(pt, noise_floor_multiplier, absolute_floor)
            for pt in curve.points
        )
        status = "pass" if (checks and at_floor) else "inconclusive"
    if interior_margin is None:
        interior_margin = curve.interior_margin
    return RateReport(
        status=status,
        fit=fit,
        fit_reason=reason,
        target_gamma=target_gamma,
        checks=checks,
        slope_tolerance=slope_tolerance,
        noise_floor_multiplier=noise_floor_multiplier,
        absolute_floor=absolute_floor,
        interior_margin=interior_margin,
    )
