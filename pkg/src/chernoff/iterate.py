"""Iterated one-step operators on equidistant partitions.

The iteration applies a fixed step operator k times, where k is the
largest whole number of steps fitting into the target time; no
fractional final step is taken, so times below one step return the
input unchanged.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .core import (
    DomainError,
    GridFunction,
    SpaceTimeFunction,
    WeightFunction,
    positive_part_norm,
)


class IterationError(RuntimeError):
    """A step operator failed mid-run; message carries the step index."""


@dataclass(frozen=True)
class Partition:
    """Equidistant partition of [0, t] with step h and k whole steps."""

    t: float
    h: float
    k: int

    def __post_init__(self):
        if self.h <= 0:
            raise DomainError("step size must be positive")
        if self.t < 0:
            raise DomainError("time must be non-negative")
        if not (self.k * self.h <= self.t * (1 + 1e-12) + 1e-15):
            raise DomainError("partition invariant k h <= t violated")

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(j * self.h for j in range(self.k + 1))


def partition(t: float, h: float) -> Partition:
    if h <= 0:
        raise DomainError("step size must be positive")
    if t < 0:
        raise DomainError("time must be non-negative")
    # nudge against roundoff so t an exact multiple of h lands on k = t/h
    k = int(math.floor(t / h + 1e-9))
    return Partition(t=float(t), h=float(h), k=max(k, 0))


@dataclass(frozen=True)
class StepOperator:
    """A one-step rule plus the metadata the experiments need.

    step(f, h) must be monotone, convex, zero-preserving and a sup-norm
    contraction; admit() flips the flag after the property suite has
    seen the operator (the rates module refuses unadmitted operators).
    sigma_scale and drift_scale describe the spatial reach of one step
    (sigma_scale * sqrt(h) + drift_scale * h) for interior margins.
    """

    name: str
    step: Callable[[GridFunction, float], GridFunction]
    model: object = None
    omega: float = 0.0
    translation: float = 0.0
    sigma_scale: float = 0.0
    drift_scale: float = 0.0
    admitted: bool = False

    def admit(self) -> "StepOperator":
        return replace(self, admitted=True)

    @classmethod
    def from_nisio(cls, family, cut: float = 8.0) -> "StepOperator":
        from .nisio import nisio_step

        return cls(
            name="nisio",
            step=lambda f, h: nisio_step(family, f, h, cut=cut),
            model=family,
            sigma_scale=family.sigma_max,
            drift_scale=family.drift_max,
        )

    @classmethod
    def from_lln(cls, ce, cut: float = 8.0) -> "StepOperator":
        from .convex_expectation import lln_step

        return cls(
            name="lln",
            step=lambda f, h: lln_step(ce, f, h, cut=cut),
            model=ce,
            drift_scale=_scenario_reach(ce),
        )

    @classmethod
    def from_clt(cls, ce, cut: float = 8.0) -> "StepOperator":
        from .convex_expectation import clt_step

        return cls(
            name="clt",
            step=lambda f, h: clt_step(ce, f, h, cut=cut),
            model=ce,
            sigma_scale=_scenario_reach(ce),
        )

    def reach(self, t: float) -> float:
        return self.sigma_scale * math.sqrt(max(t, 0.0)) + self.drift_scale * t


def _scenario_reach(ce) -> float:
    reach = 0.0
    for s in ce.scenarios:
        r = float(np.max(np.abs(s.mean_vector))) + s.sigma
        if s.kind == "discrete":
            r = float(np.max(np.abs(np.asarray(s.atoms))))
        reach = max(reach, r)
    return reach


def chernoff_iterate(
    op: StepOperator,
    f: GridFunction,
    t: float,
    h: float,
    record: bool = False,
):
    """Apply op k = floor(t/h) times; optionally keep every iterate."""
    part = partition(t, h)
    u = f
    frames = [f]
    for j in range(part.k):
        try:
            u = op.step(u, part.h)
        except Exception as exc:  # noqa: BLE001 - context added, then re-raised
            raise IterationError(
                f"step {j + 1} of {part.k} (h={part.h:g}) failed: {exc}"
            ) from exc
        if record:
            frames.append(u)
    if record:
        return u, SpaceTimeFunction.from_functions(part.times, frames)
    return u


def write_trajectory(
    traj: SpaceTimeFunction,
    h: float,
    directory,
    timings: list[float] | None = None,
) -> Path:
    """Dump every frame in the binary grid format plus an index JSON."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(len(traj.times)):
        name = f"frame_{i:05d}.cgf"
        traj.slice(i).to_binary(directory / name)
        names.append(name)
    index = {
        "h": h,
        "k": len(traj.times) - 1,
        "times": [float(s) for s in traj.times],
        "frames": names,
        "timings": timings,
    }
    path = directory / "index.json"
    path.write_text(json.dumps(index, sort_keys=True, indent=2) + "\n")
    return path


def read_trajectory(directory) -> tuple[SpaceTimeFunction, float]:
    directory = Path(directory)
    index = json.loads((directory / "index.json").read_text())
    frames = [
        GridFunction.from_binary(directory / name) for name in index["frames"]
    ]
    return (
        SpaceTimeFunction.from_functions(index["times"], frames),
        float(index["h"]),
    )


@dataclass(frozen=True)
class ComparisonReport:
    """Outcome of the discrete comparison inequality on a lattice.

    max_slack is the worst value of lhs - rhs over lattice times (a
    pass means it stays below the tolerance); vacuous is set when one
    of the claimed one-step residual certificates failed, in which
    case the inequality was never in force.
    """

    max_slack: float
    worst_time: float
    vacuous: bool
    certificate_violation: float
    passed: bool


def discrete_comparison_check(
    op: StepOperator,
    u: SpaceTimeFunction,
    v: SpaceTimeFunction,
    f_bound: SpaceTimeFunction,
    g_bound: SpaceTimeFunction,
    h: float,
    T: float,
    weight: WeightFunction | None = None,
    omega: float = 0.0,
    tol: float = 1e-9,
) -> ComparisonReport:
    """Check the one-step comparison estimate on the h-lattice.

    Requires u, v on times {0, h, ..., Kh} and residual certificates
    (u(t) - I(h)u(t-h))/h <= f_bound(t) and the reverse for v, g_bound
    on {h, ..., Kh}.  Verifies, for every lattice t <= T,

        sup (u(t)-v(t))^+ kappa <= e^{omega t} (initial gap
            + t * sup_s sup ((f_bound - g_bound)(s))^+ kappa).
    """
    if h <= 0:
        raise DomainError("step size must be positive")
    times = [s for s in u.times if s <= T + 1e-12]
    if list(u.times) != list(v.times):
        raise DomainError("u and v must share lattice times")

    # certificate verification: the claimed residual bounds must hold
    violation = 0.0
    for s in times:
        if s < h - 1e-12:
            continue
        prev_u = u.at_time(s - h)
        prev_v = v.at_time(s - h)
        res_u = (u.at_time(s).values - op.step(prev_u, h).values) / h
        res_v = (v.at_time(s).values - op.step(prev_v, h).values) / h
        over = np.max(res_u - f_bound.at_time(s).values)
        under = np.max(g_bound.at_time(s).values - res_v)
        violation = max(violation, float(over), float(under))
    vacuous = violation > tol

    # driver gap: sup over certificate times of ((f - g)^+) in kappa
    gap_driver = 0.0
    for s in times:
        if s < h - 1e-12:
            continue
        diff = f_bound.at_time(s) - g_bound.at_time(s)
        gap_driver = max(gap_driver, positive_part_norm(diff, weight))
    initial = max(
        positive_part_norm(u.at_time(s) - v.at_time(s), weight)
        for s in times
        if s < h - 1e-12
    )

    max_slack = -math.inf
    worst = 0.0
    for s in times:
        lhs = positive_part_norm(u.at_time(s) - v.at_time(s), weight)
        rhs = math.exp(omega * s) * (initial + s * gap_driver)
        if lhs - rhs > max_slack:
            max_slack = lhs - rhs
            worst = s
    return ComparisonReport(
        max_slack=float(max_slack),
        worst_time=worst,
        vacuous=vacuous,
        certificate_violation=float(violation),
        passed=(not vacuous) and max_slack <= tol,
    )


def timed_iterate(op: StepOperator, f: GridFunction, t: float, h: float):
    """chernoff_iterate plus the wall time, for curve bookkeeping."""
    start = time.perf_counter()
    out = chernoff_iterate(op, f, t, h)
    return out, time.perf_counter() - start
