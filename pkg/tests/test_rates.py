import math

import numpy as np
import pytest

from chernoff.bounds import BoundReport, nisio_bounds
from chernoff.core import (
    DomainError,
    Grid,
    GridFunction,
    SpaceTimeFunction,
    negative_part_norm,
    positive_part_norm,
    weighted_norm,
)
from chernoff.iterate import StepOperator, chernoff_iterate
from chernoff.nisio import GeneratorBounds, NisioFamily
from chernoff.rates import (
    ErrorCurve,
    ErrorPoint,
    InconclusiveError,
    fit_rate,
    holder_check,
    measure_errors,
    rate_report,
    verify_bound,
    worker_count,
)
from chernoff.reference import OracleResult, fine_oracle, heat_exact


def grid1d(n=1025, half=12.0):
    return Grid((-half,), (half,), (n,))


def synthetic_curve(rule, ns=range(3, 10), uncertainty=0.0):
    pts = tuple(
        ErrorPoint(h=2.0**-n, e_plus=rule(2.0**-n), e_minus=0.0, oracle_uncertainty=uncertainty)
        for n in ns
    )
    return ErrorCurve(points=pts)


def test_curve_validation():
    with pytest.raises(DomainError):
        ErrorPoint(h=0.5, e_plus=-1e-3, e_minus=0.0)
    with pytest.raises(DomainError):
        ErrorPoint(h=0.0, e_plus=0.0, e_minus=0.0)
    pts = (ErrorPoint(0.25, 1.0, 0.0), ErrorPoint(0.25, 0.5, 0.0))
    with pytest.raises(DomainError):
        ErrorCurve(points=pts)


def test_csv_roundtrip_and_columns():
    curve = synthetic_curve(lambda h: 2.0 * h)
    text = curve.to_csv()
    assert text.splitlines()[0] == "h,e_plus,e_minus,bound_value,pass"
    back = ErrorCurve.from_csv(text)
    assert [pt.h for pt in back] == [pt.h for pt in curve]
    assert [pt.e_plus for pt in back] == [pt.e_plus for pt in curve]
    bound = BoundReport.from_addends(1.0, "plus", 1.0, 1.0, 0.25, [("c", 3.0)])
    curve = synthetic_curve(lambda h: 2.0 * h, ns=range(1, 8))
    rows = curve.to_csv(bound).splitlines()[1:]
    # h = 1/2 > eps0 = 1/4 on the gamma = 1 scale: outside the claim
    assert rows[0].endswith(",skipped")
    assert rows[2].endswith(",true")
    with pytest.raises(DomainError, match="header"):
        ErrorCurve.from_csv("a,b\n1,2\n")


def test_worker_count(monkeypatch):
    assert worker_count(4, 2) == 2
    assert worker_count(1, 8) == 1
    monkeypatch.setenv("CHERNOFF_WORKERS", "3")
    assert worker_count(10) == 3
    monkeypatch.setenv("CHERNOFF_WORKERS", "zebra")
    with pytest.raises(DomainError):
        worker_count(10)
    with pytest.raises(DomainError):
        worker_count(10, 0)


def test_fit_rate_recovers_exact_power_laws():
    fit = fit_rate(synthetic_curve(lambda h: 3.0 * h))
    assert fit.gamma_hat == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert fit.n_fit == (fit.n_usable + 1) // 2
    half = fit_rate(synthetic_curve(lambda h: 2.0 * math.sqrt(h)))
    assert half.gamma_hat == pytest.approx(0.5, abs=1e-12)
    assert half.plus_slope == pytest.approx(0.5, abs=1e-12)
    assert half.minus_slope is None  # that side never leaves the floor


def test_fit_rate_with_multiplicative_noise():
    rng = np.random.default_rng(7)
    wiggles = {n: 1.0 + 0.01 * rng.uniform(-1, 1) for n in range(3, 10)}
    curve = synthetic_curve(lambda h: h**0.25 * wiggles[round(-math.log2(h))])
    fit = fit_rate(curve)
    assert 0.23 <= fit.gamma_hat <= 0.27


def test_fit_rate_inconclusive_below_floor():
    curve = synthetic_curve(lambda h: 1e-4, uncertainty=1e-4)
    with pytest.raises(InconclusiveError, match="noise floor"):
        fit_rate(curve)
    # only the two coarsest points rise above: still not enough
    curve2 = synthetic_curve(lambda h: h, uncertainty=0.004)
    with pytest.raises(InconclusiveError):
        fit_rate(curve2)


def test_verify_bound_strictness():
    bound = BoundReport.from_addends(0.5, "plus", 1.0, 1.0, 1.0, [("c", 2.0)])
    exact = verify_bound(synthetic_curve(lambda h: 2.0 * math.sqrt(h)), bound)
    assert exact.passed and exact.max_ratio == pytest.approx(1.0)
    hot = verify_bound(synthetic_curve(lambda h: 2.02 * math.sqrt(h)), bound)
    assert not hot.passed
    cold = verify_bound(synthetic_curve(lambda h: 0.0), bound)
    assert cold.passed and cold.max_ratio == 0.0
    assert cold.skipped == 0


def test_verify_bound_skips_inadmissible_steps():
    # eps0 = 0.4 with gamma = 0.5 admits only h <= 0.16
    bound = BoundReport.from_addends(0.5, "plus", 1.0, 1.0, 0.4, [("c", 1.0)])
    curve = synthetic_curve(lambda h: 5.0, ns=range(2, 8))  # violates everywhere
    check = verify_bound(curve, bound)
    assert check.skipped == 1  # h = 1/4 is outside the claim
    assert len(check.rows) == 5 and not check.passed


def test_signed_split_partitions_the_norm():
    rng = np.random.default_rng(3)
    grid = grid1d(257, 4.0)
    for _ in range(20):
        diff = GridFunction(grid, rng.normal(size=257))
        plus = positive_part_norm(diff, None)
        minus = negative_part_norm(diff, None)
        total = weighted_norm(diff, None)
        assert plus <= total + 1e-15 and minus <= total + 1e-15
        assert max(plus, minus) == pytest.approx(total, abs=0.0)


def test_measure_errors_requires_admission_and_fine_oracle():
    grid = grid1d(257, 8.0)
    f = GridFunction.from_callable(grid, np.cos)
    op = StepOperator.from_nisio(NisioFamily(((1.0, 0.0),)))
    ref = OracleResult(values=f, uncertainty=0.0, h_fine=None)
    with pytest.raises(DomainError, match="admission"):
        measure_errors(op, f, 1.0, [0.5, 0.25], ref)
    coarse = OracleResult(values=f, uncertainty=0.0, h_fine=0.25)
    with pytest.raises(DomainError, match="8x finer"):
        measure_errors(op.admit(), f, 1.0, [0.5, 0.25], coarse)
    with pytest.raises(DomainError):
        measure_errors(op.admit(), f, 1.0, [0.25, 0.25], ref)


def test_linear_scheme_is_exact_and_passes_trivially():
    grid = grid1d(1025, 12.0)
    f = GridFunction.from_callable(grid, np.cos)
    op = StepOperator.from_nisio(NisioFamily(((1.0, 0.0),))).admit()
    ref = OracleResult(values=heat_exact(f, 1.0, 0.0, 1.0), uncertainty=0.0, h_fine=None)
    # margin 8 keeps the constant-extension boundary leak out of the comparison
    curve = measure_errors(op, f, 1.0, [2.0**-n for n in (3, 4, 5)], ref, margin=8.0)
    assert all(pt.max_error < 1e-11 for pt in curve)
    bound = nisio_bounds(GeneratorBounds.for_constant_coefficients(((1.0, 0.0),)), 1.0, 1.0)
    report = rate_report(curve, [bound])
    assert report.status == "pass" and report.fit is None


def test_gheat_curve_decreases_and_is_one_sided():
    grid = grid1d(1025, 12.0)
    f = GridFunction.from_callable(grid, lambda v: np.minimum(np.abs(v), 1.0))
    op = StepOperator.from_nisio(NisioFamily(((0.5, 0.0), (1.0, 0.0)))).admit()
    ref = fine_oracle(op, f, 1.0, 2.0**-7)
    curve = measure_errors(op, f, 1.0, [2.0**-3, 2.0**-4], ref)
    assert curve.points[0].e_plus > curve.points[1].e_plus > 0
    for pt in curve:
        assert pt.e_minus <= 10 * pt.oracle_uncertainty
    assert curve.interior_margin == pytest.approx(3.0)


def test_measure_errors_parallel_matches_serial():
    grid = grid1d(513, 12.0)
    f = GridFunction.from_callable(grid, lambda v: np.minimum(np.abs(v), 1.0))
    op = StepOperator.from_nisio(NisioFamily(((0.5, 0.0), (1.0, 0.0)))).admit()
    ref = OracleResult(values=f, uncertainty=0.0, h_fine=None)
    hs = [2.0**-3, 2.0**-4, 2.0**-5]
    serial = measure_errors(op, f, 0.25, hs, ref, workers=1)
    parallel = measure_errors(op, f, 0.25, hs, ref, workers=3)
    for a, b in zip(serial, parallel):
        assert (a.h, a.e_plus, a.e_minus) == (b.h, b.e_plus, b.e_minus)


def transport_trajectory(speed=0.7, r=1.0, h=0.125, steps=8):
    grid = grid1d(801, 10.0)
    f = GridFunction.from_callable(grid, lambda v: r * np.abs(v))
    op = StepOperator.from_nisio(NisioFamily(((0.0, speed),))).admit()
    _, traj = chernoff_iterate(op, f, h * steps, h, record=True)
    return traj, h


def test_holder_check_examples():
    traj, h = transport_trajectory()
    times = list(traj.times)
    pairs = [(s, t) for s in times for t in times if s < t]
    # exact transport of a 1-Lipschitz cone moves sup-norm at the drift speed
    rep = holder_check(traj, pairs, 1.0, 0.7, h, tol=0.01)
    assert rep.passed and rep.max_ratio <= 0.7
    assert rep.max_ratio == pytest.approx(0.7 * 8 / (8 + 1), rel=1e-6)
    flat = SpaceTimeFunction.from_functions([0.0, 0.5, 1.0], [traj.slice(0)] * 3)
    rep0 = holder_check(flat, [(0.0, 1.0)], 0.5, 1.0, 0.5)
    assert rep0.max_ratio == 0.0 and rep0.worst_pair is None
    with pytest.raises(DomainError, match="horizon"):
        holder_check(traj, [(0.0, 2.0)], 0.5, 1.0, h)
    with pytest.raises(DomainError):
        holder_check(traj, [(0.0, 1.0)], 1.5, 1.0, h)


def test_rate_report_statuses():
    curve = synthetic_curve(lambda h: 2.0 * math.sqrt(h))
    bound = BoundReport.from_addends(0.5, "plus", 1.0, 1.0, 1.0, [("c", 2.0)])
    rep = rate_report(curve, [bound])
    assert rep.status == "pass"
    assert rep.fit.gamma_hat == pytest.approx(0.5, abs=1e-12)
    assert rep.target_gamma == 0.5
    # slope floor violated: observed 0.5 against a demanded 0.9
    rep_slow = rate_report(curve, [bound], target_gamma=0.9)
    assert rep_slow.status == "fail"
    tight = BoundReport.from_addends(0.5, "plus", 1.0, 1.0, 1.0, [("c", 1.9)])
    assert rate_report(curve, [tight]).status == "fail"
    noisy = synthetic_curve(lambda h: 1e-6, uncertainty=1e-6)
    assert rate_report(noisy, []).status == "inconclusive"
    d = rep.to_dict()
    assert d["status"] == "pass" and d["checks"][0]["passed"]


def test_rate_report_monotone_in_slope_tolerance():
    curve = synthetic_curve(lambda h: 2.0 * math.sqrt(h))
    bound = BoundReport.from_addends(0.5, "plus", 1.0, 1.0, 1.0, [("c", 2.0)])
    verdicts = [
        rate_report(curve, [bound], slope_tolerance=tol, target_gamma=0.53).status
        for tol in (0.0, 0.02, 0.05, 0.2)
    ]
    assert verdicts == ["fail", "fail", "pass", "pass"]
