import json
import math

import numpy as np
import pytest

from chernoff.core import DomainError, Grid, GridFunction
from chernoff.convex_expectation import (
    GrowthCertificate,
    Scenario,
    ScenarioConvexExpectation,
    cexp_eval,
    clt_step,
    g_function,
    growth_certificate,
    lln_step,
    load_scenarios,
    maximally_distributed_limit,
    parse_scenarios,
)


def sublinear_pair(s1=0.5, s2=1.0):
    return ScenarioConvexExpectation(
        (Scenario.gaussian(0.0, s1), Scenario.gaussian(0.0, s2))
    )


def two_point(m=1.0):
    return ScenarioConvexExpectation(
        (Scenario.point(-m), Scenario.point(m))
    )


def grid1d(n=801, half=8.0):
    return Grid((-half,), (half,), (n,))


# ---------------------------------------------------------------------------
# scalar functional


def test_cexp_eval_zero_payoff():
    assert cexp_eval(sublinear_pair(), lambda x: np.zeros_like(x)) == 0.0


def test_cexp_eval_gaussian_second_moment():
    val = cexp_eval(sublinear_pair(0.5, 1.0), lambda x: x**2)
    assert val == pytest.approx(1.0, rel=1e-12)


def test_cexp_eval_penalized_enumeration():
    ce = ScenarioConvexExpectation(
        (Scenario.point(1.0), Scenario.point(-1.0, penalty=0.5))
    )
    assert cexp_eval(ce, lambda x: x) == pytest.approx(1.0)


def test_cexp_eval_quadrature_doubles_stably():
    ce = sublinear_pair()
    coarse = cexp_eval(ce, lambda x: np.abs(x) ** 3, gh_order=32)
    fine = cexp_eval(ce, lambda x: np.abs(x) ** 3, gh_order=64)
    exact = 2.0 * math.sqrt(2.0 / math.pi)  # E|Z|^3 for the unit Gaussian
    assert coarse == pytest.approx(exact, rel=1e-3)
    assert abs(fine - exact) <= abs(coarse - exact) + 1e-12


def test_min_penalty_must_vanish():
    with pytest.raises(DomainError):
        ScenarioConvexExpectation((Scenario.point(0.0, penalty=0.5),))


def test_translation_identity_and_monotonicity():
    ce = ScenarioConvexExpectation(
        (Scenario.gaussian(0.0, 1.0), Scenario.point(0.5, penalty=0.3))
    )
    base = cexp_eval(ce, lambda x: np.cos(x))
    shifted = cexp_eval(ce, lambda x: np.cos(x) + 2.5)
    assert shifted == pytest.approx(base + 2.5, abs=1e-12)
    low = cexp_eval(ce, lambda x: np.cos(x) - 1.0)
    assert low <= base


def test_convexity_in_the_payoff():
    ce = ScenarioConvexExpectation(
        (Scenario.gaussian(0.0, 1.0), Scenario.discrete([-1.0, 2.0], [0.5, 0.5], 0.7))
    )
    rng = np.random.default_rng(5)
    for _ in range(25):
        a, b, c = rng.normal(size=3)
        f = lambda x: a * x + b * np.tanh(x) + c
        g = lambda x: b * x**2 / (1 + x**2) + a
        for w in (0.0, 0.3, 0.8, 1.0):
            mix = cexp_eval(ce, lambda x: w * f(x) + (1 - w) * g(x))
            assert mix <= w * cexp_eval(ce, f) + (1 - w) * cexp_eval(ce, g) + 1e-11


def test_scaling_inequality_for_small_lambda():
    # convex functionals: Phi(x) - Phi(y) <= lam (Phi((x-y)/lam + y) - Phi(y))
    ce = ScenarioConvexExpectation(
        (Scenario.gaussian(0.0, 1.0), Scenario.point(1.0, penalty=0.4))
    )
    rng = np.random.default_rng(11)
    for _ in range(25):
        a, b = rng.normal(size=2)
        x = lambda t: a * np.sin(t)
        y = lambda t: b * np.cos(t)
        for lam in (0.1, 0.5, 1.0):
            lhs = cexp_eval(ce, x) - cexp_eval(ce, y)
            inner = cexp_eval(ce, lambda t: (x(t) - y(t)) / lam + y(t))
            rhs = lam * (inner - cexp_eval(ce, y))
            assert lhs <= rhs + 1e-11


def test_finite_mixture_jensen():
    ce = ScenarioConvexExpectation(
        (Scenario.gaussian(0.0, 0.7), Scenario.point(-0.5, penalty=0.2))
    )
    rng = np.random.default_rng(2)
    payoffs = [
        (lambda x, s=s: np.sin(s * x) + s) for s in rng.uniform(0.5, 2.0, size=4)
    ]
    w = rng.dirichlet(np.ones(4))
    mixed = cexp_eval(ce, lambda x: sum(wi * p(x) for wi, p in zip(w, payoffs)))
    assert mixed <= sum(wi * cexp_eval(ce, p) for wi, p in zip(w, payoffs)) + 1e-11


# ---------------------------------------------------------------------------
# grid steps


def test_lln_step_identity_and_errors():
    g = grid1d(101)
    f = GridFunction.from_callable(g, np.cos)
    assert lln_step(two_point(), f, 0.0) is f
    with pytest.raises(DomainError):
        lln_step(two_point(), f, -0.1)


def test_lln_step_pure_transport():
    g = grid1d(161, 8.0)  # spacing 0.1
    f = GridFunction.from_callable(g, lambda x: np.sin(x))
    ce = ScenarioConvexExpectation((Scenario.point(2.0),))
    out = lln_step(ce, f, 0.25)  # shift 0.5, an exact grid multiple
    inner = slice(0, 161 - 5)
    np.testing.assert_allclose(out.values[inner], f.values[5:], atol=1e-14)


def test_lln_step_two_point_abs_value():
    g = grid1d(1601, 8.0)
    f = GridFunction.from_callable(g, np.abs)
    out = lln_step(two_point(1.0), f, 0.1)
    x0 = 800  # x = 0
    assert out.values[x0] == pytest.approx(0.1, abs=1e-12)


def test_clt_step_linear_case_matches_heat():
    g = grid1d(2401, 12.0)
    f = GridFunction.from_callable(g, np.cos)
    ce = ScenarioConvexExpectation((Scenario.gaussian(0.0, 1.0),))
    out = clt_step(ce, f, 0.49)
    expected = np.exp(-0.49 / 2) * f.values
    interior = g.interior_mask(7.0)
    np.testing.assert_allclose(out.values[interior], expected[interior], atol=1e-9)


def test_clt_step_sublinear_pair_on_convex_payoff():
    g = grid1d(2401, 12.0)
    f = GridFunction.from_callable(g, np.abs)
    ce = sublinear_pair(0.5, 1.0)
    pair = clt_step(ce, f, 0.36)
    single = clt_step(ScenarioConvexExpectation((Scenario.gaussian(0.0, 1.0),)), f, 0.36)
    interior = g.interior_mask(7.0)
    np.testing.assert_allclose(
        pair.values[interior], single.values[interior], atol=1e-9
    )


def test_step_structural_properties():
    g = grid1d(801, 8.0)
    rng = np.random.default_rng(0)
    vals = np.cumsum(rng.uniform(-0.01, 0.01, 801))
    f = GridFunction(g, vals)
    h = GridFunction(g, vals + rng.uniform(0, 0.2, 801))
    ce = ScenarioConvexExpectation(
        (Scenario.gaussian(0.0, 1.0), Scenario.discrete([-1.0, 1.0], [0.5, 0.5], 0.3))
    )
    sf, sh = clt_step(ce, f, 0.2), clt_step(ce, h, 0.2)
    assert np.all(sf.values <= sh.values + 1e-13)  # monotone
    zero = clt_step(ce, GridFunction(g, np.zeros(801)), 0.2)
    np.testing.assert_allclose(zero.values, 0.0, atol=1e-13)  # maps 0 to 0
    assert sf.sup_norm <= f.sup_norm + 1e-13  # sup-norm contraction
    assert sf.lipschitz <= f.lipschitz * (1 + 1e-9) + 1e-13  # Lipschitz propagation
    # convexity in the input
    for w in (0.25, 0.6):
        mix = clt_step(ce, f * w + h * (1 - w), 0.2)
        assert np.all(mix.values <= w * sf.values + (1 - w) * sh.values + 1e-12)


# ---------------------------------------------------------------------------
# maximally distributed limit


def test_limit_single_point_mass():
    g = grid1d(801, 8.0)
    f = GridFunction.from_callable(g, lambda x: np.sin(x))
    ce = ScenarioConvexExpectation((Scenario.point(1.5),))
    out = maximally_distributed_limit(ce, f)
    interior = g.interior_mask(2.0)
    np.testing.assert_allclose(
        out.values[interior],
        np.sin(g.axes[0][interior] + 1.5),
        atol=1e-12,
    )


def test_limit_sublinear_two_point_is_local_max():
    g = grid1d(1601, 8.0)
    f = GridFunction.from_callable(g, lambda x: np.exp(-(x**2)))
    out = maximally_distributed_limit(two_point(1.0), f)
    # oracle: dense brute force over |y| <= 1
    ys = np.linspace(-1.0, 1.0, 20001)
    oracle = np.max(
        np.exp(-((g.axes[0][:, None] + ys[None, :]) ** 2)), axis=1
    )
    interior = g.interior_mask(1.5)
    np.testing.assert_allclose(out.values[interior], oracle[interior], atol=5e-4)


def test_limit_penalized_pair_envelope():
    g = grid1d(1601, 8.0)
    f = GridFunction.from_callable(g, lambda x: np.exp(-((x - 0.5) ** 2)))
    ce = ScenarioConvexExpectation(
        (Scenario.point(0.0), Scenario.point(1.0, penalty=1.0))
    )
    out = maximally_distributed_limit(ce, f)
    # oracle: the conjugate of max(0, z - 1) restricted to slopes [0, 1]
    # is phi(y) = y on [0, 1], +inf outside
    ys = np.linspace(0.0, 1.0, 20001)
    vals = np.exp(-((g.axes[0][:, None] + ys[None, :] - 0.5) ** 2)) - ys[None, :]
    oracle = np.max(vals, axis=1)
    interior = g.interior_mask(1.5)
    np.testing.assert_allclose(out.values[interior], oracle[interior], atol=5e-4)


def test_limit_rejects_unresolved_z_grid():
    g = grid1d(101, 8.0)
    f = GridFunction.from_callable(g, np.cos)
    ce = ScenarioConvexExpectation(
        (Scenario.point(0.0), Scenario.point(1.0, penalty=1.0))
    )
    # a 3-point z-grid cannot see the finite argmax of the conjugate near
    # the hull vertex, so the edge strictly wins and the guard must fire
    with pytest.raises(DomainError, match="z-grid"):
        maximally_distributed_limit(ce, f, z_points=3)


# ---------------------------------------------------------------------------
# quadratic functional and growth certificate


def test_g_function_examples():
    assert g_function(sublinear_pair(0.5, 1.0), 0.0) == 0.0
    assert g_function(sublinear_pair(0.5, 1.0), 2.0) == pytest.approx(1.0)
    pm = ScenarioConvexExpectation(
        (Scenario.discrete([-1.0, 1.0], [0.5, 0.5]),)
    )
    assert g_function(pm, 1.0) == pytest.approx(0.5)


def test_g_function_requires_zero_mean():
    ce = ScenarioConvexExpectation((Scenario.point(1.0),))
    with pytest.raises(DomainError):
        g_function(ce, 1.0)


def test_growth_certificate_sublinear():
    cert = growth_certificate(sublinear_pair())
    assert cert.p == 1.0
    assert cert.a == pytest.approx(1.0, rel=1e-9)
    assert cert.sublinear


def test_growth_certificate_single_scenario():
    ce = ScenarioConvexExpectation((Scenario.gaussian(0.0, 0.8),))
    cert = growth_certificate(ce)
    assert cert.p == 1.0
    assert cert.a == pytest.approx(1.0, rel=1e-9)


def test_growth_certificate_penalized_pair():
    ce = ScenarioConvexExpectation(
        (
            Scenario.discrete([-1.0, 1.0], [0.5, 0.5]),
            Scenario.gaussian(0.0, 1.0, penalty=0.5),
        )
    )
    cert = growth_certificate(ce)
    assert cert.p >= 1.0
    assert np.isfinite(cert.a)
    # spot-check the certified inequality on an off-grid lambda
    lam = 7.3
    for c1, c2 in cert.c_grid[:3]:
        lhs = ce.abs_moment_combination({2: lam * c1, 3: lam * c2})
        rhs = cert.a * lam**cert.p * ce.abs_moment_combination({2: c1, 3: c2})
        assert lhs <= rhs * (1 + 1e-9)


def test_growth_certificate_failure_mode():
    # zero-penalty scenario sits at the origin: E[g] = 0 but E[lambda g] > 0
    ce = ScenarioConvexExpectation(
        (Scenario.point(0.0), Scenario.point(1.0, penalty=1.0))
    )
    with pytest.raises(DomainError):
        growth_certificate(ce)


def test_growth_certificate_rejects_small_lambda():
    with pytest.raises(DomainError):
        growth_certificate(sublinear_pair(), lambda_grid=[0.5, 1.0, 2.0])


# ---------------------------------------------------------------------------
# scenario files


def test_scenario_roundtrip(tmp_path):
    payload = [
        {"type": "gaussian", "mean": 0.0, "sigma": 0.5, "penalty": 0.0},
        {"type": "discrete", "atoms": [-1.0, 1.0], "weights": [0.5, 0.5], "penalty": 0.25},
    ]
    path = tmp_path / "scen.json"
    path.write_text(json.dumps(payload))
    ce = load_scenarios(path)
    assert len(ce.scenarios) == 2
    assert ce.scenarios[0].sigma == 0.5
    assert ce.scenarios[1].penalty == 0.25


def test_scenario_errors_name_the_problem(tmp_path):
    with pytest.raises(DomainError, match="scenario 0.*type"):
        parse_scenarios([{"mean": 0.0}])
    with pytest.raises(DomainError, match="scenario 1.*missing field 'sigma'"):
        parse_scenarios(
            [{"type": "point", "mean": 0.0}, {"type": "gaussian", "mean": 0.0}]
        )
    with pytest.raises(DomainError, match="scenario 0"):
        parse_scenarios(
            [{"type": "discrete", "atoms": [0.0, 1.0], "weights": [0.9, 0.9]}]
        )
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(DomainError, match="invalid JSON"):
        load_scenarios(bad)
