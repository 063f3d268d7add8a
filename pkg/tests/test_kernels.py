import numpy as np
import pytest

from chernoff.core import Grid, GridFunction
from chernoff.kernels import (
    aliasing_bound,
    apply_taps,
    gaussian_convolve,
    gaussian_taps,
    shift_taps,
)


def test_shift_taps_exact_multiple():
    offs, w = shift_taps(3.0 * 0.25, 0.25)
    np.testing.assert_array_equal(offs, [3])
    np.testing.assert_array_equal(w, [1.0])


def test_shift_taps_fractional():
    offs, w = shift_taps(0.1, 0.25)
    np.testing.assert_array_equal(offs, [0, 1])
    np.testing.assert_allclose(w, [0.6, 0.4])
    assert w.sum() == pytest.approx(1.0)


def test_gaussian_taps_normalized_and_centered():
    offs, w = gaussian_taps(0.3, 0.05, 0.01)
    assert np.all(w >= 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    mean = np.sum(w * offs * 0.01)
    var = np.sum(w * (offs * 0.01 - 0.05) ** 2)
    assert mean == pytest.approx(0.05, abs=1e-12)
    assert var == pytest.approx(0.09, rel=1e-8)


def test_gaussian_taps_degenerate_std_is_shift():
    offs, w = gaussian_taps(0.0, 0.5, 0.25)
    np.testing.assert_array_equal(offs, [2])
    np.testing.assert_array_equal(w, [1.0])


def test_aliasing_bound_is_tiny_at_unit_bandwidth():
    assert aliasing_bound(0.01, 0.01) == pytest.approx(2 * np.exp(-2 * np.pi**2))
    assert aliasing_bound(0.0, 0.01) == 0.0


def test_convolution_matches_heat_action_on_cosine():
    g = Grid((-12.0,), (12.0,), (2049,))
    f = GridFunction.from_callable(g, np.cos)
    std = 0.7
    out = gaussian_convolve(f.values, g, std, 0.0)
    expected = np.exp(-0.5 * std**2) * np.cos(g.axes[0])
    interior = g.interior_mask(8.5 * std)
    np.testing.assert_allclose(out[interior], expected[interior], atol=1e-10)


def test_convolution_semigroup_property():
    g = Grid((-12.0,), (12.0,), (2049,))
    f = GridFunction.from_callable(g, lambda x: np.minimum(np.abs(x), 1.0))
    one = gaussian_convolve(gaussian_convolve(f.values, g, 0.6, 0.0), g, 0.8, 0.0)
    two = gaussian_convolve(f.values, g, 1.0, 0.0)
    interior = g.interior_mask(9.0)
    np.testing.assert_allclose(one[interior], two[interior], atol=1e-9)


def test_convolution_shifts_exactly_on_lattice():
    g = Grid((0.0,), (1.0,), (11,))
    vals = np.arange(11, dtype=float)
    out = gaussian_convolve(vals, g, 0.0, 0.2)
    expected = np.minimum(np.arange(11) + 2, 10).astype(float)
    np.testing.assert_array_equal(out, expected)


def test_fractional_shift_equals_linear_interpolation():
    g = Grid((0.0,), (1.0,), (11,))
    rng = np.random.default_rng(3)
    vals = rng.normal(size=11)
    out = gaussian_convolve(vals, g, 0.0, 0.03)
    expected = np.interp(np.clip(g.axes[0] + 0.03, 0, 1), g.axes[0], vals)
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_structural_exactness_of_taps():
    # constants, monotonicity, Lipschitz bound are preserved exactly
    g = Grid((-6.0,), (6.0,), (601,))
    rng = np.random.default_rng(11)
    a = np.cumsum(rng.uniform(-0.02, 0.02, 601))
    b = a + rng.uniform(0, 1, 601)
    ca = gaussian_convolve(a, g, 0.5, 0.1)
    cb = gaussian_convolve(b, g, 0.5, 0.1)
    assert np.all(ca <= cb + 1e-15)
    const = gaussian_convolve(np.full(601, 4.2), g, 0.5, 0.1)
    np.testing.assert_allclose(const, 4.2, atol=1e-12)
    dx = g.spacing[0]
    lip_before = np.max(np.abs(np.diff(a))) / dx
    lip_after = np.max(np.abs(np.diff(ca))) / dx
    assert lip_after <= lip_before * (1 + 1e-12)


def test_convolution_2d_axiswise():
    g = Grid((-8.0, -8.0), (8.0, 8.0), (257, 257))
    f = GridFunction.from_callable(g, lambda p: np.cos(p[:, 0]) * np.cos(p[:, 1]))
    out = gaussian_convolve(f.values, g, 0.5, (0.0, 0.0))
    expected = np.exp(-0.5 * 0.25 * 2) * f.values  # eigenfunction factor per axis
    interior = g.interior_mask(5.0)
    np.testing.assert_allclose(out[interior], expected.reshape(g.counts)[interior], atol=1e-9)


def test_apply_taps_axis1():
    vals = np.arange(12, dtype=float).reshape(3, 4)
    offs, w = shift_taps(1.0, 1.0)
    out = apply_taps(vals, offs, w, ax=1)
    expected = vals[:, [1, 2, 3, 3]]
    np.testing.assert_array_equal(out, expected)
