import json

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strategies import float_points
from trimap import transfer_op as to
from trimap.errors import DomainError, InstabilityError, TruncationError
from trimap.geometry import Rectangle
from trimap.map_core import TrianglePoint


def series_M(h, x, y, dps=30):
    """Oracle: x * sum_n x'^2 h(x', x x') by mpmath extrapolated summation."""
    mp.mp.dps = dps
    x, y = mp.mpf(x), mp.mpf(y)

    def term(n):
        xp = 1 / (1 + n * x + y)
        return xp * xp * h(xp, x * xp)

    return float(x * mp.nsum(term, [0, mp.inf]))


# --- point evaluations ------------------------------------------------------------------

def test_fixed_point_example():
    assert to.apply_L(to.fixed_point_function(), TrianglePoint(0.5, 0.25)) == pytest.approx(1.6, abs=1e-12)


def test_zero_maps_to_zero():
    assert to.apply_L(to.zero_function(), TrianglePoint(0.3, 0.1)) == 0.0


@pytest.mark.parametrize("x,y", [(0.7, 0.2), (0.05, 0.01), (0.999, 0.998), (0.3, 1e-9)])
def test_inverse_x_is_a_hurwitz_zeta(x, y):
    mp.mp.dps = 30
    ref = float(mp.zeta(2, (1 + mp.mpf(y)) / x) / mp.mpf(x) ** 2)
    got = to.apply_L(to.inverse_x_function(), TrianglePoint(x, y))
    assert got == pytest.approx(ref, abs=1e-12 / x)


@settings(max_examples=40)
@given(float_points(x_min=0.02))
def test_fixed_point_is_fixed(p):
    assert to.apply_M(to.fixed_point_function(), p) == pytest.approx(1.0 / (1.0 + p.y), abs=1e-12)


@pytest.mark.parametrize("coeffs", [[[1.0, -0.5], [0.3, 0.0]], [[0.0, 0.0, 1.0], [0.2, -1.0, 0.0], [0.5, 0, 0]]])
def test_polynomial_against_series_oracle(coeffs):
    f = to.polynomial_function(coeffs)
    c = [[mp.mpf(v) for v in row] for row in coeffs]

    def h_mp(x, y):
        u = y / x
        return sum(c[i][j] * x**i * u**j for i in range(len(c)) for j in range(len(c[i])))

    for x, y in [(0.9, 0.3), (0.4, 0.39), (0.1, 0.05)]:
        assert to.apply_M(f, TrianglePoint(x, y)) == pytest.approx(series_M(h_mp, x, y), abs=1e-12)


def test_vectorized_evaluation_matches_pointwise():
    f = to.polynomial_function([[1.0, 0.2], [-0.4, 0.1]])
    xs = np.array([0.9, 0.5, 0.05, 0.2])
    ys = xs * np.array([0.1, 0.5, 0.9, 0.99])
    vec = to.apply_L(f, (xs, ys))
    pts = [to.apply_L(f, TrianglePoint(a, b)) for a, b in zip(xs, ys)]
    assert np.allclose(vec, pts, rtol=0, atol=1e-13)


def test_positivity_and_monotonicity():
    # L is a positive operator: f <= g pointwise gives Lf <= Lg
    f = to.fixed_point_function()
    g = f + to.inverse_x_function().scale(0.1)
    xs = np.linspace(0.05, 0.95, 7)
    ys = 0.5 * xs
    lf, lg = to.apply_L(f, (xs, ys)), to.apply_L(g, (xs, ys))
    assert np.all(lf > 0) and np.all(lg > lf)


def test_bound_tail_agrees_with_gregory():
    f = to.inverse_x_function()
    p = TrianglePoint(0.6, 0.3)
    a = to.apply_L(f, p, tol=1e-6, tail="bound")
    b = to.apply_L(f, p)
    assert abs(a - b) < 1e-6 / 0.6


def test_bound_tail_refuses_impossible_budget():
    with pytest.raises(TruncationError):
        to.apply_M(to.inverse_x_function(), TrianglePoint(1e-3, 1e-4), tol=1e-12, tail="bound")


def test_branch_sum_meets_tolerance_and_estimates_its_error():
    x, y = np.array([0.5, 0.03, 0.9]), np.array([0.2, 0.01, 0.1])
    val, err = to.branch_sum(lambda a, b: np.ones_like(a), x, y, tol=1e-12)
    mp.mp.dps = 30
    ref = np.array([float(mp.zeta(2, (1 + mp.mpf(b)) / a) / a) for a, b in zip(x, y)])
    actual = np.abs(val - ref)
    assert np.all(actual <= 1e-12) and np.all(err <= 1e-12)
    # the estimate is the leading omitted correction, so it tracks the error to within a small factor
    assert np.all(actual <= 2 * err + 1e-15)


def test_branch_sum_start_skips_heads():
    x, y = np.array([0.4]), np.array([0.1])
    one = lambda a, b: np.ones_like(a)  # noqa: E731
    full, _ = to.branch_sum(one, x, y)
    tail, _ = to.branch_sum(one, x, y, start=3)
    head = sum(0.4 / (1 + n * 0.4 + 0.1) ** 2 for n in range(3))
    assert full[0] == pytest.approx(head + tail[0], abs=1e-14)


# --- norms ---------------------------------------------------------------------------

def test_banach_norm_examples():
    assert to.banach_norm(to.fixed_point_function()) == pytest.approx(1.0, abs=1e-8)
    assert to.banach_norm(to.zero_function()) == 0.0
    g = to.GridFunction(np.random.default_rng(0).normal(size=(12, 9)))
    assert to.banach_norm(g) == np.abs(g.values).max()


def test_norm_ratio_for_fixed_point_is_one():
    ratio, ok = to.norm_bound_check(to.fixed_point_function())
    assert ok and ratio == pytest.approx(1.0, abs=1e-9)


def test_norm_ratio_bounded_for_inverse_x():
    # M applied to h = 1 is zeta(2, (1+y)/x)/x, which exceeds 1 near x = 1
    ratio, ok = to.norm_bound_check(to.inverse_x_function())
    assert ok and 1.0 < ratio <= 3.0


def test_norm_of_zero_function():
    assert to.norm_bound_check(to.zero_function()) == (0.0, True)


# --- grid functions --------------------------------------------------------------------

def test_grid_interpolation_reproduces_bilinear_functions():
    def h(x, y):
        u = y / x
        return 0.3 + 2 * x - u + 0.7 * x * u

    g = to.GridFunction.from_function(h, 11, 7)
    rng = np.random.default_rng(4)
    x = rng.uniform(1e-3, 1, 200)
    y = x * rng.uniform(0, 1, 200)
    assert np.allclose(g.evaluate(x, y), h(x, y), atol=1e-13)


def test_grid_rejects_bad_values():
    with pytest.raises(ValueError):
        to.GridFunction(np.ones(5))
    with pytest.raises(ValueError):
        to.GridFunction(np.array([[1.0, np.nan], [1.0, 1.0]]))


def test_grid_csv_layout():
    g = to.GridFunction.constant(3, 2, 0.5)
    rows = g.to_csv().strip().split("\n")
    assert rows[0] == "x,u,h" and len(rows) == 7
    assert [float(v) for v in rows[1].split(",")] == [1 / 6, 0.25, 0.5]


def test_grid_apply_matches_pointwise_operator_on_smooth_input():
    n = 64
    R, c0, beta = to._grid_operator(n, n)
    g = to.GridFunction.from_function(to.fixed_point_function().h, n)
    out = to.grid_apply(R, c0, beta, g.values)
    X, U = g.mesh()
    # h* is fixed; the interpolation error is second order in 1/n away from x = 0
    assert np.abs(out - 1 / (1 + U * X))[X[:, 0] >= 0.1].max() < 5.0 / n**2


# --- power iteration --------------------------------------------------------------------

@pytest.mark.parametrize("n", [16, 32, 64])
def test_power_iteration_small_grids(n):
    rep, g = to.power_iteration(n, tol=1e-12)
    assert rep.converged
    assert abs(rep.eigenvalue_estimate - 1) <= max(1e-6, 0.06 / n**2)
    assert len(rep.history) == rep.iterations == len(rep.eigenvalue_history)
    assert rep.residual_sup >= 0 and rep.residual_sup <= rep.residual_sup_full
    assert 0 < rep.gap_estimate < 1
    assert g.values.shape == (n, n) and np.all(g.values > 0)


def test_power_iteration_residual_shrinks_with_grid():
    r = [to.power_iteration(n, tol=1e-11)[0].residual_sup for n in (16, 32, 64)]
    assert r[0] > r[1] > r[2]


def test_power_iteration_start_independent():
    a = to.power_iteration(32, tol=1e-13)[1].values
    start = to.GridFunction.from_function(lambda x, y: 1 + x * x + 3 * y, 32)
    b = to.power_iteration(32, tol=1e-13, start=start)[1].values
    assert np.abs(a - b).max() < 1e-11


def test_power_iteration_rectangular_grid():
    rep, g = to.power_iteration(24, 16)
    assert (rep.n_x, rep.n_u) == (24, 16) and g.values.shape == (24, 16)


@pytest.mark.parametrize("start", [np.ones((8, 8)), -np.ones((16, 16)), np.zeros((16, 16))])
def test_power_iteration_rejects_bad_start(start):
    with pytest.raises(ValueError):
        to.power_iteration(16, start=to.GridFunction(start))


def test_power_iteration_detects_instability(monkeypatch):
    monkeypatch.setattr(to, "grid_apply", lambda R, c0, beta, v: 2.0 * v)
    with pytest.raises(InstabilityError):
        to.power_iteration(16)


def test_spectral_report_json():
    rep, _ = to.power_iteration(16, max_iters=5)
    doc = json.loads(rep.to_json())
    assert doc["iterations"] == 5 and not doc["converged"]
    assert doc["schema_version"]


# --- duality ----------------------------------------------------------------------------

@pytest.mark.parametrize("region", [Rectangle(0.1, 1.0, 0.0, 1.0), Rectangle(0.5, 0.75, 0.25, 0.5)])
def test_duality_fixed_point(region):
    lhs, rhs = to.duality_check(to.fixed_point_function(), region)
    assert abs(lhs - rhs) < 1e-6 and lhs > 0


@pytest.mark.parametrize("region", [Rectangle(0.5, 1.0, 0.0, 1.0), Rectangle(0.1, 1.0, 0.0, 1.0)])
def test_duality_bump(region):
    lhs, rhs = to.duality_check(to.bump_function(), region, tol=1e-7)
    assert abs(lhs - rhs) < 1e-6 and lhs > 0


def test_duality_zero_and_degenerate():
    assert to.duality_check(to.zero_function(), Rectangle(0.2, 0.9, 0.1, 0.5)) == (0.0, 0.0)
    assert to.duality_check(to.fixed_point_function(), Rectangle(0.3, 0.3, 0.1, 0.2)) == (0.0, 0.0)


def test_duality_requires_region_off_the_axis():
    with pytest.raises(DomainError):
        to.duality_check(to.fixed_point_function(), Rectangle(0.0, 1.0, 0.0, 1.0))
