import numpy as np
import pytest

import cashstock as cs
from cashstock.dp import (
    Grid,
    ValueTable,
    _terminal_tables,
    golden_max,
    interp1,
    interp2,
    reachable_worth_bounds,
    suggest_grid,
)

from conftest import BASE_ECON, SALVAGE, make_horizon

PARAMS = cs.PeriodParams(**BASE_ECON)
U20 = cs.Uniform(0, 20)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        Grid(np.array([0.0]), np.array([0.0, 1.0]))
    g = Grid.regular(10, -5, 5, 11, 21)
    assert g.shape == (11, 21)


def test_interp2_node_identity_and_linearity():
    g = Grid.regular(10, -5, 5, 6, 6)
    X, Y = g.mesh()
    table = 3.0 * X - 2.0 * Y + 1.0
    assert interp2(table, g, X.ravel(), Y.ravel()) == pytest.approx(table.ravel())
    rng = np.random.default_rng(0)
    xq, yq = rng.uniform(-4, 20, 100), rng.uniform(-12, 12, 100)  # incl. outside
    assert np.allclose(interp2(table, g, xq, yq), 3 * xq - 2 * yq + 1, atol=1e-12)


def test_interp2_preserves_monotonicity_along_lines():
    rng = np.random.default_rng(1)
    g = Grid.regular(10, 0, 10, 8, 9)
    table = np.cumsum(np.cumsum(rng.uniform(0, 1, g.shape), axis=0), axis=1)
    xq = np.linspace(0, 10, 200)
    for y in (0.0, 3.3, 10.0):
        vals = interp2(table, g, xq, np.full_like(xq, y))
        assert np.all(np.diff(vals) >= -1e-12)


def test_interp1_linear_extension():
    nodes = np.array([0.0, 1.0, 3.0])
    vals = np.array([0.0, 2.0, 4.0])
    assert interp1(nodes, vals, np.array([-1.0, 0.5, 2.0, 5.0])) == pytest.approx(
        [-2.0, 1.0, 3.0, 6.0])


def test_partials_linear_field():
    g = Grid.regular(10, -5, 5, 11, 11)
    X, Y = g.mesh()
    table = ValueTable(1, g, 2000.0 * X + 17.0 * Y)
    dx, dy = cs.partials(table, np.array([2.3, 7.9]), np.array([-1.2, 4.4]))
    assert dx == pytest.approx([2000.0, 2000.0])
    assert dy == pytest.approx([17.0, 17.0])


def test_partials_terminal_table_deposit_slope(desk_grid):
    hz = make_horizon("u0_20", 1)
    vt, _ = _terminal_tables(hz, desk_grid)
    # interior point with x above the deposit band: dV/dy = c (1+i) = 1010
    _, dy = cs.partials(vt, 20.0, 30.0)
    assert float(dy) == pytest.approx(1010.0, rel=1e-9)


def test_partials_concave_table_nonincreasing():
    g = Grid.regular(10, 0, 10, 21, 5)
    X, Y = g.mesh()
    table = ValueTable(1, g, -((X - 4.0) ** 2) - 0.3 * (Y - 2.0) ** 2)
    xs = np.linspace(0.5, 9.5, 40)
    dx, _ = cs.partials(table, xs, np.full_like(xs, 3.0))
    assert np.all(np.diff(dx) <= 1e-9)


def test_transition_examples():
    hz = make_horizon("u0_20", 3)
    # stationary normalized economics: p' = 2, h' = 0.5, c' = 1
    s = cs.transition(cs.State(4.0, 6.0), 10.0, 4.0, 1, hz)
    assert (s.x, s.y) == pytest.approx((6.0, 5.0))
    s = cs.transition(cs.State(4.0, 6.0), 12.0, 15.0, 1, hz)
    assert (s.x, s.y) == pytest.approx((0.0, 21.7))
    with pytest.raises(ValueError):
        cs.transition(cs.State(4.0, 6.0), 3.0, 1.0, 1, hz)


def test_transition_hold_and_deposit():
    # z = x, no demand, h = 0, i = 0: stock unchanged, cash re-deposited flat
    params = cs.PeriodParams(2000, 1000, 0.0, 0.0, 0.15)
    hz = cs.HorizonSpec.stationary(3, params, U20, SALVAGE)
    s = cs.transition(cs.State(5.0, 7.0), 5.0, 0.0, 1, hz)
    assert (s.x, s.y) == pytest.approx((5.0, 7.0))


def test_terminal_value_matches_single_period():
    hz = make_horizon("u0_20", 4)
    rng = np.random.default_rng(2)
    q = rng.uniform(0, 15, 50)
    x = rng.uniform(0, 20, 50)
    y = rng.uniform(-10, 25, 50)
    assert np.array_equal(
        cs.terminal_value(q, x, y, hz),
        cs.expected_value_G(q, x, y, PARAMS, SALVAGE, U20))
    bands = cs.order_bands(cs.fractiles(PARAMS, SALVAGE), U20)
    assert cs.terminal_value(bands.borrow, 0.0, 0.0, hz) == pytest.approx(5160.714285714286)


def test_terminal_value_pure_debt_service():
    params = cs.PeriodParams(2000, 1000, 500, 0.01, 0.15)
    hz = cs.HorizonSpec.stationary(1, params, U20, 0.0)
    assert cs.terminal_value(0.0, 0.0, -5.0, hz) == pytest.approx(-5.0 * 1000 * 1.15)


def test_stage_value_contract():
    hz = make_horizon("u0_20", 2)
    g = Grid.regular(40, -60, 120, 41, 51)
    vt = ValueTable(2, g, np.full(g.shape, 123.0))
    with pytest.raises(ValueError):
        cs.stage_value(5.0, 0.0, 0.0, 2, hz, vt)  # terminal handled separately
    assert cs.stage_value(7.0, 1.0, 3.0, 1, hz, vt) == pytest.approx(123.0)
    with pytest.raises(ValueError):
        cs.stage_value(0.5, 1.0, 3.0, 1, hz, vt)


def brute_force_two_period(x, y, z_lattice, d_lattice):
    """Independent oracle: discretize both the decision and the demand."""
    best = -np.inf
    for z in z_lattice[z_lattice >= x]:
        xn = np.maximum(z - d_lattice, 0.0)
        rate = 1.01 if z <= x + y else 1.15
        yn = 2.0 * z - 2.5 * xn + (x + y - z) * rate
        vals = cs.value_closed_form(xn, yn, PARAMS, SALVAGE, U20)
        best = max(best, float(np.mean(vals)))
    return best


def test_stage_value_against_brute_force():
    hz = make_horizon("u0_20", 2)
    grid = Grid.regular(40, -60, 120, 161, 201)
    vt, _ = _terminal_tables(hz, grid)
    z_lattice = np.linspace(0, 30, 601)
    d_lattice = np.linspace(0.005, 19.995, 2000) * 1.0  # midpoint rule on U(0,20)
    for x, y in [(0.0, 0.0), (3.0, 8.0), (10.0, -4.0)]:
        oracle = brute_force_two_period(x, y, z_lattice, d_lattice)
        zs = np.maximum(z_lattice, x)
        got = cs.stage_value(zs, np.full_like(zs, x), np.full_like(zs, y), 1, hz, vt).max()
        assert got == pytest.approx(oracle, rel=5e-3)


def test_backward_induct_single_period_equals_closed_form(small_grid):
    hz = make_horizon("u0_20", 1)
    sol = cs.backward_induct(hz, small_grid)
    X, Y = small_grid.mesh()
    closed = cs.value_closed_form(X, Y, PARAMS, SALVAGE, U20)
    assert np.allclose(sol.value(1).values, closed, rtol=5e-3)
    assert np.max(np.abs(sol.value(1).values - closed)) < 1e-9  # same code path


def test_policy_table_order_quantity(small_grid):
    hz = make_horizon("u0_20", 2)
    sol = cs.backward_induct(hz, small_grid)
    q = sol.policy(1).order_quantity()
    assert np.all(q >= -1e-9)


def test_golden_max_quadratic():
    m = np.array([1.0, 4.0, 9.5])
    lo = np.zeros(3)
    z, v = golden_max(lambda z: -((z - m) ** 2), lo, 10.0, 1e-6)
    assert z == pytest.approx(m, abs=1e-4)
    assert v == pytest.approx([0.0, 0.0, 0.0], abs=1e-8)


def test_golden_max_tie_prefers_smaller():
    z, _ = golden_max(lambda z: np.zeros_like(z), np.full(2, 3.0), 8.0, 1e-6)
    assert z == pytest.approx([3.0, 3.0])


def test_golden_max_candidate_beats_section():
    # kinked peak exactly at a candidate point
    peak = 4.0
    z, v = golden_max(lambda z: -np.abs(z - peak), np.zeros(1), 10.0, 1e-3,
                      candidates=[np.array([peak])])
    assert z[0] == pytest.approx(peak, abs=1e-9)
    assert v[0] == pytest.approx(0.0, abs=1e-12)


def test_refinement_convergence():
    vals = []
    for nx, ny in [(21, 26), (41, 51), (81, 101)]:
        g = Grid.regular(40, -60, 120, nx, ny)
        sol = cs.backward_induct(make_horizon("u0_20", 3), g)
        vals.append(float(sol.value(1)(0.0, 0.0)))
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    assert d2 <= d1 / 3.0


def test_grid_escape_detection():
    hz = make_horizon("u0_20", 6)
    tight = Grid.regular(40, -60, 20, 41, 41)
    with pytest.raises(cs.GridEscapeError):
        cs.backward_induct(hz, tight, initial_states=[(0.0, 0.0)])
    # the desk grid holds the reachable set for N=6 from (0, 0)
    bounds = reachable_worth_bounds(hz, [(0.0, 0.0)])
    assert len(bounds) == 6
    assert all(lo <= hi for lo, hi in bounds)


def test_suggest_grid_covers_reachable_capital():
    hz = make_horizon("u0_20", 6)
    g = suggest_grid(hz, nx=41, ny=51)
    cs.backward_induct(hz, g, initial_states=[(0.0, 0.0)])  # no escape
