"""Multi-period solution by backward induction on an inventory-capital grid.

State is (x, y): on-hand stock and capital in product units. The decision is
the post-order stock level z >= x; the dynamics in normalized units are

    x' = (z - D)^+
    y' = p' z - (p' + h')(z - D)^+ + c'(xi - z) [(1+i) if z <= xi else (1+l)]

with xi = x + y and (p', h', c') the period economics divided by next
period's unit cost. Stage values are expectations of the interpolated
next-period table over demand; per node the concave maximization over z is
done by golden-section search plus explicit kink candidates.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .demand import DEFAULT_QUAD_ORDER
from .model import HorizonSpec, State, normalized_params, require_valid
from . import single_period

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0

#: one-sided linear extrapolation is trusted this far beyond the grid,
#: as a fraction of the grid span, when a reachability check is requested
EXTRAPOLATION_TRUST = 0.20


class GridEscapeError(RuntimeError):
    """States reachable from the initial box leave the grid's trust region."""


@dataclass(frozen=True)
class Grid:
    """Rectangular state grid with strictly increasing node vectors."""

    x_nodes: np.ndarray
    y_nodes: np.ndarray

    def __post_init__(self):
        for name, nodes in (("x", self.x_nodes), ("y", self.y_nodes)):
            arr = np.asarray(nodes, dtype=float)
            if arr.ndim != 1 or len(arr) < 2 or np.any(np.diff(arr) <= 0):
                raise ValueError(f"{name} nodes must be strictly increasing, length >= 2")
            object.__setattr__(self, f"{name}_nodes", arr)

    @classmethod
    def regular(cls, x_max: float, y_min: float, y_max: float, nx: int, ny: int,
                x_min: float = 0.0) -> "Grid":
        return cls(np.linspace(x_min, x_max, nx), np.linspace(y_min, y_max, ny))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.x_nodes), len(self.y_nodes)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x_nodes, self.y_nodes, indexing="ij")


def _locate(nodes: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # cell index clipped to the edge cells; the fraction is left unclipped so
    # points outside the grid extend linearly along the boundary cell
    idx = np.clip(np.searchsorted(nodes, q, side="right") - 1, 0, len(nodes) - 2)
    frac = (q - nodes[idx]) / (nodes[idx + 1] - nodes[idx])
    return idx, frac


def interp1(nodes: np.ndarray, values: np.ndarray, q):
    """Piecewise-linear interpolation, one-sided linear outside the nodes."""
    idx, t = _locate(np.asarray(nodes, dtype=float), np.asarray(q, dtype=float))
    return (1.0 - t) * values[idx] + t * values[idx + 1]


def interp2(values: np.ndarray, grid: Grid, xq, yq):
    """Bilinear interpolation of a (nx, ny) table, linear one-sided outside."""
    xq = np.asarray(xq, dtype=float)
    yq = np.asarray(yq, dtype=float)
    ix, tx = _locate(grid.x_nodes, xq)
    iy, ty = _locate(grid.y_nodes, yq)
    v00 = values[ix, iy]
    v10 = values[ix + 1, iy]
    v01 = values[ix, iy + 1]
    v11 = values[ix + 1, iy + 1]
    return (
        (1.0 - tx) * (1.0 - ty) * v00
        + tx * (1.0 - ty) * v10
        + (1.0 - tx) * ty * v01
        + tx * ty * v11
    )


@dataclass(eq=False)
class ValueTable:
    """Period value function tabulated on the grid, in currency."""

    period: int
    grid: Grid
    values: np.ndarray

    @cached_property
    def _gradients(self) -> tuple[np.ndarray, np.ndarray]:
        dx = np.gradient(self.values, self.grid.x_nodes, axis=0)
        dy = np.gradient(self.values, self.grid.y_nodes, axis=1)
        return dx, dy

    def __call__(self, x, y):
        return interp2(self.values, self.grid, x, y)


@dataclass(eq=False)
class PolicyTable:
    """Optimal post-order stock level z*(x, y) per grid node."""

    period: int
    grid: Grid
    order_up_to: np.ndarray

    def order_quantity(self) -> np.ndarray:
        return self.order_up_to - self.grid.x_nodes[:, None]


def value_at(table: ValueTable, x, y):
    """Bilinear table lookup; one-sided linear extension outside the grid."""
    return table(x, y)


def partials(table: ValueTable, x, y):
    """(dV/dx, dV/dy) from central differences on the grid, interpolated.

    Differences are one-sided at the boundary rows/columns; the difference
    fields themselves are interpolated bilinearly.
    """
    gx, gy = table._gradients
    return interp2(gx, table.grid, x, y), interp2(gy, table.grid, x, y)


def transition(state: State, z: float, d: float, n: int, horizon: HorizonSpec) -> State:
    """Next inventory-capital state after ordering up to z and selling d."""
    if z < state.x - 1e-12:
        raise ValueError(f"post-order stock {z} below on-hand inventory {state.x}")
    pp, hp, cp = normalized_params(horizon, n)
    params = horizon.period(n)
    worth = state.x + state.y
    rate = 1.0 + params.deposit_rate if z <= worth else 1.0 + params.loan_rate
    leftover = max(z - d, 0.0)
    return State(leftover, pp * z - (pp + hp) * leftover + cp * (worth - z) * rate)


def _linear_bank(params):
    dep, loan = 1.0 + params.deposit_rate, 1.0 + params.loan_rate
    def bank(amount):
        return amount * np.where(amount >= 0.0, dep, loan)
    return bank


def _expected_next(z, xi, horizon, n, next_value, order, bank=None):
    """E_D[ next_value(x', y') ] for per-element (z, xi) under period n."""
    pp, hp, cp = normalized_params(horizon, n)
    params = horizon.period(n)
    demand = horizon.demand_in(n)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    nodes, weights = demand.expectation_nodes(z, order)
    leftover = np.maximum(z[:, None] - nodes, 0.0)
    if bank is None:
        dep, loan = 1.0 + params.deposit_rate, 1.0 + params.loan_rate
        bank_units = cp * (xi - z) * np.where(z <= xi, dep, loan)
    else:
        c_next = horizon.period(n + 1).cost
        bank_units = bank(params.cost * (xi - z)) / c_next
    y_next = pp * z[:, None] - (pp + hp) * leftover + bank_units[:, None]
    vals = next_value(leftover, y_next)
    return np.sum(vals * weights, axis=1)


def stage_value(z, x, y, n: int, horizon: HorizonSpec, next_table: ValueTable,
                order: int = DEFAULT_QUAD_ORDER):
    """Expected next-period value of choosing stock level z >= x in period n."""
    if not 1 <= n <= horizon.n_periods - 1:
        raise ValueError(f"stage value defined for 1 <= n <= N-1, got n={n}")
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(z_arr < x_arr - 1e-12):
        raise ValueError("post-order stock below on-hand inventory")
    out = _expected_next(z_arr, x_arr + np.atleast_1d(np.asarray(y, dtype=float)),
                         horizon, n, next_table, order)
    return out if np.ndim(z) else float(out[0])


def terminal_value(q, x, y, horizon: HorizonSpec):
    """Expected terminal wealth of ordering q in the last period (currency)."""
    return single_period.expected_value_G(
        q, x, y, horizon.period(horizon.n_periods), horizon.salvage,
        horizon.demand_in(horizon.n_periods))


def golden_max(f, lo, hi, tol: float, candidates=()):
    """Maximize per-element concave f over [lo, hi] by golden-section search.

    `candidates` are extra per-element points (clipped to the bracket) that
    are evaluated exactly, covering kinks the section may straddle. Ties
    within a relative 1e-9 prefer the smaller argument.
    Returns (argmax, value).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), lo.shape).copy()
    hi = np.maximum(hi, lo)
    a, b = lo.copy(), hi.copy()
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    width = float(np.max(b - a, initial=0.0))
    n_iter = int(np.ceil(np.log(tol / width) / np.log(_INVPHI))) if width > tol else 0
    for _ in range(n_iter):
        left = f1 >= f2
        a = np.where(left, a, x1)
        b = np.where(left, x2, b)
        x1n = np.where(left, b - _INVPHI * (b - a), x2)
        x2n = np.where(left, x1, a + _INVPHI * (b - a))
        fnew = f(np.where(left, x1n, x2n))
        f1, f2 = np.where(left, fnew, f2), np.where(left, f1, fnew)
        x1, x2 = x1n, x2n
    z_stack = [np.where(f1 >= f2, x1, x2), lo]
    for cand in candidates:
        z_stack.append(np.clip(np.broadcast_to(np.asarray(cand, dtype=float), lo.shape), lo, hi))
    zs = np.stack(z_stack)
    fs = np.stack([np.where(f1 >= f2, f1, f2)] + [f(zc) for zc in zs[1:]])
    best = fs.max(axis=0)
    tie = best - 1e-9 * (1.0 + np.abs(best))
    z_best = np.where(fs >= tie, zs, np.inf).min(axis=0)
    return z_best, best


def _myopic_targets(horizon: HorizonSpec, n: int) -> list[float]:
    # deferred import: thresholds builds on this module
    from .thresholds import myopic_lower, myopic_upper

    targets = list(myopic_lower(horizon, n)[:2])
    if horizon.upper_myopic_valid:
        targets += list(myopic_upper(horizon, n)[:2])
    return targets


@dataclass(eq=False)
class DPSolution:
    horizon: HorizonSpec
    grid: Grid
    values: list[ValueTable]    # values[n-1] is period n
    policies: list[PolicyTable]

    def value(self, n: int) -> ValueTable:
        return self.values[n - 1]

    def policy(self, n: int) -> PolicyTable:
        return self.policies[n - 1]


def _terminal_tables(horizon: HorizonSpec, grid: Grid) -> tuple[ValueTable, PolicyTable]:
    n = horizon.n_periods
    params, demand = horizon.period(n), horizon.demand_in(n)
    bands = single_period.order_bands(single_period.fractiles(params, horizon.salvage), demand)
    X, Y = grid.mesh()
    q = single_period.optimal_order(X, Y, bands)
    vals = single_period.expected_value_G(q, X, Y, params, horizon.salvage, demand)
    return ValueTable(n, grid, vals), PolicyTable(n, grid, X + q)


def backward_induct(horizon: HorizonSpec, grid: Grid, *, z_tol: float = 1e-3,
                    order: int = DEFAULT_QUAD_ORDER, z_cap=None,
                    initial_states=None, bank=None) -> DPSolution:
    """Solve the horizon on the grid; returns value and policy tables.

    The terminal table is the closed-form single-period optimum. Earlier
    periods maximize the stage value per node over z in [x, z_max] by
    golden-section, with the kink z = xi and the myopic order-up-to levels
    evaluated explicitly. `z_cap(x, y)` optionally tightens the upper
    search bound per node (loan limits). When `initial_states` is given,
    reachable capital is interval-propagated from those states and a
    GridEscapeError is raised if it leaves the extrapolation trust region.
    """
    require_valid(horizon)
    if grid.x_nodes[0] < -1e-12:
        raise ValueError("inventory nodes must be nonnegative under lost sales")
    if initial_states is not None:
        check_reachability(horizon, grid, initial_states)
    n_periods = horizon.n_periods
    vt, pt = _terminal_tables(horizon, grid)
    values: list = [None] * n_periods
    policies: list = [None] * n_periods
    values[-1], policies[-1] = vt, pt

    X, Y = grid.mesh()
    x_flat, y_flat = X.ravel(), Y.ravel()
    xi_flat = x_flat + y_flat
    for n in range(n_periods - 1, 0, -1):
        next_table = values[n]
        z_max = float(grid.x_nodes[-1] + horizon.demand_in(n).quantile(0.999))
        hi = np.minimum(z_cap(x_flat, y_flat), z_max) if z_cap is not None else z_max
        hi = np.maximum(np.broadcast_to(hi, x_flat.shape), x_flat)

        def f(z, _n=n, _tab=next_table):
            return _expected_next(z, xi_flat, horizon, _n, _tab, order, bank=bank)

        cands = [xi_flat] + _myopic_targets(horizon, n)
        z_star, v_star = golden_max(f, x_flat, hi, z_tol, candidates=cands)
        values[n - 1] = ValueTable(n, grid, v_star.reshape(grid.shape))
        policies[n - 1] = PolicyTable(n, grid, z_star.reshape(grid.shape))
    return DPSolution(horizon, grid, values, policies)


def policy_value_tables(horizon: HorizonSpec, grid: Grid, policy, *,
                        order: int = DEFAULT_QUAD_ORDER) -> list[ValueTable]:
    """Expected terminal wealth tables of following `policy` in every period.

    `policy(n, x, y)` returns the order quantity per node (vectorized).
    """
    require_valid(horizon)
    n_periods = horizon.n_periods
    X, Y = grid.mesh()
    x_flat, y_flat = X.ravel(), Y.ravel()
    q_term = np.maximum(policy(n_periods, x_flat, y_flat), 0.0)
    vals = terminal_value(q_term, x_flat, y_flat, horizon)
    tables: list = [None] * n_periods
    tables[-1] = ValueTable(n_periods, grid, vals.reshape(grid.shape))
    for n in range(n_periods - 1, 0, -1):
        z = x_flat + np.maximum(policy(n, x_flat, y_flat), 0.0)
        w = _expected_next(z, x_flat + y_flat, horizon, n, tables[n], order)
        tables[n - 1] = ValueTable(n, grid, w.reshape(grid.shape))
    return tables


def reachable_worth_bounds(horizon: HorizonSpec, initial_states) -> list[tuple[float, float]]:
    """Interval propagation of the capital range reachable per period.

    No admissible policy stocks beyond the largest myopic order-up-to level,
    so the post-order stock is capped at max(x, that level) when propagating
    the extreme revenue and debt paths.
    """
    from .thresholds import myopic_lower, myopic_upper

    states = np.atleast_2d(np.asarray(initial_states, dtype=float))
    x_lo, x_hi = float(states[:, 0].min()), float(states[:, 0].max())
    y_lo, y_hi = float(states[:, 1].min()), float(states[:, 1].max())
    out = [(y_lo, y_hi)]
    for n in range(1, horizon.n_periods):
        pp, hp, cp = normalized_params(horizon, n)
        params, demand = horizon.period(n), horizon.demand_in(n)
        d_hi = float(demand.quantile(0.999))
        pair = myopic_upper(horizon, n) if horizon.upper_myopic_valid else myopic_lower(horizon, n)
        z_hi = max(x_hi, pair.deposit)
        lo = np.inf
        hi = -np.inf
        for z in (x_lo, min(max(x_lo + y_lo, x_lo), z_hi), z_hi):
            for d in (0.0, d_hi):
                for xi in (x_lo + y_lo, x_hi + y_hi):
                    rate = 1.0 + (params.deposit_rate if z <= xi else params.loan_rate)
                    y_next = pp * z - (pp + hp) * max(z - d, 0.0) + cp * (xi - z) * rate
                    lo, hi = min(lo, y_next), max(hi, y_next)
        out.append((lo, hi))
        x_lo, x_hi = 0.0, z_hi
        y_lo, y_hi = lo, hi
    return out


def check_reachability(horizon: HorizonSpec, grid: Grid, initial_states) -> None:
    span = grid.y_nodes[-1] - grid.y_nodes[0]
    slack = EXTRAPOLATION_TRUST * span
    for n, (lo, hi) in enumerate(reachable_worth_bounds(horizon, initial_states), start=1):
        if lo < grid.y_nodes[0] - slack or hi > grid.y_nodes[-1] + slack:
            raise GridEscapeError(
                f"period {n}: reachable capital [{lo:.1f}, {hi:.1f}] escapes grid "
                f"[{grid.y_nodes[0]:.1f}, {grid.y_nodes[-1]:.1f}] by more than "
                f"{EXTRAPOLATION_TRUST:.0%} of its span"
            )


def suggest_grid(horizon: HorizonSpec, *, initial_states=((0.0, 0.0),),
                 nx: int = 161, ny: int = 201, pad: float = 0.10) -> Grid:
    """Grid sized by interval propagation from the initial states, padded."""
    d_hi = max(float(horizon.demand_in(n).quantile(0.999)) for n in range(1, horizon.n_periods + 1))
    x_max = 2.0 * d_hi
    bounds = reachable_worth_bounds(horizon, initial_states)
    y_lo = min(lo for lo, _ in bounds)
    y_hi = max(hi for _, hi in bounds)
    span = max(y_hi - y_lo, 1.0)
    return Grid.regular(x_max, y_lo - pad * span, y_hi + pad * span, nx, ny)
