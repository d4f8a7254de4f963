"""Value-function bounds: selling-back upper bound and comparison reports.

Allowing the firm to sell stock back at the current unit cost collapses the
state to net worth w = x + y and yields a one-dimensional relaxation whose
value dominates the true value function. Myopic policies evaluated under the
true dynamics provide lower bounds; the report places both around the
optimum for selected states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import single_period
from .demand import DEFAULT_QUAD_ORDER
from .dp import (
    DPSolution,
    Grid,
    _expected_next,
    backward_induct,
    golden_max,
    interp1,
    policy_value_tables,
)
from .model import HorizonSpec, normalized_params, require_valid
from .thresholds import myopic_upper


def xi_transition(worth, z, d, n: int, horizon: HorizonSpec):
    """Next net worth when current stock plus cash is fungible.

    w' = p' z - (p' + h' - 1)(z - d)^+ + c'(w - z)[(1+i) if z <= w else (1+l)];
    the leftover (z - d)^+ is carried at full next-period cost, hence the
    coefficient drops by one relative to the two-dimensional dynamics.
    """
    pp, hp, cp = normalized_params(horizon, n)
    params = horizon.period(n)
    worth = np.asarray(worth, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(z < -1e-12):
        raise ValueError("target stock must be nonnegative")
    rate = np.where(z <= worth, 1.0 + params.deposit_rate, 1.0 + params.loan_rate)
    return pp * z - (pp + hp - 1.0) * np.maximum(z - d, 0.0) + cp * (worth - z) * rate


@dataclass(eq=False)
class WorthValueTable:
    """One period of the selling-back relaxation on the net-worth grid."""

    period: int
    worth: np.ndarray
    values: np.ndarray
    target: np.ndarray          # optimal post-trade stock per worth node
    borrow_level: float         # trade up to this when worth is below it
    deposit_level: float        # trade down to this when worth is above it

    def __call__(self, w):
        return interp1(self.worth, self.values, w)


def _require_no_sellback_profit(horizon: HorizonSpec) -> None:
    for n in range(1, horizon.n_periods):
        cur, nxt = horizon.period(n), horizon.period(n + 1)
        if nxt.cost > cur.cost + cur.holding + 1e-12:
            raise ValueError(
                f"period {n}: selling back needs c_next <= c + h "
                f"({nxt.cost} > {cur.cost + cur.holding})"
            )


def selling_back_dp(horizon: HorizonSpec, worth_nodes: np.ndarray, *,
                    z_tol: float = 1e-3, order: int = DEFAULT_QUAD_ORDER
                    ) -> list[WorthValueTable]:
    """One-dimensional backward induction of the selling-back relaxation.

    Terminal values equal the plain terminal value at zero stock. The optimal
    trade clamps net worth between the two extracted levels.
    """
    require_valid(horizon)
    _require_no_sellback_profit(horizon)
    worth_nodes = np.asarray(worth_nodes, dtype=float)
    n_last = horizon.n_periods
    params_n = horizon.period(n_last)
    bands = single_period.order_bands(
        single_period.fractiles(params_n, horizon.salvage), horizon.demand_in(n_last))
    q_term = single_period.optimal_order(0.0, worth_nodes, bands)
    v_term = single_period.expected_value_G(
        q_term, 0.0, worth_nodes, params_n, horizon.salvage, horizon.demand_in(n_last))
    tables: list = [None] * n_last
    tables[-1] = WorthValueTable(n_last, worth_nodes, v_term, q_term,
                                 bands.borrow, bands.deposit)
    zeros = np.zeros_like(worth_nodes)
    for n in range(n_last - 1, 0, -1):
        nxt = tables[n]
        z_max = float(max(worth_nodes[-1], 0.0) + horizon.demand_in(n).quantile(0.999))

        def f(z, _n=n, _nxt=nxt):
            return _stage(z, worth_nodes, _n, horizon, _nxt, order)

        target, vals = golden_max(f, zeros, z_max, z_tol,
                                  candidates=[np.clip(worth_nodes, 0.0, z_max)])
        # the optimal trade is clamp(w, borrow, deposit): read the flat ends
        tables[n - 1] = WorthValueTable(n, worth_nodes, vals, target,
                                        float(target[0]), float(target[-1]))
    return tables


def _stage(z, worth, n, horizon, next_table: WorthValueTable, order):
    pp, hp, cp = normalized_params(horizon, n)
    params = horizon.period(n)
    nodes, w = horizon.demand_in(n).expectation_nodes(np.asarray(z, dtype=float), order)
    z = np.asarray(z, dtype=float)
    rate = np.where(z <= worth, 1.0 + params.deposit_rate, 1.0 + params.loan_rate)
    w_next = (pp * z[:, None]
              - (pp + hp - 1.0) * np.maximum(z[:, None] - nodes, 0.0)
              + (cp * (worth - z) * rate)[:, None])
    return np.sum(next_table(w_next) * w, axis=1)


def liquidation_value(x, y, n: int, horizon: HorizonSpec, solution: DPSolution, *,
                      z_tol: float = 1e-3, order: int = DEFAULT_QUAD_ORDER):
    """One-step relaxation: next period's stock is valued as cash.

    max_{z >= x} E[ V_{n+1}(0, x' + y') ]; sits between the true value and
    the selling-back bound.
    """
    if not 1 <= n <= horizon.n_periods - 1:
        raise ValueError("liquidation bound defined for 1 <= n <= N-1")
    next_table = solution.value(n + 1)

    def as_cash(xn, yn, _t=next_table):
        return _t(np.zeros_like(xn), xn + yn)

    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z_max = float(solution.grid.x_nodes[-1] + horizon.demand_in(n).quantile(0.999))

    def f(z):
        return _expected_next(z, x + y, horizon, n, as_cash, order)

    _, vals = golden_max(f, x, z_max, z_tol, candidates=[np.clip(x + y, x, z_max)])
    return vals


@dataclass
class BoundRow:
    x: float
    y: float
    optimal: float
    lower: float
    lower_gap: float
    lower_gap_pct: float
    upper: float
    upper_gap: float
    upper_gap_pct: float
    violated: bool


@dataclass
class BoundReport:
    rows: list[BoundRow]

    @property
    def any_violation(self) -> bool:
        return any(r.violated for r in self.rows)


def compare_bounds(horizon: HorizonSpec, grid: Grid, states, *,
                   solution: DPSolution | None = None,
                   order: int = DEFAULT_QUAD_ORDER,
                   chain_tol: float = 5e-3) -> BoundReport:
    """Bound chain lower <= optimal <= upper at the given states.

    Lower bound: the liquidation-credit myopic policy evaluated under the
    true dynamics. Upper bound: the selling-back relaxation at the state's
    net worth. Violations beyond `chain_tol` relative are flagged.
    """
    require_valid(horizon)
    if solution is None:
        solution = backward_induct(horizon, grid, order=order)
    pairs = [myopic_upper(horizon, n) for n in range(1, horizon.n_periods + 1)]

    def upper_policy(n, x, y):
        pair = pairs[n - 1]
        worth = x + y
        return np.where(
            worth >= pair.deposit, np.maximum(pair.deposit - x, 0.0),
            np.where(worth >= pair.borrow, np.maximum(y, 0.0),
                     np.maximum(pair.borrow - x, 0.0)))

    lower_tables = policy_value_tables(horizon, grid, upper_policy, order=order)
    sell_back = selling_back_dp(horizon, default_worth_grid(grid), order=order)

    rows = []
    for x, y in states:
        v = float(solution.value(1)(x, y))
        lo = float(lower_tables[0](x, y))
        up = float(sell_back[0](x + y))
        tol = chain_tol * max(abs(v), 1.0)
        rows.append(BoundRow(
            x=float(x), y=float(y), optimal=v,
            lower=lo, lower_gap=v - lo, lower_gap_pct=100.0 * (v - lo) / v,
            upper=up, upper_gap=v - up, upper_gap_pct=100.0 * (v - up) / v,
            violated=(lo > v + tol) or (v > up + tol),
        ))
    return BoundReport(rows)


def default_worth_grid(grid: Grid) -> np.ndarray:
    """Net-worth nodes at the capital grid's spacing, extended to x+y max."""
    step = float(np.min(np.diff(grid.y_nodes)))
    lo = float(grid.y_nodes[0])
    hi = float(grid.x_nodes[-1] + grid.y_nodes[-1])
    return np.arange(lo, hi + step, step)
