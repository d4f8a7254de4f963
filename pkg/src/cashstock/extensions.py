"""Model extensions: tiered interest schedules, loan limits, backorders.

Each keeps the two-threshold structure of the base model. Tiered rates turn
the single pair of order-up-to levels into ladders (one level per rate
tier); a loan limit caps the feasible order; backordering carries unmet
demand as negative stock at a per-unit penalty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import single_period
from .demand import DEFAULT_QUAD_ORDER, Demand
from .dp import (
    DPSolution,
    Grid,
    PolicyTable,
    ValueTable,
    backward_induct,
    golden_max,
)
from .model import HorizonSpec, PeriodParams, require_valid


# ---------------------------------------------------------------------------
# piecewise-linear interest schedules


@dataclass(frozen=True)
class PiecewiseRateSchedule:
    """Tiered rates applied to the whole balance of the tier it falls in.

    Loan tier m covers amounts in (loan_breaks[m-1], loan_breaks[m]] with
    rate loan_rates[m]; the last tier is unbounded. Deposit tiers likewise.
    Loan rates increase strictly; deposit rates are nondecreasing and all
    sit below the cheapest loan rate.
    """

    loan_rates: tuple[float, ...]
    loan_breaks: tuple[float, ...] = ()
    deposit_rates: tuple[float, ...] = (0.0,)
    deposit_breaks: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.loan_breaks) != len(self.loan_rates) - 1:
            raise ValueError("need one loan break between consecutive loan tiers")
        if len(self.deposit_breaks) != len(self.deposit_rates) - 1:
            raise ValueError("need one deposit break between consecutive deposit tiers")
        if any(np.diff(self.loan_rates) <= 0):
            raise ValueError("loan rates must increase strictly across tiers")
        if any(np.diff(self.deposit_rates) < 0):
            raise ValueError("deposit rates must be nondecreasing across tiers")
        for breaks in (self.loan_breaks, self.deposit_breaks):
            if any(b <= 0 for b in breaks) or any(np.diff(breaks) <= 0):
                raise ValueError("tier breaks must be positive and increasing")
        if max(self.deposit_rates) >= self.loan_rates[0]:
            raise ValueError("every deposit rate must sit below the cheapest loan rate")

    def loan_rate(self, amount):
        # a balance exactly at a break takes the cheaper tier
        idx = np.searchsorted(np.asarray(self.loan_breaks), np.asarray(amount), side="left")
        return np.asarray(self.loan_rates)[np.minimum(idx, len(self.loan_rates) - 1)]

    def deposit_rate(self, amount):
        # a balance exactly at a break takes the richer tier; together with the
        # loan convention this makes the bank term upper semicontinuous, so
        # optimal orders are attained rather than approached
        idx = np.searchsorted(np.asarray(self.deposit_breaks), np.asarray(amount), side="right")
        return np.asarray(self.deposit_rates)[np.minimum(idx, len(self.deposit_rates) - 1)]

    def bank_flow(self, amount):
        """End-of-period value of a signed bank position (currency)."""
        amount = np.asarray(amount, dtype=float)
        rate = np.where(amount >= 0.0, self.deposit_rate(amount), self.loan_rate(-amount))
        return amount * (1.0 + rate)


@dataclass(frozen=True)
class ThresholdLadder:
    """Per-tier order-up-to levels for a tiered rate schedule."""

    borrow_levels: tuple[float, ...]    # one per loan tier, nonincreasing
    deposit_levels: tuple[float, ...]   # one per deposit tier, nonincreasing
    deposit_floor: float                # level at the top deposit rate


def piecewise_thresholds(params: PeriodParams, salvage: float,
                         schedule: PiecewiseRateSchedule, demand: Demand) -> ThresholdLadder:
    """Demand quantiles of the per-tier critical ratios, clipped into [0, 1].

    A loan tier whose rate makes ordering unprofitable gets level 0.
    """
    span = params.price - salvage
    if span <= 0:
        raise ValueError("salvage must be below price")

    def level(rate):
        ratio = (params.price - params.cost * (1.0 + rate)) / span
        return float(demand.quantile(min(max(ratio, 0.0), 1.0)))

    borrow = tuple(level(r) for r in schedule.loan_rates)
    deposit = tuple(level(r) for r in schedule.deposit_rates)
    return ThresholdLadder(borrow, deposit, level(max(schedule.deposit_rates)))


def _piecewise_G(q, x, y, params: PeriodParams, salvage: float,
                 schedule: PiecewiseRateSchedule, demand: Demand):
    z = x + np.asarray(q, dtype=float)
    revenue = params.price * z - (params.price - salvage) * demand.loss(z)
    return revenue + schedule.bank_flow(params.cost * (y - np.asarray(q)))


def piecewise_optimal_order(x: float, y: float, params: PeriodParams, salvage: float,
                            schedule: PiecewiseRateSchedule, demand: Demand,
                            ladder: ThresholdLadder | None = None) -> float:
    """Maximize the tiered single-period objective exactly.

    On each tier the objective is concave with interior optimum at that
    tier's order-up-to level, so the global maximizer is found among the
    tier-clamped levels, the tier boundaries, zero, and full cash use.
    """
    if ladder is None:
        ladder = piecewise_thresholds(params, salvage, schedule, demand)
    c = params.cost
    cands = [0.0, max(y, 0.0)]
    # deposit tiers: amount c(y - q) in (brk[k-1], brk[k]]
    dep_edges = [0.0, *schedule.deposit_breaks, np.inf]
    for k, lvl in enumerate(ladder.deposit_levels):
        q_lo = y - dep_edges[k + 1] / c if np.isfinite(dep_edges[k + 1]) else 0.0
        q_hi = y - dep_edges[k] / c
        if q_hi < 0:
            continue
        cands.append(float(np.clip(lvl - x, max(q_lo, 0.0), q_hi)))
    # loan tiers: amount c(q - y) in (brk[m-1], brk[m]]; rolling existing
    # debt (y < 0) counts toward the tier balance
    loan_edges = [0.0, *schedule.loan_breaks, np.inf]
    for m, lvl in enumerate(ladder.borrow_levels):
        q_lo = max(y + loan_edges[m] / c, 0.0)
        q_hi = y + loan_edges[m + 1] / c if np.isfinite(loan_edges[m + 1]) else np.inf
        if q_hi < q_lo:
            continue
        hi = q_hi if np.isfinite(q_hi) else max(lvl - x, q_lo)
        cands.append(float(np.clip(lvl - x, q_lo, hi)))
    qs = np.unique(np.maximum(np.asarray(cands, dtype=float), 0.0))
    vals = _piecewise_G(qs, x, y, params, salvage, schedule, demand)
    best = vals.max()
    return float(qs[vals >= best - 1e-9 * (1.0 + abs(best))][0])


def piecewise_dp(horizon: HorizonSpec, schedule: PiecewiseRateSchedule, grid: Grid, *,
                 z_tol: float = 1e-3, order: int = DEFAULT_QUAD_ORDER) -> DPSolution:
    """Backward induction with the bank term replaced by the tiered schedule.

    The stage value is concave between tier crossings but can jump where the
    balance changes tier, so each tier's z-interval is searched separately.
    """
    require_valid(horizon)
    n_last = horizon.n_periods
    params_n = horizon.period(n_last)
    demand_n = horizon.demand_in(n_last)
    ladder_n = piecewise_thresholds(params_n, horizon.salvage, schedule, demand_n)
    X, Y = grid.mesh()
    q_term = np.vectorize(
        lambda xx, yy: piecewise_optimal_order(
            xx, yy, params_n, horizon.salvage, schedule, demand_n, ladder_n)
    )(X, Y)
    v_term = _piecewise_G(q_term, X, Y, params_n, horizon.salvage, schedule, demand_n)
    values: list = [None] * n_last
    policies: list = [None] * n_last
    values[-1] = ValueTable(n_last, grid, v_term)
    policies[-1] = PolicyTable(n_last, grid, X + q_term)

    from .dp import _expected_next  # shared stage expectation

    x_flat, y_flat = X.ravel(), Y.ravel()
    xi_flat = x_flat + y_flat
    for n in range(n_last - 1, 0, -1):
        next_table = values[n]
        params = horizon.period(n)
        z_max = float(grid.x_nodes[-1] + horizon.demand_in(n).quantile(0.999))

        def f(z, _n=n, _t=next_table):
            return _expected_next(z, xi_flat, horizon, _n, _t, order,
                                  bank=schedule.bank_flow)

        # z-interval edges where the bank balance c(xi - z) crosses a tier break
        edge_sets = [x_flat, np.minimum(np.maximum(xi_flat, x_flat), z_max),
                     np.full_like(x_flat, z_max)]
        for brk in schedule.deposit_breaks:
            edge_sets.append(np.clip(xi_flat - brk / params.cost, x_flat, z_max))
        for brk in schedule.loan_breaks:
            edge_sets.append(np.clip(xi_flat + brk / params.cost, x_flat, z_max))
        edges = np.sort(np.stack(edge_sets), axis=0)
        z_parts, v_parts = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            z_star, v_star = golden_max(f, lo, hi, z_tol, candidates=[lo, hi])
            z_parts.append(z_star)
            v_parts.append(v_star)
        zs, vs = np.stack(z_parts), np.stack(v_parts)
        best_v = vs.max(axis=0)
        tie = best_v - 1e-9 * (1.0 + np.abs(best_v))
        best_z = np.where(vs >= tie, zs, np.inf).min(axis=0)
        values[n - 1] = ValueTable(n, grid, best_v.reshape(grid.shape))
        policies[n - 1] = PolicyTable(n, grid, best_z.reshape(grid.shape))
    return DPSolution(horizon, grid, values, policies)


# ---------------------------------------------------------------------------
# maximum loan limit


@dataclass(frozen=True)
class LoanLimit:
    """Largest loan the bank extends, in currency, with its unit equivalent."""

    amount: float

    def __post_init__(self):
        if self.amount <= 0:
            raise ValueError("loan limit must be positive")

    def units(self, cost: float) -> float:
        return self.amount / cost


def loan_limited_policy(x, y, bands: single_period.OrderBands, limit_units: float):
    """Two-threshold rule with orders capped at cash plus loan capacity.

    Below net worth (borrow level - capacity) the target is out of reach and
    the order is the projection onto the feasible set, q = y^+ + capacity.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    worth = x + y
    q = np.where(
        worth >= bands.deposit,
        np.maximum(bands.deposit - x, 0.0),
        np.where(
            worth >= bands.borrow,
            np.maximum(y, 0.0),
            np.where(
                worth >= bands.borrow - limit_units,
                np.maximum(bands.borrow - x, 0.0),
                np.maximum(y, 0.0) + limit_units,
            ),
        ),
    )
    return q if q.ndim else float(q)


def loan_limited_dp(horizon: HorizonSpec, limit: LoanLimit, grid: Grid, *,
                    z_tol: float = 1e-3, order: int = DEFAULT_QUAD_ORDER) -> DPSolution:
    """Backward induction with the z-search capped at x + y^+ + limit units."""

    def z_cap(x, y, _h=horizon):
        # capacity varies per period only through the unit cost; use the
        # tightest cap so the cap binds conservatively across periods
        units = min(limit.units(p.cost) for p in _h.periods)
        return x + np.maximum(y, 0.0) + units

    return backward_induct(horizon, grid, z_tol=z_tol, order=order, z_cap=z_cap)


# ---------------------------------------------------------------------------
# backorders


@dataclass(frozen=True)
class BackorderParams:
    """Per-unit, per-period penalty on carried unmet demand."""

    penalty: float

    def __post_init__(self):
        if self.penalty < 0:
            raise ValueError("backorder penalty must be nonnegative")


def backorder_revenue(z, d, params: PeriodParams, penalty: float, mean_demand: float,
                      holding: float | None = None):
    """(p+b) z - (p+h+b)(z-d)^+ - b E[D]: period sales value under backlogging."""
    h = params.holding if holding is None else holding
    z = np.asarray(z, dtype=float)
    return ((params.price + penalty) * z
            - (params.price + h + penalty) * np.maximum(z - d, 0.0)
            - penalty * mean_demand)


def _backorder_terminal(horizon: HorizonSpec, b: BackorderParams, grid: Grid):
    """Closed-form terminal tables: the lost-sales solution at price p + b."""
    n = horizon.n_periods
    params, demand = horizon.period(n), horizon.demand_in(n)
    eff = PeriodParams(params.price + b.penalty, params.cost, params.holding,
                       params.deposit_rate, params.loan_rate)
    bands = single_period.order_bands(single_period.fractiles(eff, horizon.salvage), demand)
    X, Y = grid.mesh()
    worth = X + Y
    q = np.where(
        worth >= bands.deposit, np.maximum(bands.deposit - X, 0.0),
        np.where(worth >= bands.borrow, np.maximum(Y, 0.0),
                 np.maximum(bands.borrow - X, 0.0)))
    z = X + q
    rate = np.where(q <= Y, 1.0 + params.deposit_rate, 1.0 + params.loan_rate)
    vals = (
        (params.price + b.penalty) * z
        - (params.price + b.penalty - horizon.salvage) * demand.loss(z)
        - b.penalty * demand.mean()
        + params.cost * (Y - q) * rate
    )
    return ValueTable(n, grid, vals), PolicyTable(n, grid, z), bands


def backorder_grid(horizon: HorizonSpec, base: Grid) -> Grid:
    """Extend the inventory axis to the deepest plausible backlog."""
    d_hi = max(float(horizon.demand_in(n).quantile(0.999))
               for n in range(1, horizon.n_periods + 1))
    depth = d_hi * horizon.n_periods
    step = float(np.min(np.diff(base.x_nodes)))
    neg = np.arange(-depth, 0.0, step)
    return Grid(np.concatenate([neg, base.x_nodes]), base.y_nodes)


@dataclass(eq=False)
class BackorderSolution:
    horizon: HorizonSpec
    grid: Grid
    values: list[ValueTable]
    policies: list[PolicyTable]
    terminal_bands: single_period.OrderBands

    def value(self, n: int) -> ValueTable:
        return self.values[n - 1]

    def policy(self, n: int) -> PolicyTable:
        return self.policies[n - 1]


def backorder_dp(horizon: HorizonSpec, b: BackorderParams, grid: Grid, *,
                 z_tol: float = 1e-3, order: int = DEFAULT_QUAD_ORDER) -> BackorderSolution:
    """Backward induction with backlogged demand: x' = z - D, penalty b.

    The grid's inventory axis must extend below zero (see backorder_grid).
    The post-order level keeps the two-threshold trichotomy in net worth.
    """
    require_valid(horizon)
    from .model import normalized_params

    n_last = horizon.n_periods
    vt, pt, terminal_bands = _backorder_terminal(horizon, b, grid)
    values: list = [None] * n_last
    policies: list = [None] * n_last
    values[-1], policies[-1] = vt, pt
    X, Y = grid.mesh()
    x_flat, y_flat = X.ravel(), Y.ravel()
    xi_flat = x_flat + y_flat
    for n in range(n_last - 1, 0, -1):
        next_table = values[n]
        pp, hp, cp = normalized_params(horizon, n)
        params, demand = horizon.period(n), horizon.demand_in(n)
        c_next = horizon.period(n + 1).cost
        bp = b.penalty / c_next
        mean_d = demand.mean()
        z_max = float(grid.x_nodes[-1] + demand.quantile(0.999))
        dep, loan = 1.0 + params.deposit_rate, 1.0 + params.loan_rate

        def f(z, _t=next_table, _pp=pp, _hp=hp, _cp=cp, _bp=bp):
            z = np.asarray(z, dtype=float)
            nodes, w = demand.expectation_nodes(z, order)
            x_next = z[:, None] - nodes
            bank = _cp * (xi_flat - z) * np.where(z <= xi_flat, dep, loan)
            y_next = ((_pp + _bp) * z[:, None]
                      - (_pp + _hp + _bp) * np.maximum(x_next, 0.0)
                      - _bp * mean_d + bank[:, None])
            return np.sum(_t(x_next, y_next) * w, axis=1)

        eff = PeriodParams(params.price + b.penalty, params.cost,
                           params.holding, params.deposit_rate, params.loan_rate)
        ratios = single_period.fractiles(eff, -params.holding)
        cands = [xi_flat,
                 float(demand.quantile(min(max(ratios.borrow, 0.0), 1.0))),
                 float(demand.quantile(min(max(ratios.deposit, 0.0), 1.0)))]
        z_star, v_star = golden_max(f, x_flat, z_max, z_tol, candidates=cands)
        values[n - 1] = ValueTable(n, grid, v_star.reshape(grid.shape))
        policies[n - 1] = PolicyTable(n, grid, z_star.reshape(grid.shape))
    return BackorderSolution(horizon, grid, values, policies, terminal_bands)


def extract_bands(policy: PolicyTable, *, cell: float | None = None):
    """Empirical (worth, level, regime) rows from a policy table's x = 0 slice.

    Regimes: 'borrow' where the target exceeds net worth, 'deposit' where it
    falls short, 'hold' in the full-utilization band.
    """
    grid = policy.grid
    ix = int(np.argmin(np.abs(grid.x_nodes)))
    worth = grid.x_nodes[ix] + grid.y_nodes
    target = policy.order_up_to[ix, :]
    if cell is None:
        cell = float(np.max(np.diff(grid.y_nodes)))
    regime = np.where(target > worth + cell, "borrow",
                      np.where(target < worth - cell, "deposit", "hold"))
    return worth, target, regime
