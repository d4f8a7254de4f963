"""Order-up-to thresholds per period via bisection on first-order conditions.

For periods before the last, the two optimal order-up-to levels at net worth
w solve phi(z) = 0 (loan-financed level) and psi(z) = 0 (deposit-financed
level), where phi/psi are the one-sided derivatives of the stage value in z
on the borrowing and depositing branches. Two single-period policies with
modified salvage values bracket the roots from below and above:

* lower: leftover stock is charged only its holding cost (s = -h),
* upper: leftover stock is additionally credited next period's unit cost
  (s = c_next - h), a fictitious liquidation that requires
  c(1+l) + h >= c_next to preclude unbounded stocking.

Both collapse to the plain single-period solution in the final period.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import single_period
from .demand import DEFAULT_QUAD_ORDER
from .dp import DPSolution, Grid, ValueTable, backward_induct, partials
from .model import HorizonSpec, normalized_params, require_valid


class BracketError(RuntimeError):
    """A myopic bracket fails to enclose the root beyond tolerance."""


class MyopicPair(NamedTuple):
    borrow: float
    deposit: float
    ratios: single_period.CriticalRatios
    degenerate: bool


def _myopic_pair(horizon: HorizonSpec, n: int, salvage: float) -> MyopicPair:
    params = horizon.period(n)
    ratios = single_period.fractiles(params, salvage)
    bands = single_period.order_bands(ratios, horizon.demand_in(n))
    degenerate = ratios.deposit >= 1.0 - 1e-12 or ratios.borrow <= 0.0
    return MyopicPair(bands.borrow, bands.deposit, ratios, degenerate)


def myopic_lower(horizon: HorizonSpec, n: int) -> MyopicPair:
    """Holding-cost-only single-period levels; bound the true levels below."""
    salvage = -horizon.period(n).holding if n < horizon.n_periods else horizon.salvage
    return _myopic_pair(horizon, n, salvage)


def myopic_upper(horizon: HorizonSpec, n: int) -> MyopicPair:
    """Liquidation-credit single-period levels; bound the true levels above."""
    if n >= horizon.n_periods:
        return _myopic_pair(horizon, n, horizon.salvage)
    params = horizon.period(n)
    c_next = horizon.period(n + 1).cost
    if params.cost * (1.0 + params.loan_rate) + params.holding < c_next - 1e-12:
        raise ValueError(
            f"period {n}: liquidation credit needs c(1+l)+h >= c_next "
            f"({params.cost * (1.0 + params.loan_rate) + params.holding} < {c_next})"
        )
    return _myopic_pair(horizon, n, c_next - params.holding)


def _stage_slope(cand, worth, n, horizon, next_table: ValueTable, rate, order):
    """dG/dz at z = cand, holding the bank branch fixed at `rate`.

    = E[(dV/dx' - (p'+h') dV/dy') 1{cand > D}] - (c' rate - p') E[dV/dy'].
    """
    pp, hp, cp = normalized_params(horizon, n)
    cand = np.atleast_1d(np.asarray(cand, dtype=float))
    worth = np.atleast_1d(np.asarray(worth, dtype=float))
    nodes, w = horizon.demand_in(n).expectation_nodes(cand, order)
    leftover = np.maximum(cand[:, None] - nodes, 0.0)
    y_next = pp * cand[:, None] - (pp + hp) * leftover + (cp * (worth - cand) * rate)[:, None]
    vx, vy = partials(next_table, leftover, y_next)
    below = nodes < cand[:, None]
    term1 = np.sum(w * below * (vx - (pp + hp) * vy), axis=1)
    term2 = (cp * rate - pp) * np.sum(w * vy, axis=1)
    return term1 - term2


def stage_slope_borrowing(cand, worth, n, horizon, next_table,
                          order=DEFAULT_QUAD_ORDER):
    """Stage-value derivative in z on the loan branch; its root is the
    loan-financed order-up-to level."""
    out = _stage_slope(cand, worth, n, horizon, next_table,
                       1.0 + horizon.period(n).loan_rate, order)
    return out if np.ndim(cand) else float(out[0])


def stage_slope_deposit(cand, worth, n, horizon, next_table,
                        order=DEFAULT_QUAD_ORDER):
    """Stage-value derivative in z on the deposit branch; its root is the
    deposit-financed order-up-to level."""
    out = _stage_slope(cand, worth, n, horizon, next_table,
                       1.0 + horizon.period(n).deposit_rate, order)
    return out if np.ndim(cand) else float(out[0])


def bisection_iterations(width: float, epsilon: float) -> int:
    """Midpoint evaluations needed to pin the root within epsilon."""
    if width <= epsilon:
        return 1
    return int(np.ceil(np.log2(width / epsilon)))


def _bisect(slope, lo: float, hi: float, epsilon: float, m: int) -> tuple[np.ndarray, int]:
    # midpoint-first bisection: after k halvings the midpoint is within
    # (hi-lo)/2^k of the root, so exactly ceil(log2(width/eps)) iterations
    a = np.full(m, lo)
    b = np.full(m, hi)
    n_iter = bisection_iterations(hi - lo, epsilon)
    for it in range(n_iter):
        c = 0.5 * (a + b)
        if it == n_iter - 1:
            return c, n_iter
        positive = slope(c) > 0.0
        a = np.where(positive, c, a)
        b = np.where(positive, b, c)
    return 0.5 * (a + b), n_iter


def _check_bracket(label, n, worth, lo_vals, hi_vals, tol):
    # signs must be phi(lo) >= 0 >= phi(hi), up to a share of the total swing
    swing = np.maximum(np.abs(lo_vals - hi_vals), 1e-12)
    bad_lo = -lo_vals > tol * swing
    bad_hi = hi_vals > tol * swing
    if np.any(bad_lo) or np.any(bad_hi):
        k = int(np.argmax(np.where(bad_lo, -lo_vals, 0.0) + np.where(bad_hi, hi_vals, 0.0)))
        raise BracketError(
            f"period {n}, {label} level: slope at bracket ends has wrong sign at "
            f"net worth {worth[k]:.4g} (lo {lo_vals[k]:.4g}, hi {hi_vals[k]:.4g}); "
            "the value grid is likely too coarse"
        )


@dataclass(eq=False)
class PeriodThresholds:
    n: int
    worth: np.ndarray
    borrow: np.ndarray
    deposit: np.ndarray
    lower: MyopicPair
    upper: MyopicPair
    borrow_iterations: int
    deposit_iterations: int

    def bands_at(self, worth):
        worth = np.asarray(worth, dtype=float)
        return (
            np.interp(worth, self.worth, self.borrow),
            np.interp(worth, self.worth, self.deposit),
        )


@dataclass(eq=False)
class ThresholdTable:
    horizon: HorizonSpec
    periods: list[PeriodThresholds]

    def period(self, n: int) -> PeriodThresholds:
        return self.periods[n - 1]


def worth_grid(grid: Grid) -> np.ndarray:
    """Deduplicated union of x + y node sums."""
    sums = (grid.x_nodes[:, None] + grid.y_nodes[None, :]).ravel()
    return np.unique(np.round(sums, 9))


def solve_thresholds(horizon: HorizonSpec, grid: Grid, *, solution: DPSolution | None = None,
                     epsilon: float = 1e-3, order: int = DEFAULT_QUAD_ORDER,
                     bracket_tol: float = 0.05) -> ThresholdTable:
    """Tabulate both order-up-to levels on the net-worth grid by bisection.

    The final period's levels come from the closed form and are constant in
    net worth; every earlier period bisects phi/psi between the myopic
    brackets, per net-worth node.
    """
    require_valid(horizon)
    if solution is None:
        solution = backward_induct(horizon, grid, order=order)
    worth = worth_grid(grid)
    m = len(worth)
    n_last = horizon.n_periods
    pair_n = myopic_lower(horizon, n_last)  # salvage convention: plain single period
    rows: list = [None] * n_last
    rows[-1] = PeriodThresholds(
        n_last, worth, np.full(m, pair_n.borrow), np.full(m, pair_n.deposit),
        pair_n, pair_n, 0, 0,
    )
    for n in range(n_last - 1, 0, -1):
        lower = myopic_lower(horizon, n)
        upper = myopic_upper(horizon, n)
        next_table = solution.value(n + 1)

        def phi(c, _n=n, _t=next_table):
            return stage_slope_borrowing(c, worth, _n, horizon, _t, order)

        def psi(c, _n=n, _t=next_table):
            return stage_slope_deposit(c, worth, _n, horizon, _t, order)

        _check_bracket("borrow", n, worth, phi(np.full(m, lower.borrow)),
                       phi(np.full(m, upper.borrow)), bracket_tol)
        _check_bracket("deposit", n, worth, psi(np.full(m, lower.deposit)),
                       psi(np.full(m, upper.deposit)), bracket_tol)
        borrow, it_b = _bisect(phi, lower.borrow, upper.borrow, epsilon, m)
        deposit, it_d = _bisect(psi, lower.deposit, upper.deposit, epsilon, m)
        rows[n - 1] = PeriodThresholds(n, worth, borrow, deposit, lower, upper, it_b, it_d)
    return ThresholdTable(horizon, rows)


def policy_from_thresholds(table: ThresholdTable, x, y, n: int):
    """Order quantity of the two-threshold rule at net worth x + y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    borrow, deposit = table.period(n).bands_at(x + y)
    worth = x + y
    q = np.where(
        worth >= deposit,
        np.maximum(deposit - x, 0.0),
        np.where(worth >= borrow, np.maximum(y, 0.0), np.maximum(borrow - x, 0.0)),
    )
    return q if q.ndim else float(q)
