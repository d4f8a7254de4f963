"""Monte Carlo policy evaluation and optimality-gap reporting.

Paths share one stream of uniforms per (seed, path, period), so competing
policies are evaluated under common random numbers and gap estimates stay
low-variance. Demands come from the same inverse transform the distribution
objects use for sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import single_period
from .dp import Grid, backward_induct, policy_value_tables
from .model import HorizonSpec, State, normalized_params, require_valid
from .thresholds import ThresholdTable, myopic_lower, myopic_upper, policy_from_thresholds


@dataclass(frozen=True)
class SimResult:
    mean: float
    half_width: float   # 1.96 sd / sqrt(paths)
    paths: int
    label: str

    def ci(self) -> tuple[float, float]:
        return (self.mean - self.half_width, self.mean + self.half_width)


class Policy:
    """Order-quantity rule q(n, x, y); vectorized over states."""

    label = "policy"

    def order(self, n: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, n, x, y):
        return self.order(n, x, y)


class ThresholdPolicy(Policy):
    def __init__(self, table: ThresholdTable, label: str = "two-threshold"):
        self.table = table
        self.label = label

    def order(self, n, x, y):
        return policy_from_thresholds(self.table, x, y, n)


class MyopicPolicy(Policy):
    """Single-period rule with the modified salvage convention per period."""

    def __init__(self, horizon: HorizonSpec, which: str):
        if which not in ("lower", "upper"):
            raise ValueError("which must be 'lower' or 'upper'")
        pick = myopic_lower if which == "lower" else myopic_upper
        self.pairs = [pick(horizon, n) for n in range(1, horizon.n_periods + 1)]
        self.label = f"myopic-{which}"

    def order(self, n, x, y):
        pair = self.pairs[n - 1]
        worth = x + y
        return np.where(
            worth >= pair.deposit,
            np.maximum(pair.deposit - x, 0.0),
            np.where(worth >= pair.borrow, np.maximum(y, 0.0),
                     np.maximum(pair.borrow - x, 0.0)),
        )


class SinglePeriodPolicy(Policy):
    """Closed-form rule applied with the terminal salvage in every period."""

    def __init__(self, horizon: HorizonSpec):
        self.bands = [
            single_period.order_bands(
                single_period.fractiles(horizon.period(n), horizon.salvage),
                horizon.demand_in(n))
            for n in range(1, horizon.n_periods + 1)
        ]
        self.label = "single-period"

    def order(self, n, x, y):
        return single_period.optimal_order(x, y, self.bands[n - 1])


def run_policy(horizon: HorizonSpec, policy, initial: State, paths: int, seed: int, *,
               antithetic: bool = False, label: str | None = None) -> SimResult:
    """Simulate terminal wealth under `policy` from `initial`; CRN by seed.

    Deterministic for a fixed seed; `antithetic=True` replays the complement
    of the same uniforms.
    """
    require_valid(horizon)
    if paths < 1:
        raise ValueError("need at least one path")
    n_periods = horizon.n_periods
    u = np.random.default_rng(seed).random((paths, n_periods))
    if antithetic:
        u = 1.0 - u
    x = np.full(paths, float(initial.x))
    y = np.full(paths, float(initial.y))
    for n in range(1, n_periods):
        params = horizon.period(n)
        pp, hp, cp = normalized_params(horizon, n)
        q = np.asarray(policy(n, x, y), dtype=float)
        if np.any(q < -1e-9):
            raise ValueError(f"period {n}: policy emitted a negative order quantity")
        q = np.maximum(q, 0.0)
        d = horizon.demand_in(n).quantile(u[:, n - 1])
        z = x + q
        rate = np.where(q <= y, 1.0 + params.deposit_rate, 1.0 + params.loan_rate)
        leftover = np.maximum(z - d, 0.0)
        y = pp * z - (pp + hp) * leftover + cp * (y - q) * rate
        x = leftover
    params = horizon.period(n_periods)
    q = np.asarray(policy(n_periods, x, y), dtype=float)
    if np.any(q < -1e-9):
        raise ValueError(f"period {n_periods}: policy emitted a negative order quantity")
    q = np.maximum(q, 0.0)
    d = horizon.demand_in(n_periods).quantile(u[:, n_periods - 1])
    z = x + q
    rate = np.where(q <= y, 1.0 + params.deposit_rate, 1.0 + params.loan_rate)
    wealth = (params.price * z
              - (params.price - horizon.salvage) * np.maximum(z - d, 0.0)
              + params.cost * (y - q) * rate)
    mean = float(np.mean(wealth))
    half = float(1.96 * np.std(wealth, ddof=1) / np.sqrt(paths)) if paths > 1 else np.inf
    return SimResult(mean, half, paths, label or getattr(policy, "label", "policy"))


@dataclass(frozen=True)
class GapRow:
    """Optimum against both myopic policies at one initial state."""

    demand_label: str
    cv: float
    optimal: float
    lower_value: float
    lower_gap_pct: float
    upper_value: float
    upper_gap_pct: float


def gap_report(horizon: HorizonSpec, grid: Grid, initial: State = State(0.0, 0.0), *,
               solution=None, order=None, demand_label: str = "") -> GapRow:
    """Exact (grid) evaluation of both myopic policies against the optimum.

    Values come from policy-evaluation sweeps on the same grid and
    quadrature as the optimal solution, so discretization bias largely
    cancels in the gaps. Monte Carlo is used as a cross-check in tests, not
    here.
    """
    kwargs = {} if order is None else {"order": order}
    if solution is None:
        solution = backward_induct(horizon, grid, **kwargs)
    v_opt = float(solution.value(1)(initial.x, initial.y))
    values = {}
    for which in ("lower", "upper"):
        tables = policy_value_tables(horizon, grid, MyopicPolicy(horizon, which), **kwargs)
        values[which] = float(tables[0](initial.x, initial.y))
    moments = horizon.demand_in(1).moments()
    return GapRow(
        demand_label=demand_label or horizon.demand_in(1).label,
        cv=moments.cv,
        optimal=v_opt,
        lower_value=values["lower"],
        lower_gap_pct=100.0 * (v_opt - values["lower"]) / v_opt,
        upper_value=values["upper"],
        upper_gap_pct=100.0 * (v_opt - values["upper"]) / v_opt,
    )


def spawn_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent generators derived from a master seed by stream index."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
