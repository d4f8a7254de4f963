import pytest

import cashstock as cs

#: baseline economics shared by the numerical studies
BASE_ECON = dict(price=2000.0, cost=1000.0, holding=500.0, deposit_rate=0.01, loan_rate=0.15)
SALVAGE = 600.0

DEMANDS = {
    "u0_20": cs.Uniform(0, 20),
    "u2_18": cs.Uniform(2, 18),
    "u4_16": cs.Uniform(4, 16),
    "u6_14": cs.Uniform(6, 14),
    "zip18": cs.ZeroInflatedPoisson(0.18, 10),
    "zip09": cs.ZeroInflatedPoisson(0.09, 10),
    "zip02": cs.ZeroInflatedPoisson(0.02, 10),
    "zip00": cs.ZeroInflatedPoisson(0.0, 10),
}


@pytest.fixture(scope="session")
def params():
    return cs.PeriodParams(**BASE_ECON)


@pytest.fixture(scope="session")
def desk_grid():
    return cs.Grid.regular(40, -60, 120, 161, 201)


@pytest.fixture(scope="session")
def small_grid():
    return cs.Grid.regular(40, -60, 120, 41, 51)


def make_horizon(demand_key: str, n_periods: int) -> cs.HorizonSpec:
    return cs.HorizonSpec.stationary(
        n_periods, cs.PeriodParams(**BASE_ECON), DEMANDS[demand_key], SALVAGE)


class SolveCache:
    """Session-wide cache of desk-scale solutions keyed by (demand, N)."""

    def __init__(self, grid):
        self.grid = grid
        self._solutions = {}
        self._policy_values = {}

    def solution(self, demand_key: str, n_periods: int) -> cs.DPSolution:
        key = (demand_key, n_periods)
        if key not in self._solutions:
            self._solutions[key] = cs.backward_induct(
                make_horizon(demand_key, n_periods), self.grid)
        return self._solutions[key]

    def myopic_value(self, demand_key: str, n_periods: int, which: str):
        key = (demand_key, n_periods, which)
        if key not in self._policy_values:
            horizon = make_horizon(demand_key, n_periods)
            tables = cs.policy_value_tables(
                horizon, self.grid, cs.MyopicPolicy(horizon, which))
            self._policy_values[key] = tables[0]
        return self._policy_values[key]


@pytest.fixture(scope="session")
def solve_cache(desk_grid):
    return SolveCache(desk_grid)
