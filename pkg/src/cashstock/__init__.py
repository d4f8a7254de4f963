"""Optimal joint ordering and financing for cash-constrained inventory.

A finite-horizon, single-product model where orders can be financed by cash
on hand or a loan, idle cash earns deposit interest, and the objective is
expected terminal wealth. Provides the single-period closed form, grid
dynamic programming, threshold computation by bisection, value-function
bounds, model extensions, Monte Carlo policy evaluation, and a CLI.
"""

from .demand import Demand, DiscreteEmpirical, Uniform, ZeroInflatedPoisson
from .model import (
    HorizonSpec,
    InvalidHorizonError,
    PeriodParams,
    State,
    ValidationReport,
    normalized_params,
    validate,
)
from .single_period import (
    CriticalRatios,
    OrderBands,
    expected_value_G,
    fractiles,
    optimal_order,
    speculation_value,
    order_bands,
    value_closed_form,
)
from .dp import (
    DPSolution,
    Grid,
    GridEscapeError,
    PolicyTable,
    ValueTable,
    backward_induct,
    partials,
    policy_value_tables,
    stage_value,
    suggest_grid,
    terminal_value,
    transition,
    value_at,
)
from .thresholds import (
    BracketError,
    MyopicPair,
    ThresholdTable,
    myopic_lower,
    myopic_upper,
    policy_from_thresholds,
    solve_thresholds,
    stage_slope_borrowing,
    stage_slope_deposit,
)
from .bounds import (
    BoundReport,
    WorthValueTable,
    compare_bounds,
    liquidation_value,
    selling_back_dp,
    xi_transition,
)
from .extensions import (
    BackorderParams,
    LoanLimit,
    PiecewiseRateSchedule,
    ThresholdLadder,
    backorder_dp,
    backorder_grid,
    loan_limited_dp,
    loan_limited_policy,
    piecewise_dp,
    piecewise_optimal_order,
    piecewise_thresholds,
)
from .sim import (
    GapRow,
    MyopicPolicy,
    SimResult,
    SinglePeriodPolicy,
    ThresholdPolicy,
    gap_report,
    run_policy,
)

__version__ = "0.1.0"
