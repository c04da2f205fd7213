"""Optimal steady-state regulation of disturbed LTI plants.

Synthesizes the disturbance-aware overtaking-optimal controller and the
disturbance-free primal-dual controller, simulates both and evaluates their
transient costs in closed form.
"""
from .casestudy import PowerNetwork, default_gains, run_experiments, table1_network, to_lti
from .controllers import (
    ClosedLoopRealization,
    Form,
    NearOptimalGains,
    OvertakingController,
    build_closed_loop,
    build_S,
    build_T,
    hjb_residual,
    mu_initial_from_lambda,
    synthesize_overtaking,
)
from .errors import (
    AssumptionViolation,
    ConfigError,
    NoStabilizingSolution,
    NotHurwitzS,
    NumericalError,
    SteadyCtlError,
)
from .perf import (
    ExtendedValue,
    GapReport,
    full_tilde_analysis,
    gap_scaling_sweep,
    lin_cost_index,
    near_optimal_index,
    optimal_index,
    performance_gap,
    quad_cost_index,
    zero_gap_check,
)
from .plant import CostWeights, DisturbedLtiSystem, SteadyStateSolution, steady_state_solve
from .sim import SimConfig, Trajectory, simulate

__version__ = "0.1.0"
