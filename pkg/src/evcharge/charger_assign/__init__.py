"""One-epoch vehicle-charger assignment: exact solver and Lagrangian relaxation."""
from .model import (
    P2,
    P2J,
    AssignmentInfeasible,
    AssignmentProblem,
    AssignmentSolution,
    ChargerState,
    ReachabilityError,
    VehicleState,
    check_solution,
    derive_yw,
    make_solution,
    objective,
    pair_cost,
    reachable_chargers,
)
from .exact import brute_force_assignment, solve_exact
from .lagrangian import (
    LbMatching,
    LrConfig,
    LrTrace,
    UnrepairableError,
    lb_greedy,
    solve_lr,
    subgradient_update,
    ub_repair,
)
