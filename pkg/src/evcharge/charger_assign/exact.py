"""Exact vehicle-charger assignment.

With charged energy and waiting time fixed at their tight values the problem
is a rectangular linear assignment over pair costs, with unreachable pairs
forbidden. ``solve_exact`` hands that to scipy's assignment solver;
``brute_force_assignment`` enumerates every injection for small cross-checks.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .model import P2, P2J, AssignmentInfeasible, AssignmentProblem, AssignmentSolution, make_solution


def _check_mode(problem: AssignmentProblem, mode: str | None) -> str:
    mode = mode or problem.mode
    if mode == P2 and problem.n_vehicles > problem.n_chargers:
        raise ValueError("P2 needs |I| <= |J|")
    if mode == P2J and problem.n_vehicles <= problem.n_chargers:
        raise ValueError("P2J needs |I| > |J|")
    if mode not in (P2, P2J):
        raise ValueError(f"unknown mode {mode!r}")
    return mode


def unmatchable(problem: AssignmentProblem, mode: str):
    """Entities on the covering side left out of a maximum reachable matching."""
    graph = csr_matrix(problem.reachable.astype(np.int8))
    if mode == P2:
        match = maximum_bipartite_matching(graph, perm_type="column")
        return [problem.vehicles[i].id for i in np.flatnonzero(match < 0)]
    match = maximum_bipartite_matching(csr_matrix(graph.T), perm_type="column")
    return [problem.chargers[j].id for j in np.flatnonzero(match < 0)]


def _raise_infeasible(problem, mode):
    missing = unmatchable(problem, mode)
    if mode == P2:
        raise AssignmentInfeasible(f"vehicles cannot all reach distinct chargers: {missing}", vehicles=missing)
    raise AssignmentInfeasible(f"chargers cannot all be filled by reachable vehicles: {missing}", chargers=missing)


def _lsa(cost: np.ndarray, allowed: np.ndarray):
    """Min-cost matching saturating the smaller side using only ``allowed`` pairs, or None."""
    try:
        rows, cols = linear_sum_assignment(np.where(allowed, cost, np.inf))
    except ValueError:  # no complete matching over finite entries
        return None
    return rows, cols


def solve_exact(problem: AssignmentProblem, mode: str | None = None,
                tie_break: str | None = "makespan", rel_tol: float = 1e-9) -> AssignmentSolution:
    """Optimal assignment.

    Among equal-cost optima, ``tie_break="makespan"`` keeps the one whose last
    vehicle leaves its charger earliest (found by bisecting on a completion-time
    cap and re-solving). Pass ``None`` to take the first optimum found.
    """
    mode = _check_mode(problem, mode)
    if problem.n_vehicles == 0 or problem.n_chargers == 0:
        if mode == P2J and problem.n_chargers:
            _raise_infeasible(problem, mode)
        return make_solution(problem, {})
    cost = problem.costs
    allowed = problem.reachable
    res = _lsa(cost, allowed)
    if res is None:
        _raise_infeasible(problem, mode)
    rows, cols = res
    best = float(cost[rows, cols].sum())

    if tie_break == "makespan":
        tol = rel_tol * max(1.0, abs(best))
        levels = np.unique(problem.completion[allowed])
        lo, hi = 0, int(np.searchsorted(levels, problem.completion[rows, cols].max()))
        while lo < hi:
            mid = (lo + hi) // 2
            trial = _lsa(cost, allowed & (problem.completion <= levels[mid]))
            if trial is not None and cost[trial].sum() <= best + tol:
                hi = mid
                rows, cols = trial
            else:
                lo = mid + 1
    elif tie_break is not None:
        raise ValueError(f"unknown tie_break {tie_break!r}")
    return make_solution(problem, dict(zip(rows.tolist(), cols.tolist())))


def brute_force_assignment(problem: AssignmentProblem, mode: str | None = None,
                           max_entities: int = 8) -> AssignmentSolution:
    """Enumerate every injection of the smaller side into the larger one."""
    mode = _check_mode(problem, mode)
    nI, nJ = problem.n_vehicles, problem.n_chargers
    if max(nI, nJ) > max_entities:
        raise ValueError("instance too large for enumeration")
    C = problem.masked_costs
    best, best_match = math.inf, None
    if mode == P2:
        for js in itertools.permutations(range(nJ), nI):
            total = sum(C[i, j] for i, j in enumerate(js))
            if total < best:
                best, best_match = total, {i: j for i, j in enumerate(js)}
    else:
        for is_ in itertools.permutations(range(nI), nJ):
            total = sum(C[i, j] for j, i in enumerate(is_))
            if total < best:
                best, best_match = total, {i: j for j, i in enumerate(is_)}
    if best_match is None or not math.isfinite(best):
        _raise_infeasible(problem, mode)
    return make_solution(problem, best_match)
