"""Lagrangian relaxation for the vehicle-charger assignment.

The one-vehicle-per-charger constraint (P2), or one-charger-per-vehicle
constraint (P2J), is priced into the objective with nonnegative multipliers.
The relaxed problem then separates: every vehicle (P2) or charger (P2J) just
picks its cheapest reachable partner. Each iteration repairs that choice into
a feasible matching, improves it by local search, and moves the multipliers
along the subgradient.
"""
from __future__ import annotations

import csv
import io
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .model import P2, P2J, AssignmentInfeasible, AssignmentProblem, AssignmentSolution, make_solution

_IMPROVE_TOL = 1e-9


class UnrepairableError(AssignmentInfeasible):
    """The repair heuristic could not complete a feasible matching."""


@dataclass(frozen=True)
class LrConfig:
    delta: float = 0.6
    gap_tol: Optional[float] = None  # None: 1e-4 below 1000 vehicles, 5e-3 from 1000 on
    max_iter: int = 2000
    initial_lambda: Optional[tuple] = None

    def __post_init__(self):
        if not 0 < self.delta <= 2:
            raise ValueError("delta must lie in (0, 2]")
        if self.gap_tol is not None and self.gap_tol <= 0:
            raise ValueError("gap_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.initial_lambda is not None and min(self.initial_lambda, default=0) < 0:
            raise ValueError("initial multipliers must be nonnegative")

    def tolerance_for(self, n_vehicles: int) -> float:
        if self.gap_tol is not None:
            return self.gap_tol
        return 1e-4 if n_vehicles < 1000 else 5e-3


@dataclass(frozen=True)
class LrRecord:
    k: int
    z_lb: float
    z_ub: float
    best_lb: float
    best_ub: float
    gap: float
    step: float


@dataclass
class LrTrace:
    records: List[LrRecord] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def final_gap(self) -> float:
        return self.records[-1].gap if self.records else math.inf

    @property
    def best_lb(self) -> float:
        return self.records[-1].best_lb if self.records else -math.inf

    @property
    def best_ub(self) -> float:
        return self.records[-1].best_ub if self.records else math.inf

    def __len__(self):
        return len(self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "z_lb", "z_ub", "best_lb", "best_ub", "gap", "t_k"])
        for r in self.records:
            w.writerow([r.k, repr(r.z_lb), repr(r.z_ub), repr(r.best_lb), repr(r.best_ub), repr(r.gap), repr(r.step)])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class LbMatching:
    """Solution of the relaxed problem.

    ``choice`` holds a charger per vehicle in P2 mode and a vehicle per charger
    in P2J mode; ``load`` is the number of picks each relaxed-side entity
    received, minus one (the subgradient).
    """
    mode: str
    choice: np.ndarray
    z_lb: float
    load: np.ndarray

    def violated(self) -> bool:
        return bool((self.load > 0).any())


def lb_greedy(problem: AssignmentProblem, lam, mode: str | None = None):
    """Optimal solution of the relaxed problem at multipliers ``lam``; returns ``(LbMatching, z_lb)``."""
    mode = mode or problem.mode
    lam = np.asarray(lam, dtype=float)
    C = problem.masked_costs
    if mode == P2:
        if lam.shape != (problem.n_chargers,):
            raise ValueError("P2 multipliers are indexed by charger")
        priced = C + lam[None, :]
        choice = np.argmin(priced, axis=1)
        vals = priced[np.arange(problem.n_vehicles), choice]
        stuck = np.flatnonzero(~np.isfinite(vals))
        if stuck.size:
            ids = [problem.vehicles[i].id for i in stuck]
            raise AssignmentInfeasible(f"vehicles with no reachable charger: {ids}", vehicles=ids)
        load = np.bincount(choice, minlength=problem.n_chargers) - 1
    elif mode == P2J:
        if lam.shape != (problem.n_vehicles,):
            raise ValueError("P2J multipliers are indexed by vehicle")
        priced = C + lam[:, None]
        choice = np.argmin(priced, axis=0)
        vals = priced[choice, np.arange(problem.n_chargers)]
        stuck = np.flatnonzero(~np.isfinite(vals))
        if stuck.size:
            ids = [problem.chargers[j].id for j in stuck]
            raise AssignmentInfeasible(f"chargers no vehicle can reach: {ids}", chargers=ids)
        load = np.bincount(choice, minlength=problem.n_vehicles) - 1
    else:
        raise ValueError(f"unknown mode {mode!r}")
    z = float(vals.sum() - lam.sum())
    lb = LbMatching(mode, choice, z, load)
    return lb, z


def subgradient_update(lam, lb_matching: LbMatching, z_ub: float, z_lb: float, delta: float):
    """One projected subgradient step; returns ``(new_lambda, step)``.

    A zero subgradient (the relaxed solution is already a matching) leaves the
    multipliers unchanged with step 0.
    """
    lam = np.asarray(lam, dtype=float)
    g = lb_matching.load.astype(float)
    denom = float(g @ g)
    if denom == 0.0:
        return lam.copy(), 0.0
    step = delta * (z_ub - z_lb) / denom
    return np.maximum(lam + step * g, 0.0), step


# -- repair ------------------------------------------------------------------

def _augment_from(start: int, adj: np.ndarray, left_of_right: np.ndarray, right_of_left: np.ndarray) -> bool:
    """Extend the matching to cover left node ``start`` along an alternating path (BFS, index order)."""
    parent = {}
    seen_right = np.zeros(adj.shape[1], dtype=bool)
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for r in np.flatnonzero(adj[u] & ~seen_right):
            seen_right[r] = True
            parent[r] = u
            if left_of_right[r] < 0:
                while True:
                    left = parent[r]
                    prev = right_of_left[left]
                    left_of_right[r] = left
                    right_of_left[left] = r
                    if left == start:
                        return True
                    r = prev
            queue.append(int(left_of_right[r]))
    return False


def _swap_search(C: np.ndarray, chg_of: np.ndarray) -> bool:
    """Exchange chargers between pairs of assigned vehicles while that lowers total cost (first improvement).

    Returns whether any exchange was made.
    """
    assigned = np.flatnonzero(chg_of >= 0)
    any_change = False
    while True:
        changed = False
        for p in range(assigned.size - 1):
            i1 = assigned[p]
            rest = assigned[p + 1:]
            while True:
                j1 = chg_of[i1]
                js = chg_of[rest]
                with np.errstate(invalid="ignore"):
                    gain = C[i1, j1] + C[rest, js] - C[i1, js] - C[rest, j1]
                hit = np.flatnonzero(gain > _IMPROVE_TOL)
                if hit.size == 0:
                    break
                i2 = rest[hit[0]]
                chg_of[i1], chg_of[i2] = chg_of[i2], j1
                changed = any_change = True
        if not changed:
            return any_change


def _repair_p2(problem: AssignmentProblem, choice: np.ndarray) -> np.ndarray:
    C = problem.masked_costs
    e = problem.energies
    nI, nJ = problem.n_vehicles, problem.n_chargers
    chg_of = np.full(nI, -1, dtype=np.int64)
    veh_of = np.full(nJ, -1, dtype=np.int64)
    pool = []
    # the least-charged vehicle on each charger keeps it
    for i in np.lexsort((np.arange(nI), e)):
        j = choice[i]
        if veh_of[j] < 0:
            veh_of[j], chg_of[i] = i, j
        else:
            pool.append(i)
    for i in pool:  # already in ascending energy order
        row = np.where(veh_of < 0, C[i], np.inf)
        j = int(np.argmin(row))
        if np.isfinite(row[j]):
            veh_of[j], chg_of[i] = i, j
        elif not _augment_from(i, problem.reachable, veh_of, chg_of):
            ids = [problem.vehicles[k].id for k in np.flatnonzero(chg_of < 0)]
            raise UnrepairableError(f"cannot place vehicles {ids} on reachable free chargers", vehicles=ids)
    _swap_search(C, chg_of)
    return chg_of


def _repair_p2j(problem: AssignmentProblem, choice: np.ndarray) -> np.ndarray:
    C = problem.masked_costs
    e = problem.energies
    nI, nJ = problem.n_vehicles, problem.n_chargers
    chg_of = np.full(nI, -1, dtype=np.int64)
    veh_of = np.full(nJ, -1, dtype=np.int64)
    # a vehicle picked by several chargers keeps its cheapest one
    picked = C[choice, np.arange(nJ)]
    for j in np.lexsort((np.arange(nJ), picked)):
        i = choice[j]
        if chg_of[i] < 0:
            chg_of[i], veh_of[j] = j, i

    if (veh_of < 0).any():
        idle = np.flatnonzero(chg_of < 0)
        for i in idle[np.lexsort((idle, e[idle]))]:
            row = np.where(veh_of < 0, C[i], np.inf)
            j = int(np.argmin(row))
            if np.isfinite(row[j]):
                veh_of[j], chg_of[i] = i, j
                if not (veh_of < 0).any():
                    break

    popped = set()
    while (veh_of < 0).any():
        holders = [i for i in np.flatnonzero(chg_of >= 0) if i not in popped]
        if not holders:
            break
        top = max(holders, key=lambda i: (e[i], -i))
        popped.add(top)
        veh_of[chg_of[top]] = -1
        chg_of[top] = -1
        while (veh_of < 0).any():
            U = np.flatnonzero(chg_of < 0)
            F = np.flatnonzero(veh_of < 0)
            sub = C[np.ix_(U, F)]
            k = int(np.argmin(sub))
            a, b = divmod(k, F.size)
            if not np.isfinite(sub[a, b]):
                break
            chg_of[U[a]], veh_of[F[b]] = F[b], U[a]

    for j in np.flatnonzero(veh_of < 0):
        if not _augment_from(j, problem.reachable.T, chg_of, veh_of):
            ids = [problem.chargers[k].id for k in np.flatnonzero(veh_of < 0)]
            raise UnrepairableError(f"no reachable vehicle left for chargers {ids}", chargers=ids)

    # bring in an unassigned vehicle wherever it is cheaper than the incumbent,
    # alternating with charger exchanges among assigned vehicles
    while True:
        changed = False
        for u in np.flatnonzero(chg_of < 0):
            incumbents = veh_of
            gain = C[incumbents, np.arange(nJ)] - C[u]
            hit = np.flatnonzero(gain > _IMPROVE_TOL)
            if hit.size:
                j = hit[0]
                out = veh_of[j]
                chg_of[out] = -1
                veh_of[j], chg_of[u] = u, j
                changed = True
        if _swap_search(C, chg_of):
            veh_of[chg_of[chg_of >= 0]] = np.flatnonzero(chg_of >= 0)
            changed = True
        if not changed:
            break
    return chg_of


def _repair(problem: AssignmentProblem, lb: LbMatching) -> np.ndarray:
    if lb.mode == P2:
        return _repair_p2(problem, lb.choice)
    return _repair_p2j(problem, lb.choice)


def ub_repair(problem: AssignmentProblem, lb_matching: LbMatching, mode: str | None = None) -> AssignmentSolution:
    """Turn a relaxed solution into a feasible matching and improve it by local search."""
    if mode is not None and mode != lb_matching.mode:
        raise ValueError("mode does not match the relaxed solution")
    chg_of = _repair(problem, lb_matching)
    return make_solution(problem, {int(i): int(j) for i, j in enumerate(chg_of) if j >= 0})


def solve_lr(problem: AssignmentProblem, config: LrConfig | None = None, mode: str | None = None):
    """Subgradient Lagrangian loop; returns the best feasible solution and the iteration trace."""
    config = config or LrConfig()
    mode = mode or problem.mode
    if mode == P2 and problem.n_vehicles > problem.n_chargers:
        raise ValueError("P2 needs |I| <= |J|")
    if mode == P2J and problem.n_vehicles <= problem.n_chargers:
        raise ValueError("P2J needs |I| > |J|")
    start = time.perf_counter()
    trace = LrTrace()
    if problem.n_vehicles == 0:
        return make_solution(problem, {}), trace

    size = problem.n_chargers if mode == P2 else problem.n_vehicles
    lam = (np.zeros(size) if config.initial_lambda is None
           else np.asarray(config.initial_lambda, dtype=float))
    if lam.shape != (size,):
        raise ValueError(f"initial_lambda must have length {size}")
    tol = config.tolerance_for(problem.n_vehicles)
    C = problem.masked_costs
    best_lb, best_ub, best_match = -math.inf, math.inf, None

    for k in range(config.max_iter):
        lb, z_lb = lb_greedy(problem, lam, mode)
        best_lb = max(best_lb, z_lb)
        chg_of = _repair(problem, lb)
        rows = np.flatnonzero(chg_of >= 0)
        z_ub = float(C[rows, chg_of[rows]].sum())
        if z_ub < best_ub:
            best_ub, best_match = z_ub, chg_of.copy()
        gap = (best_ub - best_lb) / best_ub if best_ub > 0 else 0.0
        gap = max(gap, 0.0)
        lam, step = subgradient_update(lam, lb, best_ub, best_lb, config.delta)
        trace.records.append(LrRecord(k, z_lb, z_ub, best_lb, best_ub, gap, step))
        if gap <= tol or not lb.load.any():
            break

    trace.wall_time = time.perf_counter() - start
    sol = make_solution(problem, {int(i): int(j) for i, j in enumerate(best_match) if j >= 0})
    return sol, trace
