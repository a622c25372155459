"""Charging decisions of the three policies, as pure functions of the fleet and charger state."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from ..charger_assign import (
    P2,
    AssignmentInfeasible,
    AssignmentProblem,
    ChargerState,
    LrConfig,
    VehicleState,
    solve_exact,
    solve_lr,
)
from ..charger_assign.exact import unmatchable
from ..core import EPS, VehicleParams

NO_ACTION, WAIT, GO = "none", "wait", "go"


@dataclass(frozen=True)
class ChargerQueueState:
    id: Any
    location: Any
    rate: float
    avail: float  # clock time until which earlier commitments occupy the charger
    present: int = 0  # vehicles physically at the charger (queued or charging)


@dataclass(frozen=True)
class ChargeDecision:
    action: str  # NO_ACTION, WAIT (retry later) or GO
    charger: Optional[int] = None


def _reachable(position, energy: float, chargers: Sequence[ChargerQueueState], params: VehicleParams, metric):
    dist = np.array([metric.distance(position, c.location) for c in chargers])
    return dist, energy - params.drive_efficiency * dist >= params.e_min - EPS


def policy_ns_step(position, energy: float, chargers: Sequence[ChargerQueueState], params: VehicleParams,
                   metric, threshold_frac: float = 0.2) -> ChargeDecision:
    """Below the threshold, head for the nearest reachable charger with nobody at it."""
    if energy >= threshold_frac * params.battery_capacity - EPS:
        return ChargeDecision(NO_ACTION)
    dist, ok = _reachable(position, energy, chargers, params, metric)
    free = ok & np.array([c.present == 0 for c in chargers], dtype=bool)
    if not free.any():
        return ChargeDecision(WAIT)
    return ChargeDecision(GO, int(np.argmin(np.where(free, dist, np.inf))))


def policy_fcfs_step(position, energy: float, now: float, chargers: Sequence[ChargerQueueState],
                     params: VehicleParams, metric, threshold_frac: float = 0.2) -> ChargeDecision:
    """Below the threshold, take the reachable charger with least access plus queueing time."""
    if energy >= threshold_frac * params.battery_capacity - EPS:
        return ChargeDecision(NO_ACTION)
    _, ok = _reachable(position, energy, chargers, params, metric)
    if not ok.any():
        return ChargeDecision(WAIT)
    t = np.array([metric.time(position, c.location) for c in chargers])
    avail = np.array([c.avail for c in chargers])
    score = np.where(ok, t + np.maximum(avail - (now + t), 0.0), np.inf)
    return ChargeDecision(GO, int(np.argmin(score)))


@dataclass(frozen=True)
class BatchVehicle:
    id: Any
    position: Any
    energy: float
    target: float


@dataclass
class BatchResult:
    assignments: List[Tuple[int, int]] = field(default_factory=list)  # (batch index, charger index)
    deferred: List[int] = field(default_factory=list)  # batch indices left for a later epoch
    mode: Optional[str] = None
    n_chargers: int = 0  # chargers offered to the solver
    objective: float = 0.0


def _problem(batch, keep, chargers, now, params, metric, theta1, theta2) -> AssignmentProblem:
    vs = tuple(VehicleState(b.id, b.energy, b.target, b.position) for b in batch)
    cs = tuple(ChargerState(chargers[j].id, chargers[j].rate, max(chargers[j].avail - now, 0.0),
                            chargers[j].location) for j in keep)
    tt, dd = metric.matrices([b.position for b in batch], [chargers[j].location for j in keep])
    return AssignmentProblem(vs, cs, tt, dd, params, theta1, theta2)


def policy_ocp_epoch(batch: Sequence[BatchVehicle], chargers: Sequence[ChargerQueueState], now: float,
                     params: VehicleParams, metric, theta1: float = 1.0, theta2: float = 1.0,
                     method: str = "lr", lr_config: LrConfig | None = None) -> BatchResult:
    """Assign a batch of planned-to-charge vehicles to chargers in one shot.

    Vehicles that no charger can take are deferred, as are the vehicles left
    over when the batch outnumbers the chargers.
    """
    out = BatchResult()
    batch = list(batch)
    if not batch or not chargers:
        out.deferred = list(range(len(batch)))
        return out
    idx = list(range(len(batch)))
    keep = list(range(len(chargers)))
    problem = _problem(batch, keep, chargers, now, params, metric, theta1, theta2)
    blocked = set(unmatchable(problem, problem.mode))
    if blocked:
        if problem.mode == P2:
            out.deferred = [k for k in idx if batch[k].id in blocked]
            idx = [k for k in idx if batch[k].id not in blocked]
        else:
            keep = [j for j in keep if chargers[j].id not in blocked]
        if not idx or not keep:
            out.deferred = list(range(len(batch)))
            return out
        problem = _problem([batch[k] for k in idx], keep, chargers, now, params, metric, theta1, theta2)
    try:
        if method == "exact":
            sol = solve_exact(problem)
        else:
            sol, _ = solve_lr(problem, lr_config)
    except AssignmentInfeasible:
        out.deferred = list(range(len(batch)))
        return out
    out.mode = problem.mode
    out.n_chargers = problem.n_chargers
    out.objective = sol.objective
    out.assignments = [(idx[i], keep[j]) for i, j in sol.pairs()]
    out.deferred += [idx[i] for i in sorted(sol.unassigned_vehicles)]
    return out
