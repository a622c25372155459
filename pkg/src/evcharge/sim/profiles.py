"""Per-vehicle driving and queueing profiles from reference runs, and the charge plans built on them."""
from __future__ import annotations

from typing import Dict, Iterable, Mapping, Sequence

import numpy as np

from ..core import EpochGrid, EpochProfile
from ..recharge_plan import ChargePlan, RechargeProblem, expected_demand, solve_p1
from .scenario import Scenario


def _overlap_by_epoch(grid: EpochGrid, a: float, b: float) -> np.ndarray:
    """Minutes of ``[a, b)`` falling in each epoch."""
    starts = grid.horizon_start + grid.epoch_length * np.arange(grid.epoch_count)
    ends = starts + grid.epoch_length
    return np.clip(np.minimum(ends, b) - np.maximum(starts, a), 0.0, None)


def estimate_profiles(logs: Sequence[Sequence[dict]], grid: EpochGrid, price, earn_rate: float,
                      vehicle_ids: Iterable | None = None) -> Dict[str, EpochProfile]:
    """Driving probability per vehicle and epoch, plus the fleet-wide mean charger wait per epoch.

    Only legs serving customers count as driving. The wait is pooled over
    the fleet because single vehicles charge too rarely to estimate it; epochs
    without any charger arrival get 0.
    """
    if not logs:
        raise ValueError("need at least one run log")
    if vehicle_ids is None:
        vehicle_ids = sorted({r["vehicle"] for log in logs for r in log if r["kind"] == "vehicle-final"})
    vehicle_ids = list(vehicle_ids)
    H = grid.epoch_count
    drive = {v: np.zeros(H) for v in vehicle_ids}
    wait_sum, wait_n = np.zeros(H), np.zeros(H)
    for log in logs:
        for rec in log:
            if rec["kind"] == "stop-arrival" and rec["vehicle"] in drive:
                drive[rec["vehicle"]] += _overlap_by_epoch(grid, rec["depart"], rec["time"])
            elif rec["kind"] == "charger-arrival":
                h = grid.epoch_of(rec["time"])
                if h is not None:
                    wait_sum[h - 1] += rec["wait"]
                    wait_n[h - 1] += 1
    expected_wait = np.divide(wait_sum, wait_n, out=np.zeros(H), where=wait_n > 0)
    prices = tuple(price) if np.ndim(price) else (float(price),) * H
    return {v: EpochProfile(tuple(np.clip(drive[v] / (len(logs) * grid.epoch_length), 0.0, 1.0)),
                            tuple(expected_wait), prices, earn_rate)
            for v in vehicle_ids}


def build_plans(scenario: Scenario, profiles: Mapping[str, EpochProfile],
                energy_step: float = 0.1) -> Dict[str, ChargePlan]:
    """Cheapest recharge plan for each vehicle given its profile."""
    plans = {}
    for fv in scenario.vehicles:
        prof = profiles[fv.id]
        problem = RechargeProblem(
            grid=scenario.grid,
            params=scenario.params,
            profile=prof,
            demand=expected_demand(prof, scenario.grid, scenario.params),
            fixed_cost=scenario.fixed_cost,
            initial_energy=fv.initial_energy,
            u_max=scenario.u_max,
        )
        plans[fv.id] = solve_p1(problem, energy_step)
    return plans

