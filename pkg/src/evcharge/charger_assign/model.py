"""Vehicle-charger assignment instances, solutions, and their cost arithmetic."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Mapping, Tuple

import numpy as np

from ..core import EPS, VehicleParams

P2 = "P2"
P2J = "P2J"


class AssignmentInfeasible(ValueError):
    """No matching satisfies the covering constraint; lists the entities that cannot be served."""

    def __init__(self, message: str, vehicles=(), chargers=()):
        self.vehicles = tuple(vehicles)
        self.chargers = tuple(chargers)
        super().__init__(message)


class ReachabilityError(ValueError):
    def __init__(self, pairs):
        self.pairs = tuple(pairs)
        super().__init__("vehicle cannot reach charger with reserve energy: "
                         + ", ".join(f"({i}->{j})" for i, j in self.pairs))


@dataclass(frozen=True)
class VehicleState:
    id: Any
    energy: float
    target: float
    location: Any = None


@dataclass(frozen=True)
class ChargerState:
    id: Any
    rate: float
    avail_time: float = 0.0
    location: Any = None


@dataclass(frozen=True, eq=False)
class AssignmentProblem:
    vehicles: Tuple[VehicleState, ...]
    chargers: Tuple[ChargerState, ...]
    travel_time: np.ndarray = field(repr=False)
    travel_dist: np.ndarray = field(repr=False)
    params: VehicleParams
    theta1: float = 1.0
    theta2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "vehicles", tuple(self.vehicles))
        object.__setattr__(self, "chargers", tuple(self.chargers))
        tt = np.asarray(self.travel_time, dtype=float)
        dd = np.asarray(self.travel_dist, dtype=float)
        shape = (len(self.vehicles), len(self.chargers))
        if tt.shape != shape or dd.shape != shape:
            raise ValueError(f"travel matrices must be shaped {shape}")
        if (tt < 0).any() or (dd < 0).any():
            raise ValueError("negative travel time or distance")
        if self.theta1 < 0 or self.theta2 < 0:
            raise ValueError("theta weights must be nonnegative")
        p = self.params
        for v in self.vehicles:
            if not (p.e_min - EPS <= v.energy <= v.target + EPS and v.target <= p.e_max + EPS):
                raise ValueError(f"vehicle {v.id}: need e_min <= energy <= target <= e_max")
        for c in self.chargers:
            if c.rate <= 0 or c.avail_time < 0:
                raise ValueError(f"charger {c.id}: rate must be > 0 and avail_time >= 0")
        object.__setattr__(self, "travel_time", tt)
        object.__setattr__(self, "travel_dist", dd)

    @property
    def n_vehicles(self) -> int:
        return len(self.vehicles)

    @property
    def n_chargers(self) -> int:
        return len(self.chargers)

    @property
    def mode(self) -> str:
        return P2 if self.n_vehicles <= self.n_chargers else P2J

    @cached_property
    def energies(self) -> np.ndarray:
        return np.array([v.energy for v in self.vehicles], dtype=float)

    @cached_property
    def targets(self) -> np.ndarray:
        return np.array([v.target for v in self.vehicles], dtype=float)

    @cached_property
    def rates(self) -> np.ndarray:
        return np.array([c.rate for c in self.chargers], dtype=float)

    @cached_property
    def avail(self) -> np.ndarray:
        return np.array([c.avail_time for c in self.chargers], dtype=float)

    @cached_property
    def reachable(self) -> np.ndarray:
        """Boolean |I|x|J| mask: vehicle keeps at least ``e_min`` on arrival."""
        arrive = self.energies[:, None] - self.params.drive_efficiency * self.travel_dist
        return arrive >= self.params.e_min - EPS

    @cached_property
    def charge_energy(self) -> np.ndarray:
        need = (self.targets - self.energies)[:, None] + self.params.drive_efficiency * self.travel_dist
        return np.maximum(need, 0.0)

    @cached_property
    def wait(self) -> np.ndarray:
        return np.maximum(self.avail[None, :] - self.travel_time, 0.0)

    @cached_property
    def costs(self) -> np.ndarray:
        """Pair costs for every (vehicle, charger), ignoring reachability."""
        return (self.travel_time + self.theta2 * self.wait
                + self.theta1 * self.charge_energy / self.rates[None, :])

    @cached_property
    def masked_costs(self) -> np.ndarray:
        """Pair costs with unreachable pairs set to +inf."""
        return np.where(self.reachable, self.costs, np.inf)

    @cached_property
    def completion(self) -> np.ndarray:
        """Minutes until the vehicle leaves the charger: travel + queue + charging."""
        return self.travel_time + self.wait + self.charge_energy / self.rates[None, :]

    def to_dict(self) -> dict:
        return {
            "vehicles": [vars(v).copy() for v in self.vehicles],
            "chargers": [vars(c).copy() for c in self.chargers],
            "travel_time": self.travel_time.tolist(),
            "travel_dist": self.travel_dist.tolist(),
            "params": vars(self.params).copy(),
            "theta1": self.theta1,
            "theta2": self.theta2,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AssignmentProblem":
        def loc(x):
            return tuple(x) if isinstance(x, list) else x
        return cls(
            vehicles=tuple(VehicleState(v["id"], v["energy"], v["target"], loc(v.get("location")))
                           for v in d["vehicles"]),
            chargers=tuple(ChargerState(c["id"], c["rate"], c.get("avail_time", 0.0), loc(c.get("location")))
                           for c in d["chargers"]),
            travel_time=np.asarray(d["travel_time"], dtype=float).reshape(len(d["vehicles"]), len(d["chargers"])),
            travel_dist=np.asarray(d["travel_dist"], dtype=float).reshape(len(d["vehicles"]), len(d["chargers"])),
            params=VehicleParams(**d["params"]),
            theta1=d.get("theta1", 1.0),
            theta2=d.get("theta2", 1.0),
        )


@dataclass(frozen=True)
class AssignmentSolution:
    assignment: Dict[int, int]  # vehicle index -> charger index
    charged: Dict[int, float]  # vehicle index -> kWh
    wait: Dict[int, float]  # vehicle index -> minutes
    objective: float
    unassigned_vehicles: frozenset

    def pairs(self):
        return sorted(self.assignment.items())

    def to_dict(self, problem: AssignmentProblem) -> dict:
        rows = []
        for i, j in self.pairs():
            rows.append({
                "vehicle": problem.vehicles[i].id,
                "charger": problem.chargers[j].id,
                "arrival": float(problem.travel_time[i, j]),
                "wait": self.wait[i],
                "charged": self.charged[i],
                "charge_time": float(self.charged[i] / problem.rates[j]),
            })
        return {
            "objective": self.objective,
            "assignments": rows,
            "unassigned_vehicles": [problem.vehicles[i].id for i in sorted(self.unassigned_vehicles)],
        }


def pair_cost(problem: AssignmentProblem, i: int, j: int) -> float:
    """Travel + weighted queueing + weighted charging minutes for sending vehicle ``i`` to charger ``j``."""
    v, c = problem.vehicles[i], problem.chargers[j]
    t = problem.travel_time[i, j]
    need = v.target - v.energy + problem.params.drive_efficiency * problem.travel_dist[i, j]
    return float(t + problem.theta2 * max(c.avail_time - t, 0.0) + problem.theta1 / c.rate * need)


def reachable_chargers(problem: AssignmentProblem, i: int) -> list:
    return [int(j) for j in np.flatnonzero(problem.reachable[i])]


def derive_yw(problem: AssignmentProblem, matching: Mapping[int, int]):
    """Tight charged energy and waiting time for each matched vehicle."""
    bad = [(i, j) for i, j in matching.items() if not problem.reachable[i, j]]
    if bad:
        raise ReachabilityError(bad)
    mu = problem.params.drive_efficiency
    Y, W = {}, {}
    for i, j in matching.items():
        v, c = problem.vehicles[i], problem.chargers[j]
        Y[i] = float(max(v.target - v.energy + mu * problem.travel_dist[i, j], 0.0))
        W[i] = float(max(c.avail_time - problem.travel_time[i, j], 0.0))
    return Y, W


def objective(problem: AssignmentProblem, solution: AssignmentSolution) -> float:
    total = 0.0
    for i, j in solution.assignment.items():
        total += problem.travel_time[i, j]
        total += problem.theta1 * solution.charged[i] / problem.chargers[j].rate
        total += problem.theta2 * solution.wait[i]
    return float(total)


def make_solution(problem: AssignmentProblem, matching: Mapping[int, int]) -> AssignmentSolution:
    matching = {int(i): int(j) for i, j in matching.items()}
    Y, W = derive_yw(problem, matching)
    sol = AssignmentSolution(matching, Y, W, 0.0,
                             frozenset(set(range(problem.n_vehicles)) - set(matching)))
    return AssignmentSolution(matching, Y, W, objective(problem, sol), sol.unassigned_vehicles)


def check_solution(problem: AssignmentProblem, solution: AssignmentSolution, mode: str | None = None) -> None:
    """Raise ``ValueError`` when matching, covering, reachability, or tightness fails."""
    mode = mode or problem.mode
    js = list(solution.assignment.values())
    if len(js) != len(set(js)):
        raise ValueError("a charger serves more than one vehicle")
    if mode == P2 and len(solution.assignment) != problem.n_vehicles:
        raise ValueError("P2 requires every vehicle to be assigned")
    if mode == P2J and set(js) != set(range(problem.n_chargers)):
        raise ValueError("P2J requires every charger to be assigned")
    Y, W = derive_yw(problem, solution.assignment)
    for i in solution.assignment:
        if abs(Y[i] - solution.charged[i]) > 1e-9 or abs(W[i] - solution.wait[i]) > 1e-9:
            raise ValueError(f"vehicle {i}: charged/wait not tight")
    if abs(objective(problem, solution) - solution.objective) > 1e-9 * max(1.0, abs(solution.objective)):
        raise ValueError("stored objective does not match the matching")
