"""Scenario and policy descriptions consumed by the simulator."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional, Tuple

from ..charger_assign import LrConfig
from ..core import ChargerSpec, EpochGrid, EuclideanMetric, VehicleParams
from ..dispatch import DispatchConfig, RideRequest
from ..harness.generators import DemandSpec, gen_demand
from ..recharge_plan import ChargePlan

NS, FCFS, OCP = "NS", "FCFS", "OCP"
POLICIES = (NS, FCFS, OCP)


class ScenarioError(ValueError):
    """Malformed scenario, rejected before any event is processed."""


@dataclass(frozen=True)
class Depot:
    id: str
    location: Tuple[float, float]


@dataclass(frozen=True)
class FleetVehicle:
    id: str
    depot: str
    initial_energy: float


@dataclass(frozen=True)
class Scenario:
    params: VehicleParams
    depots: Tuple[Depot, ...]
    vehicles: Tuple[FleetVehicle, ...]
    chargers: Tuple[ChargerSpec, ...]
    grid: EpochGrid
    dispatch: DispatchConfig = DispatchConfig()
    requests: Optional[Tuple[RideRequest, ...]] = None  # inline demand wins over ``demand``
    demand: Optional[DemandSpec] = None
    energy_price: float = 0.2756  # euro per kWh
    earn_rate: float = 0.2485  # euro per minute of vehicle time
    fixed_cost: float = 5.77  # euro per charging event
    theta1: float = 1.0
    theta2: float = 1.0
    name: str = "scenario"

    def __post_init__(self):
        for name in ("depots", "vehicles", "chargers"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.requests is not None:
            object.__setattr__(self, "requests", tuple(self.requests))
        self.validate()

    @property
    def metric(self) -> EuclideanMetric:
        return EuclideanMetric(self.params.speed)

    @property
    def max_rate(self) -> float:
        return max(c.rate for c in self.chargers)

    @property
    def u_max(self) -> float:
        """Most energy one epoch of charging can add, on the fastest charger."""
        return self.max_rate * self.grid.epoch_length

    def depot_location(self, depot_id: str):
        return self._depots[depot_id].location

    @property
    def _depots(self):
        return {d.id: d for d in self.depots}

    def validate(self) -> None:
        p = self.params
        if not self.vehicles:
            raise ScenarioError("scenario has no vehicles")
        if not self.chargers:
            raise ScenarioError("scenario has no chargers")
        for kind, items in (("depot", self.depots), ("vehicle", self.vehicles), ("charger", self.chargers)):
            ids = [x.id for x in items]
            if len(ids) != len(set(ids)):
                raise ScenarioError(f"duplicate {kind} ids")
        depots = self._depots
        for v in self.vehicles:
            if v.depot not in depots:
                raise ScenarioError(f"vehicle {v.id}: unknown depot {v.depot!r}")
            if not p.e_min <= v.initial_energy <= p.battery_capacity:
                raise ScenarioError(f"vehicle {v.id}: initial energy outside [e_min, B]")
        if self.requests is None and self.demand is None:
            raise ScenarioError("scenario needs inline requests or a demand spec")
        if self.requests is not None:
            ids = [r.id for r in self.requests]
            if len(ids) != len(set(ids)):
                raise ScenarioError("duplicate request ids")
            if any(r.party_size > self.dispatch.vehicle_capacity for r in self.requests):
                raise ScenarioError("a party is larger than the vehicle capacity")
        if min(self.energy_price, self.earn_rate, self.fixed_cost, self.theta1, self.theta2) < 0:
            raise ScenarioError("cost parameters must be nonnegative")

    def resolve_requests(self, seed: int | None = None) -> Tuple[RideRequest, ...]:
        """Inline requests, or the demand spec sampled with ``seed`` (its own seed when None)."""
        if self.requests is not None:
            reqs = self.requests
        else:
            spec = self.demand if seed is None else replace(self.demand, seed=seed)
            reqs = tuple(gen_demand(spec))
        return tuple(sorted(reqs, key=lambda r: (r.arrival_time, str(r.id))))


@dataclass(frozen=True)
class PolicyKind:
    """Charging policy and its knobs.

    NS and FCFS trigger below ``threshold_frac * B`` and charge to
    ``target_frac * B``. OCP follows per-vehicle plans and assigns chargers in
    batches at each epoch boundary.
    """
    kind: str
    threshold_frac: float = 0.2
    target_frac: float = 0.8
    retry_interval: float = 5.0  # minutes between retries when no charger qualifies
    plans: Optional[Mapping[Any, ChargePlan]] = field(default=None, compare=False)
    method: str = "lr"  # OCP batch solver: "lr" or "exact"
    lr_config: LrConfig = LrConfig()

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ScenarioError(f"unknown policy {self.kind!r}")
        if not 0 < self.threshold_frac < self.target_frac <= 1:
            raise ScenarioError("need 0 < threshold < target <= 1")
        if self.retry_interval <= 0:
            raise ScenarioError("retry_interval must be positive")
        if self.kind == OCP and self.plans is None:
            raise ScenarioError("OCP needs per-vehicle charge plans")
        if self.method not in ("lr", "exact"):
            raise ScenarioError(f"unknown batch solver {self.method!r}")
