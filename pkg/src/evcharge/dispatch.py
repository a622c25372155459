"""Pickup-and-delivery insertion and the marginal-cost dispatch rule.

A tour is the ordered list of stops a vehicle still has to visit, starting
from an anchor (where and when the vehicle is next free to re-route). New
requests are inserted at every precedence- and capacity-feasible position
pair; the request goes to the energy-feasible vehicle whose tour cost grows
the least.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, Optional, Sequence, Tuple

from .core import EPS, VehicleParams

PICKUP = "pickup"
DROPOFF = "dropoff"


@dataclass(frozen=True)
class RideRequest:
    id: Any
    arrival_time: float
    pickup: Any
    dropoff: Any
    party_size: int = 1

    def __post_init__(self):
        if self.party_size < 1:
            raise ValueError("party_size must be >= 1")
        if self.pickup == self.dropoff:
            raise ValueError(f"request {self.id}: pickup equals dropoff")


@dataclass(frozen=True)
class Stop:
    kind: str
    request: RideRequest

    @property
    def location(self):
        return self.request.pickup if self.kind == PICKUP else self.request.dropoff


@dataclass(frozen=True)
class DispatchConfig:
    gamma: float = 0.5
    beta: float = 0.025
    vehicle_capacity: int = 8

    def __post_init__(self):
        if not (0 <= self.gamma <= 1 and 0 <= self.beta <= 1):
            raise ValueError("gamma and beta must lie in [0, 1]")
        if self.vehicle_capacity < 1:
            raise ValueError("vehicle_capacity must be >= 1")


@dataclass(frozen=True)
class Tour:
    vehicle: Any
    origin: Any  # anchor location
    start_time: float  # anchor time
    stops: Tuple[Stop, ...] = ()
    onboard: Tuple[RideRequest, ...] = ()
    depot: Any = None
    ends_at_depot: bool = False  # count the return leg in travel time
    lead_time: float = 0.0  # minutes of an in-progress leg still to drive before the anchor

    def load_at_start(self) -> int:
        return sum(r.party_size for r in self.onboard)


@dataclass(frozen=True)
class Schedule:
    arrivals: Tuple[float, ...]  # clock time at each stop
    travel_time: float  # minutes from the anchor to the end of the tour
    distance: float  # km including the depot return when a depot is set
    journeys: Tuple[float, ...]  # request arrival to dropoff, per passenger
    max_load: int


def schedule(tour: Tour, metric) -> Schedule:
    t = tour.start_time
    pos = tour.origin
    dist = 0.0
    load = tour.load_at_start()
    max_load = load
    arrivals = []
    dropped = {}
    for s in tour.stops:
        loc = s.location
        t += metric.time(pos, loc)
        dist += metric.distance(pos, loc)
        pos = loc
        arrivals.append(t)
        if s.kind == PICKUP:
            load += s.request.party_size
            max_load = max(max_load, load)
        else:
            load -= s.request.party_size
            dropped[s.request.id] = t
    end = t
    if tour.depot is not None:
        dist += metric.distance(pos, tour.depot)
        if tour.ends_at_depot:
            end += metric.time(pos, tour.depot)
    passengers = list(tour.onboard) + [s.request for s in tour.stops if s.kind == PICKUP]
    journeys = tuple(dropped[r.id] - r.arrival_time for r in passengers)
    return Schedule(tuple(arrivals), end - tour.start_time + tour.lead_time, dist, journeys, max_load)


def check_tour(tour: Tour, capacity: int) -> None:
    """Raise ``ValueError`` on a precedence or capacity violation."""
    onboard = {r.id for r in tour.onboard}
    seen_pick = set()
    load = tour.load_at_start()
    if load > capacity:
        raise ValueError("capacity exceeded at the anchor")
    for k, s in enumerate(tour.stops):
        rid = s.request.id
        if s.kind == PICKUP:
            if rid in seen_pick or rid in onboard:
                raise ValueError(f"request {rid} picked up twice")
            seen_pick.add(rid)
            load += s.request.party_size
            if load > capacity:
                raise ValueError(f"capacity exceeded at stop {k}")
        else:
            if rid not in seen_pick and rid not in onboard:
                raise ValueError(f"request {rid} dropped before pickup")
            seen_pick.discard(rid)
            onboard.discard(rid)
            load -= s.request.party_size
    if seen_pick or onboard:
        raise ValueError("tour ends with passengers never dropped off")


def cost_from_parts(travel_time: float, journeys: Iterable[float], config: DispatchConfig) -> float:
    g = config.gamma
    return g * travel_time + (1 - g) * (config.beta * travel_time ** 2 + sum(journeys))


def tour_cost(tour: Tour, config: DispatchConfig, metric) -> float:
    """Operator time plus an anticipated-delay term and passenger journey times."""
    sch = schedule(tour, metric)
    return cost_from_parts(sch.travel_time, sch.journeys, config)


def myopic_cost(tour: Tour, config: DispatchConfig, metric) -> float:
    """Travel time and journey times only, without the anticipated-delay term."""
    sch = schedule(tour, metric)
    return config.gamma * sch.travel_time + (1 - config.gamma) * sum(sch.journeys)


def insertions(tour: Tour, request: RideRequest):
    """Every pickup/dropoff position pair keeping pickup before dropoff, as new stop tuples."""
    stops = tour.stops
    n = len(stops)
    pick, drop = Stop(PICKUP, request), Stop(DROPOFF, request)
    for p in range(n + 1):
        head = stops[:p] + (pick,)
        for q in range(p, n + 1):
            yield head + stops[p:q] + (drop,) + stops[q:]


def _capacity_ok(tour: Tour, stops, capacity: int) -> bool:
    load = tour.load_at_start()
    if load > capacity:
        return False
    for s in stops:
        load += s.request.party_size if s.kind == PICKUP else -s.request.party_size
        if load > capacity:
            return False
    return True


def best_insertion(tour: Tour, request: RideRequest, config: DispatchConfig, metric,
                   feasible: Optional[Callable[[Tour], bool]] = None,
                   cost_fn: Callable = tour_cost):
    """Cheapest feasible insertion as ``(candidate_tour, marginal_cost)``, or None if nothing fits.

    ``feasible`` is an extra predicate on candidate tours (e.g. an energy check).
    Ties keep the earliest position pair.
    """
    base = cost_fn(tour, config, metric)
    best = None
    for stops in insertions(tour, request):
        if not _capacity_ok(tour, stops, config.vehicle_capacity):
            continue
        cand = replace(tour, stops=stops)
        delta = cost_fn(cand, config, metric) - base
        # feasibility only matters for candidates that would win
        if best is None or delta < best[1] - 1e-12:
            if feasible is None or feasible(cand):
                best = (cand, delta)
    return best


def energy_feasible(energy: float, candidate: Tour, params: VehicleParams, metric) -> bool:
    """Whether the vehicle keeps its reserve after the whole tour and the drive back to its depot."""
    sch = schedule(candidate, metric)
    return energy - params.drive_efficiency * sch.distance >= params.e_min - EPS


@dataclass(frozen=True)
class VehicleView:
    id: Any
    energy: float  # kWh at the tour anchor
    tour: Tour
    available: bool = True


@dataclass(frozen=True)
class DispatchDecision:
    vehicle: Any
    tour: Tour
    marginal_cost: float


def dispatch(request: RideRequest, fleet: Sequence[VehicleView], config: DispatchConfig,
             params: VehicleParams, metric, cost_fn: Callable = tour_cost) -> Optional[DispatchDecision]:
    """Assign ``request`` to the energy-feasible vehicle with least marginal cost; None means rejected.

    Ties go to the vehicle listed first, so pass the fleet sorted by id.
    """
    best = None
    for v in fleet:
        if not v.available:
            continue
        ins = best_insertion(v.tour, request, config, metric,
                             feasible=lambda cand, e=v.energy: energy_feasible(e, cand, params, metric),
                             cost_fn=cost_fn)
        if ins is None:
            continue
        if best is None or ins[1] < best.marginal_cost - 1e-12:
            best = DispatchDecision(v.id, ins[0], ins[1])
    return best
