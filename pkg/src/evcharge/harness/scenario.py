"""Scenario JSON documents and the default synthetic scenario."""
from __future__ import annotations

import json
from dataclasses import asdict
from typing import Any, Mapping

from ..core import ChargerSpec, EpochGrid, VehicleParams, epoch_length_rule
from ..dispatch import DispatchConfig, RideRequest
from ..sim.scenario import Depot, FleetVehicle, Scenario, ScenarioError
from .generators import DemandSpec

SCHEMA = "evcharge.scenario/1"

L2_RATE = 22 / 60
DC_RATE = 50 / 60

# depot sites sit on the demand cluster centers (same order); counts sum to the fleet size
_DEPOTS = (
    ("central", 17), ("south_west", 8), ("north", 5), ("south", 6),
    ("mid_north", 5), ("east", 5), ("far_north", 4),
)

# (site, offset km, rate) per charger
_CHARGERS = (
    ("central", (1.5, 0.5), L2_RATE), ("central", (-1.0, 1.5), L2_RATE), ("central", (0.5, -2.0), L2_RATE),
    ("central", (2.5, -1.0), DC_RATE),
    ("south_west", (1.0, 1.0), L2_RATE), ("south_west", (-1.5, 0.0), DC_RATE),
    ("north", (1.0, -1.0), L2_RATE),
    ("south", (0.5, 1.5), L2_RATE), ("south", (-1.0, -0.5), L2_RATE),
    ("mid_north", (-1.0, 0.5), L2_RATE), ("mid_north", (1.0, 1.0), DC_RATE),
    ("east", (-1.0, 1.0), L2_RATE),
    ("far_north", (0.5, -1.0), L2_RATE),
    ("central", (-2.0, -1.5), DC_RATE),
)


def default_scenario(seed: int = 0, n_requests: int = 1000) -> Scenario:
    """50 eight-seat vehicles at 7 depots, 14 mixed chargers, 6:30 to 22:00 in 30-minute epochs."""
    params = VehicleParams.from_fractions(35.8, 0.1, 0.8, drive_efficiency=0.2387, speed=50 / 60)
    delta = round(epoch_length_rule(params, DC_RATE))
    start, end = 6.5 * 60, 22 * 60
    grid = EpochGrid(start, delta, int(round((end - start) / delta)))
    demand = DemandSpec(count=n_requests, horizon=(start, end), seed=seed)
    sites = {name: tuple(loc) for (name, _), loc in zip(_DEPOTS, demand.centers)}
    depots = tuple(Depot(name, sites[name]) for name, _ in _DEPOTS)
    vehicles = []
    for name, count in _DEPOTS:
        for _ in range(count):
            vehicles.append(FleetVehicle(f"v{len(vehicles) + 1:02d}", name, params.e_max))
    chargers = tuple(
        ChargerSpec(f"c{k + 1:02d}", (sites[s][0] + dx, sites[s][1] + dy), rate)
        for k, (s, (dx, dy), rate) in enumerate(_CHARGERS))
    return Scenario(params, depots, tuple(vehicles), chargers, grid, DispatchConfig(0.5, 0.025, params.capacity),
                    demand=demand, name="synthetic-default")


# -- JSON ---------------------------------------------------------------------

def _loc(x):
    return tuple(x) if isinstance(x, (list, tuple)) else x


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "schema": SCHEMA,
        "name": sc.name,
        "params": asdict(sc.params),
        "depots": [{"id": d.id, "location": list(d.location)} for d in sc.depots],
        "vehicles": [asdict(v) for v in sc.vehicles],
        "chargers": [{"id": c.id, "location": list(c.location), "rate": c.rate} for c in sc.chargers],
        "metric": {"kind": "euclidean", "speed": sc.params.speed},
        "grid": asdict(sc.grid),
        "dispatch": asdict(sc.dispatch),
        "requests": None if sc.requests is None else [request_to_dict(r) for r in sc.requests],
        "demand": None if sc.demand is None else asdict(sc.demand),
        "costs": {"energy_price": sc.energy_price, "earn_rate": sc.earn_rate, "fixed_cost": sc.fixed_cost,
                  "theta1": sc.theta1, "theta2": sc.theta2},
    }


def request_to_dict(r: RideRequest) -> dict:
    return {"id": r.id, "arrival_time": r.arrival_time, "pickup": list(r.pickup),
            "dropoff": list(r.dropoff), "party_size": r.party_size}


def request_from_dict(d: Mapping[str, Any]) -> RideRequest:
    return RideRequest(d["id"], float(d["arrival_time"]), _loc(d["pickup"]), _loc(d["dropoff"]),
                       int(d.get("party_size", 1)))


def _demand_from_dict(d: Mapping) -> DemandSpec:
    d = dict(d)
    d["horizon"] = tuple(d["horizon"])
    d["peaks"] = tuple(tuple(p) for p in d["peaks"])
    d["centers"] = tuple(tuple(c) for c in d["centers"])
    d["center_weights"] = tuple(d["center_weights"])
    return DemandSpec(**d)


def scenario_from_dict(d: Mapping[str, Any]) -> Scenario:
    """Parse a scenario document; any structural problem raises :class:`ScenarioError`."""
    if not isinstance(d, Mapping):
        raise ScenarioError("scenario document must be a JSON object")
    if d.get("schema") != SCHEMA:
        raise ScenarioError(f"unsupported schema tag {d.get('schema')!r}, expected {SCHEMA!r}")
    try:
        metric = d.get("metric", {"kind": "euclidean"})
        if metric.get("kind") != "euclidean":
            raise ScenarioError(f"unsupported travel metric {metric.get('kind')!r}")
        params = VehicleParams(**d["params"])
        if "speed" in metric and abs(metric["speed"] - params.speed) > 1e-12:
            raise ScenarioError("metric speed disagrees with vehicle speed")
        costs = d.get("costs", {})
        return Scenario(
            params=params,
            depots=tuple(Depot(x["id"], _loc(x["location"])) for x in d["depots"]),
            vehicles=tuple(FleetVehicle(x["id"], x["depot"], float(x["initial_energy"])) for x in d["vehicles"]),
            chargers=tuple(ChargerSpec(x["id"], _loc(x["location"]), float(x["rate"])) for x in d["chargers"]),
            grid=EpochGrid(**d["grid"]),
            dispatch=DispatchConfig(**d.get("dispatch", {})),
            requests=None if d.get("requests") is None else tuple(request_from_dict(r) for r in d["requests"]),
            demand=None if d.get("demand") is None else _demand_from_dict(d["demand"]),
            name=d.get("name", "scenario"),
            **{k: float(v) for k, v in costs.items()},
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed scenario: {exc!r}") from exc


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=1)
