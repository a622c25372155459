"""Consistency checks over a finished run's event log."""
from __future__ import annotations

from collections import defaultdict
from typing import List, Sequence

from .scenario import Scenario


def check_log(log: Sequence[dict], scenario: Scenario, energy_tol: float = 1e-6) -> List[str]:
    """Every violated invariant as a readable message; an empty list means the run is clean."""
    p = scenario.params
    cap = scenario.dispatch.vehicle_capacity
    problems = []

    # event order
    for a, b in zip(log, log[1:]):
        if b["time"] < a["time"] - 1e-9:
            problems.append(f"log goes back in time at {b['time']}")
            break

    # energy balance per vehicle
    initial = {v.id: v.initial_energy for v in scenario.vehicles}
    km = defaultdict(float)
    charged = defaultdict(float)
    final = {}
    for rec in log:
        k = rec["kind"]
        if k in ("stop-arrival", "charger-arrival"):
            km[rec["vehicle"]] += rec["distance"]
        elif k == "charge-complete":
            charged[rec["vehicle"]] += rec["amount"]
        elif k == "vehicle-final":
            final[rec["vehicle"]] = rec["energy"]
        if "energy" in rec and rec.get("vehicle") is not None:
            if rec["energy"] < -energy_tol or rec["energy"] > p.battery_capacity + energy_tol:
                problems.append(f"{rec['vehicle']}: energy {rec['energy']:.6f} outside [0, B] at {rec['time']}")
    if set(final) != set(initial):
        problems.append("final energy missing for some vehicles")
    for v, e0 in initial.items():
        expect = e0 + charged[v] - p.drive_efficiency * km[v]
        if v in final and abs(final[v] - expect) > energy_tol:
            problems.append(f"{v}: energy balance off by {final[v] - expect:.3e} kWh")

    # chargers: queue consistency and no overlapping sessions
    commits = {}
    sessions = defaultdict(list)
    for rec in log:
        if rec["kind"] == "charge-commit":
            commits[rec["vehicle"]] = rec
            if rec["load"] != 0:
                problems.append(f"{rec['vehicle']}: sent to charge with passengers on board")
            expect = max(rec["avail_before"] - rec["arrival"], 0.0)
            if abs(rec["wait"] - expect) > 1e-9:
                problems.append(f"{rec['vehicle']}: wait {rec['wait']} differs from queue state {expect}")
        elif rec["kind"] == "charger-arrival":
            c = commits.get(rec["vehicle"])
            if c is None or c["charger"] != rec["charger"]:
                problems.append(f"{rec['vehicle']}: arrived at {rec['charger']} without a commitment")
            elif abs(c["wait"] - rec["wait"]) > 1e-9:
                problems.append(f"{rec['vehicle']}: realized wait differs from committed wait")
        elif rec["kind"] == "charge-complete":
            sessions[rec["charger"]].append((rec["start"], rec["time"], rec["vehicle"]))
    for ch, ivs in sessions.items():
        ivs.sort()
        for (s1, e1, v1), (s2, e2, v2) in zip(ivs, ivs[1:]):
            if s2 < e1 - 1e-9:
                problems.append(f"charger {ch}: sessions of {v1} and {v2} overlap")

    # customers: accepted ones picked up once, then dropped once, by their vehicle; capacity
    owner = {}
    state = {}
    for rec in log:
        k = rec["kind"]
        if k == "request-arrival" and rec["accepted"]:
            owner[rec["request"]] = rec["vehicle"]
            state[rec["request"]] = "waiting"
        elif k == "stop-arrival":
            r = rec["request"]
            if owner.get(r) != rec["vehicle"]:
                problems.append(f"request {r} served by {rec['vehicle']} but assigned to {owner.get(r)}")
                continue
            if rec["stop"] == "pickup":
                if state[r] != "waiting":
                    problems.append(f"request {r} picked up twice")
                state[r] = "onboard"
            else:
                if state[r] != "onboard":
                    problems.append(f"request {r} dropped before pickup")
                state[r] = "done"
            if rec["load"] > cap or rec["load"] < 0:
                problems.append(f"{rec['vehicle']}: load {rec['load']} outside [0, {cap}]")
    left = [r for r, s in state.items() if s != "done"]
    if left:
        problems.append(f"accepted requests never completed: {left[:5]}")
    return problems
