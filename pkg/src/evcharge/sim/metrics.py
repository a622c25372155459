"""Run metrics, computed from the event log alone."""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields
from typing import Iterable, List, Sequence


def _mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs) if xs else 0.0


@dataclass(frozen=True)
class SimMetrics:
    n_requests: int
    n_served: int
    served_pct: float
    n_recharges: int
    wait_per_recharge_min: float
    charge_time_per_recharge_min: float
    delay_per_recharge_min: float  # wait plus charging time
    fleet_wait_h: float
    fleet_charge_h: float
    access_time_h: float  # driving to chargers
    energy_kwh: float
    energy_cost: float
    vehicle_travel_h: float
    passenger_wait_min: float
    journey_min: float
    reserve_breaches: int

    @classmethod
    def from_log(cls, log: Sequence[dict]) -> "SimMetrics":
        arrivals, pickups, dropoffs = {}, {}, {}
        accepted = set()
        waits, charge_minutes, access = [], [], []
        energy = cost = travel = 0.0
        breaches = 0
        for rec in log:
            kind = rec["kind"]
            if kind == "request-arrival":
                arrivals[rec["request"]] = rec["time"]
                if rec["accepted"]:
                    accepted.add(rec["request"])
            elif kind == "stop-arrival":
                travel += rec["time"] - rec["depart"]
                (pickups if rec["stop"] == "pickup" else dropoffs)[rec["request"]] = rec["time"]
            elif kind == "charger-arrival":
                travel += rec["time"] - rec["depart"]
                access.append(rec["time"] - rec["depart"])
                waits.append(rec["wait"])
            elif kind == "charge-complete":
                charge_minutes.append(rec["time"] - rec["start"])
                energy += rec["amount"]
                cost += rec["amount"] * rec["price"]
            elif kind == "reserve-breach":
                breaches += 1
        served = [r for r in accepted if r in dropoffs]
        n_req = len(arrivals)
        n_rech = len(charge_minutes)
        wait_total = sum(waits)
        charge_total = sum(charge_minutes)
        return cls(
            n_requests=n_req,
            n_served=len(served),
            served_pct=100.0 * len(served) / n_req if n_req else 100.0,
            n_recharges=n_rech,
            wait_per_recharge_min=wait_total / n_rech if n_rech else 0.0,
            charge_time_per_recharge_min=charge_total / n_rech if n_rech else 0.0,
            delay_per_recharge_min=(wait_total + charge_total) / n_rech if n_rech else 0.0,
            fleet_wait_h=wait_total / 60,
            fleet_charge_h=charge_total / 60,
            access_time_h=sum(access) / 60,
            energy_kwh=energy,
            energy_cost=cost,
            vehicle_travel_h=travel / 60,
            passenger_wait_min=_mean(pickups[r] - arrivals[r] for r in served),
            journey_min=_mean(dropoffs[r] - arrivals[r] for r in served),
            reserve_breaches=breaches,
        )

    def to_dict(self) -> dict:
        return asdict(self)


# presentation order of the results table
CSV_COLUMNS = (
    "wait_per_recharge_min", "charge_time_per_recharge_min", "delay_per_recharge_min",
    "fleet_wait_h", "fleet_charge_h", "energy_kwh", "energy_cost",
    "passenger_wait_min", "journey_min", "vehicle_travel_h", "served_pct",
    "n_recharges", "reserve_breaches",
)


def metrics_csv(rows: Iterable[tuple], label_columns: Sequence[str] = ("policy",)) -> str:
    """CSV with the label columns followed by rounded metric columns; ``rows`` are ``(labels, SimMetrics)``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(label_columns) + list(CSV_COLUMNS))
    for labels, m in rows:
        d = m.to_dict()
        w.writerow(list(labels) + [d[c] if isinstance(d[c], int) else f"{d[c]:.1f}" for c in CSV_COLUMNS])
    return buf.getvalue()


def mean_metrics(ms: List[SimMetrics]) -> SimMetrics:
    """Field-wise average (counts become floats)."""
    if not ms:
        raise ValueError("nothing to average")
    return SimMetrics(**{f.name: _mean(getattr(m, f.name) for m in ms) for f in fields(SimMetrics)})
