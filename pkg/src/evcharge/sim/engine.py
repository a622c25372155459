"""Event-driven fleet simulation with per-charger reservation queues.

Every charger keeps an occupied-until time ``avail``. A vehicle committing to
a charger waits ``max(avail - arrival, 0)`` on arrival and then pushes
``avail`` to the end of its own charge, so chargers serve vehicles in commit
order and never overlap. Energy for a leg is debited when the leg starts.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, replace
from typing import Any, List, Optional, Tuple


from ..core import EPS
from ..dispatch import PICKUP, RideRequest, Tour, VehicleView, dispatch
from .metrics import SimMetrics
from .policies import GO, NO_ACTION, BatchVehicle, ChargerQueueState, policy_fcfs_step, policy_ns_step, policy_ocp_epoch
from .scenario import FCFS, NS, OCP, PolicyKind, Scenario, ScenarioError

# lower runs first among simultaneous events
PRIORITY = {
    "charge-complete": 0,
    "stop-arrival": 1,
    "charger-arrival": 2,
    "epoch-boundary": 3,
    "charge-retry": 4,
    "request-arrival": 5,
}

IDLE, SERVICE, TO_CHARGER, CHARGING = "idle", "service", "to_charger", "charging"


@dataclass
class _Vehicle:
    id: str
    depot: Any
    energy: float
    pos: Any
    tour: Tour
    status: str = IDLE
    leg: Optional[tuple] = None  # (stop, depart, arrive, km)
    commit: Optional[dict] = None
    pending: Optional[list] = None  # OCP: [epoch, target, deferred]
    retry_queued: bool = False


@dataclass
class _Charger:
    id: str
    location: Any
    rate: float
    avail: float
    present: int = 0  # vehicles arrived and not yet finished


class Simulator:
    def __init__(self, scenario: Scenario, policy: PolicyKind, seed: int | None = None):
        self.sc = scenario
        self.policy = policy
        self.params = scenario.params
        self.metric = scenario.metric
        self.grid = scenario.grid
        self.requests = scenario.resolve_requests(seed)
        for r in self.requests:
            if r.arrival_time < self.grid.horizon_start:
                raise ScenarioError(f"request {r.id} arrives before the horizon starts")
            if r.party_size > scenario.dispatch.vehicle_capacity:
                raise ScenarioError(f"request {r.id}: party larger than vehicle capacity")
        if policy.kind == OCP:
            missing = [v.id for v in scenario.vehicles if v.id not in policy.plans]
            if missing:
                raise ScenarioError(f"no charge plan for vehicles {missing}")
            short = [v for v, p in policy.plans.items() if len(p.charge_flags) != self.grid.epoch_count]
            if short:
                raise ScenarioError(f"plans for {short} do not match the epoch grid")
        t0 = self.grid.horizon_start
        self.clock = t0
        self.epoch = 0
        self.vehicles: List[_Vehicle] = []
        for fv in sorted(scenario.vehicles, key=lambda v: v.id):
            loc = scenario.depot_location(fv.depot)
            self.vehicles.append(_Vehicle(fv.id, loc, fv.initial_energy, loc, self._idle_tour(fv.id, loc, t0, loc)))
        self.by_id = {v.id: v for v in self.vehicles}
        self.chargers = [_Charger(c.id, tuple(c.location), c.rate, t0) for c in scenario.chargers]
        self.log: List[dict] = []
        self._queue: list = []
        self._seq = 0

    # -- plumbing --------------------------------------------------------------

    def _idle_tour(self, vid, loc, t, depot) -> Tour:
        return Tour(vid, loc, t, (), (), depot)

    def _push(self, time: float, kind: str, key: str, payload=None) -> None:
        heapq.heappush(self._queue, (time, PRIORITY[kind], key, self._seq, kind, payload))
        self._seq += 1

    def _record(self, kind: str, **fields) -> None:
        rec = {"time": self.clock, "kind": kind}
        rec.update(fields)
        self.log.append(rec)

    def run(self) -> List[dict]:
        for r in self.requests:
            self._push(r.arrival_time, "request-arrival", str(r.id), r)
        if self.policy.kind == OCP:
            for h in range(1, self.grid.epoch_count + 1):
                self._push(self.grid.epoch_start(h), "epoch-boundary", f"{h:06d}", h)
        handlers = {
            "request-arrival": self._on_request,
            "stop-arrival": self._on_stop_arrival,
            "charger-arrival": self._on_charger_arrival,
            "charge-complete": self._on_charge_complete,
            "epoch-boundary": self._on_epoch,
            "charge-retry": self._on_retry,
        }
        while self._queue:
            time, _, _, _, kind, payload = heapq.heappop(self._queue)
            if time < self.clock - 1e-9:
                raise RuntimeError("event time went backwards")
            self.clock = time
            handlers[kind](payload)
        for v in self.vehicles:
            self._record("vehicle-final", vehicle=v.id, energy=v.energy)
        return self.log

    @property
    def _open(self) -> bool:
        """Charging decisions are only taken inside the horizon."""
        return self.clock < self.grid.horizon_end - 1e-9

    # -- customers -------------------------------------------------------------

    def _view(self, v: _Vehicle) -> VehicleView:
        if v.status == IDLE:
            tour = self._idle_tour(v.id, v.pos, self.clock, v.depot)
        else:
            lead = v.leg[2] - self.clock if v.leg else 0.0
            tour = replace(v.tour, lead_time=max(lead, 0.0))
        return VehicleView(v.id, v.energy, tour, available=v.status in (IDLE, SERVICE))

    def _on_request(self, r: RideRequest) -> None:
        views = [self._view(v) for v in self.vehicles]
        decision = dispatch(r, views, self.sc.dispatch, self.params, self.metric)
        if decision is None:
            self._record("request-arrival", request=r.id, vehicle=None, accepted=False)
            return
        v = self.by_id[decision.vehicle]
        self._record("request-arrival", request=r.id, vehicle=v.id, accepted=True,
                     marginal_cost=decision.marginal_cost)
        v.tour = replace(decision.tour, lead_time=0.0)
        if v.status == IDLE:
            v.status = SERVICE
            self._start_leg(v)

    def _start_leg(self, v: _Vehicle) -> None:
        stop, rest = v.tour.stops[0], v.tour.stops[1:]
        loc = stop.location
        km = self.metric.distance(v.pos, loc)
        arrive = self.clock + self.metric.time(v.pos, loc)
        v.energy -= self.params.drive_efficiency * km
        onboard = v.tour.onboard
        if stop.kind == PICKUP:
            onboard = onboard + (stop.request,)
        else:
            onboard = tuple(r for r in onboard if r.id != stop.request.id)
        v.tour = Tour(v.id, loc, arrive, rest, onboard, v.depot)
        v.leg = (stop, self.clock, arrive, km)
        self._check_reserve(v)
        self._push(arrive, "stop-arrival", v.id, v)

    def _on_stop_arrival(self, v: _Vehicle) -> None:
        stop, depart, _, km = v.leg
        v.pos = stop.location
        v.leg = None
        self._record("stop-arrival", vehicle=v.id, request=stop.request.id, stop=stop.kind,
                     depart=depart, distance=km, energy=v.energy,
                     load=sum(r.party_size for r in v.tour.onboard))
        if v.tour.stops:
            self._start_leg(v)
            return
        v.status = IDLE
        v.tour = self._idle_tour(v.id, v.pos, self.clock, v.depot)
        self._on_idle(v)

    def _check_reserve(self, v: _Vehicle) -> None:
        if v.energy < self.params.e_min - EPS:
            self._record("reserve-breach", vehicle=v.id, energy=v.energy)

    # -- charging --------------------------------------------------------------

    def _on_idle(self, v: _Vehicle) -> None:
        if not self._open:
            return
        kind = self.policy.kind
        if kind in (NS, FCFS):
            self._seek_charger(v)
        elif v.pending is not None and v.pending[0] == self.epoch and not v.pending[2]:
            self._ocp_assign([v])

    def _queue_state(self) -> List[ChargerQueueState]:
        return [ChargerQueueState(c.id, c.location, c.rate, c.avail, c.present) for c in self.chargers]

    def _seek_charger(self, v: _Vehicle) -> None:
        pol = self.policy
        if pol.kind == NS:
            d = policy_ns_step(v.pos, v.energy, self._queue_state(), self.params, self.metric, pol.threshold_frac)
        else:
            d = policy_fcfs_step(v.pos, v.energy, self.clock, self._queue_state(), self.params, self.metric,
                                 pol.threshold_frac)
        if d.action == NO_ACTION:
            return
        if d.action != GO:
            if not v.retry_queued:
                v.retry_queued = True
                self._push(self.clock + pol.retry_interval, "charge-retry", v.id, v)
            return
        target = min(pol.target_frac * self.params.battery_capacity, self.params.battery_capacity)
        self._commit(v, d.charger, target)

    def _on_retry(self, v: _Vehicle) -> None:
        v.retry_queued = False
        if v.status == IDLE:
            self._record("charge-retry", vehicle=v.id, energy=v.energy)
            self._on_idle(v)

    def _commit(self, v: _Vehicle, j: int, target: float) -> None:
        c = self.chargers[j]
        km = self.metric.distance(v.pos, c.location)
        access = self.metric.time(v.pos, c.location)
        arrive = self.clock + access
        energy_at_arrival = v.energy - self.params.drive_efficiency * km
        amount = max(target - energy_at_arrival, 0.0)
        wait = max(c.avail - arrive, 0.0)
        start = arrive + wait
        end = start + amount / c.rate
        self._record("charge-commit", vehicle=v.id, charger=c.id, arrival=arrive, avail_before=c.avail,
                     wait=wait, target=target, energy=v.energy, load=sum(r.party_size for r in v.tour.onboard))
        c.avail = max(c.avail, end)
        v.energy = energy_at_arrival
        self._check_reserve(v)
        v.status = TO_CHARGER
        v.pending = None
        v.commit = dict(charger=j, depart=self.clock, arrive=arrive, wait=wait, start=start, end=end,
                        amount=amount, km=km)
        self._push(arrive, "charger-arrival", v.id, v)

    def _on_charger_arrival(self, v: _Vehicle) -> None:
        cm = v.commit
        c = self.chargers[cm["charger"]]
        if abs(self.clock - cm["arrive"]) > 1e-9:
            # travel times are deterministic, so this only guards against drift
            cm["wait"] = max(cm["start"] - self.clock, 0.0)
        v.pos = c.location
        c.present += 1
        v.status = CHARGING
        self._record("charger-arrival", vehicle=v.id, charger=c.id, wait=cm["wait"], depart=cm["depart"],
                     distance=cm["km"], energy=v.energy)
        self._push(cm["end"], "charge-complete", v.id, v)

    def _on_charge_complete(self, v: _Vehicle) -> None:
        cm = v.commit
        c = self.chargers[cm["charger"]]
        v.energy += cm["amount"]
        c.present -= 1
        self._record("charge-complete", vehicle=v.id, charger=c.id, start=cm["start"], amount=cm["amount"],
                     energy=v.energy, price=self.sc.energy_price)
        v.commit = None
        v.status = IDLE
        v.tour = self._idle_tour(v.id, v.pos, self.clock, v.depot)
        self._on_idle(v)

    # -- OCP batches -----------------------------------------------------------

    def _on_epoch(self, h: int) -> None:
        self.epoch = h
        for v in self.vehicles:
            plan = self.policy.plans[v.id]
            if plan.charge_flags[h - 1]:
                v.pending = [h, plan.target_after_charge(h), False]
            elif v.pending is not None:
                v.pending = [h, v.pending[1], False]  # carried over from an earlier epoch
        batch = [v for v in self.vehicles if v.pending is not None and v.status == IDLE]
        self._record("epoch-boundary", epoch=h,
                     pending=sum(v.pending is not None for v in self.vehicles), batch=len(batch))
        self._ocp_assign(batch)

    def _ocp_assign(self, batch: List[_Vehicle]) -> None:
        if not self._open:
            return
        p = self.params
        todo = []
        for v in batch:
            target = min(v.pending[1], p.e_max)
            if v.energy >= target - 1e-6:
                v.pending = None  # already holds the planned level
            elif v.energy < p.e_min - EPS:
                v.pending[2] = True
            else:
                todo.append((v, target))
        if not todo:
            return
        batch_in = [BatchVehicle(v.id, v.pos, v.energy, t) for v, t in todo]
        res = policy_ocp_epoch(batch_in, self._queue_state(), self.clock, p, self.metric,
                               self.sc.theta1, self.sc.theta2, self.policy.method, self.policy.lr_config)
        if res.mode is not None:
            self._record("assignment", epoch=self.epoch, mode=res.mode, vehicles=len(todo),
                         chargers=res.n_chargers, objective=res.objective)
        for i, j in res.assignments:
            v, target = todo[i]
            self._commit(v, j, target)
        for i in res.deferred:
            todo[i][0].pending[2] = True  # wait for the next epoch


def run(scenario: Scenario, policy: PolicyKind, seed: int | None = None) -> Tuple[SimMetrics, List[dict]]:
    """Simulate one day; returns the metrics and the event log (a list of flat records)."""
    log = Simulator(scenario, policy, seed).run()
    return SimMetrics.from_log(log), log


def to_ndjson(log: List[dict]) -> str:
    return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in log)


def read_ndjson(text: str) -> List[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]
