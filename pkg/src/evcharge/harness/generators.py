"""Random instance and demand generators, plus the two small worked examples."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from ..charger_assign.model import AssignmentProblem, ChargerState, VehicleState
from ..core import EpochGrid, EpochProfile, EuclideanMetric, VehicleParams, line_metric
from ..dispatch import RideRequest
from ..recharge_plan import RechargeProblem, expected_demand

TABLE_SIZES = (10, 20, 30, 40, 50, 100, 200, 400, 1000)


@dataclass(frozen=True)
class GenSpec:
    """Random assignment instances on a square service area.

    ``sizes`` lists vehicle counts; in P2 mode each gets as many chargers, in
    P2J mode the charger count is drawn uniformly from ``1..n-1``.
    """
    sizes: Tuple[int, ...] = TABLE_SIZES
    mode: str = "P2"
    per_size: int = 3
    half_width: float = 50.0
    battery: float = 35.8
    e_min_frac: float = 0.1
    energy_range: Tuple[float, float] = (0.4, 0.5)
    target_range: Tuple[float, float] = (0.7, 1.0)
    avail_range: Tuple[float, float] = (0.0, 30.0)
    rate: float = 40 / 60
    drive_efficiency: float = 0.2387
    speed: float = 50 / 60
    theta1: float = 1.0
    theta2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.energy_range
        tlo, thi = self.target_range
        if not (self.e_min_frac < lo <= hi <= tlo <= thi <= 1.0):
            raise ValueError("need e_min_frac < energy range <= target range <= 1")
        if self.mode not in ("P2", "P2J"):
            raise ValueError("mode must be P2 or P2J")
        if self.mode == "P2J" and min(self.sizes) < 2:
            raise ValueError("P2J instances need at least 2 vehicles")


def _covering_exists(reach: np.ndarray, vehicles_side: bool) -> bool:
    g = csr_matrix(reach.astype(np.int8) if vehicles_side else reach.T.astype(np.int8))
    return bool((maximum_bipartite_matching(g, perm_type="column") >= 0).all())


def random_assignment_problem(rng: np.random.Generator, n_vehicles: int, n_chargers: int,
                              spec: GenSpec, max_tries: int = 100) -> AssignmentProblem:
    """Draw one instance; redraws until the covering side can be fully matched."""
    B = spec.battery
    # targets may reach the full battery, so the allowed maximum is B here
    params = VehicleParams(B, spec.e_min_frac * B, B, spec.drive_efficiency, spec.speed)
    metric = EuclideanMetric(spec.speed)
    w = spec.half_width
    for _ in range(max_tries):
        vpos = rng.uniform(-w, w, size=(n_vehicles, 2))
        cpos = rng.uniform(-w, w, size=(n_chargers, 2))
        energy = rng.uniform(*spec.energy_range, size=n_vehicles) * B
        target = rng.uniform(*spec.target_range, size=n_vehicles) * B
        avail = rng.uniform(*spec.avail_range, size=n_chargers)
        tt, dd = metric.matrices(vpos, cpos)
        reach = energy[:, None] - spec.drive_efficiency * dd >= params.e_min
        if _covering_exists(reach, vehicles_side=n_vehicles <= n_chargers):
            break
    else:
        raise RuntimeError(f"no feasible {n_vehicles}x{n_chargers} instance in {max_tries} draws")
    vehicles = tuple(VehicleState(f"v{i}", float(energy[i]), float(target[i]), tuple(vpos[i]))
                     for i in range(n_vehicles))
    chargers = tuple(ChargerState(f"c{j}", spec.rate, float(avail[j]), tuple(cpos[j]))
                     for j in range(n_chargers))
    return AssignmentProblem(vehicles, chargers, tt, dd, params, spec.theta1, spec.theta2)


def gen_assignment_instances(spec: GenSpec) -> List[Tuple[int, int, int, AssignmentProblem]]:
    """Instances as ``(size, replicate, n_chargers, problem)``, seeded per size and replicate."""
    out = []
    for n in spec.sizes:
        for r in range(spec.per_size):
            rng = np.random.default_rng([spec.seed, n, r, 1 if spec.mode == "P2J" else 0])
            m = n if spec.mode == "P2" else int(rng.integers(1, n))
            out.append((n, r, m, random_assignment_problem(rng, n, m, spec)))
    return out


def build_appendix_b() -> AssignmentProblem:
    """Five vehicles and four chargers on a ten-node line (5 km, 6 min per hop)."""
    B = 35.8
    params = VehicleParams(B, 0.1 * B, 0.8 * B, 35.8 / 150, 5 / 6)
    metric = line_metric(11, 5.0, 6.0)  # node ids 1..10 used directly
    vehicle_nodes = (2, 5, 6, 7, 9)
    targets = (0.8, 0.4, 0.5, 0.8, 0.4)
    charger_nodes = (3, 3, 10, 10)
    avail = (0.0, 40.0, 25.0, 20.0)
    vehicles = tuple(VehicleState(str(i + 1), 0.2 * B, targets[i] * B, vehicle_nodes[i]) for i in range(5))
    chargers = tuple(ChargerState(name, 40 / 60, avail[k], charger_nodes[k]) for k, name in enumerate("ABCD"))
    tt, dd = metric.matrices(vehicle_nodes, charger_nodes)
    return AssignmentProblem(vehicles, chargers, tt, dd, params, 1.0, 1.0)


def single_vehicle_day_profile(grid: EpochGrid) -> EpochProfile:
    """Single-vehicle day with morning and evening driving peaks and cheap midday power.

    The curves are a hand-made stand-in: only their shape (two driving peaks,
    a price dip around noon, queueing that follows driving) is meant to carry over.
    """
    hours = (grid.horizon_start + grid.epoch_length * (np.arange(grid.epoch_count) + 0.5)) / 60
    bump = lambda mu, sd: np.exp(-0.5 * ((hours - mu) / sd) ** 2)
    drive = 0.2 + 0.6 * bump(8.5, 1.0) + 0.65 * bump(17.5, 1.2)
    price = 0.30 - 0.12 * bump(12.5, 1.3) + 0.05 * bump(19.0, 1.5)
    wait = 4.0 + 10.0 * bump(8.5, 1.2) + 12.0 * bump(18.0, 1.5)
    return EpochProfile(tuple(np.clip(drive, 0, 1)), tuple(wait), tuple(price), 1 / 6)


def build_single_vehicle_day(battery_capacity: float = 24.0) -> RechargeProblem:
    """One vehicle, 7:00 to 22:00 in 30-minute epochs, starting full."""
    B = battery_capacity
    params = VehicleParams(B, 0.1 * B, B, 0.2, 4 / 6)
    grid = EpochGrid(7 * 60, 30, 30)
    profile = single_vehicle_day_profile(grid)
    rate = 2 / 3
    return RechargeProblem(grid, params, profile, expected_demand(profile, grid, params), 3.0, B,
                           rate * grid.epoch_length)


# -- demand -------------------------------------------------------------------

@dataclass(frozen=True)
class DemandSpec:
    """Synthetic ride demand: bimodal arrival times and clustered origins/destinations.

    ``peaks`` are ``(center_minute, spread_minutes, weight)``; the remaining
    weight ``1 - sum(weights)`` arrives uniformly over the horizon. Cluster
    weights are a free modeling choice standing in for a real demand map.
    A dropoff stays in its pickup's cluster with probability ``local_share``.
    """
    count: int = 1000
    horizon: Tuple[float, float] = (6.5 * 60, 22 * 60)
    peaks: Tuple[Tuple[float, float, float], ...] = ((7.5 * 60, 20.0, 0.25), (18 * 60, 35.0, 0.3))
    centers: Tuple[Tuple[float, float], ...] = ((0.0, 0.0), (-8.0, -11.0), (3.0, 17.0), (-2.0, -14.0),
                                                (1.0, 10.0), (13.0, -6.0), (-3.0, 27.0))
    center_weights: Tuple[float, ...] = (0.4, 0.15, 0.08, 0.1, 0.09, 0.09, 0.09)
    cluster_spread: float = 4.0
    min_trip_km: float = 1.0
    local_share: float = 0.8
    party_size: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be nonnegative")
        if len(self.centers) != len(self.center_weights):
            raise ValueError("one weight per cluster center")
        if not math.isclose(sum(self.center_weights), 1.0, abs_tol=1e-9):
            raise ValueError("cluster weights must sum to 1")
        if not 0 <= self.local_share <= 1:
            raise ValueError("local_share must lie in [0, 1]")
        lo, hi = self.horizon
        if sum(w for _, _, w in self.peaks) > 1 + 1e-9:
            raise ValueError("peak weights exceed 1")
        for c, _, _ in self.peaks:
            if not lo <= c <= hi:
                raise ValueError("peak centers must lie inside the horizon")


def _arrival_times(rng: np.random.Generator, spec: DemandSpec) -> np.ndarray:
    lo, hi = spec.horizon
    weights = [w for _, _, w in spec.peaks]
    comps = rng.choice(len(weights) + 1, size=spec.count, p=weights + [1 - sum(weights)])
    t = np.empty(spec.count)
    for k, (c, s, _) in enumerate(spec.peaks):
        idx = np.flatnonzero(comps == k)
        draw = rng.normal(c, s, size=idx.size)
        # redraw out-of-horizon samples so the component keeps its shape
        bad = (draw < lo) | (draw >= hi)
        while bad.any():
            draw[bad] = rng.normal(c, s, size=int(bad.sum()))
            bad = (draw < lo) | (draw >= hi)
        t[idx] = draw
    uni = np.flatnonzero(comps == len(weights))
    t[uni] = rng.uniform(lo, hi, size=uni.size)
    return np.sort(t)


def _clusters(rng: np.random.Generator, spec: DemandSpec, n: int) -> np.ndarray:
    return rng.choice(len(spec.centers), size=n, p=list(spec.center_weights))


def _points(rng: np.random.Generator, spec: DemandSpec, which: np.ndarray) -> np.ndarray:
    centers = np.asarray(spec.centers)[which]
    return centers + rng.normal(0.0, spec.cluster_spread, size=(which.size, 2))


def gen_demand(spec: DemandSpec) -> List[RideRequest]:
    rng = np.random.default_rng(spec.seed)
    if spec.count == 0:
        return []
    times = _arrival_times(rng, spec)
    src = _clusters(rng, spec, spec.count)
    dst = np.where(rng.random(spec.count) < spec.local_share, src, _clusters(rng, spec, spec.count))
    pick = _points(rng, spec, src)
    drop = _points(rng, spec, dst)
    short = np.hypot(*(pick - drop).T) < spec.min_trip_km
    while short.any():
        drop[short] = _points(rng, spec, dst[short])
        short = np.hypot(*(pick - drop).T) < spec.min_trip_km
    return [RideRequest(f"r{k}", float(times[k]), tuple(map(float, pick[k])), tuple(map(float, drop[k])),
                        spec.party_size)
            for k in range(spec.count)]
