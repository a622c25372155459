"""Shared domain types and elementary energy/time arithmetic.

Units are fixed throughout the package: minutes, km, kWh, and kWh/min for
charging rates (a 22 kW charger has ``rate = 22 / 60``). Clock times are
minutes since midnight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

# Absolute tolerance (kWh / min) used for boundary comparisons on energies and times.
EPS = 1e-9


@dataclass(frozen=True)
class VehicleParams:
    battery_capacity: float
    e_min: float
    e_max: float
    drive_efficiency: float  # kWh per km
    speed: float  # km per min
    capacity: int = 8  # seats

    def __post_init__(self):
        if not (0 <= self.e_min < self.e_max <= self.battery_capacity + EPS):
            raise ValueError(
                f"need 0 <= e_min < e_max <= battery_capacity, got "
                f"{self.e_min}, {self.e_max}, {self.battery_capacity}"
            )
        if self.drive_efficiency <= 0 or self.speed <= 0:
            raise ValueError("drive_efficiency and speed must be positive")

    @classmethod
    def from_fractions(cls, battery_capacity, e_min_frac=0.1, e_max_frac=0.8,
                       drive_efficiency=0.2387, speed=50 / 60, capacity=8):
        return cls(battery_capacity, e_min_frac * battery_capacity,
                   e_max_frac * battery_capacity, drive_efficiency, speed, capacity)


@dataclass(frozen=True)
class ChargerSpec:
    id: str
    location: Tuple[float, float]
    rate: float  # kWh per min

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"charger {self.id}: rate must be positive")


@dataclass(frozen=True)
class EpochGrid:
    horizon_start: float
    epoch_length: float
    epoch_count: int

    def __post_init__(self):
        if self.epoch_length <= 0 or self.epoch_count < 1:
            raise ValueError("epoch_length must be > 0 and epoch_count >= 1")

    @property
    def horizon_end(self) -> float:
        return self.horizon_start + self.epoch_length * self.epoch_count

    def epoch_start(self, h: int) -> float:
        """Clock time at which 1-based epoch ``h`` begins."""
        return self.horizon_start + (h - 1) * self.epoch_length

    def epoch_of(self, t: float) -> int | None:
        """1-based epoch containing clock time ``t``, or None outside the horizon."""
        if t < self.horizon_start or t >= self.horizon_end:
            return None
        return int((t - self.horizon_start) // self.epoch_length) + 1


@dataclass(frozen=True)
class EpochProfile:
    drive_prob: Tuple[float, ...]
    expected_wait: Tuple[float, ...]
    price: Tuple[float, ...]
    earn_rate: float

    def __post_init__(self):
        object.__setattr__(self, "drive_prob", tuple(float(x) for x in self.drive_prob))
        object.__setattr__(self, "expected_wait", tuple(float(x) for x in self.expected_wait))
        object.__setattr__(self, "price", tuple(float(x) for x in self.price))
        n = len(self.drive_prob)
        if len(self.expected_wait) != n or len(self.price) != n:
            raise ValueError("profile sequences must share one length")
        if any(p < 0 or p > 1 for p in self.drive_prob):
            raise ValueError("drive_prob values must lie in [0, 1]")
        if any(w < 0 for w in self.expected_wait) or any(c < 0 for c in self.price):
            raise ValueError("expected_wait and price must be nonnegative")
        if self.earn_rate < 0:
            raise ValueError("earn_rate must be nonnegative")

    def __len__(self):
        return len(self.drive_prob)


def energy_for_distance(d: float, params: VehicleParams) -> float:
    if d < 0:
        raise ValueError(f"negative distance {d}")
    return params.drive_efficiency * d


def charge_time(amount: float, rate: float) -> float:
    if rate <= 0:
        raise ValueError(f"charging rate must be positive, got {rate}")
    if amount < 0:
        raise ValueError(f"negative charge amount {amount}")
    return amount / rate


def epoch_length_rule(params: VehicleParams, max_rate: float) -> float:
    """Epoch long enough to charge from ``e_min`` to ``e_max`` on the fastest charger."""
    if max_rate <= 0:
        raise ValueError("max_rate must be positive")
    return (params.e_max - params.e_min) / max_rate


# -- travel metrics -----------------------------------------------------------

@dataclass(frozen=True)
class EuclideanMetric:
    """Straight-line distance on planar km coordinates at constant speed."""
    speed: float  # km per min

    def distance(self, a, b) -> float:
        return math.hypot(a[0] - b[0], a[1] - b[1])

    def time(self, a, b) -> float:
        return self.distance(a, b) / self.speed

    def matrices(self, origins: Sequence, dests: Sequence):
        o = np.asarray(origins, dtype=float).reshape(-1, 2)
        d = np.asarray(dests, dtype=float).reshape(-1, 2)
        dist = np.hypot(o[:, None, 0] - d[None, :, 0], o[:, None, 1] - d[None, :, 1])
        return dist / self.speed, dist


@dataclass(frozen=True)
class MatrixMetric:
    """Explicit node-to-node distance (km) and time (min) tables; locations are node ids."""
    dist: np.ndarray = field(repr=False)
    time_: np.ndarray = field(repr=False)

    def __post_init__(self):
        dist = np.asarray(self.dist, dtype=float)
        tt = np.asarray(self.time_, dtype=float)
        if dist.shape != tt.shape or dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise ValueError("distance and time tables must be equal square matrices")
        if (dist < 0).any() or (tt < 0).any():
            raise ValueError("negative entries in travel tables")
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "time_", tt)

    def distance(self, a, b) -> float:
        return float(self.dist[int(a), int(b)])

    def time(self, a, b) -> float:
        return float(self.time_[int(a), int(b)])

    def matrices(self, origins, dests):
        o = np.asarray(origins, dtype=int)
        d = np.asarray(dests, dtype=int)
        return self.time_[np.ix_(o, d)], self.dist[np.ix_(o, d)]


def line_metric(n_nodes: int, hop_km: float, hop_min: float) -> MatrixMetric:
    """Nodes ``0..n_nodes-1`` on a path with uniform hop distance and time."""
    idx = np.arange(n_nodes)
    hops = np.abs(idx[:, None] - idx[None, :]).astype(float)
    return MatrixMetric(hops * hop_km, hops * hop_min)
