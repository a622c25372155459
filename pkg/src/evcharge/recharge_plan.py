"""Single-vehicle daily recharge planning.

A vehicle's day is split into charging epochs. Each epoch it may charge ``u_h``
kWh (at most ``u_max``) and pays the energy price plus, if it charges at all, a
fixed set-up cost and the opportunity cost of being off-service. Energy must
stay within ``[e_min, e_max]`` at every epoch start and may never drop below
``e_min`` after the epoch's expected driving.

``solve_p1`` solves this by backward induction on a charge grid, ``on_need_plan``
builds the threshold-triggered baseline, and ``brute_force_p1`` enumerates every
charging support as an independent oracle for the DP.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import EPS, EpochGrid, EpochProfile, VehicleParams


class InfeasiblePlanError(ValueError):
    """No charging plan meets the energy constraints; ``epoch`` is the first failing one (1-based)."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"demand cannot be met in epoch {epoch}")


class PlanViolation(ValueError):
    def __init__(self, constraint: str, epoch: int, detail: str = ""):
        self.constraint = constraint
        self.epoch = epoch
        super().__init__(f"{constraint} violated at epoch {epoch}{': ' + detail if detail else ''}")


@dataclass(frozen=True)
class RechargeProblem:
    grid: EpochGrid
    params: VehicleParams
    profile: EpochProfile
    demand: tuple
    fixed_cost: float
    initial_energy: float
    u_max: float

    def __post_init__(self):
        object.__setattr__(self, "demand", tuple(float(d) for d in self.demand))
        H = self.grid.epoch_count
        if len(self.demand) != H:
            raise ValueError(f"demand has {len(self.demand)} entries, expected {H}")
        if len(self.profile) != H:
            raise ValueError(f"profile has {len(self.profile)} epochs, expected {H}")
        if any(d < 0 for d in self.demand):
            raise ValueError("demand must be nonnegative")
        p = self.params
        if not (p.e_min - EPS <= self.initial_energy <= p.e_max + EPS):
            raise ValueError("initial_energy must lie in [e_min, e_max]")
        if self.u_max <= 0:
            raise ValueError("u_max must be positive")
        if self.fixed_cost < 0:
            raise ValueError("fixed_cost must be nonnegative")

    @property
    def epoch_count(self) -> int:
        return self.grid.epoch_count

    def event_costs(self) -> np.ndarray:
        """Cost charged for each epoch in which the vehicle charges: fixed plus opportunity cost."""
        return np.array([self.fixed_cost + opportunity_cost(self.profile, h, self.grid.epoch_length)
                         for h in range(1, self.epoch_count + 1)])

    def prices(self) -> np.ndarray:
        return np.asarray(self.profile.price, dtype=float)

    def to_dict(self) -> dict:
        return {
            "grid": vars(self.grid).copy(),
            "params": vars(self.params).copy(),
            "profile": {
                "drive_prob": list(self.profile.drive_prob),
                "expected_wait": list(self.profile.expected_wait),
                "price": list(self.profile.price),
                "earn_rate": self.profile.earn_rate,
            },
            "demand": list(self.demand),
            "fixed_cost": self.fixed_cost,
            "initial_energy": self.initial_energy,
            "u_max": self.u_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RechargeProblem":
        return cls(
            grid=EpochGrid(**d["grid"]),
            params=VehicleParams(**d["params"]),
            profile=EpochProfile(**d["profile"]),
            demand=tuple(d["demand"]),
            fixed_cost=d["fixed_cost"],
            initial_energy=d["initial_energy"],
            u_max=d["u_max"],
        )


@dataclass(frozen=True)
class ChargePlan:
    charge_amounts: tuple
    charge_flags: tuple
    energy_trajectory: tuple  # epoch starts 1..H plus the end-of-horizon level
    total_cost: float

    @property
    def charge_events(self) -> int:
        return sum(1 for y in self.charge_flags if y)

    def target_after_charge(self, h: int) -> float:
        """Planned energy right after charging in 1-based epoch ``h``."""
        return self.energy_trajectory[h - 1] + self.charge_amounts[h - 1]

    def to_dict(self) -> dict:
        return {
            "charge_amounts": list(self.charge_amounts),
            "charge_flags": [bool(y) for y in self.charge_flags],
            "energy_trajectory": list(self.energy_trajectory),
            "total_cost": self.total_cost,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChargePlan":
        return cls(tuple(d["charge_amounts"]), tuple(bool(y) for y in d["charge_flags"]),
                   tuple(d["energy_trajectory"]), d["total_cost"])


def opportunity_cost(profile: EpochProfile, h: int, epoch_length: float) -> float:
    """Money lost while charging in epoch ``h``: expected driving plus expected queueing, times earn rate."""
    if not 1 <= h <= len(profile):
        raise IndexError(f"epoch {h} outside 1..{len(profile)}")
    drive_minutes = epoch_length * profile.drive_prob[h - 1]
    return (drive_minutes + profile.expected_wait[h - 1]) * profile.earn_rate


def expected_demand(profile: EpochProfile, grid: EpochGrid, params: VehicleParams) -> tuple:
    """Per-epoch energy use implied by the driving probabilities (speed * driving minutes * kWh/km)."""
    return tuple(params.speed * grid.epoch_length * p * params.drive_efficiency
                 for p in profile.drive_prob)


def plan_cost(problem: RechargeProblem, plan: ChargePlan, tol: float = 1e-6) -> float:
    check_plan(problem, plan, tol)
    u = np.asarray(plan.charge_amounts, dtype=float)
    y = np.asarray(plan.charge_flags, dtype=bool)
    return float(problem.prices() @ u + problem.event_costs() @ y)


def check_plan(problem: RechargeProblem, plan: ChargePlan, tol: float = 1e-6) -> None:
    """Raise :class:`PlanViolation` naming the first broken constraint."""
    H = problem.epoch_count
    p = problem.params
    u, y, e = plan.charge_amounts, plan.charge_flags, plan.energy_trajectory
    if len(u) != H or len(y) != H or len(e) != H + 1:
        raise PlanViolation("shape", 0, "plan length does not match the horizon")
    if abs(e[0] - problem.initial_energy) > tol:
        raise PlanViolation("initial energy", 1)
    for h in range(1, H + 1):
        uh, eh, d = u[h - 1], e[h - 1], problem.demand[h - 1]
        if uh < -tol or uh > problem.u_max + tol:
            raise PlanViolation("charge bound 0 <= u <= u_max", h, f"u={uh}")
        if uh > tol and not y[h - 1]:
            raise PlanViolation("charge flag (u > 0 requires y = 1)", h)
        if not (p.e_min - tol <= eh <= p.e_max + tol):
            raise PlanViolation("energy bounds", h, f"e={eh}")
        if eh + uh < d + p.e_min - tol:
            raise PlanViolation("reserve after driving", h, f"e+u={eh + uh}, d+e_min={d + p.e_min}")
        if abs(e[h] - (eh + uh - d)) > tol:
            raise PlanViolation("state transition", h)


def _build_plan(problem: RechargeProblem, u: Sequence[float]) -> ChargePlan:
    e = [problem.initial_energy]
    for h, uh in enumerate(u):
        e.append(e[-1] + uh - problem.demand[h])
    y = tuple(uh > EPS for uh in u)
    cost = float(problem.prices() @ np.asarray(u, dtype=float) + problem.event_costs() @ np.asarray(y))
    return ChargePlan(tuple(float(x) for x in u), y, tuple(e), cost)


class _ChargeGrid:
    """Cumulative-charge lattice shared by the DP and the enumeration oracle.

    State ``n`` at epoch ``h`` means ``n * step`` kWh charged so far, so the
    epoch-start energy is ``e_1 + n*step - (d_1 + ... + d_{h-1})``. Demand is
    kept exact; only charge amounts are discretized.
    """

    def __init__(self, problem: RechargeProblem, step: float):
        if step <= 0:
            raise ValueError("energy_step must be positive")
        p = problem.params
        self.step = step
        self.cum_demand = np.concatenate([[0.0], np.cumsum(problem.demand)])
        self.n_max = int(math.floor((p.e_max - problem.initial_energy + self.cum_demand[-1]) / step + 1e-9))
        self.m_max = int(math.floor(problem.u_max / step + 1e-9))
        self.e1 = problem.initial_energy
        n = np.arange(max(self.n_max, 0) + 1)
        self.n = n
        # valid[h] flags states whose start-of-epoch-h energy is within bounds (h = 1..H+1)
        self.valid = []
        for h in range(1, problem.epoch_count + 2):
            e = self.energy(h, n)
            self.valid.append((e >= p.e_min - EPS) & (e <= p.e_max + EPS))

    def energy(self, h: int, n):
        return self.e1 + n * self.step - self.cum_demand[h - 1]


def _first_infeasible_epoch(problem: RechargeProblem, g: _ChargeGrid) -> int | None:
    lo = hi = 0
    for h in range(1, problem.epoch_count + 1):
        nxt = np.flatnonzero(g.valid[h])  # admissible states at the start of epoch h+1
        new_lo, new_hi = lo, hi + g.m_max
        if nxt.size == 0:
            return h
        new_lo = max(new_lo, int(nxt[0]))
        new_hi = min(new_hi, int(nxt[-1]))
        if new_lo > new_hi:
            return h
        lo, hi = new_lo, new_hi
    return None


def solve_p1(problem: RechargeProblem, energy_step: float = 0.1) -> ChargePlan:
    """Minimum-cost recharge plan by backward induction over the charge grid.

    Ties prefer the smaller charge in the earlier epoch, so charging is pushed
    as late as cost allows.
    """
    p = problem.params
    if not (p.e_min - EPS <= problem.initial_energy <= p.e_max + EPS):
        raise InfeasiblePlanError(1, "initial energy outside [e_min, e_max]")
    g = _ChargeGrid(problem, energy_step)
    bad = _first_infeasible_epoch(problem, g)
    if bad is not None:
        raise InfeasiblePlanError(bad)

    H = problem.epoch_count
    prices, events = problem.prices(), problem.event_costs()
    size = g.n.size
    value = np.where(g.valid[H], 0.0, np.inf)
    choice = np.zeros((H, size), dtype=np.int64)
    for h in range(H, 0, -1):
        best = np.full(size, np.inf)
        arg = np.zeros(size, dtype=np.int64)
        for m in range(0, g.m_max + 1):
            if m >= size:
                break
            cand = np.full(size, np.inf)
            cand[: size - m] = value[m:]
            if m:
                cand += prices[h - 1] * g.step * m + events[h - 1]
            finite = np.isfinite(best)
            bar = np.where(finite, best - 1e-12 * np.maximum(1.0, np.abs(np.where(finite, best, 0.0))), np.inf)
            better = (cand < bar) & np.isfinite(cand)
            best = np.where(better, cand, best)
            arg = np.where(better, m, arg)
        best[~g.valid[h - 1]] = np.inf
        value, choice[h - 1] = best, arg

    if not np.isfinite(value[0]):
        raise InfeasiblePlanError(_first_infeasible_epoch(problem, g) or 1)
    n, u = 0, []
    for h in range(1, H + 1):
        m = int(choice[h - 1, n])
        u.append(m * g.step)
        n += m
    return _build_plan(problem, u)


def brute_force_p1(problem: RechargeProblem, energy_step: float = 0.1, max_epochs: int = 14) -> ChargePlan:
    """Enumerate every charge/no-charge pattern and forward-search the cheapest charges for each.

    Exponential in the horizon; meant as a test oracle for :func:`solve_p1`.
    """
    H = problem.epoch_count
    if H > max_epochs:
        raise ValueError(f"horizon of {H} epochs too long for enumeration (max {max_epochs})")
    g = _ChargeGrid(problem, energy_step)
    prices, events = problem.prices(), problem.event_costs()
    size = g.n.size

    def charge_step(cost, h):
        # min over m of cost[n - m] + price * step * m, by explicit shifts
        out = np.full(size, np.inf)
        for m in range(g.m_max + 1):
            if m >= size:
                break
            shifted = np.full(size, np.inf)
            shifted[m:] = cost[: size - m] + prices[h - 1] * g.step * m
            out = np.minimum(out, shifted)
        return out

    best = [math.inf, None]

    def visit(h, cost, fixed, pattern):
        if not np.isfinite(cost).any():
            return
        if h > H:
            total = float(cost.min()) + fixed
            if total < best[0] - 1e-12:
                best[0], best[1] = total, tuple(pattern)
            return
        nxt_valid = g.valid[h]
        no = np.where(nxt_valid, cost, np.inf)
        visit(h + 1, no, fixed, pattern + [False])
        yes = np.where(nxt_valid, charge_step(cost, h), np.inf)
        visit(h + 1, yes, fixed + events[h - 1], pattern + [True])

    start = np.full(size, np.inf)
    if size and g.valid[0][0]:
        start[0] = 0.0
    visit(1, start, 0.0, [])
    if best[1] is None:
        raise InfeasiblePlanError(_first_infeasible_epoch(problem, g) or 1)

    # recover charge amounts for the winning pattern with predecessor tracking
    pattern = best[1]
    cost = start
    parents = []
    for h in range(1, H + 1):
        if pattern[h - 1]:
            out = np.full(size, np.inf)
            par = np.zeros(size, dtype=np.int64)
            for m in range(g.m_max + 1):
                if m >= size:
                    break
                shifted = np.full(size, np.inf)
                shifted[m:] = cost[: size - m] + prices[h - 1] * g.step * m
                take = shifted < out
                out = np.where(take, shifted, out)
                par = np.where(take, m, par)
        else:
            out, par = cost.copy(), np.zeros(size, dtype=np.int64)
        out = np.where(g.valid[h], out, np.inf)
        parents.append(par)
        cost = out
    n = int(np.argmin(cost))
    u = [0.0] * H
    for h in range(H, 0, -1):
        m = int(parents[h - 1][n])
        u[h - 1] = m * g.step
        n -= m
    return _build_plan(problem, u)


def on_need_plan(problem: RechargeProblem, threshold_frac: float = 0.2,
                 target_frac: float = 1.0) -> ChargePlan:
    """Threshold baseline: charge to ``target_frac * B`` when the level drops below ``threshold_frac * B``.

    A charge is also triggered when the epoch's expected driving would take the
    vehicle below ``e_min``.
    """
    if not 0 < threshold_frac < target_frac <= 1:
        raise ValueError("need 0 < threshold_frac < target_frac <= 1")
    p = problem.params
    B = p.battery_capacity
    target = min(target_frac * B, p.e_max)
    e = problem.initial_energy
    u = []
    for h in range(1, problem.epoch_count + 1):
        d = problem.demand[h - 1]
        uh = 0.0
        if e < threshold_frac * B - EPS or e - d < p.e_min - EPS:
            uh = max(0.0, min(target - e, problem.u_max))
        if e + uh < d + p.e_min - EPS:
            raise InfeasiblePlanError(h, f"on-need charging cannot cover epoch {h}")
        u.append(uh)
        e = e + uh - d
    plan = _build_plan(problem, u)
    check_plan(problem, plan)
    return plan
