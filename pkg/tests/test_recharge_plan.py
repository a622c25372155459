import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evcharge.core import EpochGrid, EpochProfile, VehicleParams
from evcharge.recharge_plan import (
    ChargePlan,
    InfeasiblePlanError,
    PlanViolation,
    RechargeProblem,
    brute_force_p1,
    check_plan,
    on_need_plan,
    opportunity_cost,
    plan_cost,
    solve_p1,
)


def make_problem(demand, event_costs, prices=None, e1=6.0, e_min=1.0, e_max=10.0, B=10.0,
                 u_max=8.0, fixed_cost=0.0):
    """Event cost per epoch is passed through the expected wait with no driving and unit earn rate."""
    H = len(demand)
    prices = (1.0,) * H if prices is None else tuple(prices)
    profile = EpochProfile((0.0,) * H, tuple(event_costs), prices, 1.0)
    return RechargeProblem(EpochGrid(0, 30, H), VehicleParams(B, e_min, e_max, 0.2, 1.0), profile,
                           tuple(demand), fixed_cost, e1, u_max)


HAND = make_problem((2, 5, 4), (3, 1, 2))


def random_problem(rng, H=None, fixed_cost=None):
    H = H or int(rng.integers(1, 11))
    B = 10.0
    e_max = round(float(rng.uniform(6, 10)), 1)
    e1 = round(float(rng.uniform(1, e_max)), 1)
    return make_problem(
        demand=tuple(np.round(rng.uniform(0, 3.5, H), 1)),
        event_costs=tuple(rng.uniform(0, 4, H)),
        prices=tuple(rng.uniform(0.1, 1.0, H)),
        e1=e1, e_min=1.0, e_max=e_max, B=B,
        u_max=round(float(rng.uniform(1.5, 8)), 1),
        fixed_cost=float(rng.uniform(0, 3)) if fixed_cost is None else fixed_cost,
    )


def test_hand_instance():
    plan = solve_p1(HAND)
    assert plan.charge_amounts == pytest.approx((0, 6, 0))
    assert plan.charge_flags == (False, True, False)
    assert plan.total_cost == pytest.approx(7.0)
    assert brute_force_p1(HAND).total_cost == pytest.approx(7.0)
    assert plan_cost(HAND, plan) == pytest.approx(7.0)


def test_zero_demand_no_charging():
    pr = make_problem((0, 0, 0, 0), (1, 1, 1, 1), e1=10.0)
    for solver in (solve_p1, brute_force_p1, on_need_plan):
        plan = solver(pr)
        assert plan.charge_events == 0
        assert plan.total_cost == 0.0


def test_infeasible_names_epoch():
    pr = make_problem((2, 9, 9), (0, 0, 0), e1=6.0, u_max=3.0)
    with pytest.raises(InfeasiblePlanError) as exc:
        solve_p1(pr)
    assert exc.value.epoch == 3  # charging early covers epoch 2, not epoch 3
    with pytest.raises(InfeasiblePlanError):
        brute_force_p1(pr)


def test_opportunity_cost_examples():
    prof = EpochProfile((0.5, 0.0, 1.0), (10, 0, 30), (0, 0, 0), 1 / 6)
    assert opportunity_cost(prof, 1, 30) == pytest.approx(25 / 6)
    assert opportunity_cost(prof, 2, 30) == 0.0
    prof2 = replace(prof, earn_rate=0.2485)
    assert opportunity_cost(prof2, 3, 30) == pytest.approx(14.91)
    with pytest.raises(IndexError):
        opportunity_cost(prof, 4, 30)


def test_plan_cost_examples():
    pr = make_problem((0, 0), (0, 4.0), prices=(0.2756, 0.2756), e1=9.0, e_max=30, B=30, u_max=20,
                      fixed_cost=5.77)
    plan = ChargePlan((0.0, 18.0), (False, True), (9.0, 9.0, 27.0), 0.0)
    assert plan_cost(pr, plan) == pytest.approx(14.73, abs=0.005)
    zero = ChargePlan((0.0, 0.0), (False, False), (9.0, 9.0, 9.0), 0.0)
    assert plan_cost(pr, zero) == 0.0


def test_on_need_examples():
    plan = on_need_plan(HAND, threshold_frac=0.2, target_frac=1.0)
    # epoch 2 starts at 4 >= 2 but 4 - 5 < e_min, so the look-ahead guard charges there
    assert plan.charge_amounts == pytest.approx((0, 6, 0))
    assert plan.energy_trajectory == pytest.approx((6, 4, 5, 1))
    with pytest.raises(ValueError):
        on_need_plan(HAND, threshold_frac=0.5, target_frac=0.4)


def test_on_need_threshold_trigger():
    pr = make_problem((1, 1, 1), (0, 0, 0), e1=2.5, u_max=8)
    plan = on_need_plan(pr, threshold_frac=0.3, target_frac=1.0)
    assert plan.charge_amounts == pytest.approx((7.5, 0, 0))


@pytest.mark.parametrize("broken, constraint", [
    (ChargePlan((0, 9, 0), (False, True, False), (6, 4, 8, 4), 0), "charge bound"),
    (ChargePlan((0, 6, 0), (False, False, False), (6, 4, 5, 1), 0), "charge flag"),
    (ChargePlan((0, 0, 0), (False, False, False), (6, 4, -1, -5), 0), "reserve"),
    (ChargePlan((0, 6, 0), (False, True, False), (5, 4, 5, 1), 0), "initial energy"),
    (ChargePlan((0, 6, 0), (False, True, False), (6, 4, 5, 2), 0), "state transition"),
    (ChargePlan((0, 6), (False, True), (6, 4, 5), 0), "shape"),
])
def test_check_plan_names_constraint(broken, constraint):
    with pytest.raises(PlanViolation) as exc:
        check_plan(HAND, broken)
    assert constraint in str(exc.value)


def test_serialization_round_trip():
    plan = solve_p1(HAND)
    assert RechargeProblem.from_dict(json.loads(json.dumps(HAND.to_dict()))) == HAND
    assert ChargePlan.from_dict(json.loads(json.dumps(plan.to_dict()))) == plan


def test_brute_force_refuses_long_horizons():
    pr = make_problem((0,) * 20, (0,) * 20, e1=10)
    with pytest.raises(ValueError):
        brute_force_p1(pr)


@given(st.integers(0, 2 ** 32 - 1))
def test_dp_matches_enumeration(seed):
    pr = random_problem(np.random.default_rng(seed))
    try:
        plan = solve_p1(pr)
    except InfeasiblePlanError as exc:
        with pytest.raises(InfeasiblePlanError):
            brute_force_p1(pr)
        assert 1 <= exc.epoch <= pr.epoch_count
        return
    assert brute_force_p1(pr).total_cost == pytest.approx(plan.total_cost, abs=1e-9)
    # closure: every plan passes the constraint checker and ends above the floor
    check_plan(pr, plan)
    assert plan.energy_trajectory[-1] >= pr.params.e_min - 1e-9


@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 5), st.floats(0, 5))
def test_fixed_cost_monotone_in_events(seed, c1, c2):
    lo, hi = sorted((c1, c2))
    base = random_problem(np.random.default_rng(seed), fixed_cost=lo)
    try:
        cheap = solve_p1(base)
    except InfeasiblePlanError:
        return
    dear = solve_p1(replace(base, fixed_cost=hi))
    assert dear.charge_events <= cheap.charge_events


@given(st.integers(0, 2 ** 32 - 1))
def test_on_need_never_beats_optimum(seed):
    pr = random_problem(np.random.default_rng(seed))
    try:
        base = on_need_plan(pr)
    except InfeasiblePlanError:
        return
    assert solve_p1(pr).total_cost <= base.total_cost + 1e-9
