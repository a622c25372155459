import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evcharge.charger_assign import (
    P2,
    P2J,
    AssignmentInfeasible,
    AssignmentProblem,
    ChargerState,
    LbMatching,
    LrConfig,
    ReachabilityError,
    VehicleState,
    brute_force_assignment,
    check_solution,
    derive_yw,
    lb_greedy,
    make_solution,
    objective,
    pair_cost,
    reachable_chargers,
    solve_exact,
    solve_lr,
    subgradient_update,
    ub_repair,
)
from evcharge.charger_assign.lagrangian import _swap_search
from evcharge.core import VehicleParams
from evcharge.harness.generators import GenSpec, build_appendix_b, random_assignment_problem

APPB = build_appendix_b()
IDX = {name: k for k, name in enumerate("ABCD")}


def small_problem(seed, mode=None, max_n=7):
    rng = np.random.default_rng(seed)
    mode = mode or (P2 if rng.random() < 0.5 else P2J)
    if mode == P2:
        n = int(rng.integers(1, max_n + 1))
        m = int(rng.integers(n, max_n + 1))
    else:
        n = int(rng.integers(2, max_n + 1))
        m = int(rng.integers(1, n))
    return random_assignment_problem(rng, n, m, GenSpec(sizes=(n,), mode=mode, half_width=20.0))


def relaxed_brute_force(problem, lam, mode):
    """Minimum of the relaxed objective by enumerating each free-side entity's choice."""
    C = problem.masked_costs
    if mode == P2:
        best = min(sum(C[i, js[i]] + lam[js[i]] for i in range(problem.n_vehicles))
                   for js in itertools.product(range(problem.n_chargers), repeat=problem.n_vehicles))
    else:
        best = min(sum(C[is_[j], j] + lam[is_[j]] for j in range(problem.n_chargers))
                   for is_ in itertools.product(range(problem.n_vehicles), repeat=problem.n_chargers))
    return best - lam.sum()


# -- pair costs and tight quantities -----------------------------------------

def test_pair_cost_examples():
    assert pair_cost(APPB, 1, IDX["A"]) == pytest.approx(26.3, abs=0.1)
    assert pair_cost(APPB, 4, IDX["C"]) == pytest.approx(37.5, abs=0.1)
    p = VehicleParams(10, 1, 9, 0.2, 1.0)
    trivial = AssignmentProblem((VehicleState("v", 5, 5),), (ChargerState("c", 1.0, 7.0),),
                                np.array([[7.0]]), np.array([[0.0]]), p)
    assert pair_cost(trivial, 0, 0) == 7.0


def test_reachability():
    assert reachable_chargers(APPB, 0) == [IDX["A"], IDX["B"]]
    assert reachable_chargers(APPB, 4) == [IDX["C"], IDX["D"]]
    p = VehicleParams(10, 1, 10, 0.2, 1.0)
    vs = (VehicleState("low", 1.0, 5.0), VehicleState("full", 10.0, 10.0))
    cs = (ChargerState("here", 1.0), ChargerState("near", 1.0), ChargerState("far", 1.0))
    dist = np.array([[0.0, 1.0, 20.0], [0.0, 1.0, 20.0]])
    pr = AssignmentProblem(vs, cs, dist, dist, p)
    assert reachable_chargers(pr, 0) == [0]
    assert reachable_chargers(pr, 1) == [0, 1, 2]


def test_derive_yw():
    Y, W = derive_yw(APPB, {3: IDX["D"]})
    assert Y[3] == pytest.approx(25.06, abs=0.01)
    assert W[3] == pytest.approx(2.0)
    Y, W = derive_yw(APPB, {1: IDX["A"]})
    assert W[1] == 0.0
    with pytest.raises(ReachabilityError):
        derive_yw(APPB, {0: IDX["C"]})


def test_objective_examples():
    assert objective(APPB, make_solution(APPB, {})) == 0.0
    sol = make_solution(APPB, {1: 0, 2: 1, 3: 3, 4: 2})
    assert sol.objective == pytest.approx(182.92, abs=0.05)
    assert sol.objective == pytest.approx(sum(pair_cost(APPB, i, j) for i, j in sol.pairs()), rel=1e-9)


# -- exact solver ------------------------------------------------------------

def test_five_vehicle_instance_exact():
    sol = solve_exact(APPB)
    assert APPB.mode == P2J
    assert {APPB.vehicles[i].id: APPB.chargers[j].id for i, j in sol.pairs()} == \
        {"2": "A", "3": "B", "4": "D", "5": "C"}
    assert sol.unassigned_vehicles == {0}
    assert sol.objective == pytest.approx(182.92, abs=0.05)
    row = {r["vehicle"]: r for r in sol.to_dict(APPB)["assignments"]}["3"]
    assert (row["arrival"], row["wait"]) == pytest.approx((18.0, 22.0))
    assert row["charge_time"] == pytest.approx(21.5, abs=0.1)


def test_single_pair():
    p = VehicleParams(10, 1, 9, 0.2, 1.0)
    pr = AssignmentProblem((VehicleState("v", 4, 8),), (ChargerState("c", 0.5, 3.0),),
                           np.array([[2.0]]), np.array([[2.0]]), p)
    sol = solve_exact(pr)
    assert sol.pairs() == [(0, 0)]
    assert sol.objective == pytest.approx(pair_cost(pr, 0, 0))


def test_infeasible_instances_name_entities():
    p = VehicleParams(10, 1, 9, 0.2, 1.0)
    dist = np.array([[1.0, 1.0], [50.0, 50.0]])
    vs = (VehicleState("ok", 5, 8), VehicleState("stranded", 2, 8))
    cs = (ChargerState("a", 1.0), ChargerState("b", 1.0))
    pr = AssignmentProblem(vs, cs, dist, dist, p)
    with pytest.raises(AssignmentInfeasible) as exc:
        solve_exact(pr)
    assert exc.value.vehicles == ("stranded",)
    with pytest.raises(AssignmentInfeasible):
        solve_lr(pr)
    # P2J: one charger nobody can reach
    dist = np.array([[1.0, 50.0], [1.0, 50.0], [1.0, 50.0]])
    vs = tuple(VehicleState(f"v{k}", 2, 8) for k in range(3))
    pr = AssignmentProblem(vs, cs, dist, dist, p)
    with pytest.raises(AssignmentInfeasible) as exc:
        solve_exact(pr)
    assert exc.value.chargers == ("b",)


def test_mode_mismatch_rejected():
    with pytest.raises(ValueError):
        solve_exact(APPB, mode=P2)
    with pytest.raises(ValueError):
        solve_lr(APPB, mode=P2)


@given(st.integers(0, 2 ** 32 - 1))
def test_exact_matches_enumeration(seed):
    pr = small_problem(seed)
    sol = solve_exact(pr)
    check_solution(pr, sol)
    assert sol.objective == pytest.approx(brute_force_assignment(pr).objective, rel=1e-9, abs=1e-9)


def test_problem_round_trip():
    back = AssignmentProblem.from_dict(json.loads(json.dumps(APPB.to_dict())))
    assert solve_exact(back).objective == pytest.approx(solve_exact(APPB).objective)
    assert np.array_equal(back.travel_dist, APPB.travel_dist)


# -- Lagrangian pieces -------------------------------------------------------

def test_lb_greedy_examples():
    # vehicles 2..5 against the four chargers form a P2 instance
    sub = AssignmentProblem(APPB.vehicles[1:], APPB.chargers, APPB.travel_time[1:], APPB.travel_dist[1:],
                            APPB.params)
    lb, z = lb_greedy(sub, np.zeros(4))
    assert lb.choice[3] == IDX["D"]
    costs = sub.masked_costs
    assert costs[3, IDX["D"]] == pytest.approx(32.5, abs=0.1)
    assert costs[3, IDX["C"]] == pytest.approx(37.5, abs=0.1)
    assert z == pytest.approx(np.min(costs, axis=1).sum())
    assert z <= solve_exact(sub).objective + 1e-9
    # pricing every charger but B out of reach sends every vehicle that can to B
    lb, _ = lb_greedy(sub, np.array([1e6, 0.0, 1e6, 1e6]))
    assert (lb.choice[:2] == IDX["B"]).all()  # vehicles 4 and 5 cannot reach node 3
    assert lb.violated()


def test_lb_greedy_checks_multiplier_shape():
    with pytest.raises(ValueError):
        lb_greedy(APPB, np.zeros(4))


@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 2 ** 32 - 1))
def test_lb_greedy_solves_relaxation(seed, lam_seed):
    pr = small_problem(seed, max_n=5)
    size = pr.n_chargers if pr.mode == P2 else pr.n_vehicles
    lam = np.random.default_rng(lam_seed).uniform(0, 20, size)
    _, z = lb_greedy(pr, lam)
    assert z == pytest.approx(relaxed_brute_force(pr, lam, pr.mode), rel=1e-9, abs=1e-9)


def test_subgradient_examples():
    lb = LbMatching(P2, np.array([0, 0]), 90.0, np.array([1, -1]))  # column sums (2, 0)
    lam, step = subgradient_update(np.array([1.0, 5.0]), lb, 100.0, 90.0, 0.6)
    assert step == pytest.approx(3.0)
    assert lam == pytest.approx([4.0, 2.0])
    lam, _ = subgradient_update(np.array([0.0, 0.0]), lb, 100.0, 90.0, 0.6)
    assert lam[1] == 0.0  # projected back to zero
    converged = LbMatching(P2, np.array([0, 1]), 90.0, np.array([0, 0]))
    lam, step = subgradient_update(np.array([1.0, 2.0]), converged, 100.0, 90.0, 0.6)
    assert step == 0.0 and lam.tolist() == [1.0, 2.0]


def test_repair_keeps_least_charged_vehicle():
    p = VehicleParams(20, 1, 20, 0.2, 1.0)
    vs = (VehicleState("v1", 3.0, 10.0), VehicleState("v2", 6.0, 10.0))
    cs = (ChargerState("A", 1.0), ChargerState("B", 1.0))
    tt = np.array([[1.0, 5.0], [1.0, 3.0]])
    pr = AssignmentProblem(vs, cs, tt, tt, p)
    lb, _ = lb_greedy(pr, np.zeros(2))
    assert lb.choice.tolist() == [0, 0]
    sol = ub_repair(pr, lb)
    assert sol.assignment == {0: 0, 1: 1}


def test_repair_identity_on_feasible_relaxation():
    lb, _ = lb_greedy(APPB, np.zeros(5))
    sol = ub_repair(APPB, lb)
    check_solution(APPB, sol)
    assert sol.objective >= 182.92 - 0.05
    assert sol.objective == pytest.approx(182.92, abs=0.05)
    feasible = LbMatching(P2J, np.array([1, 2, 4, 3]), 0.0, np.array([-1, 0, 0, 0, 0]))
    assert ub_repair(APPB, feasible).objective <= make_solution(APPB, {1: 0, 2: 1, 4: 2, 3: 3}).objective + 1e-9


@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 2 ** 32 - 1))
def test_repair_soundness(seed, lam_seed):
    pr = small_problem(seed)
    size = pr.n_chargers if pr.mode == P2 else pr.n_vehicles
    lb, _ = lb_greedy(pr, np.random.default_rng(lam_seed).uniform(0, 30, size))
    sol = ub_repair(pr, lb)
    check_solution(pr, sol)
    assert sol.objective == pytest.approx(sum(pair_cost(pr, i, j) for i, j in sol.pairs()), rel=1e-9)


@given(st.integers(0, 2 ** 32 - 1))
def test_swap_search_reaches_two_exchange_optimum(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    C = rng.uniform(0, 10, (n, n))
    chg_of = rng.permutation(n)
    before = C[np.arange(n), chg_of].sum()
    changed = _swap_search(C, chg_of)
    after = C[np.arange(n), chg_of].sum()
    assert sorted(chg_of.tolist()) == list(range(n))
    assert after < before - 1e-12 if changed else after == before
    for a, b in itertools.combinations(range(n), 2):
        assert C[a, chg_of[b]] + C[b, chg_of[a]] >= C[a, chg_of[a]] + C[b, chg_of[b]] - 1e-9


def test_lr_config_validation():
    for bad in (dict(delta=0), dict(delta=2.5), dict(gap_tol=0), dict(max_iter=0), dict(initial_lambda=(-1,))):
        with pytest.raises(ValueError):
            LrConfig(**bad)
    assert LrConfig().tolerance_for(999) == 1e-4
    assert LrConfig().tolerance_for(1000) == 5e-3


def test_lr_five_vehicle_instance():
    sol, trace = solve_lr(APPB)
    assert sol.objective == pytest.approx(182.92, abs=0.05)
    assert trace.final_gap <= 1e-4
    assert len(trace) < 50


@pytest.mark.parametrize("mode", [P2, P2J])
@pytest.mark.parametrize("seed", range(4))
def test_weak_duality_along_trace(mode, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 41))
    m = n if mode == P2 else int(rng.integers(1, n))
    pr = random_assignment_problem(rng, n, m, GenSpec(sizes=(n,), mode=mode))
    opt = solve_exact(pr).objective
    sol, trace = solve_lr(pr)
    check_solution(pr, sol)
    tol = 1e-9 * opt
    prev_lb, prev_ub = -np.inf, np.inf
    for r in trace.records:
        assert r.z_lb <= opt + tol
        assert r.z_ub >= opt - tol
        assert r.best_lb >= prev_lb and r.best_ub <= prev_ub
        assert r.gap == pytest.approx(max((r.best_ub - r.best_lb) / r.best_ub, 0.0))
        prev_lb, prev_ub = r.best_lb, r.best_ub
    assert sol.objective == pytest.approx(trace.best_ub)
