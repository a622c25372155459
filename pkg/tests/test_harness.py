import csv
import io
import json

import numpy as np
import pytest
from scipy import stats

from evcharge import cli
from evcharge.charger_assign import P2, P2J, AssignmentProblem, reachable_chargers
from evcharge.core import ChargerSpec, EpochGrid, EpochProfile, VehicleParams
from evcharge.dispatch import DispatchConfig
from evcharge.harness.bench import bench_csv, bench_lr
from evcharge.harness.compare import run_policy_comparison
from evcharge.harness.generators import DemandSpec, GenSpec, build_appendix_b, gen_assignment_instances, gen_demand
from evcharge.harness.scenario import SCHEMA, load_scenario, save_scenario, scenario_from_dict, scenario_to_dict
from evcharge.recharge_plan import RechargeProblem
from evcharge.sim import NS, Depot, FleetVehicle, Scenario, ScenarioError


def tiny_scenario(n_requests=20):
    params = VehicleParams.from_fractions(20.0, 0.1, 0.8, drive_efficiency=0.25, speed=0.5)
    demand = DemandSpec(count=n_requests, horizon=(0.0, 120.0), peaks=((40.0, 10.0, 0.5),),
                        centers=((0.0, 0.0), (6.0, 2.0)), center_weights=(0.5, 0.5), seed=0)
    return Scenario(params, (Depot("a", (0.0, 0.0)),), (FleetVehicle("v1", "a", 12.0), FleetVehicle("v2", "a", 9.0)),
                    (ChargerSpec("c1", (2.0, 1.0), 50 / 60),), EpochGrid(0.0, 30.0, 4),
                    DispatchConfig(0.5, 0.025, 4), demand=demand, name="tiny")


def hand_p1():
    H = 3
    profile = EpochProfile((0.0,) * H, (3.0, 1.0, 2.0), (1.0,) * H, 1.0)
    return RechargeProblem(EpochGrid(0, 30, H), VehicleParams(10, 1, 10, 0.2, 1.0), profile, (2, 5, 4), 0.0, 6.0, 8.0)


# -- generators ---------------------------------------------------------------------

@pytest.mark.parametrize("mode", [P2, P2J])
def test_instance_generator_ranges_and_determinism(mode):
    spec = GenSpec(sizes=(10, 20), mode=mode, per_size=2, seed=7)
    a, b = gen_assignment_instances(spec), gen_assignment_instances(spec)
    assert [json.dumps(p.to_dict()) for *_, p in a] == [json.dumps(p.to_dict()) for *_, p in b]
    assert [(n, r) for n, r, _, _ in a] == [(10, 0), (10, 1), (20, 0), (20, 1)]
    B = spec.battery
    for n, _, m, pr in a:
        assert len(pr.vehicles) == n and len(pr.chargers) == m
        assert (m >= n) if mode == P2 else (m < n)
        for v in pr.vehicles:
            assert 0.4 * B - 1e-9 <= v.energy <= 0.5 * B + 1e-9
            assert 0.7 * B - 1e-9 <= v.target <= B + 1e-9
            assert v.target >= v.energy
            assert np.all(np.abs(v.location) <= spec.half_width)
        for c in pr.chargers:
            assert 0.0 <= c.avail_time <= 30.0
            assert np.all(np.abs(c.location) <= spec.half_width)
    other = gen_assignment_instances(GenSpec(sizes=(10,), mode=mode, per_size=1, seed=8))
    assert json.dumps(other[0][3].to_dict()) != json.dumps(a[0][3].to_dict())


def test_five_vehicle_builder():
    pr = build_appendix_b()
    assert pr.mode == P2J
    assert [v.id for v in pr.vehicles] == ["1", "2", "3", "4", "5"]
    assert [c.id for c in pr.chargers] == ["A", "B", "C", "D"]
    doc = json.dumps(pr.to_dict())
    assert json.dumps(AssignmentProblem.from_dict(json.loads(doc)).to_dict()) == doc
    # vehicle 5 cannot reach A or B
    assert reachable_chargers(pr, 4) == [2, 3]


def test_demand_basic_properties():
    assert gen_demand(DemandSpec(count=0)) == []
    spec = DemandSpec(count=1000, seed=3)
    reqs = gen_demand(spec)
    assert len(reqs) == 1000 and len({r.id for r in reqs}) == 1000
    lo, hi = spec.horizon
    assert all(lo <= r.arrival_time < hi for r in reqs)
    assert [r.arrival_time for r in reqs] == sorted(r.arrival_time for r in reqs)
    assert all(np.hypot(*np.subtract(r.pickup, r.dropoff)) >= spec.min_trip_km for r in reqs)
    assert reqs == gen_demand(spec)


def test_demand_arrivals_fit_the_mixture():
    spec = DemandSpec(count=5000, seed=11)
    t = np.array([r.arrival_time for r in gen_demand(spec)])
    lo, hi = spec.horizon
    edges = np.linspace(lo, hi, 32)

    def cdf(x):
        out = (1 - sum(w for *_, w in spec.peaks)) * stats.uniform(lo, hi - lo).cdf(x)
        for c, s, w in spec.peaks:
            out = out + w * stats.truncnorm((lo - c) / s, (hi - c) / s, loc=c, scale=s).cdf(x)
        return out

    observed, _ = np.histogram(t, edges)
    expected = np.diff(cdf(edges)) * t.size
    # keeps the chi-square approximation valid
    assert expected.min() > 5
    _, p = stats.chisquare(observed, expected)
    assert p > 1e-3
    # two separated peaks with a trough in between
    morning = np.sum(np.abs(t - spec.peaks[0][0]) < 60)
    evening = np.sum(np.abs(t - spec.peaks[1][0]) < 60)
    midday = np.sum(np.abs(t - 13 * 60) < 60)
    assert morning > 2 * midday and evening > 2 * midday


# -- scenario files -------------------------------------------------------------------

def test_scenario_round_trip(tmp_path):
    sc = tiny_scenario()
    doc = json.loads(json.dumps(scenario_to_dict(sc)))
    assert doc["schema"] == SCHEMA
    assert scenario_from_dict(doc) == sc
    path = tmp_path / "sc.json"
    save_scenario(sc, path)
    assert load_scenario(path) == sc


def test_scenario_errors(tmp_path):
    doc = scenario_to_dict(tiny_scenario())
    with pytest.raises(ScenarioError):
        scenario_from_dict({**doc, "schema": "other/2"})
    broken = dict(doc)
    del broken["vehicles"]
    with pytest.raises(ScenarioError):
        scenario_from_dict(broken)
    with pytest.raises(ScenarioError):
        scenario_from_dict([doc])
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


# -- bench and comparison ---------------------------------------------------------------

def test_bench_rows_and_csv():
    inst = gen_assignment_instances(GenSpec(sizes=(10, 60), per_size=1, seed=0))
    rows = bench_lr(inst)
    assert [(r.mode, r.size) for r in rows] == [(P2, 10), (P2, 60)]
    assert rows[0].optimality_gap == pytest.approx(0.0, abs=2e-3)
    assert rows[1].exact_seconds is None and rows[1].optimality_gap is None
    table = list(csv.reader(io.StringIO(bench_csv(rows))))
    assert table[0] == ["mode", "prob", "I", "J", "gap_pct", "lr_seconds", "exact_seconds", "gap_vs_exact_pct"]
    assert table[2][6] == "NA" and table[2][7] == "NA"
    forced = bench_lr(inst[1:], force_exact=True)
    assert forced[0].exact_seconds is not None


def test_policy_comparison_is_deterministic():
    sc = tiny_scenario(40)
    a = run_policy_comparison(sc, (NS,), seeds=(1, 2))
    b = run_policy_comparison(sc, (NS,), seeds=(1, 2))
    assert a.to_csv() == b.to_csv()
    assert [(p, s) for p, s, _ in a.runs] == [(NS, 1), (NS, 2)]
    with pytest.raises(ValueError):
        run_policy_comparison(sc, seeds=(1, 2), profile_seeds=(2, 3))


# -- command line -------------------------------------------------------------------------

def test_cli_solve_p2_five_vehicles(tmp_path, capsys):
    inp = tmp_path / "b.json"
    inp.write_text(json.dumps(build_appendix_b().to_dict()))
    assert cli.main(["solve-p2", str(inp), "--format", "csv"]) == cli.EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert {r["vehicle"]: r["charger"] for r in rows} == {"2": "A", "3": "B", "4": "D", "5": "C"}
    out = tmp_path / "lr.json"
    assert cli.main(["solve-p2", "--instance", str(inp), "--method", "lr", "--out", str(out)]) == cli.EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["objective"] == pytest.approx(182.92, abs=0.05) and doc["gap"] <= 1e-4


def test_cli_solve_p1(tmp_path, capsys):
    inp = tmp_path / "p1.json"
    inp.write_text(json.dumps(hand_p1().to_dict()))
    assert cli.main(["solve-p1", str(inp)]) == cli.EXIT_OK
    assert json.loads(capsys.readouterr().out)["total_cost"] == pytest.approx(7.0)
    doc = hand_p1().to_dict()
    doc["demand"] = [2, 9, 9]
    doc["u_max"] = 3.0
    inp.write_text(json.dumps(doc))
    assert cli.main(["solve-p1", str(inp)]) == cli.EXIT_INFEASIBLE


def test_cli_malformed_inputs(tmp_path):
    assert cli.main(["solve-p2", str(tmp_path / "missing.json")]) == cli.EXIT_MALFORMED
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2")
    assert cli.main(["solve-p1", str(bad)]) == cli.EXIT_MALFORMED
    bad.write_text(json.dumps({"vehicles": "nope"}))
    assert cli.main(["solve-p2", str(bad)]) == cli.EXIT_MALFORMED
    assert cli.main(["solve-p2"]) == cli.EXIT_MALFORMED
    bad.write_text(json.dumps({"schema": "wrong"}))
    assert cli.main(["simulate", "--scenario", str(bad)]) == cli.EXIT_MALFORMED
    assert cli.main(["simulate", "--scenario", str(bad), "--policy", "OCP"]) == cli.EXIT_MALFORMED


def test_cli_infeasible_assignment(tmp_path):
    pr = build_appendix_b().to_dict()
    pr["vehicles"] = pr["vehicles"][4:]  # vehicle 5 alone cannot reach A or B
    pr["chargers"] = pr["chargers"][:2]
    for key in ("travel_time", "travel_dist"):
        pr[key] = [row[:2] for row in pr[key][4:]]
    inp = tmp_path / "x.json"
    inp.write_text(json.dumps(pr))
    assert cli.main(["solve-p2", str(inp)]) == cli.EXIT_INFEASIBLE


def test_cli_gen_demand_and_simulate(tmp_path, capsys):
    assert cli.main(["gen-demand", "--count", "5", "--seed", "2", "--format", "csv"]) == cli.EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 5 and set(rows[0]) >= {"arrival_time", "pickup_x", "dropoff_y"}
    path = tmp_path / "sc.json"
    save_scenario(tiny_scenario(), path)
    log = tmp_path / "log.ndjson"
    assert cli.main(["simulate", "--scenario", str(path), "--seed", "1", "--log", str(log)]) == cli.EXIT_OK
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["n_served"] > 0
    assert all(json.loads(line)["kind"] for line in log.read_text().splitlines())
