"""Command-line entry point: ``evcharge <subcommand> ...``.

Exit codes: 0 success, 2 infeasible instance, 3 malformed input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict

from .charger_assign import AssignmentInfeasible, AssignmentProblem, LrConfig, solve_exact, solve_lr
from .core import EpochProfile
from .harness.bench import EXACT_CUTOFF, bench_csv, bench_lr
from .harness.compare import DEFAULT_PROFILE_SEEDS, DEFAULT_TEST_SEEDS, comparison_csv, run_policy_comparison
from .harness.generators import TABLE_SIZES, DemandSpec, GenSpec, gen_assignment_instances, gen_demand
from .harness.scenario import default_scenario, load_scenario, request_to_dict
from .recharge_plan import ChargePlan, InfeasiblePlanError, RechargeProblem, brute_force_p1, on_need_plan, solve_p1
from .sim import (
    OCP,
    POLICIES,
    PolicyKind,
    ScenarioError,
    build_plans,
    estimate_profiles,
    metrics_csv,
    read_ndjson,
    run,
    to_ndjson,
)

EXIT_OK, EXIT_INFEASIBLE, EXIT_MALFORMED = 0, 2, 3


class MalformedInput(ValueError):
    pass


def _int_list(text: str):
    """``"1,2,5-7"`` -> ``[1, 2, 5, 6, 7]``."""
    out = []
    try:
        for part in text.split(","):
            if "-" in part.strip()[1:]:
                a, b = part.rsplit("-", 1)
                out.extend(range(int(a), int(b) + 1))
            elif part.strip():
                out.append(int(part))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc
    return out


def _read_json(path):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise MalformedInput(f"{path}: {exc.strerror}") from exc


def _emit(args, payload, csv_text: str | None = None) -> None:
    text = csv_text if args.format == "csv" and csv_text is not None else json.dumps(payload, indent=1) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _rows_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _scenario(args):
    if args.scenario:
        return load_scenario(args.scenario)
    return default_scenario(seed=args.seed)


def _load_problem(doc) -> AssignmentProblem:
    if isinstance(doc, dict) and "problem" in doc:
        doc = doc["problem"]
    try:
        return AssignmentProblem.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"not an assignment problem: {exc!r}") from exc


def _load_profiles(doc) -> dict:
    try:
        return {v: EpochProfile(p["drive_prob"], p["expected_wait"], p["price"], p["earn_rate"])
                for v, p in doc.items()}
    except (AttributeError, KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"not a profile document: {exc!r}") from exc


# -- subcommands ----------------------------------------------------------------

def cmd_gen_instances(args):
    spec = GenSpec(sizes=tuple(args.sizes), mode=args.mode, per_size=args.per_size, seed=args.seed)
    docs = [{"size": n, "replicate": r, "n_chargers": m, "problem": p.to_dict()}
            for n, r, m, p in gen_assignment_instances(spec)]
    _emit(args, docs)


def cmd_gen_demand(args):
    reqs = gen_demand(DemandSpec(count=args.count, seed=args.seed))
    rows = [request_to_dict(r) for r in reqs]
    flat = [{"id": r["id"], "arrival_time": r["arrival_time"], "pickup_x": r["pickup"][0],
             "pickup_y": r["pickup"][1], "dropoff_x": r["dropoff"][0], "dropoff_y": r["dropoff"][1],
             "party_size": r["party_size"]} for r in rows]
    _emit(args, rows, _rows_csv(flat, ["id", "arrival_time", "pickup_x", "pickup_y", "dropoff_x",
                                       "dropoff_y", "party_size"]))


def _input_path(args) -> str:
    path = args.instance or args.input
    if not path:
        raise MalformedInput("no input instance given")
    return path


def cmd_solve_p1(args):
    try:
        problem = RechargeProblem.from_dict(_read_json(_input_path(args)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MalformedInput):
            raise
        raise MalformedInput(f"not a recharge problem: {exc!r}") from exc
    if args.method == "dp":
        plan = solve_p1(problem, args.energy_step)
    elif args.method == "brute":
        plan = brute_force_p1(problem, args.energy_step)
    else:
        plan = on_need_plan(problem)
    rows = [{"epoch": h + 1, "energy": plan.energy_trajectory[h], "charge": plan.charge_amounts[h],
             "flag": int(plan.charge_flags[h])} for h in range(problem.epoch_count)]
    _emit(args, plan.to_dict(), _rows_csv(rows, ["epoch", "energy", "charge", "flag"]))


def cmd_solve_p2(args):
    problem = _load_problem(_read_json(_input_path(args)))
    trace = None
    if args.method == "exact":
        sol = solve_exact(problem)
    else:
        config = LrConfig(delta=args.delta, gap_tol=args.gap_tol, max_iter=args.max_iter)
        sol, trace = solve_lr(problem, config)
    doc = sol.to_dict(problem)
    doc["mode"] = problem.mode
    if trace is not None:
        doc.update(gap=trace.final_gap, iterations=len(trace), lower_bound=trace.best_lb)
        if args.trace:
            with open(args.trace, "w") as fh:
                fh.write(trace.to_csv())
    _emit(args, doc, _rows_csv(doc["assignments"], ["vehicle", "charger", "arrival", "wait", "charged",
                                                     "charge_time"]))


def cmd_bench_lr(args):
    if args.input:
        docs = _read_json(args.input)
        try:
            instances = [(d["size"], d["replicate"], d["n_chargers"], _load_problem(d)) for d in docs]
        except (KeyError, TypeError) as exc:
            raise MalformedInput(f"not an instance list: {exc!r}") from exc
    else:
        instances = []
        for mode in args.modes:
            spec = GenSpec(sizes=tuple(args.sizes), mode=mode, per_size=args.per_size, seed=args.seed)
            instances += gen_assignment_instances(spec)
    rows = bench_lr(instances, LrConfig(delta=args.delta, max_iter=args.max_iter),
                    exact_cutoff=args.exact_cutoff, force_exact=args.force_exact, workers=args.workers)
    _emit(args, [asdict(r) for r in rows], bench_csv(rows))


def cmd_estimate_profiles(args):
    sc = _scenario(args)
    if args.logs:
        logs = []
        for path in args.logs:
            try:
                with open(path) as fh:
                    logs.append(read_ndjson(fh.read()))
            except (OSError, json.JSONDecodeError) as exc:
                raise MalformedInput(f"{path}: unreadable event log ({exc})") from exc
    else:
        logs = [run(sc, PolicyKind("NS"), seed=s)[1] for s in args.seeds]
    profiles = estimate_profiles(logs, sc.grid, sc.energy_price, sc.earn_rate,
                                 vehicle_ids=[v.id for v in sc.vehicles])
    doc = {v: asdict(p) for v, p in profiles.items()}
    rows = [{"vehicle": v, "epoch": h + 1, "drive_prob": p.drive_prob[h], "expected_wait": p.expected_wait[h]}
            for v, p in profiles.items() for h in range(len(p))]
    _emit(args, doc, _rows_csv(rows, ["vehicle", "epoch", "drive_prob", "expected_wait"]))


def _ocp_plans(args, sc):
    if args.plans:
        doc = _read_json(args.plans)
        try:
            return {v: ChargePlan.from_dict(p) for v, p in doc.items()}
        except (AttributeError, KeyError, TypeError) as exc:
            raise MalformedInput(f"not a plan document: {exc!r}") from exc
    if args.profiles:
        return build_plans(sc, _load_profiles(_read_json(args.profiles)))
    raise MalformedInput("OCP needs --plans or --profiles")


def cmd_simulate(args):
    sc = _scenario(args)
    plans = _ocp_plans(args, sc) if args.policy == OCP else None
    metrics, log = run(sc, PolicyKind(args.policy, plans=plans), seed=args.seed)
    if args.log:
        with open(args.log, "w") as fh:
            fh.write(to_ndjson(log))
    _emit(args, metrics.to_dict(), metrics_csv([((args.policy,), metrics)]))


def cmd_compare_policies(args):
    sc = _scenario(args)
    plans = _ocp_plans(args, sc) if (args.plans or args.profiles) else None
    cmp = run_policy_comparison(sc, args.policies, args.seeds, args.profile_seeds, plans=plans,
                                workers=args.workers)
    doc = {
        "runs": [{"policy": p, "seed": s, **m.to_dict()} for p, s, m in cmp.runs],
        "means": {p: cmp.mean(p).to_dict() for p in cmp.policies},
        "relative_change_pct": cmp.deltas(),
    }
    _emit(args, doc, comparison_csv(cmp))


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (demand seed for simulations)")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    ap = argparse.ArgumentParser(prog="evcharge", description="EV fleet charging planning and simulation")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-instances", parents=[common], help="random assignment instances")
    p.add_argument("--sizes", type=_int_list, default=list(TABLE_SIZES))
    p.add_argument("--mode", choices=("P2", "P2J"), default="P2")
    p.add_argument("--per-size", type=int, default=3)
    p.set_defaults(func=cmd_gen_instances)

    p = sub.add_parser("gen-demand", parents=[common], help="synthetic ride requests")
    p.add_argument("--count", type=int, default=1000)
    p.set_defaults(func=cmd_gen_demand)

    p = sub.add_parser("solve-p1", parents=[common], help="single-vehicle recharge plan")
    p.add_argument("input", nargs="?", help="recharge problem JSON ('-' for stdin)")
    p.add_argument("--instance", dest="instance", help="same as the positional input")
    p.add_argument("--method", choices=("dp", "brute", "on-need"), default="dp")
    p.add_argument("--energy-step", type=float, default=0.1)
    p.set_defaults(func=cmd_solve_p1)

    p = sub.add_parser("solve-p2", parents=[common], help="vehicle-charger assignment")
    p.add_argument("input", nargs="?", help="assignment problem JSON ('-' for stdin)")
    p.add_argument("--instance", dest="instance", help="same as the positional input")
    p.add_argument("--method", choices=("exact", "lr"), default="exact")
    p.add_argument("--delta", type=float, default=0.6)
    p.add_argument("--gap-tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--trace", help="write the LR iteration trace CSV here")
    p.set_defaults(func=cmd_solve_p2)

    p = sub.add_parser("bench-lr", parents=[common], help="LR against exact on random instances")
    p.add_argument("--input", help="instance list from gen-instances")
    p.add_argument("--sizes", type=_int_list, default=list(TABLE_SIZES))
    p.add_argument("--modes", nargs="+", choices=("P2", "P2J"), default=["P2", "P2J"])
    p.add_argument("--per-size", type=int, default=3)
    p.add_argument("--delta", type=float, default=0.6)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--exact-cutoff", type=int, default=EXACT_CUTOFF)
    p.add_argument("--force-exact", action="store_true", help="time the exact solver at every size")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench_lr)

    for name, func, helptext in (("estimate-profiles", cmd_estimate_profiles, "profiles from NS runs"),
                                 ("simulate", cmd_simulate, "one simulated day"),
                                 ("compare-policies", cmd_compare_policies, "NS / FCFS / OCP comparison")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--scenario", help="scenario JSON (default: built-in synthetic scenario)")
        p.set_defaults(func=func)
        if name == "estimate-profiles":
            p.add_argument("logs", nargs="*", help="NDJSON event logs; without them NS runs are simulated")
            p.add_argument("--seeds", type=_int_list, default=list(DEFAULT_PROFILE_SEEDS))
        if name in ("simulate", "compare-policies"):
            p.add_argument("--plans", help="per-vehicle plan JSON for OCP")
            p.add_argument("--profiles", help="profile JSON; plans are solved from it")
        if name == "simulate":
            p.add_argument("--policy", choices=POLICIES, default="NS")
            p.add_argument("--log", help="write the NDJSON event log here")
        if name == "compare-policies":
            p.add_argument("--policies", nargs="+", choices=POLICIES, default=list(POLICIES))
            p.add_argument("--seeds", type=_int_list, default=list(DEFAULT_TEST_SEEDS))
            p.add_argument("--profile-seeds", type=_int_list, default=list(DEFAULT_PROFILE_SEEDS))
            p.add_argument("--workers", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (InfeasiblePlanError, AssignmentInfeasible) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (MalformedInput, ScenarioError) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
