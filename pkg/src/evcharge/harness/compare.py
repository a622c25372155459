"""Policy comparison: profile estimation on reference runs, then NS / FCFS / OCP on held-out demand."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from ..core import EpochProfile
from ..recharge_plan import ChargePlan
from ..sim import (
    FCFS,
    NS,
    OCP,
    PolicyKind,
    Scenario,
    SimMetrics,
    build_plans,
    estimate_profiles,
    mean_metrics,
    metrics_csv,
    run,
)

DEFAULT_TEST_SEEDS = (1, 2, 3)
DEFAULT_PROFILE_SEEDS = tuple(range(1001, 1011))


def _sim(args):
    scenario, policy, seed = args
    return run(scenario, policy, seed)


def _run_many(jobs, workers: int):
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_sim, jobs))
    return [_sim(j) for j in jobs]


def reference_profiles(scenario: Scenario, seeds: Sequence[int], workers: int = 1) -> Dict[str, EpochProfile]:
    """Profiles estimated from NS runs on the given demand seeds."""
    logs = [log for _, log in _run_many([(scenario, PolicyKind(NS), s) for s in seeds], workers)]
    return estimate_profiles(logs, scenario.grid, scenario.energy_price, scenario.earn_rate,
                             vehicle_ids=[v.id for v in scenario.vehicles])


@dataclass
class Comparison:
    runs: List[Tuple[str, int, SimMetrics]]
    profiles: Optional[Dict[str, EpochProfile]] = None
    plans: Optional[Dict[str, ChargePlan]] = field(default=None, repr=False)

    def mean(self, policy: str) -> SimMetrics:
        return mean_metrics([m for p, _, m in self.runs if p == policy])

    @property
    def policies(self) -> List[str]:
        return list(dict.fromkeys(p for p, _, _ in self.runs))

    def relative_change(self, metric: str, policy: str = OCP, baseline: str = NS) -> float:
        """Percent change of a mean metric, ``policy`` against ``baseline``."""
        a = getattr(self.mean(policy), metric)
        b = getattr(self.mean(baseline), metric)
        return 100.0 * (a - b) / b if b else 0.0

    def to_csv(self) -> str:
        rows = [((p, s), m) for p, s, m in self.runs]
        rows += [((p, "mean"), self.mean(p)) for p in self.policies]
        return metrics_csv(rows, ("policy", "seed"))

    def deltas(self) -> Dict[str, Dict[str, float]]:
        out = {}
        if OCP in self.policies:
            for base in (NS, FCFS):
                if base in self.policies:
                    out[f"OCP_vs_{base}"] = {m: self.relative_change(m, OCP, base)
                                             for m in ("fleet_wait_h", "energy_cost", "energy_kwh",
                                                       "passenger_wait_min", "served_pct")}
        return out


def run_policy_comparison(scenario: Scenario, policies: Sequence[str] = (NS, FCFS, OCP),
                          seeds: Sequence[int] = DEFAULT_TEST_SEEDS,
                          profile_seeds: Sequence[int] = DEFAULT_PROFILE_SEEDS,
                          plans: Optional[Mapping[str, ChargePlan]] = None,
                          ocp_method: str = "lr", workers: int = 1) -> Comparison:
    """Run each policy on each test seed. OCP plans come from NS runs on ``profile_seeds`` unless given."""
    overlap = set(seeds) & set(profile_seeds)
    if OCP in policies and plans is None and overlap:
        raise ValueError(f"test and profile seeds overlap: {sorted(overlap)}")
    profiles = None
    if OCP in policies and plans is None:
        profiles = reference_profiles(scenario, profile_seeds, workers)
        plans = build_plans(scenario, profiles)
    jobs, labels = [], []
    for p in policies:
        pol = PolicyKind(p, plans=plans if p == OCP else None, method=ocp_method)
        for s in seeds:
            jobs.append((scenario, pol, s))
            labels.append((p, s))
    results = _run_many(jobs, workers)
    runs = [(p, s, m) for (p, s), (m, _) in zip(labels, results)]
    return Comparison(runs, profiles, dict(plans) if plans is not None else None)


def comparison_csv(cmp: Comparison) -> str:
    buf = io.StringIO(cmp.to_csv())
    buf.seek(0, io.SEEK_END)
    w = csv.writer(buf, lineterminator="\n")
    for name, d in cmp.deltas().items():
        w.writerow([name, "pct_change"] + [f"{k}={v:.1f}" for k, v in d.items()])
    return buf.getvalue()
