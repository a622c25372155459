"""Benchmark of the Lagrangian solver against the exact assignment solver."""
from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..charger_assign import AssignmentProblem, LrConfig, solve_exact, solve_lr

EXACT_CUTOFF = 50  # exact timings reported only below this many vehicles unless forced


@dataclass(frozen=True)
class InstanceResult:
    mode: str
    size: int
    replicate: int
    n_chargers: int
    lr_objective: float
    lr_gap: float  # (best UB - best LB) / best UB from the LR trace
    lr_seconds: float
    iterations: int
    exact_objective: Optional[float]
    exact_seconds: Optional[float]

    @property
    def optimality_gap(self) -> Optional[float]:
        """LR objective against the exact optimum, when known."""
        if self.exact_objective is None:
            return None
        return (self.lr_objective - self.exact_objective) / self.exact_objective if self.exact_objective else 0.0


@dataclass(frozen=True)
class SizeRow:
    mode: str
    size: int
    n_chargers: float  # mean over replicates
    gap: float
    lr_seconds: float
    exact_seconds: Optional[float]
    optimality_gap: Optional[float]


def _run_one(args) -> InstanceResult:
    mode, n, r, m, problem, config, with_exact = args
    t0 = time.perf_counter()
    sol, trace = solve_lr(problem, config)
    lr_s = time.perf_counter() - t0
    ex_obj = ex_s = None
    if with_exact:
        t0 = time.perf_counter()
        ex_obj = solve_exact(problem, tie_break=None).objective
        ex_s = time.perf_counter() - t0
    return InstanceResult(mode, n, r, m, sol.objective, trace.final_gap, lr_s, len(trace), ex_obj, ex_s)


def bench_instances(instances: Sequence[Tuple[int, int, int, AssignmentProblem]], config: LrConfig | None = None,
                    exact_cutoff: int = EXACT_CUTOFF, force_exact: bool = False,
                    workers: int = 1) -> List[InstanceResult]:
    """Solve every ``(size, replicate, n_chargers, problem)`` with LR, and exactly below the cutoff.

    Results come back in input order whatever the worker count.
    """
    config = config or LrConfig()
    jobs = [(p.mode, n, r, m, p, config, force_exact or n < exact_cutoff) for n, r, m, p in instances]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def summarize(results: Sequence[InstanceResult]) -> List[SizeRow]:
    rows = []
    keys = sorted({(r.mode, r.size) for r in results}, key=lambda k: (k[0], k[1]))
    for mode, size in keys:
        grp = [r for r in results if r.mode == mode and r.size == size]
        exact = [r.exact_seconds for r in grp if r.exact_seconds is not None]
        opt = [r.optimality_gap for r in grp if r.optimality_gap is not None]
        rows.append(SizeRow(
            mode, size,
            float(np.mean([r.n_chargers for r in grp])),
            float(np.mean([r.lr_gap for r in grp])),
            float(np.mean([r.lr_seconds for r in grp])),
            float(np.mean(exact)) if len(exact) == len(grp) else None,
            float(np.mean(opt)) if len(opt) == len(grp) else None,
        ))
    return rows


def bench_lr(instances, config: LrConfig | None = None, exact_cutoff: int = EXACT_CUTOFF,
             force_exact: bool = False, workers: int = 1) -> List[SizeRow]:
    return summarize(bench_instances(instances, config, exact_cutoff, force_exact, workers))


def bench_csv(rows: Sequence[SizeRow]) -> str:
    """Report table: mode, |I|, mean |J|, gap, LR seconds, exact seconds (NA when skipped)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode", "prob", "I", "J", "gap_pct", "lr_seconds", "exact_seconds", "gap_vs_exact_pct"])
    for k, row in enumerate(rows):
        prob = 1 + sum(1 for r in rows[:k] if r.mode == row.mode)
        w.writerow([
            row.mode, prob, row.size, f"{row.n_chargers:.1f}", f"{100 * row.gap:.2f}", f"{row.lr_seconds:.1f}",
            "NA" if row.exact_seconds is None else f"{row.exact_seconds:.1f}",
            "NA" if row.optimality_gap is None else f"{100 * row.optimality_gap:.2f}",
        ])
    return buf.getvalue()
