"""Discrete-event fleet simulation under the NS, FCFS and OCP charging policies."""
from .engine import Simulator, read_ndjson, run, to_ndjson
from .invariants import check_log
from .policies import (
    BatchResult,
    BatchVehicle,
    ChargeDecision,
    ChargerQueueState,
    policy_fcfs_step,
    policy_ns_step,
    policy_ocp_epoch,
)
from .metrics import CSV_COLUMNS, SimMetrics, mean_metrics, metrics_csv
from .profiles import build_plans, estimate_profiles
from .scenario import FCFS, NS, OCP, POLICIES, Depot, FleetVehicle, PolicyKind, Scenario, ScenarioError
