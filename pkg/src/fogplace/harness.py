"""Experiment runner: instance sweeps, audits and plot-ready CSV metrics."""
from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import io
from .exact import build_model, solve_exact
from .fpa import fpa, fpa_r
from .model import (Application, ConfigType, PlacementSolution, ResourceVector, Topology,
                    audit_solution, placed_topology)
from .scenario import DEMAND_RANGES, ScenarioConfig, gen_instance

log = logging.getLogger(__name__)

ALGORITHMS = ("fpa", "fpa-r", "exact")
WORKERS_ENV = "FOGPLACE_WORKERS"
DEFAULT_NODE_LIMIT = 20_000

CSV_COLUMNS = ["point_id", "seed", "algorithm", "K", "U", "q", "beta", "reward_mode",
               "deployed", "undeployable", "objective", "type1", "type2", "type3",
               "avg_crosslink_usage", "avg_cloudlink_usage", "orch_delay_ms"]
METRIC_COLUMNS = CSV_COLUMNS[8:]


class AuditFailure(RuntimeError):
    def __init__(self, message, instance: dict, solution: dict):
        super().__init__(message)
        self.instance = instance
        self.solution = solution


class UncertifiedResult(RuntimeError):
    pass


@dataclass
class EmpiricalCDF:
    points: list[float]  # sorted normalized demands

    @property
    def empty(self) -> bool:
        return not self.points

    @property
    def probs(self) -> list[float]:
        n = len(self.points)
        return [(i + 1) / n for i in range(n)]

    def __call__(self, x: float) -> float:
        if self.empty:
            return math.nan
        return sum(1 for p in self.points if p <= x) / len(self.points)

    def ks_uniform(self) -> float:
        """Kolmogorov-Smirnov distance to the uniform law on [0, 1]."""
        n = len(self.points)
        return max(max((i + 1) / n - p, p - i / n) for i, p in enumerate(self.points))


def compute_cdf(solution: PlacementSolution, apps: list[Application], resource: str,
                ranges: dict = DEMAND_RANGES) -> EmpiricalCDF:
    """CDF of deployed apps' demand for ``resource``, rescaled by its generation range."""
    if resource not in ResourceVector.FIELDS:
        raise ValueError(f"unknown resource {resource!r}")
    lo, hi = ranges[resource]
    by_id = {a.id: a for a in apps}
    values = sorted((getattr(by_id[u].demand, resource) - lo) / (hi - lo)
                    for u in solution.assignments)
    return EmpiricalCDF(values)


def link_usage(topology: Topology, apps: list[Application],
               solution: PlacementSolution) -> tuple[float, float]:
    """Mean used fraction of (crosslinks, cloud-links); 0 when a class is absent."""
    placed = placed_topology(topology, apps, solution)

    def mean_used(links):
        if not links:
            return 0.0
        return math.fsum(min(1.0, 1.0 - l.residual / l.capacity) if l.capacity > 0 else 0.0
                         for l in links) / len(links)

    return mean_used(placed.crosslinks()), mean_used(placed.cloud_links())


@dataclass
class RunMetrics:
    deployed_count: int
    objective: float
    undeployable_count: int
    config_histogram: dict[int, int]
    avg_crosslink_usage: float
    avg_cloudlink_usage: float
    resource_cdfs: dict[str, EmpiricalCDF]
    orchestration_delay_ms: float
    certified: bool = True

    def to_dict(self) -> dict:
        return {
            "deployed_count": self.deployed_count,
            "objective": self.objective,
            "undeployable_count": self.undeployable_count,
            "config_histogram": {f"type{k}": v for k, v in sorted(self.config_histogram.items())},
            "avg_crosslink_usage": self.avg_crosslink_usage,
            "avg_cloudlink_usage": self.avg_cloudlink_usage,
            "resource_cdfs": {k: c.points for k, c in self.resource_cdfs.items()},
            "orchestration_delay_ms": self.orchestration_delay_ms,
            "certified": self.certified,
        }


def compute_metrics(topology: Topology, apps: list[Application], solution: PlacementSolution,
                    delay_ms: float, ranges: dict = DEMAND_RANGES) -> RunMetrics:
    hist = {int(t): 0 for t in ConfigType}
    for asg in solution.assignments.values():
        hist[int(asg.config)] += 1
    cross, cloud = link_usage(topology, apps, solution)
    return RunMetrics(
        deployed_count=solution.deployed_count,
        objective=solution.objective,
        undeployable_count=len(apps) - solution.deployed_count,
        config_histogram=hist,
        avg_crosslink_usage=cross,
        avg_cloudlink_usage=cloud,
        resource_cdfs={r: compute_cdf(solution, apps, r, ranges) for r in ResourceVector.FIELDS},
        orchestration_delay_ms=delay_ms,
        certified=solution.certified,
    )


def run_algorithm(name: str, topology: Topology, apps: list[Application], seed: int = 0,
                  node_limit: int | None = DEFAULT_NODE_LIMIT) -> PlacementSolution:
    if name == "fpa":
        return fpa(topology, apps)
    if name == "fpa-r":
        return fpa_r(topology, apps, seed)
    if name == "exact":
        return solve_exact(build_model(topology, apps), budget=node_limit)
    raise ValueError(f"unknown algorithm {name!r}; choose from {ALGORITHMS}")


def run_point(config: ScenarioConfig, algorithms=ALGORITHMS, node_limit: int | None = DEFAULT_NODE_LIMIT,
              allow_uncertified: bool = False, timing: bool = True) -> list[tuple[str, RunMetrics]]:
    """Generate one instance and run each algorithm on it (same instance for all)."""
    topology, apps = gen_instance(config)
    results = []
    for name in algorithms:
        start = time.perf_counter()
        solution = run_algorithm(name, topology, apps, config.seed, node_limit)
        elapsed = (time.perf_counter() - start) * 1e3 if timing else math.nan
        report = audit_solution(topology, apps, solution)
        if report:
            raise AuditFailure(f"{name} produced an infeasible placement: "
                               + "; ".join(map(str, report)),
                               io.instance_to_dict(topology, apps), io.solution_to_dict(solution))
        if not solution.certified and not allow_uncertified:
            raise UncertifiedResult(f"{name} hit the node limit of {node_limit} without certifying")
        results.append((name, compute_metrics(topology, apps, solution, elapsed,
                                              config.demand_ranges)))
    return results


# -- sweeps -----------------------------------------------------------------

@dataclass
class ExperimentPlan:
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    U: list[int] = field(default_factory=lambda: [10, 50, 100, 150, 250])
    q: list[float] = field(default_factory=lambda: [0.4])
    beta: list[float] = field(default_factory=lambda: [1.5])
    instances_per_point: int = 10
    algorithms: list[str] = field(default_factory=lambda: ["fpa", "fpa-r"])
    output_dir: str = "results"
    node_limit: int | None = DEFAULT_NODE_LIMIT
    uncertified: bool = False
    timing: bool = True

    def __post_init__(self):
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}")
        if self.instances_per_point < 1:
            raise ValueError("instances_per_point must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentPlan:
        d = dict(d)
        base = ScenarioConfig.from_dict(d.pop("base", {}))
        sweeps = d.pop("sweeps", {})
        return cls(base=base, **sweeps, **d)

    def points(self) -> list[ScenarioConfig]:
        return [self.base.with_(U=U, q=q, beta=beta)
                for U, q, beta in itertools.product(self.U, self.q, self.beta)]


def load_plan(path) -> ExperimentPlan:
    return ExperimentPlan.from_dict(yaml.safe_load(Path(path).read_text()) or {})


def instance_seed(base_seed: int, U: int, index: int) -> int:
    """Seed of instance ``index`` at batch size ``U``.

    It deliberately ignores q, beta and the reward mode, so points that
    differ only in those share app batches and give paired comparisons.
    """
    digest = hashlib.sha256(f"{base_seed}:{U}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _run_task(task):
    point_id, config, algorithms, node_limit, uncertified, timing = task
    try:
        results = run_point(config, algorithms, node_limit, uncertified, timing)
    except AuditFailure as exc:
        return point_id, config, None, {"error": str(exc), "instance": exc.instance,
                                        "solution": exc.solution}
    except Exception as exc:  # recorded per point; the sweep carries on
        return point_id, config, None, {"error": f"{type(exc).__name__}: {exc}"}
    return point_id, config, results, None


def _row(point_id: int, config: ScenarioConfig, name: str, m: RunMetrics) -> dict:
    return {
        "point_id": point_id, "seed": config.seed, "algorithm": name,
        "K": config.K, "U": config.U, "q": config.q, "beta": config.beta,
        "reward_mode": config.reward_mode,
        "deployed": m.deployed_count, "undeployable": m.undeployable_count,
        "objective": m.objective,
        "type1": m.config_histogram[1], "type2": m.config_histogram[2],
        "type3": m.config_histogram[3],
        "avg_crosslink_usage": m.avg_crosslink_usage,
        "avg_cloudlink_usage": m.avg_cloudlink_usage,
        "orch_delay_ms": m.orchestration_delay_ms,
    }


def aggregate(rows: list[dict]) -> list[dict]:
    """Mean and sample standard deviation of every metric per (point, algorithm)."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["point_id"], row["algorithm"]), []).append(row)
    out = []
    for (point_id, name), members in sorted(groups.items()):
        first = members[0]
        agg = {k: first[k] for k in ("point_id", "algorithm", "K", "U", "q", "beta", "reward_mode")}
        agg["n"] = len(members)
        for col in METRIC_COLUMNS:
            values = [float(r[col]) for r in members]
            mean = math.fsum(values) / len(values)
            agg[f"{col}_mean"] = mean
            # Sample standard deviation; nan timings propagate instead of raising.
            agg[f"{col}_std"] = (math.sqrt(math.fsum((v - mean) ** 2 for v in values)
                                           / (len(values) - 1)) if len(values) > 1 else 0.0)
        out.append(agg)
    return out


def _write_csv(path: Path, rows: list[dict], columns: list[str]):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def worker_count() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def run_sweep(plan: ExperimentPlan, workers: int | None = None) -> list[dict]:
    """Run the Cartesian sweep and write ``runs.csv``, ``aggregate.csv`` and,
    if anything failed, ``failures.json`` under ``plan.output_dir``.

    Returns the per-run rows sorted by (point, seed, algorithm).
    """
    tasks = []
    for point_id, point in enumerate(plan.points()):
        for i in range(plan.instances_per_point):
            config = point.with_(seed=instance_seed(plan.base.seed, point.U, i))
            tasks.append((point_id, config, list(plan.algorithms), plan.node_limit,
                          plan.uncertified, plan.timing))
    workers = workers or worker_count()
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_run_task, tasks))
    else:
        outcomes = [_run_task(t) for t in tasks]

    rows, failures = [], []
    for point_id, config, results, failure in outcomes:
        if failure is not None:
            log.warning("point %d seed %d failed: %s", point_id, config.seed, failure["error"])
            failures.append({"point_id": point_id, "seed": config.seed, **failure})
            continue
        rows += [_row(point_id, config, name, m) for name, m in results]
    order = {name: i for i, name in enumerate(ALGORITHMS)}
    rows.sort(key=lambda r: (r["point_id"], r["seed"], order[r["algorithm"]]))

    out = Path(plan.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "runs.csv", rows, CSV_COLUMNS)
    agg = aggregate(rows)
    agg_cols = ["point_id", "algorithm", "K", "U", "q", "beta", "reward_mode", "n"]
    agg_cols += [f"{c}_{s}" for c in METRIC_COLUMNS for s in ("mean", "std")]
    _write_csv(out / "aggregate.csv", agg, agg_cols)
    failures_path = out / "failures.json"
    if failures:
        failures_path.write_text(json.dumps(failures, indent=1, sort_keys=True) + "\n")
    elif failures_path.exists():
        failures_path.unlink()
    return rows
