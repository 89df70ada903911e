"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected in ``conftest.ACCEPTANCE_LINES`` and repeated
in the terminal summary. Criteria are never loosened here: a criterion the
implementation misses fails its test.
"""
import itertools
import os
import statistics
import time

import numpy as np
import pytest

import conftest
from fogplace import io
from fogplace.exact import build_model, export_lp, parse_lp, solve_exact, solve_exhaustive
from fogplace.fpa import fpa
from fogplace.harness import (EmpiricalCDF, ExperimentPlan, instance_seed, run_algorithm,
                              run_point, run_sweep)
from fogplace.model import ConfigType, audit_solution
from fogplace.scenario import ScenarioConfig, gen_instance, gen_small_instance
from fogplace.throughput import (InfeasibleDeadline, min_throughput_type1, min_throughput_type2,
                                 min_throughput_type3)
from conftest import delay_app
from oracles import oracle_type1, oracle_type2, oracle_type3

BASE_SEED = 0
SEEDS = 10
# Budget of the branch and bound inside the feasibility suite. Outputs that
# stop at the budget are still audited; optimality is not the point there.
FEASIBILITY_NODE_LIMIT = 300


def record(criterion: str, ok: bool, detail: str):
    line = f"[{criterion}] {'PASS' if ok else 'FAIL'}  {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def paired(U: int, **kw) -> list[ScenarioConfig]:
    """The SEEDS instances at batch size U; other parameters do not move the seed."""
    return [ScenarioConfig(U=U, seed=instance_seed(BASE_SEED, U, i), **kw) for i in range(SEEDS)]


def fpa_metrics(config: ScenarioConfig):
    (_, m), = run_point(config, algorithms=["fpa"])
    return m


# -- 1 and 4: oracle family ---------------------------------------------------

ORACLE_INSTANCES = 150


@pytest.fixture(scope="module")
def oracle_runs():
    runs = []
    start = time.perf_counter()
    for seed in range(ORACLE_INSTANCES):
        topo, apps = gen_small_instance(seed)
        runs.append((seed, solve_exact(build_model(topo, apps)).objective,
                     solve_exhaustive(topo, apps).objective, fpa(topo, apps).objective))
    return runs, time.perf_counter() - start


def test_c1_oracle_equivalence(oracle_runs):
    runs, elapsed = oracle_runs
    mismatched = [s for s, ex, brute, _ in runs if ex != brute]
    above = [s for s, ex, _, heur in runs if heur > ex]
    ok = not mismatched and not above and elapsed < 120
    record("C1", ok, f"{len(runs)} instances, exact != exhaustive on {len(mismatched)}, "
                     f"fpa > exact on {len(above)}, {elapsed:.1f}s (< 120s)")


def test_c4_fpa_near_optimal(oracle_runs):
    runs, _ = oracle_runs
    ratios = [heur / ex for _, ex, _, heur in runs if ex >= 1]
    mean = statistics.fmean(ratios)
    record("C4", mean >= 0.85, f"mean fpa/exact = {mean:.4f} over {len(ratios)} instances "
                               f"(>= 0.85), min {min(ratios):.3f}")


# -- 2: feasibility ------------------------------------------------------------

GRID_U = (10, 50, 100, 150, 250)
GRID_Q = (0.3, 0.4, 0.5)
GRID_BETA = (0.3, 1.5, 2.5)
GRID_INSTANCES = 23  # 45 points x 23 = 1035 instances


@pytest.mark.slow
def test_c2_feasibility_suite():
    checked, violations, uncertified = 0, [], 0
    for U, q, beta in itertools.product(GRID_U, GRID_Q, GRID_BETA):
        for i in range(GRID_INSTANCES):
            config = ScenarioConfig(U=U, q=q, beta=beta, seed=instance_seed(BASE_SEED, U, i))
            topo, apps = gen_instance(config)
            for name in ("fpa", "fpa-r", "exact"):
                sol = run_algorithm(name, topo, apps, config.seed, FEASIBILITY_NODE_LIMIT)
                uncertified += not sol.certified
                report = audit_solution(topo, apps, sol)
                if report:
                    violations.append((U, q, beta, i, name, report[0]))
            checked += 1
    record("C2", checked >= 1000 and not violations,
           f"{checked} instances x 3 algorithms, {len(violations)} non-empty audit reports "
           f"({uncertified} exact runs stopped at the {FEASIBILITY_NODE_LIMIT}-node budget)")


# -- 3: throughput closed forms -----------------------------------------------

def _rel(a, b):
    return abs(a - b) / abs(b)


def test_c3_throughput_closed_forms():
    rng = np.random.default_rng(2024)
    draws, worst, worst_prop = 0, 0.0, 0.0
    while draws < 10_000:
        F = rng.uniform(0.2, 20.0)
        d = rng.uniform(0.0, 0.5) / F
        dh = rng.uniform(0.1, 50.0)
        dl = rng.uniform(0.01, 1.0) * dh
        B = rng.uniform(5.0, 500.0) * dh * F
        d0, dj, dj0 = rng.uniform(0.0, 0.2, size=3) / F
        app = delay_app(dh=dh, dl=dl, F=F, d=d, B=B)
        try:
            t1 = min_throughput_type1(app, d0)
            t2 = min_throughput_type2(app, d0)
            t3 = min_throughput_type3(app, dj, dj0)
        except InfeasibleDeadline:
            continue
        bh3, bl3 = oracle_type3(F, d, dj, dj0, dh, B, dl)
        worst = max(worst, _rel(t1.bl, oracle_type1(F, d, d0, dh, B, dl)),
                    _rel(t2.bh, oracle_type2(F, d, d0, dh, B)),
                    _rel(t3.bh, bh3), _rel(t3.bl, bl3))
        worst_prop = max(worst_prop, _rel(t3.bh * dl, t3.bl * dh))
        draws += 1
    record("C3", worst <= 1e-9 and worst_prop <= 1e-9,
           f"{draws} draws, max relative error {worst:.2e} vs bisection, "
           f"proportionality {worst_prop:.2e} (<= 1e-9)")


# -- 5: saturation --------------------------------------------------------------

def test_c5_saturation_shape():
    deployed = {U: [fpa_metrics(c).deployed_count for c in paired(U, q=0.4, beta=1.5)]
                for U in (10, 50, 150, 250)}
    frac = {U: statistics.fmean(deployed[U]) / U for U in (10, 50)}
    growth = statistics.fmean(deployed[250]) / statistics.fmean(deployed[150]) - 1
    ok = min(frac.values()) >= 0.95 and growth < 0.10
    record("C5", ok, f"deployed fraction U=10 {frac[10]:.3f}, U=50 {frac[50]:.3f} (>= 0.95); "
                     f"mean {statistics.fmean(deployed[150]):.1f} -> "
                     f"{statistics.fmean(deployed[250]):.1f} from U=150 to 250, "
                     f"+{100 * growth:.1f}% (< 10%)")


ILP_TIME_LIMIT = float(os.environ.get("FOGPLACE_ILP_TIME_LIMIT", "120"))


@pytest.mark.slow
def test_c5_optional_ilp_optimum():
    pytest.importorskip("scipy.optimize")
    from oracles import solve_with_highs

    config = paired(250, q=0.4, beta=1.5)[0]
    model = parse_lp(export_lp(build_model(*gen_instance(config))))
    _, primal, dual = solve_with_highs(model, time_limit=ILP_TIME_LIMIT)
    if primal >= 80 and dual <= 120:
        record("C5-ILP", True, f"U=250 optimum within [{primal:.0f}, {dual:.2f}] "
                               f"inside [80, 120] (HiGHS via export_lp)")
    elif dual < 80 or primal > 120:
        record("C5-ILP", False, f"U=250 optimum within [{primal:.0f}, {dual:.2f}], "
                                f"outside [80, 120]")
    else:
        line = (f"[C5-ILP] INCONCLUSIVE  U=250 optimum within [{primal:.0f}, {dual:.2f}] "
                f"after {ILP_TIME_LIMIT:.0f}s")
        conftest.ACCEPTANCE_LINES.append(line)
        pytest.skip(line)


# -- 6, 7, 8: topology effects ----------------------------------------------------

def test_c6_sparse_topology_bottleneck():
    parts, ok = [], True
    for U in (50, 100, 150, 250):
        sparse = statistics.fmean(fpa_metrics(c).deployed_count for c in paired(U, q=0.3, beta=0.3))
        dense = statistics.fmean(fpa_metrics(c).deployed_count for c in paired(U, q=0.5, beta=0.3))
        ok &= dense > sparse
        parts.append(f"U={U} {dense / U:.3f} vs {sparse / U:.3f}")
    record("C6", ok, "deployed fraction q=0.5 vs q=0.3: " + ", ".join(parts))


@pytest.fixture(scope="module")
def sparse_runs():
    return [fpa_metrics(c) for c in paired(100, q=0.3, beta=0.3)]


def test_c7_type1_preferred_over_type3(sparse_runs):
    wins = sum(m.config_histogram[int(ConfigType.TYPE1)] > m.config_histogram[int(ConfigType.TYPE3)]
               for m in sparse_runs)
    t1 = statistics.fmean(m.config_histogram[1] for m in sparse_runs)
    t3 = statistics.fmean(m.config_histogram[3] for m in sparse_runs)
    record("C7", wins >= 8, f"Type1 > Type3 on {wins}/10 seeds (>= 8); "
                            f"mean Type1 {t1:.1f}, Type3 {t3:.1f}")


def test_c8_crosslinks_busier_than_cloud_links(sparse_runs):
    wins = sum(m.avg_crosslink_usage >= m.avg_cloudlink_usage for m in sparse_runs)
    cross = statistics.fmean(m.avg_crosslink_usage for m in sparse_runs)
    cloud = statistics.fmean(m.avg_cloudlink_usage for m in sparse_runs)
    record("C8", wins >= 8, f"crosslink >= cloud-link usage on {wins}/10 seeds (>= 8); "
                            f"mean crosslink {cross:.3f}, cloud-link {cloud:.3f}")


# -- 9: CDFs ------------------------------------------------------------------------

def test_c9_equal_weight_cpu_cdf_is_uniform():
    points = sorted(p for c in paired(100, q=0.5, beta=1.5)
                    for p in fpa_metrics(c).resource_cdfs["cpu"].points)
    ks = EmpiricalCDF(points).ks_uniform()
    record("C9a", ks < 0.15, f"KS distance {ks:.4f} (< 0.15) over {len(points)} deployed apps")


def test_c9_cpu_weighted_favours_heavy_apps():
    heavy = total = 0
    for config in paired(100, q=0.5, beta=0.5, reward_mode="cpu_weighted"):
        topo, apps = gen_instance(config)
        top = max(a.demand.cpu for a in apps)
        sol = fpa(topo, apps)
        by_id = {a.id: a for a in apps}
        heavy += sum(by_id[u].demand.cpu == top for u in sol.assignments)
        total += sol.deployed_count
    share = heavy / total
    record("C9b", share >= 0.60, f"{share:.3f} of {total} deployed apps from the max-CPU half "
                                 f"(>= 0.60)")


# -- 10: scaling ---------------------------------------------------------------------

def test_c10_complexity_scaling():
    # One run places the 10 paired instances of a point, as the delay curve
    # averages over instances; single instances vary by a factor of two.
    def median_runtime(U):
        instances = [gen_instance(c) for c in paired(U)]
        times = []
        for _ in range(5):
            start = time.perf_counter()
            for topo, apps in instances:
                fpa(topo, apps)
            times.append(time.perf_counter() - start)
        return statistics.median(times)

    t100, t200 = median_runtime(100), median_runtime(200)
    ratio = t200 / t100
    record("C10", 1.5 <= ratio <= 4.5, f"runtime of 10 instances U=200 / U=100 = {t200:.2f}s / "
                                       f"{t100:.2f}s = {ratio:.2f} (in [1.5, 4.5])")


# -- 11: determinism ------------------------------------------------------------------

def test_c11_determinism_and_round_trips(tmp_path):
    problems = []
    for config in (ScenarioConfig(U=80, seed=5),
                   ScenarioConfig(U=40, q=0.7, reward_mode="cpu_weighted", seed=6),
                   ScenarioConfig(U=30, delay_mode=True, link_delay=(0.0, 0.05),
                                  proc_delay=(0.0, 0.1), seed=7)):
        blobs = []
        for run in ("a", "b"):
            d = tmp_path / f"{config.seed}{run}"
            d.mkdir()
            topo, apps = gen_instance(config)
            io.write_instance(d / "instance.json", topo, apps)
            for name in ("fpa", "fpa-r", "exact"):
                io.write_solution(d / f"{name}.json", run_algorithm(name, topo, apps, config.seed, 2000))
            blobs.append([p.read_bytes() for p in sorted(d.iterdir())])
        if blobs[0] != blobs[1]:
            problems.append(f"files differ for seed {config.seed}")

        topo, apps = gen_instance(config)
        topo2, apps2 = io.read_instance(tmp_path / f"{config.seed}a" / "instance.json")
        if apps2 != apps or io.instance_to_dict(topo2, apps2) != io.instance_to_dict(topo, apps):
            problems.append(f"instance round trip differs for seed {config.seed}")
        model = build_model(topo, apps)
        if parse_lp(export_lp(model)) != model:
            problems.append(f"LP reimport differs for seed {config.seed}")

    def sweep(out):
        plan = ExperimentPlan(base=ScenarioConfig(seed=9), U=[10, 40], q=[0.3, 0.5], beta=[1.5],
                              instances_per_point=2, output_dir=str(out), timing=False,
                              node_limit=2000, uncertified=True,
                              algorithms=["fpa", "fpa-r", "exact"])
        run_sweep(plan, workers=1)
        return [(out / n).read_bytes() for n in ("runs.csv", "aggregate.csv")]

    if sweep(tmp_path / "s1") != sweep(tmp_path / "s2"):
        problems.append("sweep CSVs differ")
    record("C11", not problems, "; ".join(problems) or
           "instance, solution and sweep files byte-identical across runs; "
           "LP and instance round trips exact")
