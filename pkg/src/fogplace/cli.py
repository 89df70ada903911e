"""Command line interface: ``fogplace generate|solve|audit|sweep|export-lp``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import yaml

from . import io
from .exact import build_model, export_lp
from .harness import (ALGORITHMS, DEFAULT_NODE_LIMIT, compute_metrics, load_plan,
                      run_algorithm, run_sweep)
from .model import audit_solution
from .scenario import ScenarioConfig, gen_instance


def _load_config(path: str | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    return ScenarioConfig.from_dict(yaml.safe_load(Path(path).read_text()) or {})


def cmd_generate(args) -> int:
    config = _load_config(args.config)
    overrides = {k: v for k, v in (("seed", args.seed), ("U", args.U)) if v is not None}
    config = config.with_(**overrides)
    topology, apps = gen_instance(config)
    io.write_instance(args.output, topology, apps)
    print(f"wrote {len(apps)} apps over {topology.K} regions to {args.output}")
    return 0


def cmd_solve(args) -> int:
    topology, apps = io.read_instance(args.instance)
    start = time.perf_counter()
    solution = run_algorithm(args.algorithm, topology, apps, args.seed, args.node_limit)
    elapsed = (time.perf_counter() - start) * 1e3
    report = audit_solution(topology, apps, solution)
    if report:
        for v in report:
            print(f"violation: {v}", file=sys.stderr)
        return 2
    io.write_solution(args.output, solution)
    metrics = compute_metrics(topology, apps, solution, elapsed)
    if args.metrics:
        Path(args.metrics).write_text(json.dumps(metrics.to_dict(), indent=1) + "\n")
    flag = "" if solution.certified else " (not certified optimal)"
    print(f"{args.algorithm}: deployed {metrics.deployed_count}/{len(apps)}, "
          f"objective {solution.objective:.6g}{flag}, {elapsed:.1f} ms")
    return 0


def cmd_audit(args) -> int:
    topology, apps = io.read_instance(args.instance)
    solution = io.read_solution(args.solution)
    report = audit_solution(topology, apps, solution, literal_cloud_rows=args.literal_cloud_rows)
    for v in report:
        print(v)
    print("feasible" if not report else f"{len(report)} violation(s)")
    return 0 if not report else 1


def cmd_sweep(args) -> int:
    plan = load_plan(args.plan)
    if args.output_dir:
        plan.output_dir = args.output_dir
    if args.uncertified:
        plan.uncertified = True
    if args.no_timing:
        plan.timing = False
    rows = run_sweep(plan, workers=args.workers)
    print(f"{len(rows)} runs written to {plan.output_dir}")
    return 0


def cmd_export_lp(args) -> int:
    topology, apps = io.read_instance(args.instance)
    text = export_lp(build_model(topology, apps))
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogplace", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a random instance")
    p.add_argument("--config", help="scenario config (YAML or JSON)")
    p.add_argument("--seed", type=int)
    p.add_argument("--U", type=int, help="batch size override")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="place an instance")
    p.add_argument("instance")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="fpa")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for fpa-r")
    p.add_argument("--node-limit", type=int, default=DEFAULT_NODE_LIMIT)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--metrics", help="write run metrics as JSON")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("audit", help="check a solution against every constraint")
    p.add_argument("instance")
    p.add_argument("solution")
    p.add_argument("--literal-cloud-rows", action="store_true",
                   help="charge neighbours' home-deployed apps to each cloud-link")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("sweep", help="run an experiment plan")
    p.add_argument("plan")
    p.add_argument("-o", "--output-dir")
    p.add_argument("--workers", type=int, help="default: $FOGPLACE_WORKERS or 1")
    p.add_argument("--uncertified", action="store_true",
                   help="accept node-limited exact results")
    p.add_argument("--no-timing", action="store_true",
                   help="write nan delays so reruns are byte-identical")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-lp", help="write the reduced model in LP format")
    p.add_argument("instance")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export_lp)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
