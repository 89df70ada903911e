"""JSON documents for instances and solutions.

Instance schema (``"format": "fogplace-instance"``, version 1)::

    regions: [{id, servers: [{id, capacity: [memory, storage, cpu]}]}]
    links:   [{endpoints: [a, b], capacity, delay}]
    apps:    [{id, home_region, demand: [memory, storage, cpu], data_high,
               data_low, output_rate, proc_delay, source_rate,
               default_reward, rewards: {region: f}, fixed_throughput: [bh, bl] | null}]

Solution schema (``"format": "fogplace-solution"``, version 1)::

    assignments: [{app, region, server, config, bh, bl}]
    undeployable: [app ids], objective, certified

Floats are written with ``repr`` precision so documents round-trip bit for
bit; an infinite source rate is written as ``Infinity``.
"""
from __future__ import annotations

import json
from pathlib import Path

from .model import (Application, Assignment, ConfigType, Link, PlacementSolution,
                    Region, ResourceVector, Topology)

INSTANCE_FORMAT = "fogplace-instance"
SOLUTION_FORMAT = "fogplace-solution"
VERSION = 1


def instance_to_dict(topology: Topology, apps: list[Application]) -> dict:
    for region in topology.regions:
        if any(s.loads for s in region.servers):
            raise ValueError("instances are written before any placement")
    return {
        "format": INSTANCE_FORMAT,
        "version": VERSION,
        "regions": [
            {"id": r.id,
             "servers": [{"id": s.id, "capacity": list(s.capacity.as_tuple())} for s in r.servers]}
            for r in topology.regions
        ],
        "links": [
            {"endpoints": list(key), "capacity": link.capacity, "delay": link.delay}
            for key, link in sorted(topology.links.items())
        ],
        "apps": [
            {"id": a.id,
             "home_region": a.home_region,
             "demand": list(a.demand.as_tuple()),
             "data_high": a.data_high,
             "data_low": a.data_low,
             "output_rate": a.output_rate,
             "proc_delay": a.proc_delay,
             "source_rate": a.source_rate,
             "default_reward": a.default_reward,
             "rewards": {str(k): v for k, v in sorted(a.rewards.items())},
             "fixed_throughput": None if a.fixed_throughput is None else list(a.fixed_throughput)}
            for a in sorted(apps, key=lambda a: a.id)
        ],
    }


def instance_from_dict(doc: dict) -> tuple[Topology, list[Application]]:
    if doc.get("format") != INSTANCE_FORMAT:
        raise ValueError(f"not a {INSTANCE_FORMAT} document")
    regions = []
    for i, r in enumerate(doc["regions"]):
        if r["id"] != i:
            raise ValueError("regions must be listed in id order")
        region = Region(r["id"])
        for j, s in enumerate(r["servers"]):
            if s["id"] != j:
                raise ValueError(f"servers of region {i} must be listed in id order")
            region.add_server(ResourceVector.from_seq(s["capacity"]))
        regions.append(region)
    topology = Topology(regions, [Link(l["endpoints"][0], l["endpoints"][1], l["capacity"], l["delay"])
                                  for l in doc["links"]])
    apps = []
    for a in doc["apps"]:
        ft = a.get("fixed_throughput")
        app = Application(
            id=a["id"], home_region=a["home_region"],
            demand=ResourceVector.from_seq(a["demand"]),
            data_high=a["data_high"], data_low=a["data_low"],
            output_rate=a["output_rate"], proc_delay=a["proc_delay"],
            source_rate=float(a["source_rate"]),
            default_reward=a["default_reward"],
            rewards={int(k): v for k, v in a.get("rewards", {}).items()},
            fixed_throughput=None if ft is None else (ft[0], ft[1]),
        )
        apps.append(app)
        topology.regions[app.home_region].home_apps.add(app.id)
    return topology, apps


def solution_to_dict(solution: PlacementSolution) -> dict:
    return {
        "format": SOLUTION_FORMAT,
        "version": VERSION,
        "assignments": [
            {"app": u, "region": a.region, "server": a.server,
             "config": int(a.config), "bh": a.bh, "bl": a.bl}
            for u, a in sorted(solution.assignments.items())
        ],
        "undeployable": sorted(solution.undeployable),
        "objective": solution.objective,
        "certified": solution.certified,
    }


def solution_from_dict(doc: dict) -> PlacementSolution:
    if doc.get("format") != SOLUTION_FORMAT:
        raise ValueError(f"not a {SOLUTION_FORMAT} document")
    return PlacementSolution(
        assignments={a["app"]: Assignment(a["region"], a["server"], ConfigType(a["config"]),
                                          a["bh"], a["bl"])
                     for a in doc["assignments"]},
        undeployable=set(doc["undeployable"]),
        objective=doc["objective"],
        certified=doc.get("certified", True),
    )


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def write_instance(path, topology: Topology, apps: list[Application]):
    Path(path).write_text(dumps(instance_to_dict(topology, apps)))


def read_instance(path) -> tuple[Topology, list[Application]]:
    return instance_from_dict(json.loads(Path(path).read_text()))


def write_solution(path, solution: PlacementSolution):
    Path(path).write_text(dumps(solution_to_dict(solution)))


def read_solution(path) -> PlacementSolution:
    return solution_from_dict(json.loads(Path(path).read_text()))
