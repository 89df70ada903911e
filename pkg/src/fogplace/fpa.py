"""Greedy fog placement (FPA) and its region-aggregated variant (FPA-R).

Every outer iteration scores the best admissible option of each pending
app by the squared norm of its gradient, i.e. the fractions of residual
memory, CPU, storage and link bandwidth the option would consume, and
deploys the app whose best option is cheapest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import (CLOUD, TOL, Application, Assignment, ConfigType, PlacementSolution,
                    ResourceVector, Topology, apply_placement, link_flows, link_key)
from .throughput import ThroughputRequirement, feasible_requirements


@dataclass(frozen=True)
class Candidate:
    app: int
    region: int
    server: int | None  # None: FPA-R picks the server after region selection
    req: ThroughputRequirement
    gradient: tuple[float, float, float, float, float]
    reward: float = 1.0

    @cached_property
    def norm2(self) -> float:
        return math.fsum(g * g for g in self.gradient)

    @cached_property
    def score(self) -> float:
        # Unit rewards reduce this to the plain squared norm.
        return self.norm2 / self.reward if self.reward > 0 else math.inf


def _ratio(need: float, residual: float) -> float:
    if need <= 0:
        return 0.0
    return need / residual if residual > 0 else math.inf


def _links_ok(app: Application, topology: Topology, req: ThroughputRequirement) -> bool:
    for key, amount in link_flows(app.home_region, req.region, req.config, req.bh, req.bl):
        link = topology.links.get(key)
        if link is None or amount > link.residual + TOL:
            return False
    return True


def verify(region: int, app: Application, topology: Topology,
           req: ThroughputRequirement) -> int | None:
    """Lowest-id server of ``region`` able to host ``app`` under ``req``, if any."""
    if not req.feasible or not _links_ok(app, topology, req):
        return None
    for server in topology.regions[region].servers:
        if app.demand.fits(server.residual):
            return server.id
    return None


def gradient(app: Application, residual: ResourceVector, topology: Topology,
             req: ThroughputRequirement) -> tuple[float, float, float, float, float]:
    d = app.demand
    v_m = _ratio(d.memory, residual.memory)
    v_p = _ratio(d.cpu, residual.cpu)
    v_s = _ratio(d.storage, residual.storage)
    home = app.home_region
    if req.config is ConfigType.TYPE1:
        b1, b2 = _ratio(req.bl, topology.link(home, CLOUD).residual), 0.0
    elif req.config is ConfigType.TYPE2:
        b1, b2 = _ratio(req.bh, topology.link(home, CLOUD).residual), 0.0
    else:
        j = req.region
        b1 = _ratio(req.bh, topology.link(home, j).residual)
        b2 = _ratio(req.bl, topology.link(j, CLOUD).residual)
    return (v_m, v_p, v_s, b1, b2)


def _region_candidates(app: Application, topology: Topology, region: int,
                       req: ThroughputRequirement, aggregated: bool) -> list[Candidate]:
    if aggregated and region != CLOUD:
        if not req.feasible or not _links_ok(app, topology, req):
            return []
        residual = topology.regions[region].aggregate_residual()
        if not app.demand.fits(residual):
            return []
        return [Candidate(app.id, region, None, req, gradient(app, residual, topology, req),
                          app.reward(region))]
    first = verify(region, app, topology, req)
    if first is None:
        return []
    return [Candidate(app.id, region, server.id, req,
                      gradient(app, server.residual, topology, req), app.reward(region))
            for server in topology.regions[region].servers[first:]
            if app.demand.fits(server.residual)]


def candidates(app: Application, topology: Topology, reqs: dict[int, ThroughputRequirement],
               aggregated: bool = False) -> list[Candidate]:
    """Admissible options of ``app`` with their gradients.

    Every server of a verified region that fits the app is a candidate of
    its own. With ``aggregated`` each fog region is instead treated as one
    server holding the sum of its servers' residuals.
    """
    out = []
    for region, req in reqs.items():
        out.extend(_region_candidates(app, topology, region, req, aggregated))
    return out


def _links_used(home: int, region: int) -> tuple[tuple[int, int], ...]:
    if region in (CLOUD, home):
        return (link_key(home, CLOUD),)
    return (link_key(home, region), link_key(region, CLOUD))


def select(candidates: list[Candidate]) -> Candidate:
    """Cheapest candidate; ties go to the lowest (region, server)."""
    if not candidates:
        raise ValueError("select needs at least one admissible candidate")
    return min(candidates, key=lambda c: (c.score, c.region, -1 if c.server is None else c.server))


def _greedy(topology: Topology, apps: list[Application], aggregated: bool,
            rng: np.random.Generator | None) -> PlacementSolution:
    topo = topology.copy()
    by_id = {a.id: a for a in apps}
    reqs = {a.id: feasible_requirements(a, topo) for a in apps}
    working = sorted(apps, key=lambda a: a.id)
    solution = PlacementSolution()

    # Candidates per (app, region). A placement only changes one region's
    # servers and the links it draws on, so only entries reading those are
    # recomputed; everything else is reused unchanged.
    cache = {a.id: {r: _region_candidates(a, topo, r, req, aggregated)
                    for r, req in reqs[a.id].items()} for a in apps}
    best_of: dict[int, Candidate | None] = {}

    while working:
        best: Candidate | None = None
        pending = []
        for app in working:
            if app.id not in best_of:
                cands = [c for per_region in cache[app.id].values() for c in per_region]
                best_of[app.id] = select(cands) if cands else None
            choice = best_of[app.id]
            if choice is None:
                # Residuals only shrink, so an app with no option now never gets one.
                solution.undeployable.add(app.id)
                continue
            pending.append(app)
            if best is None or choice.score < best.score:
                best = choice
        working = pending
        if best is None:
            break

        app = by_id[best.app]
        working.remove(app)
        server = best.server
        if server is None:
            fitting = [s.id for s in topo.regions[best.region].servers
                       if app.demand.fits(s.residual)]
            if not fitting:
                solution.undeployable.add(app.id)
                continue
            server = fitting[int(rng.integers(len(fitting)))]
        req = best.req
        apply_placement(topo, app, best.region, server, req.config, req.bh, req.bl)
        solution.assignments[app.id] = Assignment(best.region, server, req.config, req.bh, req.bl)

        touched = {key for key, _ in link_flows(app.home_region, best.region, req.config,
                                                req.bh, req.bl)}
        for other in working:
            entries = cache[other.id]
            for region, other_req in reqs[other.id].items():
                if region == best.region or touched.intersection(
                        _links_used(other.home_region, region)):
                    entries[region] = _region_candidates(other, topo, region, other_req,
                                                         aggregated)
                    best_of.pop(other.id, None)

    solution.objective = solution.compute_objective(apps)
    return solution


def fpa(topology: Topology, apps: list[Application]) -> PlacementSolution:
    """Place ``apps`` greedily; ``topology`` is not modified."""
    return _greedy(topology, apps, aggregated=False, rng=None)


def fpa_r(topology: Topology, apps: list[Application], rng_seed: int) -> PlacementSolution:
    """FPA against region-aggregated capacities with a random fitting server per region."""
    return _greedy(topology, apps, aggregated=True, rng=np.random.default_rng(rng_seed))
