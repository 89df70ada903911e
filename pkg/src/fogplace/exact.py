"""Exact solvers for the reduced 0/1 placement problem.

``build_model`` turns an instance into explicit packing rows over binary
placement variables, ``solve_exact`` solves it by depth-first branch and
bound, and ``solve_exhaustive`` is an independent enumeration oracle that
works on the topology directly. ``export_lp``/``parse_lp`` move models in
and out of the CPLEX LP text format.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .model import (CLOUD, TOL, Application, Assignment, ConfigType, PlacementSolution,
                    ResourceVector, Topology, audit_solution, config_for, link_flows)
from .throughput import ThroughputRequirement, all_requirements

FAMILIES = {"cap": "capacity", "cloud": "cloud-link", "cross": "crosslink", "uniq": "uniqueness"}


class SearchSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    app: int
    region: int
    server: int
    config: ConfigType
    bh: float
    bl: float

    @property
    def name(self) -> str:
        return f"x_u{self.app}_k{self.region}_i{self.server}"


@dataclass
class Row:
    name: str
    family: str
    coeffs: dict[int, float]  # variable index -> coefficient; every row reads "<= rhs"
    rhs: float


@dataclass
class ReducedModel:
    variables: list[Variable] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    homes: dict[int, int] = field(default_factory=dict)
    # Regions each app may not use; enforced by never creating those variables.
    locality: dict[int, tuple[int, ...]] = field(default_factory=dict)

    @property
    def row_count(self) -> int:
        """Explicit rows plus one locality exclusion per app."""
        return len(self.rows) + len(self.locality)

    def family_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for row in self.rows:
            counts[row.family] = counts.get(row.family, 0) + 1
        counts["locality"] = len(self.locality)
        return counts


def build_model(topology: Topology, apps: list[Application],
                reqs: dict[int, dict[int, ThroughputRequirement]] | None = None) -> ReducedModel:
    """Reduced model over the current residuals of ``topology``."""
    if reqs is None:
        reqs = {a.id: all_requirements(a, topology) for a in apps}
    model = ReducedModel()
    apps = sorted(apps, key=lambda a: a.id)
    by_id = {a.id: a for a in apps}
    for app in apps:
        home = app.home_region
        model.homes[app.id] = home
        model.locality[app.id] = tuple(k for k in range(topology.K)
                                       if not topology.is_local(home, k))
        for region, req in sorted(reqs[app.id].items()):
            if not req.feasible:
                continue
            for server in topology.regions[region].servers:
                model.variables.append(Variable(app.id, region, server.id, req.config, req.bh, req.bl))
                model.objective.append(app.reward(region))

    on_server: dict[tuple[int, int], list[int]] = {}
    on_link: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for idx, var in enumerate(model.variables):
        on_server.setdefault((var.region, var.server), []).append(idx)
        for key, amount in link_flows(model.homes[var.app], var.region, var.config, var.bh, var.bl):
            on_link.setdefault(key, []).append((idx, amount))

    for region in topology.regions:
        for server in region.servers:
            users = on_server.get((region.id, server.id), [])
            for res in ResourceVector.FIELDS:
                coeffs = {i: getattr(by_id[model.variables[i].app].demand, res) for i in users}
                model.rows.append(Row(f"cap_k{region.id}_i{server.id}_{res}", "capacity",
                                      {i: c for i, c in coeffs.items() if c != 0},
                                      getattr(server.residual, res)))
    for region in topology.fog_regions:
        key = (CLOUD, region.id)
        model.rows.append(Row(f"cloud_k{region.id}", "cloud-link",
                              {i: c for i, c in on_link.get(key, []) if c != 0},
                              topology.links[key].residual))
    for link in topology.crosslinks():
        a, b = link.endpoints
        model.rows.append(Row(f"cross_k{a}_k{b}", "crosslink",
                              {i: c for i, c in on_link.get(link.endpoints, []) if c != 0},
                              link.residual))
    for app in apps:
        model.rows.append(Row(f"uniq_u{app.id}", "uniqueness",
                              {i: 1.0 for i, v in enumerate(model.variables) if v.app == app.id},
                              1.0))
    return model


def is_feasible(model: ReducedModel, chosen) -> bool:
    """Whether setting the variables in ``chosen`` to 1 (others 0) satisfies every row."""
    chosen = set(chosen)
    for row in model.rows:
        if math.fsum(c for i, c in row.coeffs.items() if i in chosen) > row.rhs + TOL:
            return False
    return True


def to_solution(model: ReducedModel, chosen, certified: bool = True) -> PlacementSolution:
    solution = PlacementSolution(certified=certified)
    for idx in sorted(chosen):
        var = model.variables[idx]
        if var.app in solution.assignments:
            raise ValueError(f"app {var.app} chosen twice")
        solution.assignments[var.app] = Assignment(var.region, var.server, var.config, var.bh, var.bl)
    solution.undeployable = set(model.homes) - set(solution.assignments)
    solution.objective = math.fsum(model.objective[i] for i in sorted(chosen))
    return solution


class _NodeLimit(Exception):
    pass


def solve_exact(model: ReducedModel, budget: int | None = None) -> PlacementSolution:
    """Optimal placement by depth-first branch and bound.

    Apps are branched in id order, each over its variables in (region,
    server) order and then "unplaced". Among optimal solutions the one
    placing the fewest apps wins, then the lexicographically first. The
    bound is the smaller of the summed best reward of every
    undecided app that still has a fitting option and a fractional
    knapsack over the pooled cloud-link residual, since every option draws
    some cloud-link bandwidth.

    With ``budget`` the search stops after that many nodes once an
    incumbent exists, and the result is flagged ``certified=False``.
    """
    apps = sorted(model.homes)
    options: dict[int, list[int]] = {u: [] for u in apps}
    for idx, var in enumerate(model.variables):
        options[var.app].append(idx)
    var_rows: list[list[tuple[int, float]]] = [[] for _ in model.variables]
    for r, row in enumerate(model.rows):
        for idx, c in row.coeffs.items():
            var_rows[idx].append((r, c))
    rhs = [row.rhs for row in model.rows]
    cloud_rows = [r for r, row in enumerate(model.rows) if row.family == "cloud-link"]
    cloud_weight = [0.0] * len(model.variables)
    for r in cloud_rows:
        for idx, c in model.rows[r].coeffs.items():
            cloud_weight[idx] += c
    obj = model.objective
    usage = [0.0] * len(model.rows)
    choice: list[int | None] = [None] * len(apps)
    # Largest reward any app from depth d onwards can add.
    top_reward = [0.0] * (len(apps) + 1)
    for d in range(len(apps) - 1, -1, -1):
        top_reward[d] = max([top_reward[d + 1]] + [obj[i] for i in options[apps[d]]])
    best = {"value": -math.inf, "count": 0, "choice": None}
    nodes = 0

    def fits(idx):
        return all(usage[r] + c <= rhs[r] + TOL for r, c in var_rows[idx])

    def bound(depth):
        admission = 0.0
        items = []
        for u in apps[depth:]:
            top, weight = 0.0, math.inf
            for idx in options[u]:
                if obj[idx] > 0 and fits(idx):
                    top = max(top, obj[idx])
                    weight = min(weight, cloud_weight[idx])
            if top > 0:
                admission += top
                items.append((top, weight))
        if not cloud_rows:
            return admission
        room = sum(rhs[r] - usage[r] for r in cloud_rows)
        knap = 0.0
        items.sort(key=lambda it: -it[0] / it[1] if it[1] > 0 else -math.inf)
        for value, weight in items:
            if weight <= room:
                knap += value
                room -= weight
            else:
                knap += value * max(room, 0.0) / weight
                break
        return min(admission, knap)

    def dfs(depth, value, count):
        nonlocal nodes
        nodes += 1
        if budget is not None and nodes > budget and best["choice"] is not None:
            raise _NodeLimit
        if depth == len(apps):
            if value > best["value"] + TOL or (value >= best["value"] - TOL
                                               and count < best["count"]):
                best.update(value=value, count=count,
                            choice=[c for c in choice if c is not None])
            return
        if best["choice"] is not None:
            top = value + bound(depth)
            if top < best["value"] - TOL:
                return
            if top <= best["value"] + TOL:
                # At best a tie on value; it must also place fewer apps.
                gap = best["value"] - TOL - value
                fewest = count
                if gap > 0:
                    fewest += math.ceil(gap / top_reward[depth]) if top_reward[depth] > 0 else math.inf
                if fewest >= best["count"]:
                    return
        for idx in options[apps[depth]]:
            if not fits(idx):
                continue
            for r, c in var_rows[idx]:
                usage[r] += c
            choice[depth] = idx
            dfs(depth + 1, value + obj[idx], count + 1)
            for r, c in var_rows[idx]:
                usage[r] -= c
        choice[depth] = None
        dfs(depth + 1, value, count)

    certified = True
    try:
        dfs(0, 0.0, 0)
    except _NodeLimit:
        certified = False
    return to_solution(model, best["choice"] or [], certified=certified)


def solve_exhaustive(topology: Topology, apps: list[Application],
                     cap: int = 10**7) -> PlacementSolution:
    """Best feasible placement by enumerating every assignment vector.

    Partial assignments that already break a capacity are abandoned, which
    is safe because all constraints are packing constraints; no objective
    bound is used. Ties go to the lexicographically first vector with
    options in (region, server) order and "unplaced" last.
    """
    apps = sorted(apps, key=lambda a: a.id)
    opts = []
    space = 1
    for app in apps:
        mine = []
        for region, req in sorted(all_requirements(app, topology).items()):
            if req.feasible:
                mine += [(region, s.id, req) for s in topology.regions[region].servers]
        opts.append(mine)
        space *= len(mine) + 1
    if space > cap:
        raise SearchSpaceTooLarge(f"{space} assignments exceed the cap of {cap}")

    server_room = {(r.id, s.id): list(s.residual.as_tuple())
                   for r in topology.regions for s in r.servers}
    link_room = {key: link.residual for key, link in topology.links.items()}
    picked = [None] * len(apps)
    best = {"value": -math.inf, "picked": None}

    def walk(depth, value):
        if depth == len(apps):
            if value > best["value"] + TOL:
                best["value"] = value
                best["picked"] = list(picked)
            return
        app = apps[depth]
        need = app.demand.as_tuple()
        for region, server, req in opts[depth]:
            room = server_room[(region, server)]
            if any(n > r + TOL for n, r in zip(need, room)):
                continue
            flows = link_flows(app.home_region, region, req.config, req.bh, req.bl)
            if any(amount > link_room[key] + TOL for key, amount in flows):
                continue
            for i in range(3):
                room[i] -= need[i]
            for key, amount in flows:
                link_room[key] -= amount
            picked[depth] = (region, server, req)
            walk(depth + 1, value + app.reward(region))
            for i in range(3):
                room[i] += need[i]
            for key, amount in flows:
                link_room[key] += amount
        picked[depth] = None
        walk(depth + 1, value)

    walk(0, 0.0)
    solution = PlacementSolution()
    for app, pick in zip(apps, best["picked"] or [None] * len(apps)):
        if pick is None:
            solution.undeployable.add(app.id)
        else:
            region, server, req = pick
            solution.assignments[app.id] = Assignment(region, server, req.config, req.bh, req.bl)
    solution.objective = solution.compute_objective(apps)
    report = audit_solution(topology, apps, solution)
    if report:
        raise AssertionError(f"exhaustive optimum fails audit: {report}")
    return solution


# -- LP interchange ---------------------------------------------------------

_TERMS_PER_LINE = 6


def _terms(pairs) -> str:
    parts = []
    for n, (coef, name) in enumerate(pairs):
        if n and n % _TERMS_PER_LINE == 0:
            parts.append("\n   ")
        sign = "-" if coef < 0 else "+"
        parts.append(f" {sign} {abs(coef)!r} {name}")
    return "".join(parts)


def export_lp(model: ReducedModel, solution_hints=None) -> str:
    """CPLEX LP text for ``model``.

    Metadata that solvers do not need but ``parse_lp`` does (home regions,
    locality exclusions, variable throughputs, rows without terms) travels
    in ``\\`` comment lines. ``solution_hints`` is an iterable of variable
    indices written as ``\\ hint`` comments.
    """
    out = ["\\ fogplace reduced placement model"]
    for u in sorted(model.homes):
        out.append(f"\\ home u{u} {model.homes[u]}")
        out.append(f"\\ locality u{u}" + "".join(f" {k}" for k in model.locality.get(u, ())))
    for var in model.variables:
        out.append(f"\\ var {var.name} {int(var.config)} {var.bh!r} {var.bl!r}")
    for idx in sorted(solution_hints or ()):
        out.append(f"\\ hint {model.variables[idx].name} 1")
    out.append("Maximize")
    out.append(" obj:" + _terms((c, v.name) for c, v in zip(model.objective, model.variables)))
    out.append("Subject To")
    for row in model.rows:
        if not row.coeffs:
            out.append(f"\\ empty {row.name} <= {row.rhs!r}")
            continue
        terms = _terms((c, model.variables[i].name) for i, c in sorted(row.coeffs.items()))
        out.append(f" {row.name}:{terms} <= {row.rhs!r}")
    out.append("Binary")
    for var in model.variables:
        out.append(f" {var.name}")
    out.append("End")
    return "\n".join(out) + "\n"


_VAR_RE = re.compile(r"x_u(\d+)_k(\d+)_i(\d+)$")


def _parse_terms(tokens: list[str], index: dict[str, int]) -> dict[int, float]:
    coeffs = {}
    if len(tokens) % 3:
        raise ValueError(f"malformed terms: {' '.join(tokens)}")
    for sign, coef, name in zip(tokens[::3], tokens[1::3], tokens[2::3]):
        value = float(coef)
        coeffs[index[name]] = -value if sign == "-" else value
    return coeffs


def parse_lp(text: str) -> ReducedModel:
    """Rebuild a ReducedModel from ``export_lp`` output."""
    model = ReducedModel()
    index: dict[str, int] = {}
    section = None
    buffer = ""
    objective_text = ""

    def finish_row(text):
        name, body = text.split(":", 1)
        name = name.strip()
        lhs, rhs = body.split("<=")
        family = FAMILIES[name.split("_", 1)[0]]
        model.rows.append(Row(name, family, _parse_terms(lhs.split(), index), float(rhs)))

    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            words = line[1:].split()
            kind = words[0] if words else ""
            if kind == "home":
                model.homes[int(words[1][1:])] = int(words[2])
            elif kind == "locality":
                model.locality[int(words[1][1:])] = tuple(int(k) for k in words[2:])
            elif kind == "var":
                u, k, i = (int(g) for g in _VAR_RE.match(words[1]).groups())
                index[words[1]] = len(model.variables)
                model.variables.append(Variable(u, k, i, ConfigType(int(words[2])),
                                                float(words[3]), float(words[4])))
            elif kind == "empty":
                name = words[1]
                model.rows.append(Row(name, FAMILIES[name.split("_", 1)[0]], {}, float(words[3])))
            continue
        low = line.lower()
        if low in ("maximize", "maximise", "max"):
            section = "obj"
        elif low in ("subject to", "st", "s.t."):
            section = "st"
        elif low in ("binary", "binaries", "bin"):
            section = "bin"
        elif low == "end":
            break
        elif section == "obj":
            objective_text += " " + line
        elif section == "st":
            buffer += " " + line
            if "<=" in buffer and not buffer.rstrip().endswith("<="):
                finish_row(buffer)
                buffer = ""
    coeffs = _parse_terms(objective_text.split(":", 1)[1].split(), index) if objective_text else {}
    model.objective = [coeffs.get(i, 0.0) for i in range(len(model.variables))]
    for var in model.variables:
        if var.config is not config_for(model.homes[var.app], var.region):
            raise ValueError(f"{var.name}: config inconsistent with home region")
    return model
