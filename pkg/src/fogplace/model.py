"""Infrastructure and application types, topology mutation and the constraint auditor.

Units throughout: data in Mbit, bandwidth in Mbit/s, delays in seconds,
memory and storage in GB, CPU in MIPS.
"""
from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable

TOL = 1e-9
CLOUD = 0


class StructuralError(ValueError):
    """A solution references an app, region or server that does not exist."""


class PlacementError(ValueError):
    """A placement would drive a server or link residual negative."""


@dataclass(frozen=True)
class ResourceVector:
    memory: float = 0.0
    storage: float = 0.0
    cpu: float = 0.0

    FIELDS = ("memory", "storage", "cpu")

    def __post_init__(self):
        if min(self.memory, self.storage, self.cpu) < 0:
            raise ValueError(f"negative resource component in {self}")

    def __add__(self, other: ResourceVector) -> ResourceVector:
        return ResourceVector(self.memory + other.memory,
                              self.storage + other.storage,
                              self.cpu + other.cpu)

    def __mul__(self, k: float) -> ResourceVector:
        return ResourceVector(self.memory * k, self.storage * k, self.cpu * k)

    __rmul__ = __mul__

    def __le__(self, other: ResourceVector) -> bool:
        return self.fits(other, tol=0.0)

    def __ge__(self, other: ResourceVector) -> bool:
        return other.fits(self, tol=0.0)

    def fits(self, other: ResourceVector, tol: float = TOL) -> bool:
        """Component-wise ``self <= other`` up to an absolute tolerance."""
        return (self.memory <= other.memory + tol
                and self.storage <= other.storage + tol
                and self.cpu <= other.cpu + tol)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.memory, self.storage, self.cpu)

    @classmethod
    def from_seq(cls, seq) -> ResourceVector:
        m, s, p = seq
        return cls(float(m), float(s), float(p))


# The cloud is unconstrained in compute; one huge server keeps a single code path.
NOMINAL_APP = ResourceVector(1.2, 3.5, 1250.0)
CLOUD_CAPACITY = NOMINAL_APP * 1e6


class ConfigType(enum.IntEnum):
    TYPE1 = 1  # module B on the home region
    TYPE2 = 2  # module B in the cloud
    TYPE3 = 3  # module B on a neighbouring fog region


def config_for(home: int, region: int) -> ConfigType:
    if region == CLOUD:
        return ConfigType.TYPE2
    if region == home:
        return ConfigType.TYPE1
    return ConfigType.TYPE3


def link_key(a: int, b: int) -> tuple[int, int]:
    if a == b:
        raise ValueError(f"self-loop on region {a}")
    return (a, b) if a < b else (b, a)


def link_flows(home: int, region: int, config: ConfigType, bh: float, bl: float):
    """Bandwidth each configuration draws, as ``[(link key, Mbit/s), ...]``."""
    if config is ConfigType.TYPE1:
        return [(link_key(home, CLOUD), bl)]
    if config is ConfigType.TYPE2:
        return [(link_key(home, CLOUD), bh)]
    return [(link_key(home, region), bh), (link_key(region, CLOUD), bl)]


class ServerUnit:
    """An edge unit. Residual is derived from the per-app loads so that
    releasing a placement restores the previous residual bit for bit."""

    def __init__(self, id: int, region_id: int, capacity: ResourceVector):
        self.id = id
        self.region_id = region_id
        self.capacity = capacity
        self.loads: dict[int, ResourceVector] = {}
        self.residual = capacity

    def _refresh(self):
        loads = list(self.loads.values())
        self.residual = ResourceVector(
            max(0.0, self.capacity.memory - math.fsum(v.memory for v in loads)),
            max(0.0, self.capacity.storage - math.fsum(v.storage for v in loads)),
            max(0.0, self.capacity.cpu - math.fsum(v.cpu for v in loads)),
        )

    def __repr__(self):
        return f"ServerUnit({self.region_id}/{self.id}, cap={self.capacity.as_tuple()})"


class Region:
    def __init__(self, id: int, servers: list[ServerUnit] | None = None):
        self.id = id
        self.servers: list[ServerUnit] = list(servers or [])
        self.home_apps: set[int] = set()

    def add_server(self, capacity: ResourceVector) -> ServerUnit:
        server = ServerUnit(len(self.servers), self.id, capacity)
        self.servers.append(server)
        return server

    def aggregate_residual(self) -> ResourceVector:
        total = ResourceVector()
        for s in self.servers:
            total = total + s.residual
        return total


class Link:
    def __init__(self, a: int, b: int, capacity: float, delay: float = 0.0):
        if capacity < 0 or delay < 0:
            raise ValueError("link capacity and delay must be non-negative")
        self.endpoints = link_key(a, b)
        self.capacity = float(capacity)
        self.delay = float(delay)
        self.flows: dict[int, float] = {}
        self.residual = self.capacity

    def _refresh(self):
        self.residual = max(0.0, self.capacity - math.fsum(self.flows.values()))

    @property
    def is_cloud_link(self) -> bool:
        return CLOUD in self.endpoints

    def __repr__(self):
        return f"Link({self.endpoints}, cap={self.capacity}, res={self.residual})"


class Topology:
    """Region graph with the cloud as region 0 and a star of cloud-links."""

    def __init__(self, regions: list[Region] | None = None, links: Iterable[Link] = ()):
        self.regions: list[Region] = list(regions or [])
        self.links: dict[tuple[int, int], Link] = {}
        self.adjacency: dict[int, set[int]] = {r.id: set() for r in self.regions}
        for link in links:
            self.add_link(link)

    @classmethod
    def empty(cls, fog_regions: int, cloud_capacity: ResourceVector = CLOUD_CAPACITY) -> Topology:
        regions = [Region(k) for k in range(fog_regions + 1)]
        regions[CLOUD].add_server(cloud_capacity)
        return cls(regions)

    def add_link(self, link: Link):
        a, b = link.endpoints
        if a not in self.adjacency or b not in self.adjacency:
            raise ValueError(f"link {link.endpoints} references unknown region")
        if link.endpoints in self.links:
            raise ValueError(f"duplicate link {link.endpoints}")
        self.links[link.endpoints] = link
        self.adjacency[a].add(b)
        self.adjacency[b].add(a)

    @property
    def K(self) -> int:
        return len(self.regions)

    @property
    def fog_regions(self) -> list[Region]:
        return self.regions[1:]

    def link(self, a: int, b: int) -> Link:
        return self.links[link_key(a, b)]

    def has_link(self, a: int, b: int) -> bool:
        return a != b and link_key(a, b) in self.links

    def neighbors(self, k: int) -> list[int]:
        """Fog neighbours of region ``k``, ascending."""
        return sorted(j for j in self.adjacency[k] if j != CLOUD)

    def server(self, region: int, server: int) -> ServerUnit:
        return self.regions[region].servers[server]

    def cloud_links(self) -> list[Link]:
        return [l for key, l in sorted(self.links.items()) if l.is_cloud_link]

    def crosslinks(self) -> list[Link]:
        return [l for key, l in sorted(self.links.items()) if not l.is_cloud_link]

    def is_local(self, home: int, region: int) -> bool:
        return region == home or region == CLOUD or (
            region in self.adjacency.get(home, ()) and region != CLOUD)

    def copy(self) -> Topology:
        return copy.deepcopy(self)

    def check(self):
        """Raise ValueError if the structural invariants do not hold."""
        for region in self.fog_regions:
            if not self.has_link(region.id, CLOUD):
                raise ValueError(f"fog region {region.id} has no cloud-link")
        for r in self.regions:
            if [s.id for s in r.servers] != list(range(len(r.servers))):
                raise ValueError(f"server ids of region {r.id} are not 0..n-1")
        for k, nbrs in self.adjacency.items():
            for j in nbrs:
                if k not in self.adjacency[j]:
                    raise ValueError("asymmetric adjacency")


@dataclass
class Application:
    id: int
    home_region: int
    demand: ResourceVector
    data_high: float
    data_low: float
    output_rate: float = 1.0
    proc_delay: float = 0.0
    source_rate: float = math.inf
    default_reward: float = 1.0
    rewards: dict[int, float] = field(default_factory=dict)
    # Experiment mode: throughputs sampled directly instead of derived from delays.
    fixed_throughput: tuple[float, float] | None = None

    def __post_init__(self):
        if self.home_region < 1:
            raise ValueError("applications must belong to a fog region")
        if not (self.data_high >= self.data_low > 0):
            raise ValueError("need data_high >= data_low > 0")
        if self.output_rate <= 0 or self.source_rate <= 0:
            raise ValueError("output_rate and source_rate must be positive")

    def reward(self, region: int) -> float:
        return self.rewards.get(region, self.default_reward)


@dataclass(frozen=True)
class Assignment:
    region: int
    server: int
    config: ConfigType
    bh: float
    bl: float


@dataclass
class PlacementSolution:
    assignments: dict[int, Assignment] = field(default_factory=dict)
    undeployable: set[int] = field(default_factory=set)
    objective: float = 0.0
    certified: bool = True

    @property
    def deployed_count(self) -> int:
        return len(self.assignments)

    def compute_objective(self, apps: Iterable[Application]) -> float:
        by_id = {a.id: a for a in apps}
        return math.fsum(by_id[u].reward(asg.region) for u, asg in sorted(self.assignments.items()))


@dataclass(frozen=True)
class Violation:
    family: str  # capacity | cloud-link | crosslink | delay | uniqueness | locality
    entity: tuple
    slack: float
    resource: str | None = None

    def __str__(self):
        what = f" [{self.resource}]" if self.resource else ""
        return f"{self.family} {self.entity}{what}: slack {self.slack:.6g}"


def apply_placement(topology: Topology, app: Application, region: int, server: int,
                    config: ConfigType, bh: float, bl: float) -> Topology:
    """Deploy ``app`` in place, or raise PlacementError leaving ``topology`` untouched."""
    if config is not config_for(app.home_region, region):
        raise PlacementError(f"{config.name} inconsistent with region {region} for app {app.id}")
    if not topology.is_local(app.home_region, region):
        raise PlacementError(f"region {region} is not local to app {app.id}")
    unit = topology.server(region, server)
    if app.id in unit.loads:
        raise PlacementError(f"app {app.id} already on server {region}/{server}")
    if not app.demand.fits(unit.residual):
        raise PlacementError(f"server {region}/{server} lacks capacity for app {app.id}")
    flows = link_flows(app.home_region, region, config, bh, bl)
    for key, amount in flows:
        link = topology.links.get(key)
        if link is None:
            raise PlacementError(f"missing link {key}")
        if amount > link.residual + TOL:
            raise PlacementError(f"link {key} lacks bandwidth for app {app.id}")
    unit.loads[app.id] = app.demand
    unit._refresh()
    for key, amount in flows:
        link = topology.links[key]
        link.flows[app.id] = amount
        link._refresh()
    return topology


def release_placement(topology: Topology, app: Application, assignment: Assignment) -> Topology:
    """Inverse of apply_placement."""
    unit = topology.server(assignment.region, assignment.server)
    del unit.loads[app.id]
    unit._refresh()
    for key, _ in link_flows(app.home_region, assignment.region, assignment.config,
                             assignment.bh, assignment.bl):
        link = topology.links[key]
        del link.flows[app.id]
        link._refresh()
    return topology


def placed_topology(topology: Topology, apps: list[Application],
                    solution: PlacementSolution) -> Topology:
    """A copy of ``topology`` with every assignment of ``solution`` applied."""
    placed = topology.copy()
    by_id = {a.id: a for a in apps}
    for u, asg in sorted(solution.assignments.items()):
        apply_placement(placed, by_id[u], asg.region, asg.server, asg.config, asg.bh, asg.bl)
    return placed


def _delay_slack(topology: Topology, app: Application, asg: Assignment) -> float:
    budget = 1.0 / app.output_rate
    if app.fixed_throughput is not None:
        # Delay budget is not modelled in experiment mode; allocations must
        # cover the sampled throughputs instead.
        bh, bl = app.fixed_throughput
        need = []
        if asg.config in (ConfigType.TYPE2, ConfigType.TYPE3):
            need.append(asg.bh - bh)
        if asg.config in (ConfigType.TYPE1, ConfigType.TYPE3):
            need.append(asg.bl - bl)
        return min(need)
    home = app.home_region

    def xfer(size, rate):
        return size / rate if rate > 0 else math.inf

    total = app.proc_delay + xfer(app.data_high, app.source_rate)
    if asg.config is ConfigType.TYPE1:
        total += topology.link(home, CLOUD).delay + xfer(app.data_low, asg.bl)
    elif asg.config is ConfigType.TYPE2:
        total += topology.link(home, CLOUD).delay + xfer(app.data_high, asg.bh)
    else:
        j = asg.region
        total += (topology.link(home, j).delay + topology.link(j, CLOUD).delay
                  + xfer(app.data_high, asg.bh) + xfer(app.data_low, asg.bl))
    return budget - total


def audit_solution(topology: Topology, apps: list[Application], solution: PlacementSolution,
                   literal_cloud_rows: bool = False) -> list[Violation]:
    """Check a placement against every constraint of the full problem.

    Capacities are taken from ``capacity`` fields, so the topology may be
    pristine or already loaded. Returns one Violation per breached
    constraint; an empty list certifies feasibility with the allocated
    throughputs.

    With ``literal_cloud_rows`` the cloud-link rows charge neighbouring regions'
    home-deployed apps to region k (the indices taken as written) instead of the
    apps hosted in k for a neighbour.
    """
    by_id = {a.id: a for a in apps}
    if len(by_id) != len(apps):
        raise StructuralError("duplicate application ids")
    for u, asg in solution.assignments.items():
        if u not in by_id:
            raise StructuralError(f"unknown application {u}")
        if not 0 <= asg.region < topology.K:
            raise StructuralError(f"app {u}: unknown region {asg.region}")
        if not 0 <= asg.server < len(topology.regions[asg.region].servers):
            raise StructuralError(f"app {u}: unknown server {asg.server} in region {asg.region}")
    for u in solution.undeployable:
        if u not in by_id:
            raise StructuralError(f"unknown application {u}")

    report: list[Violation] = []

    for u in sorted(solution.undeployable & set(solution.assignments)):
        report.append(Violation("uniqueness", ("app", u), -1.0))

    local_ok = {}
    for u, asg in sorted(solution.assignments.items()):
        app = by_id[u]
        home = app.home_region
        ok = topology.is_local(home, asg.region) and asg.config is config_for(home, asg.region)
        local_ok[u] = ok
        if not ok:
            report.append(Violation("locality", ("app", u), -1.0))

    loads: dict[tuple[int, int], list[ResourceVector]] = {}
    for u, asg in sorted(solution.assignments.items()):
        loads.setdefault((asg.region, asg.server), []).append(by_id[u].demand)
    for (k, i), demands in sorted(loads.items()):
        cap = topology.server(k, i).capacity
        for name in ResourceVector.FIELDS:
            slack = getattr(cap, name) - math.fsum(getattr(d, name) for d in demands)
            if slack < -TOL:
                report.append(Violation("capacity", ("server", k, i), slack, name))

    flows: dict[tuple[int, int], list[float]] = {}
    for u, asg in sorted(solution.assignments.items()):
        if not local_ok[u]:
            continue
        home = by_id[u].home_region
        for key, amount in link_flows(home, asg.region, asg.config, asg.bh, asg.bl):
            if key not in topology.links:
                raise StructuralError(f"app {u}: missing link {key}")
            if literal_cloud_rows and asg.config is ConfigType.TYPE3 and CLOUD in key:
                continue
            flows.setdefault(key, []).append(amount)
        if literal_cloud_rows and asg.config is ConfigType.TYPE1:
            for k in topology.neighbors(home):
                flows.setdefault(link_key(k, CLOUD), []).append(asg.bl)

    for key, link in sorted(topology.links.items()):
        slack = link.capacity - math.fsum(flows.get(key, []))
        if slack < -TOL:
            family = "cloud-link" if link.is_cloud_link else "crosslink"
            report.append(Violation(family, key, slack))

    for u, asg in sorted(solution.assignments.items()):
        if not local_ok[u]:
            continue
        slack = _delay_slack(topology, by_id[u], asg)
        if slack < -TOL:
            report.append(Violation("delay", ("app", u), slack))

    return report
