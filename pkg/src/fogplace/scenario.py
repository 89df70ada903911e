"""Seeded random instances: star-plus-Erdos-Renyi topologies, application
batches with Zipf-distributed home regions, and budget-driven server pools.

All randomness flows from one ``numpy.random.Generator`` (PCG64) seeded
from the config, so an instance is a pure function of its config.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .model import (CLOUD, NOMINAL_APP, Application, Link, ResourceVector, Topology)

SERVER_CLASSES = [
    ("low", ResourceVector(2.0, 60.0, 5000.0)),
    ("medium", ResourceVector(8.0, 80.0, 15000.0)),
    ("high", ResourceVector(16.0, 120.0, 44000.0)),
]

DEMAND_RANGES = {
    "memory": (0.5, 2.0),
    "storage": (1.0, 8.0),
    "cpu": (500.0, 2000.0),
    "bl": (1.0, 2.0),
    "bh": (3.5, 5.0),
}

REWARD_MODES = ("unit", "cpu_weighted")


@dataclass
class ScenarioConfig:
    K: int = 10
    U: int = 100
    q: float = 0.4
    alpha: float = 0.5
    beta: float = 1.5
    link_bandwidth: float = 15.0
    server_classes: list = field(default_factory=lambda: list(SERVER_CLASSES))
    demand_ranges: dict = field(default_factory=lambda: dict(DEMAND_RANGES))
    nominal_app: ResourceVector = NOMINAL_APP
    reward_mode: str = "unit"
    seed: int = 0
    # None: regions 1..K-1 are fog regions and region 0 is the cloud.
    fog_region_count: int | None = None
    # Delay-driven throughputs instead of sampling them directly.
    delay_mode: bool = False
    link_delay: tuple = (0.0, 0.0)
    proc_delay: tuple = (0.0, 0.0)
    output_rate: float = 1.0
    source_rate: float = math.inf

    def __post_init__(self):
        if not 0 <= self.q <= 1:
            raise ValueError("q must lie in [0, 1]")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.beta >= -1:
            raise ValueError("beta must be >= -1")
        if self.K < 2 or self.U < 0:
            raise ValueError("need K >= 2 and U >= 0")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"reward_mode must be one of {REWARD_MODES}")
        if self.fog_region_count is not None and self.fog_region_count < 1:
            raise ValueError("fog_region_count must be positive")

    @property
    def fog_regions(self) -> int:
        return self.K - 1 if self.fog_region_count is None else self.fog_region_count

    def with_(self, **changes) -> ScenarioConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["server_classes"] = [{"name": n, "capacity": list(c.as_tuple())}
                               for n, c in self.server_classes]
        d["demand_ranges"] = {k: list(v) for k, v in self.demand_ranges.items()}
        d["nominal_app"] = list(self.nominal_app.as_tuple())
        d["link_delay"] = list(self.link_delay)
        d["proc_delay"] = list(self.proc_delay)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        d = dict(d)
        if "server_classes" in d:
            d["server_classes"] = [(c["name"], ResourceVector.from_seq(c["capacity"]))
                                   for c in d["server_classes"]]
        if "demand_ranges" in d:
            ranges = dict(DEMAND_RANGES)
            ranges.update({k: tuple(float(x) for x in v) for k, v in d["demand_ranges"].items()})
            d["demand_ranges"] = ranges
        if "nominal_app" in d:
            d["nominal_app"] = ResourceVector.from_seq(d["nominal_app"])
        for key in ("link_delay", "proc_delay"):
            if key in d:
                d[key] = tuple(float(x) for x in d[key])
        if "source_rate" in d:
            d["source_rate"] = float(d["source_rate"])
        return cls(**d)


def home_region_pmf(alpha: float, fog_regions: int) -> np.ndarray:
    """Truncated Zipf pmf over fog regions 1..fog_regions."""
    weights = np.arange(1, fog_regions + 1, dtype=float) ** -float(alpha)
    return weights / weights.sum()


def gen_topology(config: ScenarioConfig, rng: np.random.Generator) -> Topology:
    n = config.fog_regions
    topo = Topology.empty(n)
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    # Draw for every pair so that later draws do not depend on q.
    coins = rng.random(len(pairs))
    lo, hi = config.link_delay
    cloud_delays = rng.uniform(lo, hi, n) if config.delay_mode else np.zeros(n)
    cross_delays = rng.uniform(lo, hi, len(pairs)) if config.delay_mode else np.zeros(len(pairs))
    for k in range(1, n + 1):
        topo.add_link(Link(k, CLOUD, config.link_bandwidth, float(cloud_delays[k - 1])))
    for (i, j), coin, delay in zip(pairs, coins, cross_delays):
        if coin < config.q:
            topo.add_link(Link(i, j, config.link_bandwidth, float(delay)))
    return topo


def gen_apps(config: ScenarioConfig, rng: np.random.Generator) -> list[Application]:
    U, r = config.U, config.demand_ranges
    pmf = home_region_pmf(config.alpha, config.fog_regions)
    homes = rng.choice(np.arange(1, config.fog_regions + 1), size=U, p=pmf)
    mem = rng.uniform(*r["memory"], U)
    stor = rng.uniform(*r["storage"], U)
    cpu = rng.uniform(*r["cpu"], U)
    low = rng.uniform(*r["bl"], U)
    high = rng.uniform(*r["bh"], U)
    max_cpu = r["cpu"][1]
    if config.reward_mode == "cpu_weighted":
        cpu[rng.permutation(U)[:U // 2]] = max_cpu
    proc = rng.uniform(*config.proc_delay, U) if config.delay_mode else np.zeros(U)

    apps = []
    for u in range(U):
        reward = float(cpu[u]) / max_cpu if config.reward_mode == "cpu_weighted" else 1.0
        app = Application(
            id=u,
            home_region=int(homes[u]),
            demand=ResourceVector(float(mem[u]), float(stor[u]), float(cpu[u])),
            data_high=float(high[u]),
            data_low=float(low[u]),
            default_reward=reward,
        )
        if config.delay_mode:
            app.output_rate = config.output_rate
            app.source_rate = config.source_rate
            app.proc_delay = float(proc[u])
        else:
            # Table values are used as throughputs directly over a 1 s period.
            app.fixed_throughput = (float(high[u]), float(low[u]))
        apps.append(app)
    return apps


def region_budget(config: ScenarioConfig) -> ResourceVector:
    return config.nominal_app * ((1.0 + config.beta) * config.U / config.K)


def provision_servers(config: ScenarioConfig, topology: Topology,
                      rng: np.random.Generator) -> Topology:
    """Add random-class servers to each fog region until its budget runs out.

    The last server may overshoot; every fog region gets at least one.
    """
    budget = region_budget(config).as_tuple()
    classes = config.server_classes
    for region in topology.fog_regions:
        if region.servers:
            raise ValueError(f"region {region.id} already provisioned")
        remaining = list(budget)
        while True:
            _, cap = classes[int(rng.integers(len(classes)))]
            region.add_server(cap)
            remaining = [b - c for b, c in zip(remaining, cap.as_tuple())]
            if not all(x > 0 for x in remaining):
                break
    return topology


def gen_instance(config: ScenarioConfig) -> tuple[Topology, list[Application]]:
    rng = np.random.default_rng(config.seed)
    topology = gen_topology(config, rng)
    apps = gen_apps(config, rng)
    provision_servers(config, topology, rng)
    for app in apps:
        topology.regions[app.home_region].home_apps.add(app.id)
    return topology, apps


# Server classes at a quarter of their size, so a handful of apps already contends for servers.
SMALL_SERVER_CLASSES = [(name, cap * 0.25) for name, cap in SERVER_CLASSES]


def gen_small_instance(seed: int, max_apps: int = 8, max_fog: int = 3, max_servers: int = 2,
                       space_cap: int = 10**6) -> tuple[Topology, list[Application]]:
    """Oracle-scale instance: at most ``max_fog`` fog regions, ``max_servers``
    servers per region and ``max_apps`` apps, with tight capacities.

    Parameters are redrawn until the exhaustive search space
    ``prod(options + 1)`` is at most ``space_cap``.
    """
    rng = np.random.default_rng(seed)
    while True:
        fog = int(rng.integers(1, max_fog + 1))
        U = int(rng.integers(1, max_apps + 1))
        mode = REWARD_MODES[int(rng.integers(2))]
        config = ScenarioConfig(K=fog + 1, U=U, q=0.5, alpha=float(rng.uniform(0.5, 2.0)),
                                link_bandwidth=float(rng.uniform(3.0, 10.0)),
                                server_classes=SMALL_SERVER_CLASSES, reward_mode=mode)
        topo = gen_topology(config, rng)
        apps = gen_apps(config, rng)
        for region in topo.fog_regions:
            for _ in range(int(rng.integers(1, max_servers + 1))):
                _, cap = SMALL_SERVER_CLASSES[int(rng.integers(len(SMALL_SERVER_CLASSES)))]
                region.add_server(cap)
        for app in apps:
            topo.regions[app.home_region].home_apps.add(app.id)
        space = 1
        for app in apps:
            home = app.home_region
            options = len(topo.regions[home].servers) + 1
            options += sum(len(topo.regions[j].servers) for j in topo.neighbors(home))
            space *= options + 1
        if space <= space_cap:
            return topo, apps
