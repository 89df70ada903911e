"""Minimum throughputs per configuration type.

Each configuration's delay budget is solved at equality, which fixes the
continuous throughput variables and leaves a pure 0/1 placement problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .model import CLOUD, Application, ConfigType, Topology

# Slack at or below this is treated as a missed deadline.
MIN_SLACK = 1e-12


class InfeasibleDeadline(ValueError):
    pass


@dataclass(frozen=True)
class ThroughputRequirement:
    config: ConfigType
    region: int
    bh: float
    bl: float
    feasible: bool = True


def _slack(app: Application, path_delay: float) -> float:
    slack = 1.0 / app.output_rate - app.proc_delay - path_delay - app.data_high / app.source_rate
    if slack <= MIN_SLACK:
        raise InfeasibleDeadline(
            f"app {app.id}: slack {slack:.3g}s leaves no room for transmission")
    return slack


def min_throughput_type1(app: Application, delay_home_cloud: float) -> ThroughputRequirement:
    slack = _slack(app, delay_home_cloud)
    return ThroughputRequirement(ConfigType.TYPE1, app.home_region, 0.0, app.data_low / slack)


def min_throughput_type2(app: Application, delay_home_cloud: float) -> ThroughputRequirement:
    slack = _slack(app, delay_home_cloud)
    bh = app.data_high / slack
    # Shipping raw data can never need less than shipping the reduced output.
    assert bh >= app.data_low / slack
    return ThroughputRequirement(ConfigType.TYPE2, CLOUD, bh, 0.0)


def min_throughput_type3(app: Application, delay_home_j: float, delay_j_cloud: float,
                         region: int = -1) -> ThroughputRequirement:
    # With bh/bl fixed to data_high/data_low both transfer terms equal
    # data_high/bh, so the budget splits evenly between them.
    slack = _slack(app, delay_home_j + delay_j_cloud)
    return ThroughputRequirement(ConfigType.TYPE3, region,
                                 2.0 * app.data_high / slack, 2.0 * app.data_low / slack)


def _fixed(app: Application, config: ConfigType, region: int) -> ThroughputRequirement:
    bh, bl = app.fixed_throughput
    return ThroughputRequirement(
        config, region,
        bh if config is not ConfigType.TYPE1 else 0.0,
        bl if config is not ConfigType.TYPE2 else 0.0)


def _infeasible(config: ConfigType, region: int) -> ThroughputRequirement:
    return ThroughputRequirement(config, region, math.inf, math.inf, feasible=False)


def all_requirements(app: Application, topology: Topology) -> dict[int, ThroughputRequirement]:
    """Requirements for every local option of ``app``, keyed by target region.

    Type1 sits under the home region, Type2 under region 0 and Type3 under
    each fog neighbour. Missed deadlines are kept but marked infeasible.
    """
    home = app.home_region
    targets = [(home, ConfigType.TYPE1), (CLOUD, ConfigType.TYPE2)]
    targets += [(j, ConfigType.TYPE3) for j in topology.neighbors(home)]
    reqs = {}
    for region, config in targets:
        if app.fixed_throughput is not None:
            reqs[region] = _fixed(app, config, region)
            continue
        try:
            if config is ConfigType.TYPE1:
                reqs[region] = min_throughput_type1(app, topology.link(home, CLOUD).delay)
            elif config is ConfigType.TYPE2:
                reqs[region] = min_throughput_type2(app, topology.link(home, CLOUD).delay)
            else:
                reqs[region] = min_throughput_type3(
                    app, topology.link(home, region).delay,
                    topology.link(region, CLOUD).delay, region)
        except InfeasibleDeadline:
            reqs[region] = _infeasible(config, region)
    return dict(sorted(reqs.items()))


def feasible_requirements(app: Application, topology: Topology) -> dict[int, ThroughputRequirement]:
    return {k: r for k, r in all_requirements(app, topology).items() if r.feasible}
