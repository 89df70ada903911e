import math

import pytest

from fogplace.model import (CLOUD, NOMINAL_APP, Application, Link, ResourceVector, Topology)

MEDIUM = ResourceVector(8.0, 80.0, 15000.0)
LOW = ResourceVector(2.0, 60.0, 5000.0)

# Lines recorded by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_topology(servers, crosslinks=(), bandwidth=15.0, cloud_delay=0.0):
    """``servers[k-1]`` lists the capacities of fog region k; every fog region
    gets a cloud-link. ``crosslinks`` holds (a, b) or (a, b, capacity, delay)."""
    topo = Topology.empty(len(servers))
    for k, caps in enumerate(servers, start=1):
        for cap in caps:
            topo.regions[k].add_server(cap)
        topo.add_link(Link(k, CLOUD, bandwidth, cloud_delay))
    for spec in crosslinks:
        a, b = spec[:2]
        cap = spec[2] if len(spec) > 2 else bandwidth
        delay = spec[3] if len(spec) > 3 else 0.0
        topo.add_link(Link(a, b, cap, delay))
    return topo


def make_app(id=0, home=1, demand=NOMINAL_APP, bh=4.25, bl=1.5, **kw):
    """Experiment-mode app with fixed throughputs (bh, bl)."""
    return Application(id=id, home_region=home, demand=demand, data_high=bh, data_low=bl,
                       fixed_throughput=(bh, bl), **kw)


def delay_app(id=0, home=1, demand=NOMINAL_APP, dh=4.25, dl=1.5, F=1.0, d=0.1, B=10.0, **kw):
    """Delay-driven app."""
    return Application(id=id, home_region=home, demand=demand, data_high=dh, data_low=dl,
                       output_rate=F, proc_delay=d, source_rate=B, **kw)


@pytest.fixture
def inf():
    return math.inf
