import math

import pytest

from microhub.ca_model import DesignChoice, MarketScenario


@pytest.fixture
def baseline():
    return MarketScenario(lambda_flux=1.0, area_A=100.0, fleet_m=40, speed_v=40.0)


@pytest.fixture
def baseline_design():
    return DesignChoice(K=4, n=10)


def brute_force_tour(depot, nodes, dist):
    """Independent oracle: minimum closed tour from depot over all orders."""
    import itertools

    best = math.inf
    for perm in itertools.permutations(range(len(nodes))):
        pts = [depot] + [nodes[i] for i in perm] + [depot]
        best = min(best, sum(dist(pts[j], pts[j + 1]) for j in range(len(pts) - 1)))
    return best


def euclid(a, b):
    return math.hypot(a[0] - b[0], a[1] - b[1])


def manhattan(a, b):
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
