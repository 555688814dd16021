"""Exhaustive integer search over (zone count K, batch size n)."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .ca_model import (
    AnalyticMetrics,
    DesignChoice,
    MarketScenario,
    VarianceParams,
    expected_tour_time,
    total_wait,
    utilization,
    zone_derived,
)
from .errors import InvalidArgument, NoFeasibleDesign, UnstableSystem

FRONTIER_HEADER = ("K", "n", "rho", "Q_total", "W_total", "objective", "feasible")


@dataclass(frozen=True)
class DesignSearchSpec:
    scenario: MarketScenario
    params: VarianceParams
    K_max: int = 36
    n_max: int = 50
    rho_cap: float = 0.95
    require_divisible: bool = False  # only K dividing m (needed when designs are simulated)

    def __post_init__(self):
        if int(self.K_max) < 1 or int(self.n_max) < 1:
            raise InvalidArgument("K_max and n_max must be >= 1")
        if not 0 < self.rho_cap < 1:
            raise InvalidArgument(f"rho_cap must lie in (0, 1), got {self.rho_cap}")


@dataclass(frozen=True)
class FrontierEntry:
    K: int
    n: int
    rho: float
    Q_total: float
    W_total: float
    objective: float


@dataclass(frozen=True)
class DesignSolution:
    best: DesignChoice
    objective: float
    metrics: AnalyticMetrics
    frontier: tuple
    infeasible_count: int
    min_rho: float


def design_rho(scenario: MarketScenario, design: DesignChoice) -> float:
    z = zone_derived(scenario, design)
    return utilization(design.n, z.delta_k, z.m_k, expected_tour_time(z.A_k, design.n, scenario.speed_v))


def objective_from_metrics(scenario: MarketScenario, design: DesignChoice, metrics: AnalyticMetrics) -> float:
    lambda_k = scenario.lambda_flux * scenario.area_A / design.K
    return design.K * (scenario.cost_per_mile * metrics.Q_zone
                       + scenario.value_of_time * lambda_k * metrics.W_total)


def evaluate_design(scenario: MarketScenario, design: DesignChoice, params: VarianceParams,
                    var_s_override=None) -> float:
    """Generalized cost in $/hour: zone miles and customer waiting time summed over zones.

    Raises ``UnstableSystem`` for designs at or beyond the stability boundary.
    """
    metrics = total_wait(scenario, design, params, var_s_override=var_s_override)
    return objective_from_metrics(scenario, design, metrics)


def solve_design(spec: DesignSearchSpec) -> DesignSolution:
    """Scan every (K, n) in the grid and return the cheapest stable design.

    Ties go to the smaller K, then the smaller n (row-major scan with strict
    improvement).
    """
    sc = spec.scenario
    frontier = []
    infeasible = 0
    min_rho = math.inf
    best = None
    integral_m = int(sc.fleet_m) == sc.fleet_m
    for K in range(1, int(spec.K_max) + 1):
        K_allowed = not spec.require_divisible or (integral_m and int(sc.fleet_m) % K == 0)
        for n in range(1, int(spec.n_max) + 1):
            design = DesignChoice(K, n)
            rho = design_rho(sc, design)
            min_rho = min(min_rho, rho)
            if rho > spec.rho_cap or not K_allowed:
                infeasible += 1
                continue
            try:
                metrics = total_wait(sc, design, spec.params)
            except UnstableSystem:
                infeasible += 1
                continue
            obj = objective_from_metrics(sc, design, metrics)
            if not math.isfinite(obj):
                infeasible += 1
                continue
            frontier.append(FrontierEntry(K, n, rho, metrics.Q_total, metrics.W_total, obj))
            if best is None or obj < best[0]:
                best = (obj, design, metrics)
    if best is None:
        raise NoFeasibleDesign(min_rho)
    return DesignSolution(best=best[1], objective=best[0], metrics=best[2], frontier=tuple(frontier),
                          infeasible_count=infeasible, min_rho=min_rho)


def frontier_rows(solution: DesignSolution, spec: DesignSearchSpec | None = None) -> list:
    """Rows for ``FRONTIER_HEADER``; with ``spec`` every grid cell is listed, infeasible ones blank."""
    if spec is None:
        return [[e.K, e.n, e.rho, e.Q_total, e.W_total, e.objective, 1] for e in solution.frontier]
    feasible = {(e.K, e.n): e for e in solution.frontier}
    rows = []
    for K in range(1, int(spec.K_max) + 1):
        for n in range(1, int(spec.n_max) + 1):
            e = feasible.get((K, n))
            if e is not None:
                rows.append([K, n, e.rho, e.Q_total, e.W_total, e.objective, 1])
            else:
                rows.append([K, n, design_rho(spec.scenario, DesignChoice(K, n)), None, None, None, 0])
    return rows
