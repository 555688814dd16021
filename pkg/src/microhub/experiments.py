"""Replicated simulation runs and one-axis parameter sweeps.

These are the building blocks behind the ``simulate`` and ``sweep``
commands; they return plain dictionaries so rows can be written to CSV or
inspected in tests without touching the filesystem.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .ca_model import DesignChoice, MarketScenario, VarianceParams, total_wait, tsppd_benchmark
from .errors import InvalidArgument, NoFeasibleDesign, UnstableSystem
from .optimizer import DesignSearchSpec, design_rho, objective_from_metrics, solve_design
from .simulator import SimConfig, run_simulation

SIM_METRICS = (
    "W_total", "accumulation_wait", "queue_wait", "pickup_wait", "pickup_cycle",
    "transfer_wait", "dropoff_time", "Q_total", "Q_per_vehicle",
)

SWEEP_AXES = ("lambda", "m", "A", "n", "K")

SWEEP_HEADER = (
    ["index", "parameter", "value", "feasible", "K", "n", "rho", "objective",
     "an_W_a", "an_W_q", "an_E_S", "an_Var_S", "an_W_total", "an_Q_total", "an_Q_per_vehicle",
     "sim_replications"]
    + [f"sim_{name}_{stat}" for name in SIM_METRICS for stat in ("mean", "se")]
    + ["tsppd_N_v", "tsppd_W_total", "tsppd_Q_total", "tsppd_Q_per_vehicle"]
)

# lambda range and fleet range follow the published comparison scenarios
SWEEP_DEFAULTS = {
    "lambda": (0.1, 4.3, 22),
    "m": (10, 100, 10),
    "A": (25, 400, 16),
    "n": (1, 30, 30),
    "K": (1, 40, 40),
}


def derive_seed(seed, *keys) -> int:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1)[0])


def _sim_values(res) -> dict:
    c = res.W_components
    return {
        "W_total": res.W_total_mean, "accumulation_wait": res.accumulation_wait,
        "queue_wait": res.queue_wait, "pickup_wait": c["pickup_wait"],
        "pickup_cycle": c["pickup_cycle"], "transfer_wait": c["transfer_wait"],
        "dropoff_time": c["dropoff_time"], "Q_total": res.Q_total, "Q_per_vehicle": res.Q_per_vehicle,
    }


def aggregate(values: list) -> dict:
    """Mean and standard error per metric; the error is NaN below two replications."""
    out = {}
    for name in SIM_METRICS:
        x = np.array([v[name] for v in values], dtype=np.float64)
        x = x[~np.isnan(x)]
        out[name] = {
            "mean": float(x.mean()) if len(x) else math.nan,
            "se": float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) >= 2 else math.nan,
        }
    return out


def _one_run(cfg):
    return _sim_values(run_simulation(cfg))


def replicate(config: SimConfig, replications: int, workers: int = 1):
    """Run ``replications`` seed-derived copies of ``config``; returns (per_run, aggregate)."""
    if replications < 1:
        raise InvalidArgument("replications must be >= 1")
    cfgs = [replace(config, seed=derive_seed(config.seed, r), trace=False) for r in range(replications)]
    if workers and workers > 1 and replications > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_one_run, cfgs))
    else:
        runs = [_one_run(c) for c in cfgs]
    return runs, aggregate(runs)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    start: float
    stop: float
    steps: int
    reoptimize: bool | None = None  # default: re-optimise (K, n) for lambda and m sweeps

    def __post_init__(self):
        if self.parameter not in SWEEP_AXES:
            raise InvalidArgument(f"sweep parameter must be one of {SWEEP_AXES}, got {self.parameter!r}")
        if int(self.steps) < 1:
            raise InvalidArgument("steps must be >= 1")

    @property
    def do_reoptimize(self) -> bool:
        if self.reoptimize is None:
            return self.parameter in ("lambda", "m")
        return bool(self.reoptimize)

    def values(self) -> list:
        vals = np.linspace(self.start, self.stop, int(self.steps))
        if self.parameter in ("m", "n", "K"):
            return [int(round(v)) for v in vals]
        return [float(v) for v in vals]


def _apply(parameter, value, scenario: MarketScenario, design: DesignChoice):
    if parameter == "lambda":
        return replace(scenario, lambda_flux=value), design
    if parameter == "m":
        return replace(scenario, fleet_m=value), design
    if parameter == "A":
        return replace(scenario, area_A=value), design
    if parameter == "n":
        return scenario, DesignChoice(design.K, value)
    return scenario, DesignChoice(value, design.n)


def _sweep_point(job):
    (index, parameter, value, scenario, design, params, reoptimize, search, sim, replications, seed) = job
    scenario, design = _apply(parameter, value, scenario, design)
    row = {h: None for h in SWEEP_HEADER}
    row.update(index=index, parameter=parameter, value=value, sim_replications=0)
    tsp = tsppd_benchmark(scenario)
    row.update(tsppd_N_v=tsp.N_v, tsppd_W_total=tsp.W_total, tsppd_Q_total=tsp.Q_total,
               tsppd_Q_per_vehicle=tsp.Q_per_vehicle)
    simulate = replications > 0
    rho_cap = search.get("rho_cap", 0.95)
    if reoptimize:
        spec = DesignSearchSpec(scenario=scenario, params=params, require_divisible=simulate, **search)
        try:
            sol = solve_design(spec)
        except NoFeasibleDesign as exc:
            row.update(feasible=0, rho=exc.min_rho)
            return row
        design, metrics = sol.best, sol.metrics
    else:
        rho = design_rho(scenario, design)
        row.update(K=design.K, n=design.n, rho=rho)
        if rho > rho_cap:
            row.update(feasible=0)
            return row
        try:
            metrics = total_wait(scenario, design, params)
        except UnstableSystem:
            row.update(feasible=0)
            return row
    row.update(
        feasible=1, K=design.K, n=design.n, rho=metrics.rho,
        objective=objective_from_metrics(scenario, design, metrics),
        an_W_a=metrics.W_a, an_W_q=metrics.W_q, an_E_S=metrics.E_S, an_Var_S=metrics.Var_S,
        an_W_total=metrics.W_total, an_Q_total=metrics.Q_total, an_Q_per_vehicle=metrics.Q_per_vehicle,
    )
    m = scenario.fleet_m
    if simulate and int(m) == m and int(m) % design.K == 0:
        cfg = SimConfig(scenario=scenario, design=design, seed=derive_seed(seed, index), **sim)
        _, agg = replicate(cfg, replications)
        row["sim_replications"] = replications
        for name, st in agg.items():
            row[f"sim_{name}_mean"] = st["mean"]
            row[f"sim_{name}_se"] = st["se"]
    return row


def run_sweep(scenario: MarketScenario, design: DesignChoice, params: VarianceParams, sweep: SweepSpec,
              replications: int = 0, seed: int = 0, search: dict | None = None, sim: dict | None = None,
              workers: int = 1) -> list:
    """Evaluate analytic, simulated and benchmark metrics at every sweep point.

    Rows come back in sweep order whatever the worker count.  Points with no
    stable design are flagged ``feasible = 0`` and the sweep carries on.
    """
    search = dict(search or {})
    sim = dict(sim or {})
    jobs = [(i, sweep.parameter, v, scenario, design, params, sweep.do_reoptimize, search, sim,
             int(replications), int(seed)) for i, v in enumerate(sweep.values())]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(j) for j in jobs]
