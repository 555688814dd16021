"""Command-line experiment harness: ``microhub {calibrate,simulate,sweep,optimize}``.

Configs are JSON documents (``schema_version`` 1) whose keys carry their
units.  Exit codes: 0 success, 2 config error, 3 no feasible design,
4 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import re
import sys
import time
from dataclasses import replace

from . import __version__
from .ca_model import (
    PAPER_REFERENCE_PARAMS,
    RECALIBRATED_PARAMS,
    DesignChoice,
    MarketScenario,
    VarianceParams,
    total_wait,
    tsppd_benchmark,
)
from .calibration import GridSpec, fit_variance_model, sample_tours
from .errors import InsufficientData, InvalidArgument, NoFeasibleDesign, UnstableSystem
from .experiments import SWEEP_DEFAULTS, SWEEP_HEADER, SweepSpec, derive_seed, replicate, run_sweep
from .geometry import DistanceMetric
from .io import write_csv, write_json
from .optimizer import FRONTIER_HEADER, DesignSearchSpec, frontier_rows, solve_design
from .simulator import TRACE_HEADER, SimConfig, run_simulation

log = logging.getLogger("microhub")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4
SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "replications": 1,
    "workers": 1,
    "params": "recalibrated",
    "scenario": {
        "lambda_per_hr_mi2": 1.0,
        "area_mi2": 100.0,
        "fleet_size": 40,
        "speed_mph": 40.0,
        "cost_per_mile_usd": 2.0,
        "value_of_time_usd_per_hr": 20.0,
    },
    "design": {"K": 4, "n": 10},
    "simulation": {
        "horizon_hr": 6.0,
        "warmup_hr": 1.0,
        "metric": "euclidean",
        "tsp_restarts": 3,
        "trace": False,
    },
    "search": {"K_max": 36, "n_max": 50, "rho_cap": 0.95},
    "calibration": {
        "areas_mi2": [25.0, 50.0, 100.0, 200.0],
        "node_counts": [5, 10, 20, 50, 100],
        "replications": 1000,
        "speed_mph": 40.0,
        "metric": "manhattan",
    },
    "sweep": {"parameter": "lambda", "from": None, "to": None, "steps": None, "reoptimize": None},
}

_NUMBER = (int, float)
_TYPES = {
    "schema_version": int, "seed": int, "replications": int, "workers": int, "params": str,
    "scenario": {k: _NUMBER for k in DEFAULTS["scenario"]},
    "design": {"K": int, "n": int},
    "simulation": {"horizon_hr": _NUMBER, "warmup_hr": _NUMBER, "metric": str,
                   "tsp_restarts": int, "trace": bool},
    "search": {"K_max": int, "n_max": int, "rho_cap": _NUMBER},
    "calibration": {"areas_mi2": list, "node_counts": list, "replications": int,
                    "speed_mph": _NUMBER, "metric": str},
    "sweep": {"parameter": str, "from": _NUMBER, "to": _NUMBER, "steps": int, "reoptimize": bool},
}


class ConfigError(Exception):
    pass


def _line_of(text, key):
    if not text:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(path, text, key):
    line = _line_of(text, key)
    return f"{path}:{line}" if line else str(path or "<config>")


def _check_types(doc, types, path, text, prefix=""):
    for key, val in doc.items():
        if key not in types:
            raise ConfigError(f"{_where(path, text, key)}: unknown key '{prefix}{key}'")
        want = types[key]
        if isinstance(want, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{_where(path, text, key)}: '{prefix}{key}' must be an object")
            _check_types(val, want, path, text, prefix=f"{prefix}{key}.")
        elif val is not None:
            ok = isinstance(val, want) and not (want is not bool and isinstance(val, bool))
            if want is int and isinstance(val, float) and val.is_integer():
                ok = True
            if not ok:
                raise ConfigError(f"{_where(path, text, key)}: '{prefix}{key}' has the wrong type ({type(val).__name__})")


def load_config(path=None) -> dict:
    """Defaults overlaid with the JSON document at ``path``, validated."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is None:
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    _check_types(doc, _TYPES, path, text)
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{_where(path, text, 'schema_version')}: unsupported schema_version {version}")
    for key, val in doc.items():
        if isinstance(val, dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    return cfg


def resolve_params(spec: str) -> VarianceParams:
    if spec == "recalibrated":
        return RECALIBRATED_PARAMS
    if spec == "paper-reference":
        return PAPER_REFERENCE_PARAMS
    try:
        with open(spec, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{spec}: cannot read variance params ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{spec}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc
    if "params" in doc and isinstance(doc["params"], dict):
        doc = doc["params"]  # a fit.json written by ``calibrate``
    try:
        return VarianceParams.from_dict(doc)
    except (TypeError, InvalidArgument) as exc:
        raise ConfigError(f"{spec}: invalid variance params: {exc}") from exc


def build_scenario(cfg) -> MarketScenario:
    s = cfg["scenario"]
    return MarketScenario(
        lambda_flux=float(s["lambda_per_hr_mi2"]), area_A=float(s["area_mi2"]),
        fleet_m=s["fleet_size"], speed_v=float(s["speed_mph"]),
        cost_per_mile=float(s["cost_per_mile_usd"]), value_of_time=float(s["value_of_time_usd_per_hr"]),
    )


def build_design(cfg) -> DesignChoice:
    return DesignChoice(cfg["design"]["K"], cfg["design"]["n"])


def _sim_kwargs(cfg) -> dict:
    s = cfg["simulation"]
    return {"horizon": float(s["horizon_hr"]), "warmup": float(s["warmup_hr"]),
            "metric": DistanceMetric.parse(s["metric"]), "tsp_restarts": int(s["tsp_restarts"])}


def _search_kwargs(cfg) -> dict:
    s = cfg["search"]
    return {"K_max": int(s["K_max"]), "n_max": int(s["n_max"]), "rho_cap": float(s["rho_cap"])}


def _meta(command, cfg, params: VarianceParams | None) -> dict:
    meta = {"tool": "microhub", "version": __version__, "command": command, "seed": cfg["seed"]}
    if params is not None:
        meta["variance_params"] = params.to_dict()
        meta["variance_params_provenance"] = params.source
    meta["config"] = cfg
    return meta


def cmd_calibrate(cfg, out) -> int:
    c = cfg["calibration"]
    grid = GridSpec(areas=tuple(float(a) for a in c["areas_mi2"]),
                    counts=tuple(int(n) for n in c["node_counts"]),
                    replications=int(c["replications"]), speed_v=float(c["speed_mph"]),
                    metric=DistanceMetric.parse(c["metric"]))
    t0 = time.perf_counter()
    samples = sample_tours(grid, seed=cfg["seed"], workers=cfg["workers"])
    report = fit_variance_model(samples, seed=cfg["seed"])
    log.info("calibration finished in %.1f s: r2_mean=%.4f r2_var=%.4f",
             time.perf_counter() - t0, report.r2_mean, report.r2_var)
    meta = _meta("calibrate", cfg, report.params)
    rows = [[c_.A, c_.N, c_.replications, c_.mean_time, c_.var_time, c_.mean_dist, c_.var_dist]
            for c_ in samples.grid]
    write_csv(os.path.join(out, "samples.csv"), CALIBRATION_HEADER, rows, meta)
    write_json(os.path.join(out, "fit.json"), report.to_dict(), meta)
    return EXIT_OK


CALIBRATION_HEADER = ("A_mi2", "N", "replications", "mean_time_hr", "var_time_hr2", "mean_dist_mi", "var_dist_mi2")


def cmd_simulate(cfg, out) -> int:
    params = resolve_params(cfg["params"])
    scenario, design = build_scenario(cfg), build_design(cfg)
    sim_cfg = SimConfig(scenario=scenario, design=design, seed=cfg["seed"],
                        trace=bool(cfg["simulation"]["trace"]), **_sim_kwargs(cfg))
    reps = int(cfg["replications"])
    if reps < 1:
        raise ConfigError("replications must be >= 1 for simulate")
    payload = {}
    try:
        payload["analytic"] = total_wait(scenario, design, params).to_dict()
    except UnstableSystem as exc:
        payload["analytic"] = {"unstable": True, "rho": exc.rho}
    payload["tsppd"] = tsppd_benchmark(scenario).to_dict()
    runs, agg = replicate(sim_cfg, reps, workers=cfg["workers"])
    # replication 0 again, keeping its full summary and optional trace
    first = run_simulation(replace(sim_cfg, seed=derive_seed(sim_cfg.seed, 0)))
    payload["replications"] = reps
    payload["aggregate"] = agg
    payload["runs"] = runs
    payload["first_run"] = first.summary()
    meta = _meta("simulate", cfg, params)
    write_json(os.path.join(out, "summary.json"), payload, meta)
    if sim_cfg.trace:
        write_csv(os.path.join(out, "trace.csv"), TRACE_HEADER, first.trace, meta)
    return EXIT_OK


def cmd_sweep(cfg, out) -> int:
    params = resolve_params(cfg["params"])
    sw = cfg["sweep"]
    start, stop, steps = SWEEP_DEFAULTS.get(sw["parameter"], (None, None, None))
    spec = SweepSpec(parameter=sw["parameter"],
                     start=sw["from"] if sw["from"] is not None else start,
                     stop=sw["to"] if sw["to"] is not None else stop,
                     steps=sw["steps"] if sw["steps"] is not None else steps,
                     reoptimize=sw["reoptimize"])
    rows = run_sweep(build_scenario(cfg), build_design(cfg), params, spec,
                     replications=int(cfg["replications"]), seed=cfg["seed"],
                     search=_search_kwargs(cfg), sim=_sim_kwargs(cfg), workers=cfg["workers"])
    write_csv(os.path.join(out, "sweep.csv"), SWEEP_HEADER, [[r[h] for h in SWEEP_HEADER] for r in rows],
              _meta("sweep", cfg, params))
    return EXIT_OK


def cmd_optimize(cfg, out) -> int:
    params = resolve_params(cfg["params"])
    spec = DesignSearchSpec(scenario=build_scenario(cfg), params=params, **_search_kwargs(cfg))
    sol = solve_design(spec)
    meta = _meta("optimize", cfg, params)
    write_csv(os.path.join(out, "frontier.csv"), FRONTIER_HEADER, frontier_rows(sol, spec), meta)
    best = {
        "K": sol.best.K, "n": sol.best.n, "objective_usd_per_hr": sol.objective,
        "metrics": sol.metrics.to_dict(), "feasible_count": len(sol.frontier),
        "infeasible_count": sol.infeasible_count,
    }
    write_json(os.path.join(out, "best.json"), best, meta)
    return EXIT_OK


COMMANDS = {"calibrate": cmd_calibrate, "simulate": cmd_simulate, "sweep": cmd_sweep, "optimize": cmd_optimize}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="microhub", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"microhub {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--replications", type=int)
        sp.add_argument("--metric", choices=[m.value for m in DistanceMetric])
        sp.add_argument("--params", help="recalibrated, paper-reference, or a JSON file")
        sp.add_argument("--workers", type=int)
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "simulate":
            sp.add_argument("--trace", action="store_true", help="write trace.csv for the first run")
        if name == "sweep":
            sp.add_argument("--parameter", choices=list(SWEEP_DEFAULTS))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.replications is not None:
            cfg["replications"] = args.replications
        if args.workers is not None:
            cfg["workers"] = args.workers
        if args.params is not None:
            cfg["params"] = args.params
        if args.metric is not None:
            block = "calibration" if args.command == "calibrate" else "simulation"
            cfg[block]["metric"] = args.metric
        if getattr(args, "trace", False):
            cfg["simulation"]["trace"] = True
        if getattr(args, "parameter", None):
            cfg["sweep"]["parameter"] = args.parameter
        log.info("resolved config: %s", json.dumps(cfg, sort_keys=True))
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out)
    except (ConfigError, InvalidArgument, InsufficientData) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoFeasibleDesign as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
