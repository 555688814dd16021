"""Monte-Carlo tour statistics on an (area, node-count) grid and the variance-surface fit."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .ca_model import VarianceParams, expected_tour_distance
from .errors import InsufficientData, InvalidArgument
from .geometry import DistanceMetric, distance_matrix
from .rng import STREAM_CALIBRATION, STREAM_FIT, make_rng
from .tsp import heuristic_tour

DEFAULT_AREAS = (25.0, 50.0, 100.0, 200.0)
DEFAULT_COUNTS = (5, 10, 20, 50, 100)
DEFAULT_REPLICATIONS = 1000
DEFAULT_SEED = 2024

# Lattice of simplex starting points; 20 of its 81 corners are drawn per fit.
START_C = (1.0, 10.0, 100.0)
START_GAMMA = (10.0, 100.0, 1000.0)
START_ALPHA = (1.0, 2.0, 3.0)
START_BETA = (1.0, 10.0, 100.0)
N_STARTS = 20


@dataclass(frozen=True)
class GridSpec:
    areas: tuple = DEFAULT_AREAS
    counts: tuple = DEFAULT_COUNTS
    replications: int = DEFAULT_REPLICATIONS
    speed_v: float = 40.0
    metric: DistanceMetric = DistanceMetric.MANHATTAN

    def __post_init__(self):
        if self.replications < 2:
            raise InvalidArgument("replications must be >= 2")
        if any(a <= 0 for a in self.areas) or any(int(n) != n or n < 1 for n in self.counts):
            raise InvalidArgument("areas must be > 0 and node counts integers >= 1")
        if not self.speed_v > 0:
            raise InvalidArgument("speed_v must be > 0")
        object.__setattr__(self, "metric", DistanceMetric.parse(self.metric))

    def cells(self):
        return [(float(a), int(n)) for a in self.areas for n in self.counts]


@dataclass(frozen=True)
class TourSampleCell:
    A: float
    N: int
    replications: int
    mean_time: float
    var_time: float
    mean_dist: float
    var_dist: float


@dataclass(frozen=True)
class TourSampleGrid:
    grid: tuple
    seed: int
    speed_v: float
    metric: DistanceMetric

    def column(self, name) -> np.ndarray:
        return np.array([getattr(c, name) for c in self.grid], dtype=np.float64)


@dataclass(frozen=True)
class FitReport:
    params: VarianceParams
    r2_mean: float
    r2_var: float
    residuals: tuple
    gap_vs_sqrt_law: float
    ssr: float
    sst: float
    start_objectives: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        d["residuals"] = list(self.residuals)
        d["start_objectives"] = list(self.start_objectives)
        return d


def _sample_cell(args):
    index, A, N, reps, speed_v, metric, seed = args
    rng = make_rng(seed, STREAM_CALIBRATION, index)
    side = math.sqrt(A)
    hub = np.array([[side / 2.0, side / 2.0]])
    lengths = np.empty(reps)
    for r in range(reps):
        pts = rng.random((N, 2)) * side
        dist = np.ascontiguousarray(distance_matrix(np.vstack([hub, pts]), metric))
        _, lengths[r] = heuristic_tour(dist, rng)
    times = lengths / speed_v
    return TourSampleCell(
        A=A, N=N, replications=reps,
        mean_time=float(times.mean()), var_time=float(times.var(ddof=1)),
        mean_dist=float(lengths.mean()), var_dist=float(lengths.var(ddof=1)),
    )


def sample_tours(grid_spec: GridSpec, metric=None, seed=DEFAULT_SEED, workers=1) -> TourSampleGrid:
    """Sample mean/variance of heuristic tour length and time for every grid cell.

    Each tour starts and ends at the centre of an ``A``-square with ``N``
    uniform nodes.  Cell ``i`` draws from its own stream, so the result does
    not depend on ``workers``.
    """
    metric = DistanceMetric.parse(metric if metric is not None else grid_spec.metric)
    jobs = [(i, A, N, grid_spec.replications, grid_spec.speed_v, metric, int(seed))
            for i, (A, N) in enumerate(grid_spec.cells())]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_sample_cell, jobs))
    else:
        cells = [_sample_cell(j) for j in jobs]
    return TourSampleGrid(grid=tuple(cells), seed=int(seed), speed_v=grid_spec.speed_v, metric=metric)


def _check_grid(samples: TourSampleGrid):
    if len(samples.grid) < 8:
        raise InsufficientData(f"need >= 8 grid cells, got {len(samples.grid)}")
    if len({c.A for c in samples.grid}) < 2 or len({c.N for c in samples.grid}) < 4:
        raise InsufficientData("grid must span >= 2 areas and >= 4 node counts")


def _r2(obs, pred) -> float:
    sst = float(((obs - obs.mean()) ** 2).sum())
    ssr = float(((obs - pred) ** 2).sum())
    return 1.0 - ssr / sst if sst > 0 else (1.0 if ssr == 0 else 0.0)


def fit_mean_check(samples: TourSampleGrid) -> float:
    """R^2 of sampled mean tour time against the parameter-free sqrt(A N) law."""
    _check_grid(samples)
    obs = samples.column("mean_time")
    pred = np.array([expected_tour_distance(c.A, c.N) / samples.speed_v for c in samples.grid])
    return _r2(obs, pred)


def variance_surface(A, N, speed_v, C, gamma, alpha, beta):
    return C * np.asarray(A) / speed_v ** 2 * (gamma / np.asarray(N, dtype=np.float64) ** alpha + beta)


def _balance(z):
    """Canonical point on the (C, gamma, beta) ridge.

    The surface depends on C only through C*gamma and C*beta, so
    (C*s, gamma/s, beta/s) fits equally well for every s > 0.  The
    representative reported is the one with C**4 == (C*gamma) * (C*beta).
    """
    lc, lg, la, lb = z
    lcg, lcb = lc + lg, lc + lb
    c = 0.25 * (lcg + lcb)
    return np.array([c, lcg - c, la, lcb - c])


def fit_variance_model(samples: TourSampleGrid, seed=DEFAULT_SEED, n_starts=N_STARTS) -> FitReport:
    """Least-squares fit of the tour-time variance surface.

    Multi-start Nelder-Mead in log-parameter space (which keeps every
    constant positive).  The objective is SSR/SST, a rescaling that leaves
    the minimiser unchanged but keeps the simplex tolerances meaningful for
    hour^2-sized data.
    """
    _check_grid(samples)
    A = samples.column("A")
    N = samples.column("N")
    y = samples.column("var_time")
    v = samples.speed_v
    sst = float(((y - y.mean()) ** 2).sum())
    if sst <= 0:
        raise InsufficientData("sampled variances are constant; nothing to fit")

    logN = np.log(N)

    def objective(z):
        lc, lg, la, lb = z
        # evaluated through C*gamma and C*beta so ridge drift cannot overflow
        with np.errstate(over="ignore", invalid="ignore"):
            pred = A / v ** 2 * (np.exp(lc + lg - np.exp(la) * logN) + np.exp(lc + lb))
            r = y - pred
            f = float(r @ r) / sst
        return f if math.isfinite(f) else 1e300

    lattice = list(itertools.product(START_C, START_GAMMA, START_ALPHA, START_BETA))
    rng = make_rng(seed, STREAM_FIT)
    picks = rng.choice(len(lattice), size=min(n_starts, len(lattice)), replace=False)
    starts = [np.log(np.array(lattice[i], dtype=np.float64)) for i in sorted(picks)]

    best_z, best_f, start_f = None, math.inf, []
    for z0 in starts:
        start_f.append(objective(z0))
        z = z0
        for _ in range(2):
            # second pass restarts a fresh simplex from the balanced optimum
            res = minimize(objective, z, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-16, "maxiter": 40000, "maxfev": 40000})
            z = _balance(res.x)
        f = objective(z)
        if f < best_f:
            best_z, best_f = z, f

    C, gamma, alpha, beta = (float(x) for x in np.exp(best_z))
    params = VarianceParams(C=C, gamma=gamma, alpha=alpha, beta=beta, time_unit="hours",
                            source="recalibrated")
    resid = y - variance_surface(A, N, v, C, gamma, alpha, beta)
    ssr = float(resid @ resid)
    E_law = np.array([expected_tour_distance(c.A, c.N) for c in samples.grid])
    gap = float(np.mean((samples.column("mean_dist") - E_law) / E_law))
    return FitReport(
        params=params, r2_mean=fit_mean_check(samples), r2_var=1.0 - ssr / sst,
        residuals=tuple(float(r) for r in resid), gap_vs_sqrt_law=gap, ssr=ssr, sst=sst,
        start_objectives=tuple(start_f),
    )
