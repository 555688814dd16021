"""Tour construction for one delivery cycle: heuristic, exact oracle and strip tour.

The hot loops (nearest neighbour, 2-opt) live in a Cython extension.  If it
is not built, or ``MICROHUB_PURE_PYTHON=1`` is set, the pure-Python twins in
``_pykernels`` are used; both produce identical tours.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument
from ..geometry import DistanceMetric, Point, Rect, distance, distance_matrix
from ..rng import STREAM_TSP, make_rng
from . import _pykernels

try:
    from . import _kernels as _ckernels
except ImportError:  # extension not compiled
    _ckernels = None

if _ckernels is not None and os.environ.get("MICROHUB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    _kernels = _ckernels
    BACKEND = "cython"
else:
    _kernels = _pykernels
    BACKEND = "python"

DEFAULT_RESTARTS = 3
EXACT_MAX_NODES = 10


def get_kernels(backend=None):
    """Kernel module for ``backend`` ('cython' or 'python'); None means the active one."""
    if backend is None:
        return _kernels
    if backend == "python":
        return _pykernels
    if backend == "cython":
        if _ckernels is None:
            raise InvalidArgument("the compiled tour kernels are not available")
        return _ckernels
    raise InvalidArgument(f"unknown backend {backend!r}")


@dataclass(frozen=True)
class TourPlan:
    depot: Point
    stops: tuple
    length: float
    metric: DistanceMetric
    order: tuple = ()  # indices of ``stops`` in the caller's node list

    def recomputed_length(self) -> float:
        if not self.stops:
            return 0.0
        path = [self.depot, *self.stops, self.depot]
        return sum(distance(p, q, self.metric) for p, q in zip(path[:-1], path[1:]))


def _prepare(depot, nodes, metric):
    metric = DistanceMetric.parse(metric)
    pts = np.asarray(nodes, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise InvalidArgument("a tour needs at least one node")
    if not np.all(np.isfinite(pts)):
        raise InvalidArgument("node coordinates must be finite")
    all_pts = np.vstack([np.asarray(depot, dtype=np.float64).reshape(1, 2), pts])
    return metric, pts, np.ascontiguousarray(distance_matrix(all_pts, metric))


def _plan(depot, pts, tour, length, metric) -> TourPlan:
    order = tuple(int(i) - 1 for i in tour[1:])
    stops = tuple(Point(float(pts[i, 0]), float(pts[i, 1])) for i in order)
    return TourPlan(Point(float(depot[0]), float(depot[1])), stops, float(length), metric, order)


def _double_bridge(tour, rng):
    seq = tour[1:]
    cuts = np.sort(rng.choice(np.arange(1, len(seq)), size=3, replace=False))
    p1, p2, p3 = (int(c) for c in cuts)
    return np.concatenate(([tour[0]], seq[:p1], seq[p2:p3], seq[p1:p2], seq[p3:])).astype(np.int64)


def heuristic_tour(dist, rng=None, restarts=DEFAULT_RESTARTS, kernels=None):
    """Best tour over nearest neighbour + 2-opt and ``restarts`` perturbed 2-opt runs.

    Works directly on a distance matrix with the depot at index 0 and returns
    ``(tour, length)``.  Restarts apply a double-bridge kick to the incumbent
    (a fresh random permutation when there are fewer than four nodes).
    """
    k = kernels or _kernels
    n_nodes = dist.shape[0] - 1
    tour = k.nearest_neighbor(dist)
    k.two_opt(dist, tour)
    best, best_len = tour, k.tour_length(dist, tour)
    if n_nodes < 3 or restarts <= 0:
        return best, best_len
    if rng is None:
        rng = make_rng(0, STREAM_TSP)
    for _ in range(restarts):
        if n_nodes >= 4:
            cand = _double_bridge(best, rng)
        else:
            cand = np.concatenate(([0], rng.permutation(np.arange(1, n_nodes + 1)))).astype(np.int64)
        k.two_opt(dist, cand)
        cand_len = k.tour_length(dist, cand)
        if cand_len < best_len - 1e-12:
            best, best_len = cand, cand_len
    return best, best_len


def solve_tour_heuristic(depot, nodes, metric=DistanceMetric.EUCLIDEAN, seed=0,
                         restarts=DEFAULT_RESTARTS, backend=None) -> TourPlan:
    metric, pts, dist = _prepare(depot, nodes, metric)
    rng = make_rng(seed, STREAM_TSP)
    tour, length = heuristic_tour(dist, rng, restarts, get_kernels(backend))
    return _plan(depot, pts, tour, length, metric)


def nearest_neighbor_length(depot, nodes, metric=DistanceMetric.EUCLIDEAN) -> float:
    """Length of the plain nearest-neighbour tour (no improvement)."""
    _, _, dist = _prepare(depot, nodes, metric)
    tour = _kernels.nearest_neighbor(dist)
    return _kernels.tour_length(dist, tour)


def solve_tour_exact(depot, nodes, metric=DistanceMetric.EUCLIDEAN) -> TourPlan:
    """Minimum-length tour by enumerating every visiting order (at most 10 nodes).

    The depot is fixed in first position, so each cyclic tour appears twice
    (once per direction); the first minimum in lexicographic order is kept.
    """
    metric, pts, dist = _prepare(depot, nodes, metric)
    n = len(pts)
    if n > EXACT_MAX_NODES:
        raise InvalidArgument(f"exact tour refused for {n} nodes (limit {EXACT_MAX_NODES})")
    best_len, best_perm = math.inf, None
    perms = itertools.permutations(range(1, n + 1))
    chunk = 200_000
    while True:
        block = np.fromiter(itertools.chain.from_iterable(itertools.islice(perms, chunk)),
                            dtype=np.int64)
        if block.size == 0:
            break
        block = block.reshape(-1, n)
        lengths = dist[0, block[:, 0]] + dist[block[:, -1], 0]
        for s in range(n - 1):
            lengths = lengths + dist[block[:, s], block[:, s + 1]]
        i = int(np.argmin(lengths))
        if lengths[i] < best_len:
            best_len, best_perm = float(lengths[i]), block[i]
    tour = np.concatenate(([0], best_perm)).astype(np.int64)
    return _plan(depot, pts, tour, best_len, metric)


def strip_heuristic_tour(cell: Rect, nodes, metric=DistanceMetric.MANHATTAN, depot=None) -> TourPlan:
    """Serpentine strip tour over a rectangular cell.

    The cell is cut into strips parallel to its longer side, with the count
    chosen from the swath width sqrt(3 / node density).  Nodes are visited
    up one strip and down the next; the depot (cell centre by default) is
    spliced into the resulting cycle at its cheapest insertion point.
    """
    metric = DistanceMetric.parse(metric)
    pts = np.asarray(nodes, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise InvalidArgument("a tour needs at least one node")
    if depot is None:
        depot = cell.center
    depot = Point(float(depot[0]), float(depot[1]))
    n = len(pts)
    vertical = cell.height >= cell.width
    across = cell.width if vertical else cell.height
    along_col, across_col = (1, 0) if vertical else (0, 1)
    origin = cell.x0 if vertical else cell.y0
    swath = math.sqrt(3.0 * cell.area / n)
    n_strips = max(1, int(round(across / swath)))
    width = across / n_strips
    strip = np.clip(np.floor((pts[:, across_col] - origin) / width), 0, n_strips - 1).astype(np.int64)
    along = pts[:, along_col]
    # odd strips run backwards; lexsort keys are (last = primary)
    key = np.where(strip % 2 == 0, along, -along)
    cycle = list(np.lexsort((np.arange(n), key, strip)))
    if n == 1:
        pos = 0
    else:
        costs = [
            distance(pts[cycle[i - 1]], depot, metric) + distance(depot, pts[cycle[i]], metric)
            - distance(pts[cycle[i - 1]], pts[cycle[i]], metric)
            for i in range(n)
        ]
        pos = int(np.argmin(costs))
    order = cycle[pos:] + cycle[:pos]
    stops = tuple(Point(float(pts[i, 0]), float(pts[i, 1])) for i in order)
    path = [depot, *stops, depot]
    length = sum(distance(p, q, metric) for p, q in zip(path[:-1], path[1:]))
    return TourPlan(depot, stops, float(length), metric, tuple(int(i) for i in order))


def is_two_opt_optimal(plan: TourPlan, tol=1e-9) -> bool:
    """True if no single 2-exchange on ``plan`` shortens it by more than ``tol``."""
    pts = np.asarray([plan.depot, *plan.stops], dtype=np.float64)
    d = distance_matrix(pts, plan.metric)
    L = len(pts)
    for i in range(L - 2):
        for j in range(i + 2, L):
            e = (j + 1) % L
            if e == i:
                continue
            if d[i, j] + d[i + 1, e] - d[i, i + 1] - d[j, e] < -tol:
                return False
    return True


__all__ = [
    "BACKEND",
    "TourPlan",
    "get_kernels",
    "heuristic_tour",
    "is_two_opt_optimal",
    "nearest_neighbor_length",
    "solve_tour_exact",
    "solve_tour_heuristic",
    "strip_heuristic_tour",
]
