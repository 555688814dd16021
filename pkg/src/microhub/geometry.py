"""Points, distance metrics, square regions, equal-area partitions and samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgument
from .rng import STREAM_GEOMETRY, make_rng


class Point(NamedTuple):
    x: float
    y: float


class DistanceMetric(str, Enum):
    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"

    @classmethod
    def parse(cls, value) -> "DistanceMetric":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidArgument(f"unknown distance metric {value!r}") from None


def distance(a, b, metric=DistanceMetric.EUCLIDEAN) -> float:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    if DistanceMetric.parse(metric) is DistanceMetric.MANHATTAN:
        return abs(dx) + abs(dy)
    return math.hypot(dx, dy)


def distance_matrix(points, metric=DistanceMetric.EUCLIDEAN) -> np.ndarray:
    """Dense pairwise distances for an ``(N, 2)`` array-like of coordinates."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    diff = pts[:, None, :] - pts[None, :, :]
    if DistanceMetric.parse(metric) is DistanceMetric.MANHATTAN:
        return np.abs(diff).sum(axis=2)
    return np.sqrt((diff * diff).sum(axis=2))


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point:
        return Point(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def contains(self, p) -> bool:
        return self.x0 <= p[0] <= self.x1 and self.y0 <= p[1] <= self.y1


@dataclass(frozen=True)
class Region:
    """Axis-aligned square ``[0, side]^2`` with the hub at its centroid."""

    area_A: float

    def __post_init__(self):
        if not (self.area_A > 0 and math.isfinite(self.area_A)):
            raise InvalidArgument(f"region area must be positive and finite, got {self.area_A}")

    @property
    def side(self) -> float:
        return math.sqrt(self.area_A)

    @property
    def hub(self) -> Point:
        return Point(self.side / 2.0, self.side / 2.0)

    @property
    def bounds(self) -> Rect:
        return Rect(0.0, 0.0, self.side, self.side)


@dataclass(frozen=True)
class Partition:
    """Equal-area tiling of a region.

    Perfect-square K uses a sqrt(K) x sqrt(K) grid, any other K uses K
    vertical strips of equal width.
    """

    region: Region
    K: int
    cols: int
    rows: int

    @property
    def cells(self) -> list[Rect]:
        s = self.region.side
        cw, ch = s / self.cols, s / self.rows
        out = []
        for r in range(self.rows):
            for c in range(self.cols):
                x1 = s if c == self.cols - 1 else (c + 1) * cw
                y1 = s if r == self.rows - 1 else (r + 1) * ch
                out.append(Rect(c * cw, r * ch, x1, y1))
        return out

    def zone_of(self, p) -> int:
        return int(self.zones_of(np.asarray([p], dtype=np.float64))[0])

    def zones_of(self, xy: np.ndarray) -> np.ndarray:
        """Vectorised ``zone_of`` for an ``(N, 2)`` array; cell index = row*cols + col."""
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        s = self.region.side
        col = np.clip(np.floor(xy[:, 0] / s * self.cols), 0, self.cols - 1).astype(np.int64)
        row = np.clip(np.floor(xy[:, 1] / s * self.rows), 0, self.rows - 1).astype(np.int64)
        return row * self.cols + col


def make_equal_partition(region: Region, K: int) -> Partition:
    K = int(K)
    if K < 1:
        raise InvalidArgument(f"partition count K must be >= 1, got {K}")
    root = math.isqrt(K)
    if root * root == K:
        return Partition(region, K, cols=root, rows=root)
    return Partition(region, K, cols=K, rows=1)


def sample_uniform_points(region: Region, count: int, seed=None, rng=None) -> np.ndarray:
    """``count`` i.i.d. uniform points in the region as an ``(count, 2)`` array.

    Pass either ``seed`` (stream derived via ``make_rng``) or an explicit
    ``numpy.random.Generator``.
    """
    if count < 0:
        raise InvalidArgument("count must be >= 0")
    if rng is None:
        rng = make_rng(0 if seed is None else seed, STREAM_GEOMETRY, 0)
    return rng.random((int(count), 2)) * region.side


def sample_poisson_arrivals(rate: float, horizon: float, seed=None, rng=None) -> np.ndarray:
    """Sorted arrival epochs of a homogeneous Poisson process on ``[0, horizon]``."""
    if rate < 0 or not math.isfinite(rate):
        raise InvalidArgument(f"rate must be a finite value >= 0, got {rate}")
    if not horizon > 0:
        raise InvalidArgument(f"horizon must be > 0, got {horizon}")
    if rng is None:
        rng = make_rng(0 if seed is None else seed, STREAM_GEOMETRY, 1)
    if rate == 0:
        return np.empty(0)
    count = rng.poisson(rate * horizon)
    # conditional on the count, epochs are i.i.d. uniform order statistics
    return np.sort(rng.random(count) * horizon)
