# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""One-dimensional weighted l1 and squared-l2 distance queries.

Points in [0, R] are rounded onto a grid of `grid` steps, their weights are
aggregated into a grid+1 bucket histogram, and the histogram is stored in a
DPTree. A query splits the grid into geometrically shrinking shells around the
query bucket and charges every bucket of a shell the shell's outer radius.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
import logging
import math
from typing import Optional, Sequence

import numpy as np

from ..errors import InvalidParameter
from ..noise import Rng
from .dptree import DPTree, canonical_nodes, padded_size

logger = logging.getLogger(__name__)


class DistanceMode(Enum):
    """Which distance a DistanceIndex sums up"""
    L1 = "l1"
    L2SQ = "l2sq"

    @property
    def power(self) -> int:
        """Exponent applied to |y - x|"""
        return 1 if self is DistanceMode.L1 else 2


def round_to_grid(x: float, grid: int, radius: float = 1.0) -> int:
    """Index of the grid point j * radius / grid nearest to x, ties going up"""
    if not 0 <= x <= radius:
        raise InvalidParameter(f"{x} is outside [0, {radius}]")
    return min(grid, int(math.floor(x * grid / radius + 0.5)))


def round_array(values: np.ndarray, grid: int, radius: float) -> np.ndarray:
    """Vectorised round_to_grid"""
    return np.minimum(grid, np.floor(values * grid / radius + 0.5)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class ShellPlan:
    """Tree intervals and node weights answering one distance query"""
    intervals: tuple[tuple[int, int, float], ...]
    nodes: np.ndarray
    weights: np.ndarray

    def buckets(self) -> list[int]:
        """All bucket indices covered by the plan"""
        return [pos - 1 for lo, hi, _ in self.intervals for pos in range(lo, hi + 1)]


@lru_cache(maxsize=16384)
def shell_plan(grid: int, k: int, alpha: float, power: int, radius: float) -> ShellPlan:
    """Plan the shells around bucket k.

    Shell j holds the buckets at integer grid distance t with
    grid/(1+alpha)^(j+1) < t <= grid/(1+alpha)^j, on both sides of k, and is
    charged (radius/(1+alpha)^j)^power. Shells stop once the inner radius drops
    below one grid step, so every bucket but k is covered exactly once.
    Intervals are 1-based inclusive tree positions (bucket b is position b+1).
    """
    n_pad = padded_size(grid + 1)
    intervals: list[tuple[int, int, float]] = []
    nodes: list[int] = []
    weights: list[float] = []

    def add(first: int, last: int, multiplier: float) -> None:
        if first > last:
            return
        intervals.append((first + 1, last + 1, multiplier))
        covering = canonical_nodes(n_pad, first + 1, last + 1)
        nodes.extend(covering)
        weights.extend([multiplier] * len(covering))

    outer = float(grid)
    j = 0
    while True:
        inner = grid / (1 + alpha) ** (j + 1)
        hi_dist = math.floor(outer)
        lo_dist = math.floor(inner)
        if lo_dist < hi_dist:
            multiplier = (radius * outer / grid) ** power
            add(k + lo_dist + 1, min(k + hi_dist, grid), multiplier)
            add(max(k - hi_dist, 0), k - lo_dist - 1, multiplier)
        if inner < 1:
            break
        outer = inner
        j += 1

    node_array = np.array(nodes, dtype=np.int64)
    weight_array = np.array(weights, dtype=np.float64)
    node_array.setflags(write=False)
    weight_array.setflags(write=False)
    return ShellPlan(tuple(intervals), node_array, weight_array)


@dataclass(frozen=True)
class DistanceEstimate:
    """A noised distance query answer with its deterministic noise envelope"""
    value: float
    noise_bound: float
    noise_variance: float
    interval_count: int

    def __add__(self, other: "DistanceEstimate") -> "DistanceEstimate":
        return DistanceEstimate(self.value + other.value,
                                self.noise_bound + other.noise_bound,
                                self.noise_variance + other.noise_variance,
                                self.interval_count + other.interval_count)


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise InvalidParameter(f"alpha must be in (0, 1), not {alpha}")


@dataclass(frozen=True, eq=False)
class DistanceIndex:
    """Rounded weight histogram over [0, radius] backed by a DPTree with sensitivity 2 R_w"""
    radius: float
    weight_bound: float
    grid: int
    point_count: int
    histogram: np.ndarray
    tree: DPTree
    mode: DistanceMode
    abs_weight_sum: float

    @classmethod
    def build(cls, points: Sequence[float], weights: Sequence[float], epsilon: float,
              delta: float, rng: Rng, mode: DistanceMode = DistanceMode.L1,
              radius: float = 1.0, weight_bound: float = 1.0,
              grid_size: Optional[int] = None, noise_enabled: bool = True) -> "DistanceIndex":
        """Round the points, aggregate their weights and build the tree"""
        xs = np.asarray(points, dtype=np.float64).reshape(-1)
        ws = np.asarray(weights, dtype=np.float64).reshape(-1)
        if xs.size == 0:
            raise InvalidParameter("can't build a distance index without points")
        if xs.size != ws.size:
            raise InvalidParameter(f"{xs.size} points but {ws.size} weights")
        if not radius > 0 or not math.isfinite(radius):
            raise InvalidParameter(f"domain radius must be positive, not {radius}")
        if not weight_bound > 0 or not math.isfinite(weight_bound):
            raise InvalidParameter(f"weight bound must be positive, not {weight_bound}")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ws))):
            raise InvalidParameter("points and weights must be finite")
        if np.any(xs < 0) or np.any(xs > radius):
            raise InvalidParameter(f"points must lie in [0, {radius}]")
        if np.any(np.abs(ws) > weight_bound):
            raise InvalidParameter(f"weights must lie in [-{weight_bound}, {weight_bound}]")
        grid = xs.size if grid_size is None else int(grid_size)
        if grid < 1:
            raise InvalidParameter(f"grid size must be at least 1, not {grid}")

        histogram = np.zeros(grid + 1, dtype=np.float64)
        np.add.at(histogram, round_array(xs, grid, radius), ws)
        histogram.setflags(write=False)

        tree = DPTree.build(histogram, 2 * weight_bound, epsilon, delta, rng, noise_enabled)
        logger.debug("Built %s distance index over %d points, %d buckets",
                     mode.value, xs.size, grid + 1)
        return cls(radius, weight_bound, grid, int(xs.size), histogram, tree, mode,
                   float(np.sum(np.abs(ws))))

    def alpha_internal(self, alpha: float) -> float:
        """Shell ratio actually used: alpha for l1, alpha/2 for squared l2"""
        return alpha if self.mode is DistanceMode.L1 else alpha / 2

    def _bucket(self, y: float) -> int:
        if not 0 <= y <= self.radius:
            raise InvalidParameter(f"query {y} is outside [0, {self.radius}]")
        return round_to_grid(y, self.grid, self.radius)

    def plan(self, y: float, alpha: float) -> ShellPlan:
        """The shell plan for query y"""
        _check_alpha(alpha)
        return shell_plan(self.grid, self._bucket(y), self.alpha_internal(alpha),
                          self.mode.power, self.radius)

    def estimate(self, y: float, alpha: float) -> DistanceEstimate:
        """Noised weighted distance from y, with its noise envelope"""
        plan = self.plan(y, alpha)
        value = self.tree.weighted_sum(plan.nodes, plan.weights)
        total_weight = float(np.sum(plan.weights))
        return DistanceEstimate(value,
                                self.tree.node_bound * total_weight,
                                self.tree.node_variance * float(np.sum(plan.weights ** 2)),
                                len(plan.intervals))

    def distance_query(self, y: float, alpha: float) -> float:
        """Estimate sum_i w_i |y - x_i|^p"""
        return self.estimate(y, alpha).value

    def _rounded_distances(self, y: float) -> np.ndarray:
        k = self._bucket(y)
        steps = np.abs(k - np.arange(self.grid + 1)).astype(np.float64)
        return steps ** self.mode.power

    def exact_rounded_distance(self, y: float) -> float:
        """Noise-free sum over buckets of |k - j|^p (R/grid)^p histogram[j]"""
        scale = (self.radius / self.grid) ** self.mode.power
        return float(np.dot(self._rounded_distances(y), self.histogram)) * scale

    def bucketing_bound(self, y: float, alpha: float) -> float:
        """Worst case gap between the noise-free shell answer and exact_rounded_distance"""
        _check_alpha(alpha)
        scale = (self.radius / self.grid) ** self.mode.power
        factor = (1 + self.alpha_internal(alpha)) ** self.mode.power - 1
        return factor * scale * float(np.dot(self._rounded_distances(y), np.abs(self.histogram)))

    def rounding_bound(self) -> float:
        """Worst case gap between exact_rounded_distance and the unrounded distance sum"""
        step = self.radius / self.grid
        if self.mode is DistanceMode.L1:
            return self.abs_weight_sum * step
        return self.abs_weight_sum * 2 * self.radius * step
