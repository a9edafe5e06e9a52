# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""d-dimensional weighted distance queries, one DistanceIndex per coordinate"""

from dataclasses import dataclass
import logging
from typing import Optional, Sequence

import numpy as np

from ..budget import PrivacyBudget
from ..errors import InvalidParameter
from ..noise import Rng
from .distance import DistanceEstimate, DistanceIndex, DistanceMode

logger = logging.getLogger(__name__)

DEFAULT_C_SPLIT = 0.05


@dataclass(frozen=True)
class HighDimIndex:
    """Per-coordinate distance indices sharing an advanced-composition budget"""
    per_coord: tuple[DistanceIndex, ...]
    budget: PrivacyBudget
    coord_budget: PrivacyBudget
    c_split: float
    mode: DistanceMode

    @classmethod
    def build(cls, points: Sequence[Sequence[float]], weights: Sequence[float],
              epsilon: float, delta: float, delta_prime: float, rng: Rng,
              c_split: float = DEFAULT_C_SPLIT, mode: DistanceMode = DistanceMode.L1,
              radius: float = 1.0, weight_bound: float = 1.0,
              grid_size: Optional[int] = None, noise_enabled: bool = True) -> "HighDimIndex":
        """Build one index per coordinate with budget (c eps / sqrt(d ln(1/delta')), delta/d)"""
        matrix = np.asarray(points, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] == 0:
            raise InvalidParameter(f"points must be a non-empty n x d matrix, not shape {matrix.shape}")
        dim = matrix.shape[1]
        budget = PrivacyBudget(epsilon, delta, delta_prime)
        coord_budget = budget.advanced_split(dim, c_split)
        logger.debug("Building %d coordinate indices with epsilon %.4g each",
                     dim, coord_budget.epsilon)
        per_coord = tuple(
            DistanceIndex.build(matrix[:, i], weights, coord_budget.epsilon, coord_budget.delta,
                                rng.spawn(i), mode, radius, weight_bound, grid_size,
                                noise_enabled)
            for i in range(dim))
        return cls(per_coord, budget, coord_budget, c_split, mode)

    @property
    def dim(self) -> int:
        """Number of coordinates"""
        return len(self.per_coord)

    def _check_query(self, y: Sequence[float]) -> np.ndarray:
        query = np.asarray(y, dtype=np.float64).reshape(-1)
        if query.size != self.dim:
            raise InvalidParameter(f"query has {query.size} coordinates, index has {self.dim}")
        return query

    def estimate(self, y: Sequence[float], alpha: float) -> DistanceEstimate:
        """Sum of the coordinate estimates"""
        query = self._check_query(y)
        total = DistanceEstimate(0.0, 0.0, 0.0, 0)
        for index, value in zip(self.per_coord, query):
            total = total + index.estimate(float(value), alpha)
        return total

    def distance_query(self, y: Sequence[float], alpha: float) -> float:
        """Estimate sum_i w_i ||y - x_i||_p^p"""
        return self.estimate(y, alpha).value

    def exact_rounded_distance(self, y: Sequence[float]) -> float:
        """Noise-free rounded distance, summed over coordinates"""
        query = self._check_query(y)
        return sum(index.exact_rounded_distance(float(value))
                   for index, value in zip(self.per_coord, query))

    def bucketing_bound(self, y: Sequence[float], alpha: float) -> float:
        """Sum of the coordinate bucketing bounds"""
        query = self._check_query(y)
        return sum(index.bucketing_bound(float(value), alpha)
                   for index, value in zip(self.per_coord, query))

    def rounding_bound(self) -> float:
        """Sum of the coordinate rounding bounds"""
        return sum(index.rounding_bound() for index in self.per_coord)
