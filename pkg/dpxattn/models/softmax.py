# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Private weighted softmax queries w^T exp(Xy/d).

With the polynomial feature map P, sum_i w_i <P(x_i), P(y)> equals
0.5 * (P_wx + s_w ||P(y)||^2 - sum_c sum_i w_i (P(x_i)_c - P(y)_c)^2), so the
query reduces to r one-dimensional squared-l2 distance queries, one per
feature coordinate.

P_wx and s_w are kept exact by default, as in the construction this follows,
even though both depend on the private data. `noisy_scalars` releases them
with their own truncated Laplace noise instead.
"""

from dataclasses import dataclass
import logging
import math
from typing import Optional, Sequence

import numpy as np

from ..budget import PrivacyBudget
from ..errors import InvalidParameter
from ..kernel import DEFAULT_KERNEL_CAP, KernelParams, feature_map, features, select_params
from ..noise import NoiseSpec, Rng, sample
from .distance import DistanceEstimate, DistanceIndex, DistanceMode
from .highdim import DEFAULT_C_SPLIT

logger = logging.getLogger(__name__)

SCALAR_SHARE = 0.1


@dataclass(frozen=True)
class ErrorBudget:
    """Deterministic error envelope of one softmax answer, split by source"""
    noise: float
    bucketing: float
    rounding: float
    kernel: float

    @property
    def total(self) -> float:
        """Sum of all error sources"""
        return self.noise + self.bucketing + self.rounding + self.kernel

    def to_json(self) -> dict[str, float]:
        """Convert to a JSON-able datastructure"""
        return {
            "noise": self.noise,
            "bucketing": self.bucketing,
            "rounding": self.rounding,
            "kernel": self.kernel,
            "total": self.total,
        }


@dataclass(frozen=True)
class SoftmaxEstimate:
    """A softmax query answer and its error envelope"""
    value: float
    errors: ErrorBudget


def check_points(points: Sequence[Sequence[float]], weights: Sequence[float],
                 radius: float, weight_bound: float) -> tuple[np.ndarray, np.ndarray]:
    """Validate an n x d point matrix and its n weights"""
    matrix = np.asarray(points, dtype=np.float64)
    ws = np.array(weights, dtype=np.float64).reshape(-1)
    if matrix.ndim != 2 or matrix.shape[0] == 0 or matrix.shape[1] == 0:
        raise InvalidParameter(f"points must be a non-empty n x d matrix, not shape {matrix.shape}")
    if ws.size != matrix.shape[0]:
        raise InvalidParameter(f"{matrix.shape[0]} points but {ws.size} weights")
    if not (np.all(np.isfinite(matrix)) and np.all(np.isfinite(ws))):
        raise InvalidParameter("points and weights must be finite")
    if np.any(matrix < 0) or np.any(matrix > radius):
        raise InvalidParameter(f"points must lie in [0, {radius}]^d")
    if np.any(np.abs(ws) > weight_bound):
        raise InvalidParameter(f"weights must lie in [-{weight_bound}, {weight_bound}]")
    return matrix, ws


@dataclass(frozen=True, eq=False)
class SoftmaxIndex:
    """Feature-space distance indices plus the two polarisation scalars"""
    params: KernelParams
    feature_matrix: np.ndarray
    weights: np.ndarray
    p_wx: float
    s_w: float
    coord_indices: tuple[DistanceIndex, ...]
    budget: PrivacyBudget
    coord_budget: PrivacyBudget
    weight_bound: float
    scalar_bounds: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def build(cls, points: Sequence[Sequence[float]], weights: Sequence[float],
              epsilon: float, delta: float, delta_prime: float, rng: Rng,
              c_split: float = DEFAULT_C_SPLIT, epsilon_s: float = 0.05,
              radius: float = 1.0, weight_bound: float = 1.0,
              grid_size: Optional[int] = None, noise_enabled: bool = True,
              noisy_scalars: bool = False, kernel_cap: int = DEFAULT_KERNEL_CAP,
              params: Optional[KernelParams] = None,
              feature_matrix: Optional[np.ndarray] = None) -> "SoftmaxIndex":
        """Compute the features and build one squared-l2 index per feature coordinate"""
        matrix, ws = check_points(points, weights, radius, weight_bound)
        if params is None:
            params = select_params(matrix.shape[1], radius, epsilon_s, kernel_cap)
        elif params.dim != matrix.shape[1] or params.radius != radius:
            raise InvalidParameter("kernel parameters don't match the points")
        if feature_matrix is None:
            feature_matrix = features(params, matrix)
            feature_matrix.setflags(write=False)
        elif feature_matrix.flags.writeable:
            # a caller's writeable array is neither frozen nor kept
            feature_matrix = np.array(feature_matrix, dtype=np.float64)
            feature_matrix.setflags(write=False)

        budget = PrivacyBudget(epsilon, delta, delta_prime)
        tree_budget = budget.scaled(1 - 2 * SCALAR_SHARE) if noisy_scalars else budget
        coord_budget = tree_budget.advanced_split(params.size, c_split)
        grid = matrix.shape[0] if grid_size is None else grid_size

        p_wx = float(np.dot(ws, np.sum(feature_matrix * feature_matrix, axis=1)))
        s_w = float(np.sum(ws))
        scalar_bounds = (0.0, 0.0)
        if noisy_scalars and noise_enabled:
            share = budget.scaled(SCALAR_SHARE)
            norm_bound = float(np.dot(params.coordinate_bounds, params.coordinate_bounds))
            pwx_spec = NoiseSpec(2 * weight_bound * norm_bound, share.epsilon, share.delta)
            sw_spec = NoiseSpec(2 * weight_bound, share.epsilon, share.delta)
            p_wx += sample(pwx_spec, rng.spawn(params.size))
            s_w += sample(sw_spec, rng.spawn(params.size + 1))
            scalar_bounds = (pwx_spec.bound, sw_spec.bound)

        logger.debug("Building %d feature coordinate indices with epsilon %.4g each",
                     params.size, coord_budget.epsilon)
        coord_indices = tuple(
            DistanceIndex.build(feature_matrix[:, c], ws, coord_budget.epsilon, coord_budget.delta,
                                rng.spawn(c), DistanceMode.L2SQ,
                                float(params.coordinate_bounds[c]), weight_bound, grid,
                                noise_enabled)
            for c in range(params.size))
        ws.setflags(write=False)
        return cls(params, feature_matrix, ws, p_wx, s_w, coord_indices, budget,
                   coord_budget, weight_bound, scalar_bounds)

    def query_features(self, y: Sequence[float]) -> np.ndarray:
        """P(y), computed exactly since y is public"""
        query = np.asarray(y, dtype=np.float64).reshape(-1)
        if query.size != self.params.dim:
            raise InvalidParameter(f"query has {query.size} coordinates, index has {self.params.dim}")
        return feature_map(self.params, query)

    def combine(self, p_y: np.ndarray, distances: Sequence[float]) -> float:
        """0.5 * (P_wx + s_w ||P(y)||^2 - sum of the coordinate distances)"""
        return 0.5 * (self.p_wx + self.s_w * float(np.dot(p_y, p_y)) - math.fsum(distances))

    def coordinate_estimates(self, p_y: np.ndarray, alpha: float) -> list[DistanceEstimate]:
        """Squared-l2 distance estimates for every feature coordinate"""
        return [index.estimate(float(value), alpha)
                for index, value in zip(self.coord_indices, p_y)]

    def estimate(self, y: Sequence[float], alpha: float) -> SoftmaxEstimate:
        """Answer with its deterministic error envelope against w^T exp(Xy/d)"""
        p_y = self.query_features(y)
        estimates = self.coordinate_estimates(p_y, alpha)
        value = self.combine(p_y, [item.value for item in estimates])
        norm = float(np.dot(p_y, p_y))
        noise = 0.5 * (math.fsum(item.noise_bound for item in estimates)
                       + self.scalar_bounds[0] + self.scalar_bounds[1] * norm)
        bucketing = 0.5 * math.fsum(index.bucketing_bound(float(v), alpha)
                                    for index, v in zip(self.coord_indices, p_y))
        rounding = 0.5 * math.fsum(index.rounding_bound() for index in self.coord_indices)
        kernel = self.params.tail * float(np.sum(np.abs(self.weights)))
        return SoftmaxEstimate(value, ErrorBudget(noise, bucketing, rounding, kernel))

    def softmax_query(self, y: Sequence[float], alpha: float) -> float:
        """Estimate w^T exp(Xy/d)"""
        p_y = self.query_features(y)
        return self.combine(p_y, [item.value for item in self.coordinate_estimates(p_y, alpha)])

    def error_budget(self, y: Sequence[float], alpha: float) -> ErrorBudget:
        """Deterministic error envelope of softmax_query(y, alpha)"""
        return self.estimate(y, alpha).errors
