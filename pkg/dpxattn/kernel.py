# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Polynomial feature map approximating the exponential kernel exp(<x, y>/d).

The entry for the multi-index beta (|beta| = j) is prod_k (x_k/sqrt(d))^beta_k / sqrt(beta!),
so that <P(x), P(y)> = sum_{j <= s} (<x, y>/d)^j / j!, the degree-s Taylor
polynomial of exp(<x, y>/d). Multi-indices are kept in graded order, and within
a degree in the order itertools.combinations_with_replacement yields them.
"""

from dataclasses import dataclass
from itertools import combinations_with_replacement
import logging
import math
from typing import Sequence

import numpy as np

from .errors import InfeasibleParameters, InvalidParameter

logger = logging.getLogger(__name__)

DEFAULT_KERNEL_CAP = 10 ** 6
MAX_DEGREE = 1000

FeatureVector = np.ndarray


def taylor_tail(u: float, degree: int) -> float:
    """sum_{j > degree} u^j / j! for u >= 0.

    Sums 64 terms explicitly and bounds the rest by a geometric series.
    """
    term = 1.0
    for j in range(1, degree + 2):
        term *= u / j
    total = 0.0
    for j in range(degree + 1, degree + 65):
        total += term
        term *= u / (j + 1)
    ratio = u / (degree + 66)
    if ratio >= 1:
        return math.inf
    return total + term / (1 - ratio)


def gamma_bound(radius: float, degree: int) -> float:
    """max_{0 <= j <= degree} radius^j / sqrt(j!)"""
    return max(radius ** j / math.sqrt(math.factorial(j)) for j in range(degree + 1))


@dataclass(frozen=True, eq=False)
class KernelParams:
    """A fixed polynomial feature map and the record of how it was chosen"""
    dim: int
    radius: float
    epsilon_s: float
    degree: int
    size: int
    gamma: float
    tail: float
    multi_indices: tuple[tuple[int, ...], ...]
    parents: np.ndarray
    coords: np.ndarray
    scales: np.ndarray
    levels: tuple[tuple[int, int], ...]
    coordinate_bounds: np.ndarray

    def to_json(self) -> dict:
        """Convert to a JSON-able datastructure"""
        return {
            "d": self.dim,
            "R": self.radius,
            "epsilon_s": self.epsilon_s,
            "s": self.degree,
            "r": self.size,
            "gamma": self.gamma,
            "tail": self.tail,
        }


def multi_index_tables(dim: int, degree: int):
    """Multi-indices up to `degree` in graded order, with the recurrence tables building them.

    Entry i > 0 is computed from entry parents[i] times coordinate coords[i],
    scaled by scales[i]; levels holds the [start, end) range of each degree.
    """
    multi_indices: list[tuple[int, ...]] = []
    parents: list[int] = [0]
    coords: list[int] = [0]
    scales: list[float] = [1.0]
    levels: list[tuple[int, int]] = []
    position: dict[tuple[int, ...], int] = {}
    for j in range(degree + 1):
        start = len(multi_indices)
        for combo in combinations_with_replacement(range(dim), j):
            position[combo] = len(multi_indices)
            beta = [0] * dim
            for k in combo:
                beta[k] += 1
            multi_indices.append(tuple(beta))
            if j:
                last = combo[-1]
                parents.append(position[combo[:-1]])
                coords.append(last)
                scales.append(1 / math.sqrt(beta[last]))
        levels.append((start, len(multi_indices)))
    return multi_indices, parents, coords, scales, levels


def select_params(dim: int, radius: float, epsilon_s: float,
                  cap: int = DEFAULT_KERNEL_CAP) -> KernelParams:
    """Pick the smallest degree s with sum_{j > s} R^(2j)/j! <= epsilon_s and build the map"""
    if dim < 1:
        raise InvalidParameter(f"dimension must be at least 1, not {dim}")
    if not math.isfinite(radius) or radius < 1:
        raise InvalidParameter(f"kernel domain bound must be >= 1, not {radius}")
    if not 0 < epsilon_s <= 0.1:
        raise InvalidParameter(f"epsilon_s must be in (0, 0.1], not {epsilon_s}")

    u_max = radius * radius
    degree = 0
    tail = taylor_tail(u_max, degree)
    while tail > epsilon_s:
        degree += 1
        if degree > MAX_DEGREE:
            raise InfeasibleParameters(f"no kernel degree up to {MAX_DEGREE} reaches epsilon_s={epsilon_s}")
        tail = taylor_tail(u_max, degree)

    size = math.comb(degree + dim, dim)
    if size > cap:
        raise InfeasibleParameters(f"kernel needs {size} features (d={dim}, s={degree}), cap is {cap}")

    multi_indices, parents, coords, scales, levels = multi_index_tables(dim, degree)
    parent_array = np.array(parents, dtype=np.int64)
    coord_array = np.array(coords, dtype=np.int64)
    scale_array = np.array(scales, dtype=np.float64)
    bounds = _expand(np.full((1, dim), float(radius)), size, tuple(levels),
                     parent_array, coord_array, scale_array)[0]
    bounds.setflags(write=False)
    logger.debug("Kernel for d=%d R=%g epsilon_s=%g: degree %d, %d features",
                 dim, radius, epsilon_s, degree, size)
    return KernelParams(dim, float(radius), epsilon_s, degree, size,
                        gamma_bound(radius, degree), tail, tuple(multi_indices),
                        parent_array, coord_array, scale_array, tuple(levels), bounds)


def _expand(matrix: np.ndarray, size: int, levels: tuple[tuple[int, int], ...],
            parents: np.ndarray, coords: np.ndarray, scales: np.ndarray) -> np.ndarray:
    # entry(beta) = entry(beta - e_k) * x_k / sqrt(d) / sqrt(beta_k)
    scaled = matrix / math.sqrt(matrix.shape[1])
    result = np.empty((matrix.shape[0], size), dtype=np.float64)
    result[:, 0] = 1.0
    for start, end in levels[1:]:
        result[:, start:end] = (result[:, parents[start:end]]
                                * scaled[:, coords[start:end]]
                                * scales[start:end])
    return result


def features(params: KernelParams, points: np.ndarray) -> np.ndarray:
    """Feature matrix, one row P(x) per row of `points`, built degree by degree"""
    matrix = np.asarray(points, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != params.dim:
        raise InvalidParameter(f"expected points of dimension {params.dim}, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)) or np.any(matrix < 0) or np.any(matrix > params.radius):
        raise InvalidParameter(f"points must lie in [0, {params.radius}]^{params.dim}")
    return _expand(matrix, params.size, params.levels, params.parents, params.coords, params.scales)


def feature_map(params: KernelParams, x: Sequence[float]) -> FeatureVector:
    """P(x) for a single point"""
    return features(params, np.asarray(x, dtype=np.float64).reshape(1, -1))[0]


def kernel_error_check(params: KernelParams, x: Sequence[float], y: Sequence[float]) -> float:
    """|<P(x), P(y)> - exp(<x, y>/d)|"""
    approx = float(np.dot(feature_map(params, x), feature_map(params, y)))
    exact = math.exp(float(np.dot(np.asarray(x, dtype=np.float64),
                                  np.asarray(y, dtype=np.float64))) / params.dim)
    return abs(approx - exact)
