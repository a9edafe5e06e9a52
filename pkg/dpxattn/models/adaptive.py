# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Median of independent softmax or distance indices, for queries chosen adaptively.

All noise is drawn when the copies are built, so the answer is a fixed
function of the query; the copy count l = ceil(r ln(d R / (epsilon_s p_f)))
absorbs the net argument that makes the error bound hold for every query at once.
"""

from dataclasses import dataclass, replace
import logging
import math
from typing import Optional, Sequence

import numpy as np

from ..budget import PrivacyBudget, require_floor
from ..errors import InvalidParameter
from ..kernel import DEFAULT_KERNEL_CAP, KernelParams, features, select_params
from ..noise import Rng
from .distance import DistanceEstimate, DistanceMode
from .highdim import DEFAULT_C_SPLIT, HighDimIndex
from .softmax import SoftmaxEstimate, SoftmaxIndex, check_points

logger = logging.getLogger(__name__)

DEFAULT_EPSILON_FLOOR = 1e-6


def adaptive_copy_count(size: int, dim: int, radius: float, epsilon_s: float, p_f: float) -> int:
    """l = max(1, ceil(r * ln(d * R / (epsilon_s * p_f))))"""
    return max(1, math.ceil(size * math.log(dim * radius / (epsilon_s * p_f))))


def median_answer(answers: Sequence[float]) -> float:
    """Median of the copy answers, the mean of the middle two for an even count"""
    return float(np.median(answers))


@dataclass(frozen=True)
class CopyCountRecord:
    """The inputs that fixed the copy count"""
    size: int
    dim: int
    radius: float
    epsilon_s: float
    p_f: float
    copies: int
    overridden: bool

    def to_json(self) -> dict:
        """Convert to a JSON-able datastructure"""
        return {
            "r": self.size,
            "d": self.dim,
            "R": self.radius,
            "epsilon_s": self.epsilon_s,
            "p_f": self.p_f,
            "l": self.copies,
            "overridden": self.overridden,
        }


@dataclass(frozen=True)
class AdaptiveIndex:
    """l SoftmaxIndex copies, each with budget (eps/l, delta/l, delta'/l)"""
    copies: tuple[SoftmaxIndex, ...]
    provenance: CopyCountRecord
    copy_budget: PrivacyBudget

    @classmethod
    def build(cls, points: Sequence[Sequence[float]], weights: Sequence[float],
              epsilon: float, delta: float, delta_prime: float, rng: Rng,
              c_split: float = DEFAULT_C_SPLIT, epsilon_s: float = 0.05, p_f: float = 0.01,
              l_override: Optional[int] = None, radius: float = 1.0, weight_bound: float = 1.0,
              grid_size: Optional[int] = None, noise_enabled: bool = True,
              noisy_scalars: bool = False, epsilon_floor: float = DEFAULT_EPSILON_FLOOR,
              kernel_cap: int = DEFAULT_KERNEL_CAP,
              params: Optional[KernelParams] = None,
              feature_matrix: Optional[np.ndarray] = None) -> "AdaptiveIndex":
        """Build the copies on independent streams rng.spawn(0..l-1)"""
        if not 0 < p_f <= 0.01:
            raise InvalidParameter(f"failure probability p_f must be in (0, 0.01], not {p_f}")
        matrix, ws = check_points(points, weights, radius, weight_bound)
        if params is None:
            params = select_params(matrix.shape[1], radius, epsilon_s, kernel_cap)
        if feature_matrix is None:
            feature_matrix = features(params, matrix)
            feature_matrix.setflags(write=False)

        if l_override is not None:
            if l_override < 1:
                raise InvalidParameter(f"copy count override must be at least 1, not {l_override}")
            count = l_override
        else:
            count = adaptive_copy_count(params.size, params.dim, radius, epsilon_s, p_f)
        provenance = CopyCountRecord(params.size, params.dim, radius, epsilon_s, p_f, count,
                                     l_override is not None)

        copy_budget = require_floor(PrivacyBudget(epsilon, delta, delta_prime).split(count),
                                    epsilon_floor)
        logger.debug("Building %d softmax copies with epsilon %.4g each", count, copy_budget.epsilon)
        copies = tuple(
            SoftmaxIndex.build(matrix, ws, copy_budget.epsilon, copy_budget.delta,
                               copy_budget.delta_prime, rng.spawn(i), c_split, epsilon_s,
                               radius, weight_bound, grid_size, noise_enabled, noisy_scalars,
                               kernel_cap, params, feature_matrix)
            for i in range(count))
        return cls(copies, provenance, copy_budget)

    @property
    def copy_count(self) -> int:
        """Number of copies l"""
        return len(self.copies)

    @property
    def params(self) -> KernelParams:
        """The kernel shared by all copies"""
        return self.copies[0].params

    def responses(self, y: Sequence[float], alpha: float) -> np.ndarray:
        """Every copy's answer to y"""
        return np.array([copy.softmax_query(y, alpha) for copy in self.copies])

    def adaptive_query(self, y: Sequence[float], alpha: float) -> float:
        """Median of the copies' answers"""
        return median_answer(self.responses(y, alpha))

    def estimate(self, y: Sequence[float], alpha: float) -> SoftmaxEstimate:
        """Median answer with the widest per-copy error envelope.

        The median lies between two copy answers, so it is within the largest
        copy envelope of the truth whenever every copy is.
        """
        estimates = [copy.estimate(y, alpha) for copy in self.copies]
        value = median_answer([item.value for item in estimates])
        widest = max(estimates, key=lambda item: item.errors.total)
        return SoftmaxEstimate(value, widest.errors)

    def error_bound(self, y: Sequence[float], alpha: float) -> float:
        """Deterministic bound on |adaptive_query(y) - w^T exp(Xy/d)|"""
        return self.estimate(y, alpha).errors.total


@dataclass(frozen=True)
class AdaptiveDistanceIndex:
    """l HighDimIndex copies answering weighted distance queries by their median.

    The copy count uses adaptive_copy_count with r = d and an l-infinity net
    of step `net_step` in place of epsilon_s, which is at least
    ln((R / net_step)^d / p_f).
    """
    copies: tuple[HighDimIndex, ...]
    provenance: CopyCountRecord
    copy_budget: PrivacyBudget

    @classmethod
    def build(cls, points: Sequence[Sequence[float]], weights: Sequence[float],
              epsilon: float, delta: float, delta_prime: float, rng: Rng,
              c_split: float = DEFAULT_C_SPLIT, mode: DistanceMode = DistanceMode.L1,
              net_step: float = 0.05, p_f: float = 0.01, l_override: Optional[int] = None,
              radius: float = 1.0, weight_bound: float = 1.0,
              grid_size: Optional[int] = None, noise_enabled: bool = True,
              epsilon_floor: float = DEFAULT_EPSILON_FLOOR) -> "AdaptiveDistanceIndex":
        """Build the copies on independent streams rng.spawn(0..l-1)"""
        if not 0 < p_f <= 0.01:
            raise InvalidParameter(f"failure probability p_f must be in (0, 0.01], not {p_f}")
        if not 0 < net_step <= radius:
            raise InvalidParameter(f"net step must be in (0, {radius}], not {net_step}")
        matrix, ws = check_points(points, weights, radius, weight_bound)
        dim = matrix.shape[1]

        if l_override is not None:
            if l_override < 1:
                raise InvalidParameter(f"copy count override must be at least 1, not {l_override}")
            count = l_override
        else:
            count = adaptive_copy_count(dim, dim, radius, net_step, p_f)
        provenance = CopyCountRecord(dim, dim, radius, net_step, p_f, count, l_override is not None)

        copy_budget = require_floor(PrivacyBudget(epsilon, delta, delta_prime).split(count),
                                    epsilon_floor)
        logger.debug("Building %d %s distance copies with epsilon %.4g each",
                     count, mode.value, copy_budget.epsilon)
        copies = tuple(
            HighDimIndex.build(matrix, ws, copy_budget.epsilon, copy_budget.delta,
                               copy_budget.delta_prime, rng.spawn(i), c_split, mode, radius,
                               weight_bound, grid_size, noise_enabled)
            for i in range(count))
        return cls(copies, provenance, copy_budget)

    @property
    def copy_count(self) -> int:
        """Number of copies l"""
        return len(self.copies)

    @property
    def dim(self) -> int:
        """Number of coordinates"""
        return self.copies[0].dim

    def responses(self, y: Sequence[float], alpha: float) -> np.ndarray:
        """Every copy's answer to y"""
        return np.array([copy.distance_query(y, alpha) for copy in self.copies])

    def adaptive_query(self, y: Sequence[float], alpha: float) -> float:
        """Median of the copies' distance answers"""
        return median_answer(self.responses(y, alpha))

    def estimate(self, y: Sequence[float], alpha: float) -> DistanceEstimate:
        """Median answer with the widest per-copy noise envelope"""
        estimates = [copy.estimate(y, alpha) for copy in self.copies]
        widest = max(estimates, key=lambda item: item.noise_bound)
        return replace(widest, value=median_answer([item.value for item in estimates]))

    def error_bound(self, y: Sequence[float], alpha: float) -> float:
        """Deterministic bound on |adaptive_query(y) - sum_i w_i ||y - x_i||_p^p|"""
        # the histograms, and with them the bucketing and rounding bounds, are shared by all copies
        first = self.copies[0]
        return (self.estimate(y, alpha).noise_bound + first.bucketing_bound(y, alpha)
                + first.rounding_bound())
