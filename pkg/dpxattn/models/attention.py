# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Private cross-attention Attn(Q, K, V) = D^-1 A V, one query row at a time.

Column k of the numerator A V is an AdaptiveIndex over the keys K weighted by
V[:, k]. The normalizer D is answered with all-ones weights, either by a
noise-free SoftmaxIndex over K (EXACT) or by one more AdaptiveIndex (PRIVATE).

Both normalizers share the kernel and shells of the numerators, so a single
key yields its value row wherever the query lies. EXACT mode keeps a noise-free
summary of the raw keys and is not covered by the build's privacy guarantee.
PRIVATE mode is the conservative choice.
"""

from dataclasses import dataclass
from enum import Enum
from hashlib import sha256
import logging
from typing import Optional, Sequence, Union

import numpy as np

from ..budget import PrivacyBudget
from ..errors import DegenerateOutput, InvalidParameter
from ..kernel import DEFAULT_KERNEL_CAP, KernelParams, features, select_params
from ..noise import Rng
from .adaptive import DEFAULT_EPSILON_FLOOR, AdaptiveIndex
from .highdim import DEFAULT_C_SPLIT
from .softmax import SoftmaxIndex, check_points

logger = logging.getLogger(__name__)


class NormalizerMode(Enum):
    """How the row normalizer D_ii is obtained"""
    EXACT = "exact"
    PRIVATE = "private"


@dataclass(frozen=True)
class AttentionRow:
    """One output row with the pieces it was assembled from"""
    values: np.ndarray
    numerators: np.ndarray
    normalizer: float
    numerator_bounds: np.ndarray
    normalizer_bound: float
    entry_bounds: np.ndarray


@dataclass(frozen=True, eq=False)
class AttentionLayer:
    """d column indices over fixed private (K, V), answering public query rows"""
    dim: int
    key_count: int
    key_digest: str
    columns: tuple[AdaptiveIndex, ...]
    normalizer_mode: NormalizerMode
    normalizer_index: Union[AdaptiveIndex, SoftmaxIndex]
    params: KernelParams
    structure_budget: PrivacyBudget
    radius: float
    weight_bound: float
    epsilon_s: float

    @classmethod
    def build(cls, keys: Sequence[Sequence[float]], values: Sequence[Sequence[float]],
              epsilon: float, delta: float, delta_prime: float, rng: Rng,
              c_split: float = DEFAULT_C_SPLIT, epsilon_s: float = 0.05, p_f: float = 0.01,
              normalizer_mode: NormalizerMode = NormalizerMode.EXACT,
              compose_columns: bool = False, l_override: Optional[int] = None,
              radius: float = 1.0, weight_bound: float = 1.0,
              grid_size: Optional[int] = None, noise_enabled: bool = True,
              noisy_scalars: bool = False, epsilon_floor: float = DEFAULT_EPSILON_FLOOR,
              kernel_cap: int = DEFAULT_KERNEL_CAP) -> "AttentionLayer":
        """Build column k from rng.spawn(k) and the normalizer from rng.spawn(d).

        Every structure gets the full budget unless `compose_columns` is set, in
        which case the budget is split over the d columns (d + 1 structures in
        PRIVATE mode) so that a whole output row is covered.
        """
        key_matrix = np.asarray(keys, dtype=np.float64)
        value_matrix = np.asarray(values, dtype=np.float64)
        if key_matrix.shape != value_matrix.shape:
            raise InvalidParameter(
                f"keys have shape {key_matrix.shape} but values have shape {value_matrix.shape}")
        key_matrix, _ = check_points(key_matrix, np.zeros(len(key_matrix)), radius, weight_bound)
        if not np.all(np.isfinite(value_matrix)) or np.any(np.abs(value_matrix) > weight_bound):
            raise InvalidParameter(f"values must lie in [-{weight_bound}, {weight_bound}]")
        count, dim = key_matrix.shape

        params = select_params(dim, radius, epsilon_s, kernel_cap)
        feature_matrix = features(params, key_matrix)
        feature_matrix.setflags(write=False)

        structures = dim + (1 if normalizer_mode is NormalizerMode.PRIVATE else 0)
        budget = PrivacyBudget(epsilon, delta, delta_prime)
        if compose_columns:
            budget = budget.split(structures)
        logger.debug("Building attention layer: %d keys, %d columns, %s normalizer, epsilon %.4g each",
                     count, dim, normalizer_mode.value, budget.epsilon)

        def index(weights: np.ndarray, bound: float, stream: int) -> AdaptiveIndex:
            return AdaptiveIndex.build(key_matrix, weights, budget.epsilon, budget.delta,
                                       budget.delta_prime, rng.spawn(stream), c_split,
                                       epsilon_s, p_f, l_override, radius, bound, grid_size,
                                       noise_enabled, noisy_scalars, epsilon_floor,
                                       kernel_cap, params, feature_matrix)

        columns = tuple(index(value_matrix[:, k], weight_bound, k) for k in range(dim))
        if normalizer_mode is NormalizerMode.PRIVATE:
            normalizer_index = index(np.ones(count), 1.0, dim)
        else:
            normalizer_index = SoftmaxIndex.build(key_matrix, np.ones(count), budget.epsilon,
                                                  budget.delta, budget.delta_prime, rng.spawn(dim),
                                                  c_split, epsilon_s, radius, 1.0, grid_size,
                                                  False, False, kernel_cap, params, feature_matrix)

        digest = sha256(np.ascontiguousarray(key_matrix).tobytes()).hexdigest()
        return cls(dim, count, digest, columns, normalizer_mode, normalizer_index,
                   params, budget, float(radius), float(weight_bound), epsilon_s)

    def _check_query(self, q: Sequence[float]) -> np.ndarray:
        query = np.asarray(q, dtype=np.float64).reshape(-1)
        if query.size != self.dim:
            raise InvalidParameter(f"query row has {query.size} entries, layer has {self.dim}")
        if not np.all(np.isfinite(query)) or np.any(query < 0) or np.any(query > self.radius):
            raise InvalidParameter(f"query row must lie in [0, {self.radius}]^{self.dim}")
        return query

    def _normalizer(self, query: np.ndarray, alpha: float) -> tuple[float, float]:
        estimate = self.normalizer_index.estimate(query, alpha)
        bound = estimate.errors.total
        # true D_ii >= n since every term is at least 1
        floor = self.key_count * (1 - alpha - self.epsilon_s) - bound
        value = max(estimate.value, floor)
        if self.normalizer_mode is NormalizerMode.PRIVATE:
            value = max(value, 1.0)
        if not value > 0:
            raise DegenerateOutput(f"{self.normalizer_mode.value} normalizer is {value} after clamping")
        return value, bound

    def row_result(self, q: Sequence[float], alpha: float) -> AttentionRow:
        """Answer one query row and report the deterministic per-entry error bounds"""
        query = self._check_query(q)
        estimates = [column.estimate(query, alpha) for column in self.columns]
        numerators = np.array([item.value for item in estimates])
        numerator_bounds = np.array([item.errors.total for item in estimates])
        normalizer, normalizer_bound = self._normalizer(query, alpha)
        if not (np.all(np.isfinite(numerators)) and np.isfinite(normalizer)):
            raise DegenerateOutput("attention row has non-finite entries")
        values = numerators / normalizer
        # |a/b - a'/b'| <= (|a - a'| + (|a'|/b') |b - b'|) / b and |a'|/b' <= R_w
        entry_bounds = (numerator_bounds + self.weight_bound * normalizer_bound) / normalizer
        return AttentionRow(values, numerators, normalizer, numerator_bounds,
                            normalizer_bound, entry_bounds)

    def attend_row(self, q: Sequence[float], alpha: float) -> np.ndarray:
        """One row of D^-1 A V"""
        return self.row_result(q, alpha).values

    def attend(self, queries: Sequence[Sequence[float]], alpha: float) -> np.ndarray:
        """All m rows of D^-1 A V, each answered independently"""
        matrix = np.asarray(queries, dtype=np.float64)
        if matrix.size == 0:
            return np.empty((0, self.dim))
        if matrix.ndim != 2 or matrix.shape[1] != self.dim:
            raise InvalidParameter(f"queries must be an m x {self.dim} matrix, not shape {matrix.shape}")
        return np.vstack([self.attend_row(row, alpha) for row in matrix])

    def error_bound_row(self, q: Sequence[float], alpha: float) -> np.ndarray:
        """Deterministic per-entry bound on |attend_row(q) - exact attention row|"""
        return self.row_result(q, alpha).entry_bounds
