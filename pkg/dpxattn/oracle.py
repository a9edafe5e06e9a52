# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Brute-force reference values.

These are plain loops over the raw data and share no code with the private
structures, so they can serve as ground truth for them.
"""

from dataclasses import dataclass
import math
from typing import Sequence

import numpy as np

from .errors import InvalidParameter


@dataclass(frozen=True)
class Instance:
    """Points (or keys), their weights (or values) and public queries"""
    points: np.ndarray
    weights: np.ndarray
    queries: np.ndarray
    radius: float = 1.0
    weight_bound: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("points", "weights", "queries"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidParameter(f"instance {name} contain non-finite entries")
        if np.any(self.points < 0) or np.any(self.points > self.radius):
            raise InvalidParameter(f"instance points must lie in [0, {self.radius}]")
        if np.any(self.queries < 0) or np.any(self.queries > self.radius):
            raise InvalidParameter(f"instance queries must lie in [0, {self.radius}]")
        if np.any(np.abs(self.weights) > self.weight_bound):
            raise InvalidParameter(f"instance weights must lie in [-{self.weight_bound}, {self.weight_bound}]")

    @classmethod
    def random(cls, n: int, d: int, m: int, seed: int, radius: float = 1.0,
               weight_bound: float = 1.0, weight_columns: int = 0,
               nonnegative: bool = False) -> "Instance":
        """Uniform points in [0, R]^d and weights in [-R_w, R_w] (or [0, R_w]).

        `weight_columns` = 0 gives a weight vector, k > 0 an n x k weight matrix.
        """
        if n < 1 or d < 1 or m < 0:
            raise InvalidParameter(f"can't generate an instance with n={n}, d={d}, m={m}")
        generator = np.random.default_rng(seed)
        points = generator.uniform(0, radius, size=(n, d))
        low = 0.0 if nonnegative else -weight_bound
        shape = (n, weight_columns) if weight_columns else (n,)
        weights = generator.uniform(low, weight_bound, size=shape)
        queries = generator.uniform(0, radius, size=(m, d))
        return cls(points, weights, queries, radius, weight_bound, seed)


def exact_weighted_lp(points: Sequence[Sequence[float]], weights: Sequence[float],
                      y: Sequence[float], p: int) -> float:
    """sum_i w_i ||y - x_i||_p^p"""
    if p not in (1, 2):
        raise InvalidParameter(f"p must be 1 or 2, not {p}")
    total = 0.0
    for x_i, w_i in zip(points, weights):
        distance = 0.0
        for a, b in zip(np.atleast_1d(x_i), np.atleast_1d(y)):
            distance += abs(float(b) - float(a)) ** p
        total += float(w_i) * distance
    return total


def exact_softmax_query(points: Sequence[Sequence[float]], weights: Sequence[float],
                        y: Sequence[float]) -> float:
    """w^T exp(X y / d)"""
    total = 0.0
    for x_i, w_i in zip(points, weights):
        row = list(np.atleast_1d(x_i))
        inner = sum(float(a) * float(b) for a, b in zip(row, np.atleast_1d(y)))
        total += float(w_i) * math.exp(inner / len(row))
    return total


def exact_normalizer(queries: Sequence[Sequence[float]], keys: Sequence[Sequence[float]]) -> np.ndarray:
    """The diagonal of D = diag(A 1_n), A_ij = exp(<Q_i, K_j>/d)"""
    return np.array([exact_softmax_query(keys, [1.0] * len(keys), q) for q in queries])


def exact_attention(queries: Sequence[Sequence[float]], keys: Sequence[Sequence[float]],
                    values: Sequence[Sequence[float]]) -> np.ndarray:
    """D^-1 A V, with each row's exponents shifted by their maximum before exponentiating"""
    q_matrix = np.asarray(queries, dtype=np.float64)
    k_matrix = np.asarray(keys, dtype=np.float64)
    v_matrix = np.asarray(values, dtype=np.float64)
    dim = k_matrix.shape[1] if k_matrix.ndim == 2 else 0
    result = np.zeros((len(q_matrix), v_matrix.shape[1] if v_matrix.ndim == 2 else 0))
    for i, q in enumerate(q_matrix):
        exponents = [float(np.dot(q, k)) / dim for k in k_matrix]
        top = max(exponents)
        scores = [math.exp(e - top) for e in exponents]
        total = math.fsum(scores)
        for j, score in enumerate(scores):
            result[i] += (score / total) * v_matrix[j]
    return result


def softmax_lipschitz_constant(n: int, d: int, radius: float, weight_bound: float) -> float:
    """n d^-1/2 R R_w e^(R^2), a Lipschitz constant of y -> w^T exp(Xy/d) in l1"""
    return n * radius * weight_bound * math.exp(radius * radius) / math.sqrt(d)
