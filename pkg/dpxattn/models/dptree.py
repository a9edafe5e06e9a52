# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Noisy summation segment tree with frozen truncated Laplace noise per node.

The tree uses 1-based heap layout: node k has children 2k and 2k+1, leaves
live at n_pad .. 2*n_pad - 1, and slot 0 of the arrays is unused.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from hashlib import sha256
import logging
import math
from typing import Sequence

import numpy as np

from ..errors import InvalidParameter, TreeMismatch
from ..noise import NoiseSpec, Rng, sample

logger = logging.getLogger(__name__)


def padded_size(count: int) -> int:
    """Smallest power of two >= count"""
    return 1 << max(0, (count - 1).bit_length())


def depth(n_pad: int) -> int:
    """Budget divisor ceil(log2 n_pad), never below 1"""
    return max(1, (n_pad - 1).bit_length())


@lru_cache(maxsize=65536)
def canonical_nodes(n_pad: int, x: int, y: int) -> tuple[int, ...]:
    """Disjoint nodes covering leaves x..y (1-based, inclusive), left to right"""
    lo = x - 1 + n_pad
    hi = y + n_pad
    left: list[int] = []
    right: list[int] = []
    while lo < hi:
        if lo & 1:
            left.append(lo)
            lo += 1
        if hi & 1:
            hi -= 1
            right.append(hi)
        lo >>= 1
        hi >>= 1
    return tuple(left + right[::-1])


@dataclass(frozen=True)
class IntervalQueryResult:
    """Sum over an interval and the number of tree nodes it combined"""
    value: float
    node_count: int


@dataclass(frozen=True, eq=False)
class DPTree:
    """Summation tree over `a`, with exact sums `b` and noised sums `c`"""
    a: np.ndarray
    n_pad: int
    b: np.ndarray
    c: np.ndarray
    node_spec: NoiseSpec
    noise_enabled: bool = True
    digest: str = field(default="")

    @classmethod
    def build(cls, a: Sequence[float], sensitivity: float, epsilon: float, delta: float,
              rng: Rng, noise_enabled: bool = True) -> "DPTree":
        """Build the exact tree and freeze one noise draw per node"""
        values = np.array(a, dtype=np.float64).reshape(-1)
        if values.size == 0:
            raise InvalidParameter("can't build a tree over an empty array")
        if not np.all(np.isfinite(values)):
            raise InvalidParameter("tree input contains non-finite entries")

        n_pad = padded_size(values.size)
        levels = depth(n_pad)
        node_spec = NoiseSpec(sensitivity, epsilon / levels, delta / levels)

        exact = np.zeros(2 * n_pad, dtype=np.float64)
        exact[n_pad:n_pad + values.size] = values
        start = n_pad
        while start > 1:
            parent = start // 2
            exact[parent:start] = exact[start:2 * start:2] + exact[start + 1:2 * start:2]
            start = parent

        noised = exact.copy()
        if noise_enabled:
            draws = sample(node_spec, rng, 2 * n_pad - 1)
            # leaves first, then internal nodes, one frozen draw each
            noised[n_pad:] += draws[:n_pad]
            noised[1:n_pad] += draws[n_pad:]

        exact.setflags(write=False)
        noised.setflags(write=False)
        values.setflags(write=False)
        digest = sha256(values.tobytes()).hexdigest()
        logger.debug("Built tree over %d values (%d leaves, budget divisor %d)",
                     values.size, n_pad, levels)
        return cls(values, n_pad, exact, noised, node_spec, noise_enabled, digest)

    @property
    def size(self) -> int:
        """Number of original (unpadded) entries"""
        return int(self.a.size)

    @property
    def node_bound(self) -> float:
        """Deterministic bound on the noise of a single node"""
        return self.node_spec.bound if self.noise_enabled else 0.0

    @property
    def node_variance(self) -> float:
        """Variance of the noise of a single node"""
        return self.node_spec.variance if self.noise_enabled else 0.0

    def _check_interval(self, x: int, y: int) -> None:
        if not 1 <= x <= y <= self.size:
            raise InvalidParameter(f"interval [{x}, {y}] is not within [1, {self.size}]")

    def nodes(self, x: int, y: int) -> tuple[int, ...]:
        """The canonical node decomposition of [x, y]"""
        self._check_interval(x, y)
        return canonical_nodes(self.n_pad, x, y)

    def leaves(self, node: int) -> range:
        """The 1-based leaf positions below `node`"""
        if not 1 <= node < 2 * self.n_pad:
            raise InvalidParameter(f"no node {node} in a tree with {self.n_pad} leaves")
        lo = hi = node
        while lo < self.n_pad:
            lo = 2 * lo
            hi = 2 * hi + 1
        return range(lo - self.n_pad + 1, hi - self.n_pad + 2)

    def query(self, x: int, y: int) -> IntervalQueryResult:
        """Noised sum of a_x..a_y"""
        nodes = self.nodes(x, y)
        return IntervalQueryResult(float(np.sum(self.c[list(nodes)])), len(nodes))

    def true_query(self, x: int, y: int) -> float:
        """Exact sum of a_x..a_y, over the same decomposition"""
        nodes = self.nodes(x, y)
        return float(np.sum(self.b[list(nodes)]))

    def weighted_sum(self, nodes: np.ndarray, weights: np.ndarray) -> float:
        """Sum of weights[i] * c[nodes[i]]; nodes must come from canonical decompositions"""
        return float(np.dot(self.c[nodes], weights))

    def error_bound(self, x: int, y: int) -> float:
        """Worst case |query - true_query| for [x, y]"""
        return len(self.nodes(x, y)) * self.node_bound

    def noise_variance(self, x: int, y: int) -> float:
        """Variance of query - true_query for [x, y]"""
        return len(self.nodes(x, y)) * self.node_variance


def copy_count(delta_fail: float) -> int:
    """Boosting copies: ceil(3 ln(1/delta_fail)), bumped up to an odd number"""
    if not 0 < delta_fail < 1:
        raise InvalidParameter(f"failure probability must be in (0, 1), not {delta_fail}")
    count = max(1, math.ceil(3 * math.log(1 / delta_fail)))
    if count % 2 == 0:
        count += 1
    return count


def boosted_query(trees: Sequence[DPTree], x: int, y: int) -> float:
    """Median of the per-copy noised sums of a_x..a_y"""
    if not trees:
        raise InvalidParameter("boosted query needs at least one tree")
    first = trees[0]
    for tree in trees[1:]:
        if tree.size != first.size or tree.digest != first.digest:
            raise TreeMismatch("boosted trees were built over different arrays")
    return float(np.median([tree.query(x, y).value for tree in trees]))


@dataclass(frozen=True)
class BoostedTree:
    """Independent DPTree copies answering with the median, for high-probability error"""
    trees: tuple[DPTree, ...]

    @classmethod
    def build(cls, a: Sequence[float], sensitivity: float, epsilon: float, delta: float,
              rng: Rng, delta_fail: float = 0.01, copies: int = 0,
              noise_enabled: bool = True) -> "BoostedTree":
        """Build `copies` trees (or copy_count(delta_fail)) with budget (eps/L, delta/L) each"""
        count = copies or copy_count(delta_fail)
        if count < 1:
            raise InvalidParameter(f"need at least one copy, not {count}")
        logger.debug("Building %d boosted tree copies", count)
        trees = tuple(DPTree.build(a, sensitivity, epsilon / count, delta / count,
                                   rng.spawn(i), noise_enabled)
                      for i in range(count))
        return cls(trees)

    def query(self, x: int, y: int) -> float:
        """Median of the copies' answers"""
        return boosted_query(self.trees, x, y)

    def error_bound(self, x: int, y: int) -> float:
        """Worst case error; the median lies between the extreme copies"""
        return max(tree.error_bound(x, y) for tree in self.trees)
