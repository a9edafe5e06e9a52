# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Greedy adaptive attacker on a 2-D query grid.

Each round queries an unvisited lattice point next to the worst point seen so
far, i.e. every query depends on all previous answers. The walk uses no
randomness, so a fixed structure always gives the same trajectory.
"""

from dataclasses import dataclass, field
import logging
from typing import Callable

from .errors import InfeasibleParameters, InvalidParameter

logger = logging.getLogger(__name__)

NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))

QueryFunc = Callable[[tuple[float, ...]], float]


@dataclass
class AttackTrace:
    """The queried points in order, with the error and the error bound at each"""
    points: list[tuple[float, ...]] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)
    bounds: list[float] = field(default_factory=list)

    @property
    def worst_error(self) -> float:
        """Largest error observed"""
        return max(self.errors, default=0.0)

    @property
    def worst_excess(self) -> float:
        """Largest error - bound observed; <= 0 means every round stayed within bound"""
        return max((error - bound for error, bound in zip(self.errors, self.bounds)), default=0.0)

    def to_json(self) -> dict:
        """Convert to a JSON-able datastructure"""
        return {
            "points": [list(point) for point in self.points],
            "errors": self.errors,
            "bounds": self.bounds,
            "worst_error": self.worst_error,
            "worst_excess": self.worst_excess,
        }


def greedy_grid_attack(query: QueryFunc, truth: QueryFunc, bound: QueryFunc,
                       radius: float = 1.0, grid: int = 20, rounds: int = 100,
                       dim: int = 2) -> AttackTrace:
    """Walk a grid x grid lattice of [0, R]^2 towards large errors.

    `query` is the structure under attack, `truth` the exact answer and `bound`
    the allowed error at a point.
    """
    if dim > 2:
        raise InfeasibleParameters(f"the grid attack covers at most 2 dimensions, not {dim}")
    if grid < 1 or rounds < 0:
        raise InvalidParameter(f"invalid attack grid {grid} or round count {rounds}")

    side = grid if dim == 2 else 1
    step = radius / (grid - 1) if grid > 1 else 0.0

    def point(cell: tuple[int, int]) -> tuple[float, ...]:
        coords = (cell[0] * step, cell[1] * step)
        return coords[:max(dim, 1)]

    trace = AttackTrace()
    visited: dict[tuple[int, int], float] = {}
    total = grid * side
    cell = (0, 0)
    for _ in range(min(rounds, total)):
        y = point(cell)
        error = abs(query(y) - truth(y))
        visited[cell] = error
        trace.points.append(tuple(float(v) for v in y))
        trace.errors.append(float(error))
        trace.bounds.append(float(bound(y)))

        worst = max(visited, key=lambda c: (visited[c], -c[0], -c[1]))
        cell = None
        for di, dj in NEIGHBOURS:
            candidate = (worst[0] + di, worst[1] + dj)
            if 0 <= candidate[0] < grid and 0 <= candidate[1] < side and candidate not in visited:
                cell = candidate
                break
        if cell is None:
            cell = next(((i, j) for i in range(grid) for j in range(side) if (i, j) not in visited),
                        None)
            if cell is None:
                break
    logger.debug("Attack ran %d rounds, worst error %.4g", len(trace.errors), trace.worst_error)
    return trace
