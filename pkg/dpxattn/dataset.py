# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""CSV files holding K, V and Q.

Each file starts with `# dpxattn v1 rows=<n> cols=<d> R=<bound>`, followed by
one comma separated row per line with 17 significant digits, which round-trips
float64 exactly.
"""

from dataclasses import dataclass
import os
import re
from typing import Union

import numpy as np

from .errors import DatasetError

HEADER_PATTERN = re.compile(r"^# dpxattn v1 rows=(\d+) cols=(\d+) R=(\S+)$")

PathLike = Union[str, "os.PathLike[str]"]


def format_header(rows: int, cols: int, bound: float) -> str:
    """The first line of a matrix file"""
    return f"# dpxattn v1 rows={rows} cols={cols} R={format(bound, '.17g')}"


def write_matrix(path: PathLike, array: np.ndarray, bound: float) -> None:
    """Write a 2-D array with its declared entry bound"""
    matrix = np.asarray(array, dtype=np.float64)
    if matrix.ndim != 2:
        raise DatasetError(f"can only write 2-D matrices, not shape {matrix.shape}")
    lines = [format_header(matrix.shape[0], matrix.shape[1], bound)]
    lines.extend(",".join(format(float(value), ".17g") for value in row) for row in matrix)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def read_matrix(path: PathLike) -> tuple[np.ndarray, float]:
    """Read a matrix file, returning the matrix and its declared bound"""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except OSError as err:
        raise DatasetError(f"can't read {path}: {err}") from err
    if not lines:
        raise DatasetError(f"{path} is empty")
    match = HEADER_PATTERN.match(lines[0])
    if not match:
        raise DatasetError(f"{path} has no dpxattn v1 header")
    rows, cols = int(match.group(1)), int(match.group(2))
    try:
        bound = float(match.group(3))
    except ValueError as err:
        raise DatasetError(f"{path} declares an invalid bound {match.group(3)!r}") from err

    body = [line for line in lines[1:] if line.strip()]
    if len(body) != rows:
        raise DatasetError(f"{path} declares {rows} rows but has {len(body)}")
    matrix = np.zeros((rows, cols), dtype=np.float64)
    for i, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != cols:
            raise DatasetError(f"{path} line {i + 2} has {len(fields)} columns, expected {cols}")
        try:
            matrix[i] = [float(field) for field in fields]
        except ValueError as err:
            raise DatasetError(f"{path} line {i + 2}: {err}") from err
    if not np.all(np.isfinite(matrix)):
        raise DatasetError(f"{path} contains non-finite entries")
    return matrix, bound


@dataclass(frozen=True, eq=False)
class Dataset:
    """Keys K in [0, R]^(n x d), values V in [-R_w, R_w]^(n x d), queries Q in [0, R]^(m x d)"""
    keys: np.ndarray
    values: np.ndarray
    queries: np.ndarray
    radius: float
    weight_bound: float

    def __post_init__(self) -> None:
        if self.keys.ndim != 2 or self.keys.shape[0] == 0:
            raise DatasetError(f"keys must be a non-empty n x d matrix, not shape {self.keys.shape}")
        if self.values.shape != self.keys.shape:
            raise DatasetError(f"values have shape {self.values.shape}, keys {self.keys.shape}")
        if self.queries.ndim != 2 or self.queries.shape[1] != self.keys.shape[1]:
            raise DatasetError(f"queries have shape {self.queries.shape}, keys {self.keys.shape}")
        for name, matrix in (("keys", self.keys), ("queries", self.queries)):
            if np.any(matrix < 0) or np.any(matrix > self.radius):
                raise DatasetError(f"{name} must lie in [0, {self.radius}]")
        if np.any(np.abs(self.values) > self.weight_bound):
            raise DatasetError(f"values must lie in [-{self.weight_bound}, {self.weight_bound}]")

    @property
    def size(self) -> int:
        """Number of keys n"""
        return int(self.keys.shape[0])

    @property
    def dim(self) -> int:
        """Feature dimension d"""
        return int(self.keys.shape[1])

    @classmethod
    def generate(cls, n: int, m: int, d: int, radius: float, weight_bound: float,
                 seed: int) -> "Dataset":
        """Uniform synthetic data from a seeded generator; this data is public, not noise"""
        generator = np.random.default_rng(seed)
        keys = generator.uniform(0, radius, size=(n, d))
        values = generator.uniform(-weight_bound, weight_bound, size=(n, d))
        queries = generator.uniform(0, radius, size=(m, d))
        return cls(keys, values, queries, float(radius), float(weight_bound))

    def save(self, directory: PathLike) -> list[str]:
        """Write K.csv, V.csv and Q.csv, returning the paths written"""
        try:
            os.makedirs(directory, exist_ok=True)
        except OSError as err:
            raise DatasetError(f"can't create {directory}: {err}") from err
        written = []
        for name, matrix, bound in (("K", self.keys, self.radius),
                                    ("V", self.values, self.weight_bound),
                                    ("Q", self.queries, self.radius)):
            path = os.path.join(directory, f"{name}.csv")
            try:
                write_matrix(path, matrix, bound)
            except OSError as err:
                raise DatasetError(f"can't write {path}: {err}") from err
            written.append(path)
        return written

    @classmethod
    def load(cls, directory: PathLike) -> "Dataset":
        """Read K.csv, V.csv and Q.csv from `directory`"""
        keys, radius = read_matrix(os.path.join(directory, "K.csv"))
        values, weight_bound = read_matrix(os.path.join(directory, "V.csv"))
        queries, query_radius = read_matrix(os.path.join(directory, "Q.csv"))
        if query_radius != radius:
            raise DatasetError(f"Q.csv declares R={query_radius}, K.csv R={radius}")
        return cls(keys, values, queries, radius, weight_bound)
