# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Truncated Laplace noise and the seeded random streams feeding it.

This is the only module that generates randomness for privacy. Every draw goes
through an `Rng`, which counts draws and refuses to produce any inside a
`frozen()` block, so query paths can prove that all noise was fixed at build time.
"""

from contextlib import contextmanager
from dataclasses import dataclass
from hashlib import blake2b
import math
from typing import Iterator, Optional, Union

import numpy as np

from .errors import InvalidParameter, PrivacyViolation

MASK64 = (1 << 64) - 1

_DRAWS = 0
_FROZEN = 0


def draw_count() -> int:
    """Total number of uniform variates drawn by all Rng streams in this process"""
    return _DRAWS


@contextmanager
def frozen() -> Iterator[None]:
    """Forbid noise draws for the duration of the block"""
    global _FROZEN
    _FROZEN += 1
    try:
        yield
    finally:
        _FROZEN -= 1


def derive_seed(parent: int, index: int) -> int:
    """Derive the seed of child stream `index` from a parent seed"""
    digest = blake2b(f"{parent}:{index}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class Rng:
    """A single-owner seeded stream of uniform variates.

    Identical seeds give bit-identical sequences. Concurrent users need their
    own streams, obtained with `spawn()`.
    """

    def __init__(self, seed: int) -> None:
        if not isinstance(seed, (int, np.integer)) or seed < 0:
            raise InvalidParameter(f"seed must be a non-negative integer, not {seed!r}")
        self.seed = int(seed) & MASK64
        self._generator = np.random.Generator(np.random.PCG64(self.seed))
        self.draws = 0

    def spawn(self, index: int) -> "Rng":
        """Independent child stream number `index`"""
        return Rng(derive_seed(self.seed, index))

    def uniform(self, size: int) -> np.ndarray:
        """Draw `size` uniform variates from [0, 1)"""
        global _DRAWS
        if _FROZEN:
            raise PrivacyViolation("noise draw attempted after the structure was frozen")
        _DRAWS += size
        self.draws += size
        return self._generator.random(size)


@dataclass(frozen=True)
class NoiseSpec:
    """Parameters of one truncated Laplace draw: TLap(sensitivity, epsilon, delta)"""
    sensitivity: float
    epsilon: float
    delta: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.sensitivity) or self.sensitivity < 0:
            raise InvalidParameter(f"sensitivity must be finite and >= 0, not {self.sensitivity}")
        if not math.isfinite(self.epsilon) or self.epsilon <= 0:
            raise InvalidParameter(f"epsilon must be finite and > 0, not {self.epsilon}")
        if not 0 < self.delta < 1:
            raise InvalidParameter(f"delta must be in (0, 1), not {self.delta}")

    @property
    def scale(self) -> float:
        """The Laplace scale sensitivity / epsilon"""
        return self.sensitivity / self.epsilon

    @property
    def bound(self) -> float:
        """The truncation bound B"""
        return bound(self)

    @property
    def variance(self) -> float:
        """The variance of a single draw"""
        return variance(self)


def _log_ratio(spec: NoiseSpec) -> float:
    """ln(1 + (e^eps - 1) / (2 delta)), i.e. B in units of the Laplace scale"""
    eps, delta = spec.epsilon, spec.delta
    if eps <= 50:
        return math.log1p(math.expm1(eps) / (2 * delta))
    return eps + math.log1p((2 * delta - 1) * math.exp(-eps)) - math.log(2 * delta)


def bound(spec: NoiseSpec) -> float:
    """B = (sensitivity / epsilon) * ln(1 + (e^epsilon - 1) / (2 delta))"""
    return spec.scale * _log_ratio(spec)


def variance(spec: NoiseSpec) -> float:
    """Variance of TLap(sensitivity, epsilon, delta)"""
    ratio = _log_ratio(spec)
    # delta / (e^eps - 1)
    tail = spec.delta * math.exp(-spec.epsilon) / -math.expm1(-spec.epsilon)
    return 2 * spec.scale ** 2 * (1 - tail * (ratio * ratio + 2 * ratio))


def laplace_variance(spec: NoiseSpec) -> float:
    """Variance of the untruncated Laplace mechanism, 2 sensitivity^2 / epsilon^2"""
    return 2 * spec.scale ** 2


def gaussian_variance(spec: NoiseSpec) -> float:
    """Variance of the classic Gaussian mechanism at the same (epsilon, delta)"""
    return 2 * spec.sensitivity ** 2 * math.log(1.25 / spec.delta) / spec.epsilon ** 2


def sample(spec: NoiseSpec, rng: Rng, size: Optional[int] = None) -> Union[float, np.ndarray]:
    """Draw truncated Laplace noise by inverting the two-sided CDF.

    With u uniform on [0, 1) and v = 2u - 1, the draw is
    -scale * sign(v) * ln(1 - |v| * (1 - e^(-B/scale))), which lies in [-B, B].
    """
    count = 1 if size is None else int(size)
    if spec.sensitivity == 0:
        values = np.zeros(count)
    else:
        limit = bound(spec)
        mass = -math.expm1(-_log_ratio(spec))
        signed = 2.0 * rng.uniform(count) - 1.0
        values = -spec.scale * np.sign(signed) * np.log1p(-np.abs(signed) * mass)
        np.clip(values, -limit, limit, out=values)
    if size is None:
        return float(values[0])
    return values


def sample_laplace(spec: NoiseSpec, rng: Rng, size: int) -> np.ndarray:
    """Untruncated Laplace draws with the same scale, for variance comparisons only"""
    edge = np.nextafter(1.0, 0.0)
    signed = np.clip(2.0 * rng.uniform(size) - 1.0, -edge, edge)
    return -spec.scale * np.sign(signed) * np.log1p(-np.abs(signed))
