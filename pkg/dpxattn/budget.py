# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Privacy budget bookkeeping: basic splits and the advanced-composition share"""

from dataclasses import dataclass
import math

from .errors import BudgetUnderflow, InvalidParameter


@dataclass(frozen=True)
class PrivacyBudget:
    """An (epsilon, delta + delta_prime) privacy budget"""
    epsilon: float
    delta: float
    delta_prime: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.epsilon) or self.epsilon <= 0:
            raise InvalidParameter(f"epsilon must be finite and > 0, not {self.epsilon}")
        if not 0 < self.delta < 1:
            raise InvalidParameter(f"delta must be in (0, 1), not {self.delta}")
        if not 0 <= self.delta_prime < 1:
            raise InvalidParameter(f"delta' must be in [0, 1), not {self.delta_prime}")

    def split(self, parts: int) -> "PrivacyBudget":
        """The share of each of `parts` sequentially composed mechanisms"""
        if parts < 1:
            raise InvalidParameter(f"can't split a budget into {parts} parts")
        return PrivacyBudget(self.epsilon / parts, self.delta / parts, self.delta_prime / parts)

    def advanced_split(self, parts: int, c_split: float) -> "PrivacyBudget":
        """Per-structure share when `parts` structures compose by advanced composition.

        Each gets epsilon c * eps / sqrt(parts * ln(1/delta')) and delta / parts;
        delta' is consumed by the composition itself and passed on unchanged.
        """
        if parts < 1:
            raise InvalidParameter(f"can't split a budget into {parts} parts")
        if not 0 < c_split < 0.1:
            raise InvalidParameter(f"c must be in (0, 0.1), not {c_split}")
        if self.delta_prime <= 0:
            raise InvalidParameter("advanced composition needs delta' > 0")
        log_term = math.log(1 / self.delta_prime)
        if self.epsilon > log_term:
            raise InvalidParameter(
                f"epsilon {self.epsilon} exceeds ln(1/delta') = {log_term:.4g}, "
                "the advanced composition constant no longer holds")
        epsilon = c_split * self.epsilon / math.sqrt(parts * log_term)
        return PrivacyBudget(epsilon, self.delta / parts, self.delta_prime)

    def scaled(self, fraction: float) -> "PrivacyBudget":
        """Budget with epsilon and delta scaled by `fraction`"""
        if not 0 < fraction <= 1:
            raise InvalidParameter(f"budget fraction must be in (0, 1], not {fraction}")
        return PrivacyBudget(self.epsilon * fraction, self.delta * fraction, self.delta_prime)

    def to_json(self) -> dict[str, float]:
        """Convert to a JSON-able datastructure"""
        return {"epsilon": self.epsilon, "delta": self.delta, "delta_prime": self.delta_prime}


def advanced_composition(epsilon: float, delta: float, parts: int,
                         delta_prime: float) -> tuple[float, float]:
    """Total (epsilon, delta) of `parts`-fold adaptive composition of (epsilon, delta)-DP steps"""
    if parts < 1:
        raise InvalidParameter(f"can't compose {parts} mechanisms")
    if not 0 < delta_prime < 1:
        raise InvalidParameter(f"delta' must be in (0, 1), not {delta_prime}")
    total = parts * epsilon * math.expm1(epsilon) + epsilon * math.sqrt(2 * parts * math.log(1 / delta_prime))
    return total, parts * delta + delta_prime


def require_floor(budget: PrivacyBudget, floor: float) -> PrivacyBudget:
    """Raise BudgetUnderflow if the budget's epsilon is below `floor`"""
    if budget.epsilon < floor:
        raise BudgetUnderflow(f"per-structure epsilon {budget.epsilon:.3g} is below the floor {floor:.3g}")
    return budget
