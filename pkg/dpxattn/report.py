# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Evaluation reports: one record per trial, a summary, and the run configuration"""

from dataclasses import asdict, dataclass, field
import json
import math
from typing import Any, Optional, Sequence

import numpy as np

SCHEMA_VERSION = 1
QUANTILES = (0.5, 0.9, 0.95, 0.99)
# slack for float noise when comparing an error with its deterministic bound
BOUND_TOLERANCE = 1e-9


@dataclass
class TrialRecord:
    """Outcome of one query against its exact answer"""
    truth: float
    estimate: float
    relative_error: float
    additive_residual: float
    deterministic_bound: float
    within_bound: bool
    theory_scale: float = 0.0
    wall_time: Optional[float] = None

    @classmethod
    def compare(cls, truth: float, estimate: float, bound: float, relative_allowance: float = 0.0,
                theory_scale: float = 0.0, wall_time: Optional[float] = None) -> "TrialRecord":
        """Build a record from an estimate, the exact answer and its deterministic bound.

        The additive residual is the part of the error not covered by
        `relative_allowance` * |truth|, the quantity the big-O constant is fitted to.
        """
        error = abs(estimate - truth)
        relative = error / abs(truth) if truth else (0.0 if error == 0 else math.inf)
        residual = max(0.0, error - relative_allowance * abs(truth))
        within = error <= bound + BOUND_TOLERANCE * max(1.0, abs(truth))
        return cls(float(truth), float(estimate), float(relative), float(residual),
                   float(bound), bool(within), float(theory_scale), wall_time)

    def to_json(self) -> dict[str, Any]:
        """Convert to a JSON-able datastructure, leaving out an unset wall time"""
        data = asdict(self)
        if self.wall_time is None:
            del data["wall_time"]
        if math.isinf(self.relative_error):
            data["relative_error"] = None
        return data


def _quantiles(values: Sequence[float]) -> dict[str, float]:
    if not values:
        return {}
    array = np.asarray(values, dtype=np.float64)
    summary = {f"q{q:g}": float(np.quantile(array, q)) for q in QUANTILES}
    summary["max"] = float(np.max(array))
    return summary


def summarise(records: Sequence[TrialRecord]) -> dict[str, Any]:
    """Quantiles of the errors, the fraction within bound and the fitted big-O constant"""
    relative = [record.relative_error for record in records if math.isfinite(record.relative_error)]
    ratios = [record.additive_residual / record.theory_scale
              for record in records if record.theory_scale > 0]
    return {
        "trials": len(records),
        "relative_error": _quantiles(relative),
        "additive_residual": _quantiles([record.additive_residual for record in records]),
        "deterministic_bound": _quantiles([record.deterministic_bound for record in records]),
        "fraction_within_bound": (sum(record.within_bound for record in records) / len(records)
                                  if records else 1.0),
        "fitted_constant": max(ratios) if ratios else 0.0,
    }


@dataclass
class Report:
    """Everything one CLI run produced"""
    command: str
    mode: str
    version: str
    config: dict[str, Any]
    records: list[TrialRecord] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def summary(self) -> dict[str, Any]:
        """Summary statistics over the records"""
        return summarise(self.records)

    def to_json(self) -> dict[str, Any]:
        """Convert to a JSON-able datastructure"""
        return {
            "schema_version": self.schema_version,
            "command": self.command,
            "mode": self.mode,
            "version": self.version,
            "config": self.config,
            "records": [record.to_json() for record in self.records],
            "summary": self.summary,
            "extra": self.extra,
        }

    def dumps(self) -> str:
        """Serialise with sorted keys, so equal reports give equal bytes"""
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"

    def write(self, path: str) -> None:
        """Write the JSON report to `path`"""
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(self.dumps())

    def format_table(self) -> str:
        """Aligned plain-text summary"""
        summary = self.summary
        rows = [("command", self.command), ("mode", self.mode), ("trials", str(summary["trials"])),
                ("within bound", f"{summary['fraction_within_bound']:.4f}"),
                ("fitted constant", f"{summary['fitted_constant']:.6g}")]
        for section in ("relative_error", "additive_residual", "deterministic_bound"):
            for key, value in summary[section].items():
                rows.append((f"{section.replace('_', ' ')} {key}", f"{value:.6g}"))
        for key in sorted(self.extra):
            value = self.extra[key]
            if isinstance(value, (int, float, str)):
                rows.append((key.replace("_", " "), f"{value:.6g}" if isinstance(value, float) else str(value)))
        width = max(len(label) for label, _ in rows)
        return "\n".join(f"{label:<{width}}  {value}" for label, value in rows)
