# License: GNU Affero General Public License v3 or later
# A copy of GNU AGPL v3 should have been included in this software package in LICENSE.txt.

"""Command implementations: data generation, evaluation, the adaptive attack and attention"""

import math
from pathlib import Path
import time
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import get_version_sync
from .attack import greedy_grid_attack
from .config import RunConfig
from .dataset import Dataset, write_matrix
from .errors import InfeasibleParameters, InvalidParameter
from .kernel import KernelParams
from .log import core_logger
from .models.adaptive import AdaptiveIndex
from .models.attention import AttentionLayer, NormalizerMode
from .models.distance import DistanceIndex, DistanceMode
from .models.highdim import HighDimIndex
from .models.softmax import SoftmaxEstimate, SoftmaxIndex
from .noise import Rng, frozen
from .oracle import exact_attention, exact_softmax_query, exact_weighted_lp
from .report import Report, TrialRecord


def _log_term(n: int) -> float:
    return math.log(max(n, 2)) ** 1.5


def distance_theory_scale(config: RunConfig, n: int, d: int) -> float:
    """Shape of the additive distance error: d R^p R_w sqrt(ln 1/delta') log^1.5 n / (eps sqrt(alpha))"""
    power = 1 if config.mode == "l1" else 2
    scale = config.radius ** power * config.weight_bound * _log_term(n) / (config.epsilon * math.sqrt(config.alpha))
    if d > 1:
        scale *= d * math.sqrt(math.log(1 / config.delta_prime))
    return scale


def softmax_theory_scale(config: RunConfig, params: KernelParams, n: int) -> float:
    """Shape of the additive softmax error: Gamma^2 R_w r sqrt(ln 1/delta') log^1.5 n / (eps sqrt(alpha))"""
    return (params.gamma ** 2 * config.weight_bound * params.size
            * math.sqrt(math.log(1 / config.delta_prime)) * _log_term(n)
            / (config.epsilon * math.sqrt(config.alpha)))


def trial_queries(config: RunConfig, dataset: Dataset, count: int) -> np.ndarray:
    """The dataset's queries, cycled to `count` rows; uniform public draws if there are none"""
    if count == 0:
        return np.empty((0, dataset.dim))
    if dataset.queries.shape[0] == 0:
        generator = np.random.default_rng(config.seed)
        return generator.uniform(0, dataset.radius, size=(count, dataset.dim))
    return np.array([dataset.queries[t % dataset.queries.shape[0]] for t in range(count)])


def _check_dataset(config: RunConfig, dataset: Dataset) -> None:
    if dataset.radius > config.radius or dataset.weight_bound > config.weight_bound:
        raise InvalidParameter(
            f"dataset declares R={dataset.radius}, R_w={dataset.weight_bound}, "
            f"configured bounds are R={config.radius}, R_w={config.weight_bound}")


def _new_report(config: RunConfig, command: str) -> Report:
    return Report(command, config.mode, get_version_sync(), config.to_json())


def _timed(config: RunConfig, start: float) -> Optional[float]:
    return time.perf_counter() - start if config.record_timings else None


def cmd_gen(config: RunConfig) -> list[str]:
    """Generate a synthetic dataset into config.data_dir"""
    config.validate()
    dataset = Dataset.generate(config.n, config.m, config.d, config.radius,
                               config.weight_bound, config.seed)
    written = dataset.save(config.data_dir)
    core_logger.info("Wrote %s", ", ".join(written))
    return written


def _build_distance(config: RunConfig, dataset: Dataset, rng: Rng):
    mode = DistanceMode(config.mode)
    weights = dataset.values[:, 0]
    if dataset.dim == 1:
        return DistanceIndex.build(dataset.keys[:, 0], weights, config.epsilon, config.delta, rng,
                                   mode, config.radius, config.weight_bound, config.grid_size,
                                   config.noise_enabled)
    return HighDimIndex.build(dataset.keys, weights, config.epsilon, config.delta,
                              config.delta_prime, rng, config.c_split, mode, config.radius,
                              config.weight_bound, config.grid_size, config.noise_enabled)


def eval_distance(config: RunConfig, dataset: Dataset, report: Report) -> None:
    """Fresh distance index per trial, one query each"""
    mode = DistanceMode(config.mode)
    weights = dataset.values[:, 0]
    scale = distance_theory_scale(config, dataset.size, dataset.dim)
    for t, y in enumerate(trial_queries(config, dataset, config.trials)):
        start = time.perf_counter()
        index = _build_distance(config, dataset, Rng(config.seed).spawn(t))
        point = float(y[0]) if dataset.dim == 1 else y
        with frozen():
            estimate = index.estimate(point, config.alpha)
        bound = (estimate.noise_bound + index.bucketing_bound(point, config.alpha)
                 + index.rounding_bound())
        alpha_int = config.alpha if mode is DistanceMode.L1 else config.alpha / 2
        truth = exact_weighted_lp(dataset.keys, weights, y, mode.power)
        report.records.append(TrialRecord.compare(truth, estimate.value, bound,
                                                  (1 + alpha_int) ** mode.power - 1, scale,
                                                  _timed(config, start)))


def _build_softmax(config: RunConfig, dataset: Dataset, rng: Rng, adaptive: bool):
    weights = dataset.values[:, 0]
    if adaptive:
        return AdaptiveIndex.build(dataset.keys, weights, config.epsilon, config.delta,
                                   config.delta_prime, rng, config.c_split, config.epsilon_s,
                                   config.p_f, config.l_override, config.radius,
                                   config.weight_bound, config.grid_size, config.noise_enabled,
                                   config.noisy_scalars, config.epsilon_floor, config.kernel_cap)
    return SoftmaxIndex.build(dataset.keys, weights, config.epsilon, config.delta,
                              config.delta_prime, rng, config.c_split, config.epsilon_s,
                              config.radius, config.weight_bound, config.grid_size,
                              config.noise_enabled, config.noisy_scalars, config.kernel_cap)


def eval_softmax(config: RunConfig, dataset: Dataset, report: Report) -> None:
    """Fresh softmax (or adaptive) index per trial, one query each"""
    adaptive = config.mode == "adaptive"
    weights = dataset.values[:, 0]
    for t, y in enumerate(trial_queries(config, dataset, config.trials)):
        start = time.perf_counter()
        index = _build_softmax(config, dataset, Rng(config.seed).spawn(t), adaptive)
        with frozen():
            estimate = index.estimate(y, config.alpha)
        truth = exact_softmax_query(dataset.keys, weights, y)
        scale = softmax_theory_scale(config, index.params, dataset.size)
        report.records.append(TrialRecord.compare(truth, estimate.value, estimate.errors.total,
                                                  config.alpha + config.epsilon_s, scale,
                                                  _timed(config, start)))
        if t == 0:
            report.extra["kernel"] = index.params.to_json()
            if adaptive:
                report.extra["copies"] = index.provenance.to_json()
                report.extra["copy_budget"] = index.copy_budget.to_json()
            else:
                report.extra["coordinate_budget"] = index.coord_budget.to_json()


def build_attention(config: RunConfig, dataset: Dataset, rng: Rng) -> AttentionLayer:
    """The attention layer over the dataset's keys and values"""
    return AttentionLayer.build(dataset.keys, dataset.values, config.epsilon, config.delta,
                                config.delta_prime, rng, config.c_split, config.epsilon_s,
                                config.p_f, NormalizerMode(config.normalizer),
                                config.compose_columns, config.l_override, config.radius,
                                config.weight_bound, config.grid_size, config.noise_enabled,
                                config.noisy_scalars, config.epsilon_floor, config.kernel_cap)


def attend_all(config: RunConfig, dataset: Dataset, layer: AttentionLayer, report: Report,
               start: float) -> np.ndarray:
    """Answer every query row and add one record per output entry"""
    queries = dataset.queries
    exact = exact_attention(queries, dataset.keys, dataset.values)
    scale = softmax_theory_scale(config, layer.params, dataset.size) / dataset.size
    output = np.empty((queries.shape[0], dataset.dim))
    for i, q in enumerate(queries):
        with frozen():
            row = layer.row_result(q, config.alpha)
        output[i] = row.values
        for k in range(dataset.dim):
            report.records.append(TrialRecord.compare(
                float(exact[i, k]), float(row.values[k]), float(row.entry_bounds[k]),
                0.0, scale, _timed(config, start)))
    return output


def _attention_extra(layer: AttentionLayer) -> dict:
    return {
        "kernel": layer.params.to_json(),
        "structure_budget": layer.structure_budget.to_json(),
        "copies": layer.columns[0].provenance.to_json(),
        "key_digest": layer.key_digest,
        "normalizer": layer.normalizer_mode.value,
    }


def eval_attention(config: RunConfig, dataset: Dataset, report: Report) -> None:
    """Fresh attention layer per trial, every query row answered"""
    for t in range(config.trials):
        start = time.perf_counter()
        layer = build_attention(config, dataset, Rng(config.seed).spawn(t))
        attend_all(config, dataset, layer, report, start)
        if t == 0:
            report.extra.update(_attention_extra(layer))


EVALUATORS: dict[str, Callable[[RunConfig, Dataset, Report], None]] = {
    "l1": eval_distance,
    "l2sq": eval_distance,
    "softmax": eval_softmax,
    "adaptive": eval_softmax,
    "attention": eval_attention,
}


def cmd_eval(config: RunConfig, dataset: Dataset) -> Report:
    """Build the configured structure `trials` times and compare answers to exact values"""
    config.validate()
    _check_dataset(config, dataset)
    report = _new_report(config, "eval")
    core_logger.debug("Evaluating %s over %d trials", config.mode, config.trials)
    EVALUATORS[config.mode](config, dataset, report)
    report.write(str(config.output))
    return report


class EstimateCache:
    """Answers of one frozen softmax structure, each point estimated once"""

    def __init__(self, index: Union[SoftmaxIndex, AdaptiveIndex], alpha: float) -> None:
        self.index = index
        self.alpha = alpha
        self._estimates: dict[tuple[float, ...], SoftmaxEstimate] = {}

    def estimate(self, y: Sequence[float]) -> SoftmaxEstimate:
        """The structure's estimate at y, computed on first use"""
        key = tuple(float(v) for v in y)
        if key not in self._estimates:
            with frozen():
                self._estimates[key] = self.index.estimate(key, self.alpha)
        return self._estimates[key]

    def value(self, y: Sequence[float]) -> float:
        """Answer at y"""
        return self.estimate(y).value

    def bound(self, y: Sequence[float]) -> float:
        """Deterministic error bound at y"""
        return self.estimate(y).errors.total

    def __len__(self) -> int:
        return len(self._estimates)


def cmd_attack(config: RunConfig, dataset: Dataset) -> Report:
    """Run the greedy grid attack against one SoftmaxIndex and one AdaptiveIndex"""
    config.validate()
    _check_dataset(config, dataset)
    if dataset.dim > 2:
        raise InfeasibleParameters(f"the grid attack covers at most 2 dimensions, not {dataset.dim}")
    report = _new_report(config, "attack")
    weights = dataset.values[:, 0]
    rng = Rng(config.seed)
    single = _build_softmax(config, dataset, rng.spawn(0), False)
    adaptive = _build_softmax(config, dataset, rng.spawn(1), True)
    report.extra["copies"] = adaptive.provenance.to_json()

    def truth(y):
        return exact_softmax_query(dataset.keys, weights, y)

    traces = {}
    answers = {}
    for name, index in (("single", single), ("adaptive", adaptive)):
        answer = answers[name] = EstimateCache(index, config.alpha)
        traces[name] = greedy_grid_attack(answer.value, truth, answer.bound, config.radius,
                                          config.attack_grid, config.attack_rounds, dataset.dim)

    scale = softmax_theory_scale(config, adaptive.params, dataset.size)
    for point, allowed in zip(traces["adaptive"].points, traces["adaptive"].bounds):
        report.records.append(TrialRecord.compare(truth(point), answers["adaptive"].value(point),
                                                  allowed, config.alpha + config.epsilon_s, scale))
    for name, trace in traces.items():
        report.extra[name] = trace.to_json()
    core_logger.info("Worst attack error: single %.4g, adaptive %.4g",
                     traces["single"].worst_error, traces["adaptive"].worst_error)
    report.write(str(config.output))
    return report


def matrix_path(config: RunConfig) -> Path:
    """Where cmd_attn writes the attention output"""
    return Path(config.output).with_suffix(".csv")


def cmd_attn(config: RunConfig, dataset: Dataset) -> Report:
    """Compute private attention for every query row, writing the matrix and the report"""
    config.validate()
    _check_dataset(config, dataset)
    report = _new_report(config, "attn")
    start = time.perf_counter()
    layer = build_attention(config, dataset, Rng(config.seed))
    output = attend_all(config, dataset, layer, report, start)
    report.extra.update(_attention_extra(layer))
    write_matrix(matrix_path(config), output, config.weight_bound)
    report.write(str(config.output))
    return report
