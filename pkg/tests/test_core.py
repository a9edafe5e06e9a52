import json

import numpy as np
import pytest

from dpxattn import core
from dpxattn.config import RunConfig
from dpxattn.dataset import Dataset, read_matrix
from dpxattn.errors import InfeasibleParameters, InvalidParameter
from dpxattn.models.adaptive import AdaptiveIndex, adaptive_copy_count
from dpxattn.models.softmax import ErrorBudget, SoftmaxEstimate

EXAMPLE_KEYS = [[0.1], [0.3], [0.3], [0.3], [0.4], [0.6], [0.7], [0.9], [0.9]]
EXAMPLE_WEIGHTS = [[2.2], [3.1], [-2], [-3], [2], [6], [0.5], [-1], [1]]


def example_dataset():
    return Dataset(np.array(EXAMPLE_KEYS), np.array(EXAMPLE_WEIGHTS), np.array([[0.0]]), 1.0, 6.0)


def small_dataset(n=16, d=2, m=3, seed=0):
    return Dataset.generate(n, m, d, 1.0, 1.0, seed)


def test_gen_is_reproducible(tmp_path):
    first = RunConfig(command="gen", data_dir=tmp_path / "a", n=10, m=2, d=3, seed=4)
    second = RunConfig(command="gen", data_dir=tmp_path / "b", n=10, m=2, d=3, seed=4)
    core.cmd_gen(first)
    core.cmd_gen(second)
    for name in ("K.csv", "V.csv", "Q.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    loaded = Dataset.load(tmp_path / "a")
    assert loaded.keys.shape == (10, 3)
    assert loaded.queries.shape == (2, 3)


def test_gen_rejects_bad_radius(tmp_path):
    with pytest.raises(InvalidParameter):
        core.cmd_gen(RunConfig(command="gen", data_dir=tmp_path, radius=0.0))


def test_gen_accepts_small_radius(tmp_path):
    config = RunConfig(command="gen", data_dir=tmp_path, n=6, m=2, d=2, radius=0.5)
    assert config.mode == "softmax"
    core.cmd_gen(config)
    loaded = Dataset.load(tmp_path)
    assert loaded.radius == 0.5
    assert np.all(loaded.keys <= 0.5)


def test_example_distance_eval(tmp_path):
    config = RunConfig(mode="l1", d=1, weight_bound=6.0, grid_size=10, alpha=0.1, trials=1,
                       noise="off", unsafe_test=True, output=tmp_path / "report.json")
    report = core.cmd_eval(config, example_dataset())
    record = report.records[0]
    assert record.truth == pytest.approx(4.4)
    assert record.within_bound
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["summary"]["fraction_within_bound"] == 1.0


def test_distance_eval_large_epsilon(tmp_path):
    config = RunConfig(mode="l1", d=1, weight_bound=6.0, grid_size=10, alpha=0.1, trials=5,
                       epsilon=100.0, output=tmp_path / "report.json")
    report = core.cmd_eval(config, example_dataset())
    assert all(record.within_bound for record in report.records)


def test_high_dim_large_epsilon_is_rejected(tmp_path):
    config = RunConfig(mode="l1", epsilon=100.0, output=tmp_path / "report.json")
    with pytest.raises(InvalidParameter):
        core.cmd_eval(config, small_dataset())


@pytest.mark.parametrize("mode", ["l1", "l2sq", "softmax"])
def test_eval_modes(tmp_path, mode):
    config = RunConfig(mode=mode, trials=3, output=tmp_path / "report.json")
    report = core.cmd_eval(config, small_dataset())
    assert len(report.records) == 3
    assert report.summary["fraction_within_bound"] == 1.0


def test_eval_adaptive(tmp_path):
    config = RunConfig(mode="adaptive", trials=2, l_override=3, output=tmp_path / "report.json")
    report = core.cmd_eval(config, small_dataset())
    assert report.summary["fraction_within_bound"] == 1.0
    assert report.extra["copies"]["l"] == 3
    assert report.extra["copies"]["overridden"]


def test_eval_attention(tmp_path):
    config = RunConfig(mode="attention", trials=1, l_override=2, output=tmp_path / "report.json")
    report = core.cmd_eval(config, small_dataset(m=2))
    assert len(report.records) == 4
    assert report.summary["fraction_within_bound"] == 1.0
    assert report.extra["normalizer"] == "exact"


def test_zero_trials(tmp_path):
    config = RunConfig(mode="l1", trials=0, output=tmp_path / "report.json")
    report = core.cmd_eval(config, small_dataset())
    assert report.records == []
    assert report.summary["fraction_within_bound"] == 1.0


def test_report_is_reproducible(tmp_path):
    dataset = small_dataset()
    first = RunConfig(mode="softmax", trials=2, output=tmp_path / "a.json")
    second = RunConfig(mode="softmax", trials=2, output=tmp_path / "b.json")
    core.cmd_eval(first, dataset)
    core.cmd_eval(second, dataset)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_noise_off_needs_unsafe_test(tmp_path):
    config = RunConfig(mode="l1", noise="off", output=tmp_path / "report.json")
    with pytest.raises(InvalidParameter):
        core.cmd_eval(config, small_dataset())


def test_dataset_outside_configured_bounds(tmp_path):
    config = RunConfig(mode="l1", d=1, trials=1, output=tmp_path / "report.json")
    with pytest.raises(InvalidParameter):
        core.cmd_eval(config, example_dataset())


def test_attack(tmp_path):
    config = RunConfig(command="attack", l_override=3, attack_grid=3, attack_rounds=5,
                       output=tmp_path / "report.json")
    report = core.cmd_attack(config, small_dataset())
    assert len(report.records) == 5
    assert report.extra["adaptive"]["points"][0] == [0.0, 0.0]
    assert len(report.extra["single"]["points"]) == 5
    assert report.summary["fraction_within_bound"] == 1.0


def test_attack_with_derived_copy_count(tmp_path):
    config = RunConfig(command="attack", attack_grid=20, attack_rounds=100,
                       output=tmp_path / "report.json")
    report = core.cmd_attack(config, small_dataset(n=64))
    assert report.extra["copies"]["l"] == adaptive_copy_count(15, 2, 1.0, 0.05, 0.01) == 125
    assert not report.extra["copies"]["overridden"]
    assert len(report.records) == 100
    assert len(set(map(tuple, report.extra["adaptive"]["points"]))) == 100
    assert report.summary["fraction_within_bound"] == 1.0
    assert report.extra["adaptive"]["worst_excess"] <= 1e-9
    assert report.extra["single"]["worst_excess"] <= 1e-9


def test_attack_estimates_each_point_once(tmp_path, monkeypatch):
    calls = []
    original = AdaptiveIndex.estimate

    def counted(self, y, alpha):
        calls.append(tuple(y))
        return original(self, y, alpha)

    monkeypatch.setattr(AdaptiveIndex, "estimate", counted)
    config = RunConfig(command="attack", l_override=3, attack_grid=3, attack_rounds=5,
                       output=tmp_path / "report.json")
    report = core.cmd_attack(config, small_dataset())
    assert len(report.records) == 5
    assert len(calls) == len(set(calls)) == 5


def test_estimate_cache():
    calls = []

    class Doubling:
        def estimate(self, y, alpha):
            calls.append((y, alpha))
            return SoftmaxEstimate(2 * sum(y), ErrorBudget(0.5, 0.25, 0.0, 0.0))

    cache = core.EstimateCache(Doubling(), 0.3)
    assert cache.value([0.5, 0.25]) == 1.5
    assert cache.bound(np.array([0.5, 0.25])) == 0.75
    assert cache.value((0.5, 0.25)) == 1.5
    assert calls == [((0.5, 0.25), 0.3)]
    assert len(cache) == 1


def test_attack_rejects_three_dimensions(tmp_path):
    config = RunConfig(command="attack", d=3, l_override=1, output=tmp_path / "report.json")
    with pytest.raises(InfeasibleParameters):
        core.cmd_attack(config, small_dataset(d=3))


def test_attn_single_key(tmp_path):
    values = np.array([[0.25, -0.5]])
    dataset = Dataset(np.zeros((1, 2)), values, np.zeros((1, 2)), 1.0, 1.0)
    config = RunConfig(command="attn", mode="attention", l_override=1, noise="off",
                       unsafe_test=True, output=tmp_path / "report.json")
    core.cmd_attn(config, dataset)
    matrix, bound = read_matrix(core.matrix_path(config))
    assert np.allclose(matrix, values, rtol=1e-12, atol=0)
    assert bound == 1.0
    assert (tmp_path / "report.json").exists()


def test_attn_single_key_off_origin(tmp_path):
    values = np.array([[0.25, -0.5]])
    queries = np.array([[0.9, 0.1], [0.3, 0.6]])
    dataset = Dataset(np.array([[0.5, 0.5]]), values, queries, 1.0, 1.0)
    config = RunConfig(command="attn", mode="attention", l_override=1, noise="off",
                       unsafe_test=True, output=tmp_path / "report.json")
    core.cmd_attn(config, dataset)
    matrix, _ = read_matrix(core.matrix_path(config))
    assert np.allclose(matrix, np.vstack([values, values]), rtol=1e-12, atol=0)


def test_trial_queries_cycle():
    dataset = small_dataset(m=2)
    queries = core.trial_queries(RunConfig(), dataset, 5)
    assert np.array_equal(queries[4], dataset.queries[0])
    assert core.trial_queries(RunConfig(), dataset, 0).shape == (0, 2)
