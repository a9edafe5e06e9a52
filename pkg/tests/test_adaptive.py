from dataclasses import replace
import math

import numpy as np
import pytest

from dpxattn.errors import BudgetUnderflow, InvalidParameter
from dpxattn.models.adaptive import AdaptiveDistanceIndex, AdaptiveIndex, adaptive_copy_count
from dpxattn.models.distance import DistanceMode
from dpxattn.models.highdim import HighDimIndex
from dpxattn.models.softmax import SoftmaxIndex
from dpxattn.noise import Rng, frozen
from dpxattn.oracle import Instance, exact_softmax_query, exact_weighted_lp


def build(instance, seed=0, **kwargs):
    return AdaptiveIndex.build(instance.points, instance.weights, 2.0, 0.01, 0.01, Rng(seed),
                               **kwargs)


def test_copy_count():
    assert adaptive_copy_count(6, 2, 1, 0.05, 0.01) == 50
    assert adaptive_copy_count(15, 2, 1, 0.05, 0.01) == math.ceil(15 * math.log(4000))
    assert adaptive_copy_count(1, 1, 1, 0.9, 0.9) == 1


def test_default_copy_count():
    index = build(Instance.random(8, 2, 0, seed=0))
    assert index.copy_count == adaptive_copy_count(15, 2, 1.0, 0.05, 0.01)
    assert index.copy_budget.epsilon == pytest.approx(2.0 / index.copy_count)
    assert not index.provenance.overridden
    assert all(copy.params is index.params for copy in index.copies)


def test_single_copy_is_a_softmax_index():
    instance = Instance.random(20, 2, 5, seed=1)
    index = build(instance, seed=4, l_override=1)
    plain = SoftmaxIndex.build(instance.points, instance.weights, 2.0, 0.01, 0.01, Rng(4).spawn(0))
    for y in instance.queries:
        assert index.adaptive_query(y, 0.3) == plain.softmax_query(y, 0.3)


def test_deterministic():
    instance = Instance.random(12, 2, 3, seed=2)
    first = build(instance, seed=7, l_override=5)
    second = build(instance, seed=7, l_override=5)
    with frozen():
        for y in instance.queries:
            assert first.adaptive_query(y, 0.3) == second.adaptive_query(y, 0.3)
            assert first.adaptive_query(y, 0.3) == first.adaptive_query(y, 0.3)


def test_copies_are_independent():
    index = build(Instance.random(12, 2, 0, seed=3), l_override=3)
    trees = [copy.coord_indices[0].tree for copy in index.copies]
    assert not np.array_equal(trees[0].c, trees[1].c)
    assert not np.array_equal(trees[1].c, trees[2].c)


def test_zero_weights():
    instance = Instance.random(10, 2, 3, seed=4)
    instance = replace(instance, weights=np.zeros(10))
    index = build(instance, l_override=5)
    for y in instance.queries:
        assert abs(index.adaptive_query(y, 0.3)) <= index.error_bound(y, 0.3)


def test_median_survives_one_bad_copy():
    instance = Instance.random(16, 2, 4, seed=5)
    index = build(instance, l_override=3)
    broken = replace(index.copies[2], p_wx=index.copies[2].p_wx + 1e6)
    corrupted = replace(index, copies=index.copies[:2] + (broken,))
    for y in instance.queries:
        honest = [copy.softmax_query(y, 0.3) for copy in index.copies[:2]]
        answer = corrupted.adaptive_query(y, 0.3)
        assert min(honest) <= answer <= max(honest)


def test_error_bound_over_query_grid():
    instance = Instance.random(24, 2, 0, seed=6)
    index = build(instance, l_override=7)
    for a in np.linspace(0, 1, 6):
        for b in np.linspace(0, 1, 6):
            y = [a, b]
            truth = exact_softmax_query(instance.points, instance.weights, y)
            assert abs(index.adaptive_query(y, 0.3) - truth) <= index.error_bound(y, 0.3) + 1e-9


def test_uniform_error_on_fine_grid_one_dimension():
    instance = Instance.random(32, 1, 0, seed=11)
    index = build(instance, seed=2)
    assert not index.provenance.overridden
    assert index.copy_count == adaptive_copy_count(index.params.size, 1, 1.0, 0.05, 0.01)
    violations = 0
    with frozen():
        for a in np.linspace(0, 1, 51):
            truth = exact_softmax_query(instance.points, instance.weights, [a])
            estimate = index.estimate([a], 0.3)
            violations += abs(estimate.value - truth) > estimate.errors.total + 1e-9
    assert violations == 0


def test_uniform_error_on_fine_grid_two_dimensions():
    instance = Instance.random(32, 2, 0, seed=12)
    index = build(instance, seed=3, l_override=5)
    violations = 0
    with frozen():
        for a in np.linspace(0, 1, 51):
            for b in np.linspace(0, 1, 51):
                y = [a, b]
                truth = exact_softmax_query(instance.points, instance.weights, y)
                estimate = index.estimate(y, 0.3)
                violations += abs(estimate.value - truth) > estimate.errors.total + 1e-9
    assert violations == 0


def test_estimate_matches_query():
    instance = Instance.random(10, 2, 2, seed=7)
    index = build(instance, l_override=4)
    for y in instance.queries:
        estimate = index.estimate(y, 0.3)
        assert estimate.value == index.adaptive_query(y, 0.3)
        assert estimate.errors.total == max(copy.error_budget(y, 0.3).total for copy in index.copies)


def test_invalid():
    instance = Instance.random(4, 2, 0, seed=8)
    with pytest.raises(InvalidParameter):
        build(instance, p_f=0.5)
    with pytest.raises(InvalidParameter):
        build(instance, p_f=0)
    with pytest.raises(InvalidParameter):
        build(instance, l_override=0)


def test_budget_underflow():
    instance = Instance.random(4, 2, 0, seed=9)
    with pytest.raises(BudgetUnderflow):
        AdaptiveIndex.build(instance.points, instance.weights, 1e-3, 0.01, 0.01, Rng(0),
                            l_override=10000)


def test_provenance():
    index = build(Instance.random(4, 2, 0, seed=10), l_override=2)
    assert index.provenance.to_json() == {
        "r": 15,
        "d": 2,
        "R": 1.0,
        "epsilon_s": 0.05,
        "p_f": 0.01,
        "l": 2,
        "overridden": True,
    }


def build_distance(instance, seed=0, **kwargs):
    return AdaptiveDistanceIndex.build(instance.points, instance.weights, 2.0, 0.01, 0.01,
                                       Rng(seed), **kwargs)


def test_distance_copy_count():
    index = build_distance(Instance.random(8, 2, 0, seed=20))
    assert index.copy_count == adaptive_copy_count(2, 2, 1.0, 0.05, 0.01) == 17
    assert index.copy_budget.epsilon == pytest.approx(2.0 / 17)
    assert index.dim == 2
    assert index.provenance.to_json()["r"] == 2
    assert not index.provenance.overridden


def test_single_distance_copy_is_a_highdim_index():
    instance = Instance.random(20, 2, 5, seed=21)
    index = build_distance(instance, seed=4, l_override=1)
    plain = HighDimIndex.build(instance.points, instance.weights, 2.0, 0.01, 0.01, Rng(4).spawn(0))
    for y in instance.queries:
        assert index.adaptive_query(y, 0.3) == plain.distance_query(y, 0.3)


def test_distance_deterministic():
    instance = Instance.random(12, 3, 3, seed=22)
    first = build_distance(instance, seed=7, l_override=5)
    second = build_distance(instance, seed=7, l_override=5)
    with frozen():
        for y in instance.queries:
            assert first.adaptive_query(y, 0.3) == second.adaptive_query(y, 0.3)
    copies = [copy.per_coord[0].tree for copy in first.copies]
    assert not np.array_equal(copies[0].c, copies[1].c)


def test_distance_median_survives_one_bad_copy():
    instance = Instance.random(16, 2, 4, seed=23)
    index = build_distance(instance, l_override=3)
    broken = HighDimIndex.build(instance.points, -instance.weights, 2.0, 0.01, 0.01, Rng(99))
    corrupted = replace(index, copies=index.copies[:2] + (broken,))
    for y in instance.queries:
        honest = [copy.distance_query(y, 0.3) for copy in index.copies[:2]]
        assert min(honest) <= corrupted.adaptive_query(y, 0.3) <= max(honest)


def test_distance_estimate_matches_query():
    instance = Instance.random(10, 2, 3, seed=24)
    index = build_distance(instance, l_override=4)
    for y in instance.queries:
        estimate = index.estimate(y, 0.3)
        assert estimate.value == index.adaptive_query(y, 0.3)
        assert estimate.noise_bound == max(copy.estimate(y, 0.3).noise_bound
                                           for copy in index.copies)


def test_distance_noise_off_within_bound():
    instance = Instance.random(30, 2, 10, seed=25)
    for mode in DistanceMode:
        index = build_distance(instance, l_override=3, mode=mode, noise_enabled=False)
        for y in instance.queries:
            answers = index.responses(y, 0.3)
            assert np.all(answers == answers[0])
            truth = exact_weighted_lp(instance.points, instance.weights, y, mode.power)
            assert abs(index.adaptive_query(y, 0.3) - truth) <= index.error_bound(y, 0.3) + 1e-9


def test_distance_error_bound_over_query_grid():
    instance = Instance.random(24, 2, 0, seed=26)
    index = build_distance(instance, seed=5, l_override=5)
    with frozen():
        for a in np.linspace(0, 1, 11):
            for b in np.linspace(0, 1, 11):
                y = [a, b]
                truth = exact_weighted_lp(instance.points, instance.weights, y, 1)
                assert abs(index.adaptive_query(y, 0.3) - truth) <= index.error_bound(y, 0.3) + 1e-9


def test_distance_invalid():
    instance = Instance.random(4, 2, 0, seed=27)
    with pytest.raises(InvalidParameter):
        build_distance(instance, p_f=0.5)
    with pytest.raises(InvalidParameter):
        build_distance(instance, net_step=0)
    with pytest.raises(InvalidParameter):
        build_distance(instance, net_step=2.0)
    with pytest.raises(InvalidParameter):
        build_distance(instance, l_override=0)
    with pytest.raises(BudgetUnderflow):
        AdaptiveDistanceIndex.build(instance.points, instance.weights, 1e-3, 0.01, 0.01, Rng(0),
                                    l_override=10000)
