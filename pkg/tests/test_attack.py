import pytest

from dpxattn.attack import greedy_grid_attack
from dpxattn.errors import InfeasibleParameters, InvalidParameter


def zero(_y):
    return 0.0


def one(_y):
    return 1.0


def test_starts_at_origin_and_runs_all_rounds():
    trace = greedy_grid_attack(lambda y: y[0] + y[1], zero, one, grid=5, rounds=10)
    assert trace.points[0] == (0.0, 0.0)
    assert len(trace.points) == len(trace.errors) == len(trace.bounds) == 10
    assert len(set(trace.points)) == 10


def test_walks_towards_large_errors():
    trace = greedy_grid_attack(lambda y: y[0] + y[1], zero, one, grid=5, rounds=8)
    # each step moves to the first unvisited neighbour of the worst cell
    assert trace.points[1] == (0.0, 0.25)
    assert trace.points[2] == (0.0, 0.5)
    assert trace.points[3] == (0.0, 0.75)
    assert trace.worst_error == max(trace.errors)


def test_deterministic():
    first = greedy_grid_attack(lambda y: (y[0] - 0.3) ** 2, zero, one, grid=7, rounds=20)
    second = greedy_grid_attack(lambda y: (y[0] - 0.3) ** 2, zero, one, grid=7, rounds=20)
    assert first.points == second.points


def test_exhausts_small_grid():
    trace = greedy_grid_attack(zero, zero, one, grid=3, rounds=100)
    assert len(trace.points) == 9
    assert sorted(trace.points) == sorted((i * 0.5, j * 0.5) for i in range(3) for j in range(3))
    assert trace.worst_excess == -1.0


def test_one_dimensional():
    trace = greedy_grid_attack(lambda y: y[0], zero, one, grid=4, rounds=10, dim=1)
    assert len(trace.points) == 4
    assert all(len(point) == 1 for point in trace.points)


def test_to_json():
    data = greedy_grid_attack(zero, zero, one, grid=2, rounds=2).to_json()
    assert data["points"] == [[0.0, 0.0], [0.0, 1.0]]
    assert data["worst_error"] == 0


def test_invalid():
    with pytest.raises(InfeasibleParameters):
        greedy_grid_attack(zero, zero, one, dim=3)
    with pytest.raises(InvalidParameter):
        greedy_grid_attack(zero, zero, one, grid=0)
    with pytest.raises(InvalidParameter):
        greedy_grid_attack(zero, zero, one, rounds=-1)
