import numpy as np
import pytest

from dpxattn.dataset import Dataset, format_header, read_matrix, write_matrix
from dpxattn.errors import DatasetError


def test_round_trip(tmp_path):
    dataset = Dataset.generate(17, 5, 3, 2.0, 0.5, seed=11)
    paths = dataset.save(tmp_path)
    assert [p.rsplit("/", 1)[-1] for p in paths] == ["K.csv", "V.csv", "Q.csv"]
    loaded = Dataset.load(tmp_path)
    assert np.array_equal(loaded.keys, dataset.keys)
    assert np.array_equal(loaded.values, dataset.values)
    assert np.array_equal(loaded.queries, dataset.queries)
    assert loaded.radius == 2.0
    assert loaded.weight_bound == 0.5
    assert loaded.size == 17
    assert loaded.dim == 3


def test_generation_is_reproducible(tmp_path):
    first = tmp_path / "first"
    second = tmp_path / "second"
    Dataset.generate(8, 3, 2, 1.0, 1.0, seed=5).save(first)
    Dataset.generate(8, 3, 2, 1.0, 1.0, seed=5).save(second)
    for name in ("K.csv", "V.csv", "Q.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    Dataset.generate(8, 3, 2, 1.0, 1.0, seed=6).save(second)
    assert (first / "K.csv").read_bytes() != (second / "K.csv").read_bytes()


def test_header(tmp_path):
    path = tmp_path / "M.csv"
    write_matrix(path, np.array([[0.1, 0.2]]), 1.0)
    assert path.read_text().splitlines()[0] == format_header(1, 2, 1.0) == "# dpxattn v1 rows=1 cols=2 R=1"
    matrix, bound = read_matrix(path)
    assert bound == 1.0
    assert matrix.tolist() == [[0.1, 0.2]]


def test_bad_files(tmp_path):
    path = tmp_path / "M.csv"
    path.write_text("0.1,0.2\n")
    with pytest.raises(DatasetError, match="header"):
        read_matrix(path)
    path.write_text("# dpxattn v1 rows=2 cols=2 R=1\n0.1,0.2\n")
    with pytest.raises(DatasetError, match="rows"):
        read_matrix(path)
    path.write_text("# dpxattn v1 rows=1 cols=2 R=1\n0.1,0.2,0.3\n")
    with pytest.raises(DatasetError, match="columns"):
        read_matrix(path)
    path.write_text("# dpxattn v1 rows=1 cols=2 R=1\n0.1,abc\n")
    with pytest.raises(DatasetError):
        read_matrix(path)
    path.write_text("")
    with pytest.raises(DatasetError, match="empty"):
        read_matrix(path)
    with pytest.raises(DatasetError):
        read_matrix(tmp_path / "missing.csv")


def test_radius_mismatch(tmp_path):
    dataset = Dataset.generate(4, 2, 2, 1.0, 1.0, seed=0)
    dataset.save(tmp_path)
    write_matrix(tmp_path / "Q.csv", dataset.queries, 2.0)
    with pytest.raises(DatasetError, match="R="):
        Dataset.load(tmp_path)


def test_out_of_bound_values(tmp_path):
    dataset = Dataset.generate(4, 2, 2, 1.0, 1.0, seed=0)
    dataset.save(tmp_path)
    write_matrix(tmp_path / "V.csv", dataset.values * 4, 1.0)
    with pytest.raises(DatasetError):
        Dataset.load(tmp_path)
    with pytest.raises(DatasetError):
        Dataset(dataset.keys, dataset.values[:2], dataset.queries, 1.0, 1.0)
    with pytest.raises(DatasetError):
        Dataset(dataset.keys, dataset.values, dataset.queries[:, :1], 1.0, 1.0)
