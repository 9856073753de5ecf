"""
Tests for edge lists, dense matrices, point clouds and time-series ingestion.
"""

import unittest

import numpy as np
import pytest

from geolift.core import DistanceMatrix, MatrixKind, PointCloud, SimilarityMatrix
from geolift.errors import (
    DataConditionError,
    DimensionError,
    ValidationError,
    ZeroVarianceError,
)
from geolift.ingestion import (
    DirectedPolicy,
    TimeSeriesTable,
    correlation_matrix,
    drop_incomplete,
    infer_kind,
    label_positions,
    load_covariate,
    load_dense_matrix,
    load_distance_matrix,
    load_edge_list,
    load_index_group,
    load_noise_covariances,
    load_point_cloud,
    load_time_series,
    read_dense_matrix,
    save_dense_matrix,
    save_distance_matrix,
    save_edge_list,
    save_noise_covariances,
    save_point_cloud,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_unweighted_edge_list(tmp_path):
    path = write(tmp_path, "a.edges", "a\tb\nb\tc\nb\ta\nc\tc\n# comment\n\n")
    loaded = load_edge_list(path)
    assert loaded.labels == ["a", "b", "c"]
    assert loaded.self_loops == 1
    assert loaded.matrix.kind == MatrixKind.ADJACENCY
    np.testing.assert_array_equal(loaded.matrix.to_dense(), [[0, 1, 0], [1, 0, 1], [0, 1, 0]])


def test_isolated_vertex_from_self_loop(tmp_path):
    loaded = load_edge_list(write(tmp_path, "loop.edges", "x\tx\ny\tz\n"))
    assert loaded.labels == ["x", "y", "z"]
    assert loaded.matrix.n == 3
    assert loaded.matrix.to_dense()[0].tolist() == [0.0, 0.0, 0.0]


def test_weighted_duplicates_are_summed(tmp_path):
    loaded = load_edge_list(write(tmp_path, "w.edges", "1\t2\t0.5\n1\t2\t0.25\n2\t3\t2\n"))
    assert loaded.matrix.kind == MatrixKind.GENERIC
    assert loaded.matrix.entry(0, 1) == 0.75
    assert loaded.matrix.entry(2, 1) == 2.0


def test_weighted_directions(tmp_path):
    agreeing = write(tmp_path, "same.edges", "a\tb\t1.5\nb\ta\t1.5\n")
    assert load_edge_list(agreeing).matrix.entry(0, 1) == 1.5
    conflicting = write(tmp_path, "conflict.edges", "a\tb\t1.5\nb\ta\t2.5\n")
    with pytest.raises(ValidationError, match="different weights"):
        load_edge_list(conflicting)
    union = load_edge_list(conflicting, DirectedPolicy.SYMMETRIZE_UNION)
    assert union.matrix.entry(0, 1) == 4.0


@pytest.mark.parametrize(
    "text, message",
    [
        ("a\tb\tc\td\n", ":1:"),
        ("a\tb\nc\td\t1\n", "mixes weighted"),
        ("a\tb\theavy\n", "cannot parse weight"),
        ("a\tb\tinf\n", "finite"),
        ("a b\n", ":1:"),
        ("# nothing here\n", "no vertices"),
    ],
)
def test_malformed_edge_lists(tmp_path, text, message):
    with pytest.raises(ValidationError, match=message):
        load_edge_list(write(tmp_path, "bad.edges", text))


def test_edge_list_round_trip(tmp_path):
    m = SimilarityMatrix.from_upper_triplets(4, [0, 1], [2, 3], [0.1, 2.5])
    labels = ["w", "x", "y", "z"]
    path = save_edge_list(m, tmp_path / "out.edges", labels)
    assert path.read_text(encoding="utf-8") == "w\ty\t0.10000000000000001\nx\tz\t2.5\n"
    loaded = load_edge_list(path)
    assert loaded.labels == ["w", "y", "x", "z"]
    assert loaded.matrix.entry(0, 1) == 0.1
    assert loaded.matrix.entry(2, 3) == 2.5


def test_adjacency_edge_list_has_no_weights(tmp_path):
    m = SimilarityMatrix.from_upper_triplets(3, [0], [1], [1.0], MatrixKind.ADJACENCY)
    path = save_edge_list(m, tmp_path / "adj.edges")
    assert path.read_text(encoding="utf-8") == "0\t1\n"


def test_dense_matrix_round_trip(tmp_path):
    values = np.random.default_rng(0).random((4, 4))
    m = SimilarityMatrix.from_dense(values + values.T)
    path = save_dense_matrix(m, tmp_path / "m.csv")
    loaded = load_dense_matrix(path)
    assert np.array_equal(loaded.to_dense(), m.to_dense())
    assert loaded.kind == MatrixKind.GENERIC


def test_dense_header_labels_and_kind_inference(tmp_path):
    loaded = read_dense_matrix(write(tmp_path, "c.csv", "p,q\n1,0.5\n0.5,1\n"))
    assert loaded.labels == ["p", "q"]
    assert loaded.matrix.kind == MatrixKind.CORRELATION


def test_dense_small_asymmetry_is_tolerated(tmp_path):
    path = write(tmp_path, "s.csv", "0,1\n1.0000000000001,0\n")
    m = load_dense_matrix(path, MatrixKind.GENERIC)
    assert m.entry(0, 1) == m.entry(1, 0)


@pytest.mark.parametrize(
    "text, error",
    [
        ("0,1\n0.5,0\n", ValidationError),
        ("0,1,2\n1,0,3\n", DimensionError),
        ("0,1\nx,0\n", ValidationError),
    ],
)
def test_bad_dense_matrices(tmp_path, text, error):
    with pytest.raises(error):
        load_dense_matrix(write(tmp_path, "bad.csv", text))


def test_infer_kind():
    assert infer_kind(np.array([[0.0, 1.0], [1.0, 0.0]])) == MatrixKind.ADJACENCY
    assert infer_kind(np.array([[1.0, -0.2], [-0.2, 1.0]])) == MatrixKind.CORRELATION
    assert infer_kind(np.array([[2.0, 1.0], [1.0, 0.0]])) == MatrixKind.GENERIC


def test_point_cloud_round_trip(tmp_path):
    cloud = PointCloud(np.array([[0.1, 1.0 / 3.0], [-2.5, 1e-20]]))
    path = save_point_cloud(cloud, tmp_path / "X.csv", ["007", "b"])
    assert path.read_text(encoding="utf-8").splitlines()[0] == "label,x1,x2"
    loaded, labels = load_point_cloud(path)
    assert labels == ["007", "b"]
    assert np.array_equal(loaded.coords, cloud.coords)


def test_point_cloud_label_count(tmp_path):
    with pytest.raises(DimensionError):
        save_point_cloud(PointCloud(np.zeros((2, 1))), tmp_path / "X.csv", ["only-one"])


def test_distance_matrix_round_trip(tmp_path):
    d = DistanceMatrix(np.array([[0.0, 1.5, np.inf], [1.5, 0.0, np.inf], [np.inf, np.inf, 0.0]]))
    path = save_distance_matrix(d, tmp_path / "geodesics.csv", ["a", "b", "c"])
    assert "inf" in path.read_text(encoding="utf-8")
    loaded, labels = load_distance_matrix(path)
    assert labels == ["a", "b", "c"]
    assert np.array_equal(loaded.entries, d.entries)


def test_noise_covariances_follow_label_order(tmp_path):
    noise = np.stack([np.eye(2), 2.0 * np.eye(2), [[1.0, 0.5], [0.5, 3.0]]])
    path = save_noise_covariances(noise, tmp_path / "X_noise.csv", ["a", "b", "c"])
    assert path.read_text(encoding="utf-8").splitlines()[0] == "label,c1_1,c1_2,c2_1,c2_2"
    loaded = load_noise_covariances(path, ["c", "a"])
    assert np.array_equal(loaded, noise[[2, 0]])
    with pytest.raises(ValidationError):
        load_noise_covariances(path, ["z"])


def test_noise_covariances_need_square_blocks(tmp_path):
    path = write(tmp_path, "X_noise.csv", "label,c1,c2,c3\na,1,2,3\n")
    with pytest.raises(DimensionError):
        load_noise_covariances(path, ["a"])


def test_label_positions():
    assert label_positions(["a", "b", "c"], ["c", "a"], "group").tolist() == [2, 0]
    with pytest.raises(ValidationError, match="1 group label"):
        label_positions(["a"], ["z"], "group")


def test_covariate_follows_label_order(tmp_path):
    path = write(tmp_path, "cov.csv", "label,height\nb,2.0\na,1.0\nc,3.0\n")
    np.testing.assert_array_equal(load_covariate(path, "height", ["a", "b"]), [1.0, 2.0])
    with pytest.raises(ValidationError):
        load_covariate(path, "weight", ["a"])


def test_index_group(tmp_path):
    path = write(tmp_path, "north.txt", "# north\nJFK\n\n  ORD  \n")
    assert load_index_group(path) == ["JFK", "ORD"]
    with pytest.raises(ValidationError):
        load_index_group(write(tmp_path, "empty.txt", "# none\n"))


class TestTimeSeries(unittest.TestCase):
    def table(self, values, entities=None, timestamps=None):
        values = np.asarray(values, dtype=float)
        entities = entities or [f"e{i}" for i in range(values.shape[0])]
        timestamps = timestamps or [f"t{j}" for j in range(values.shape[1])]
        return TimeSeriesTable(tuple(entities), tuple(timestamps), values)

    def test_correlation_of_complete_series(self):
        t = self.table([[1, 2, 3, 4], [2, 4, 6, 8], [4, 3, 2, 1]])
        corr = correlation_matrix(t)
        self.assertEqual(corr.kind, MatrixKind.CORRELATION)
        np.testing.assert_allclose(corr.to_dense(), [[1, 1, -1], [1, 1, -1], [-1, -1, 1]])
        np.testing.assert_array_equal(corr.diagonal(), 1.0)

    def test_correlation_matches_numpy(self):
        values = np.random.default_rng(1).standard_normal((5, 30))
        corr = correlation_matrix(self.table(values))
        np.testing.assert_allclose(corr.to_dense(), np.corrcoef(values), atol=1e-12)

    def test_constant_series(self):
        with self.assertRaises(ZeroVarianceError) as ctx:
            correlation_matrix(self.table([[1, 2, 3], [5, 5, 5]], entities=["up", "flat"]))
        self.assertEqual(ctx.exception.entity, "flat")

    def test_missing_values_must_be_dropped_first(self):
        with self.assertRaises(ValidationError):
            correlation_matrix(self.table([[1, np.nan, 3], [1, 2, 3]]))

    def test_single_timestamp(self):
        with self.assertRaises(DataConditionError):
            correlation_matrix(self.table([[1.0], [2.0]]))

    def test_drop_incomplete_prefers_worst_entity(self):
        nan = np.nan
        t = self.table(
            [[1, 2, 3, 4], [nan, nan, 3, 4], [1, 3, 2, 5], [2, 1, 4, nan]],
        )
        cleaned = drop_incomplete(t)
        self.assertEqual(cleaned.dropped_entities, ("e1",))
        self.assertEqual(cleaned.dropped_timestamps, ("t3",))
        self.assertEqual(cleaned.entities, ("e0", "e2", "e3"))
        self.assertFalse(np.any(cleaned.missing))

    def test_entity_wins_ties(self):
        t = self.table([[1.0, 2.0, 3.0], [np.nan, 3.0, 1.0], [4.0, 5.0, 0.0]])
        cleaned = drop_incomplete(t)
        # e1 and t0 both miss a third of their cells.
        self.assertEqual(cleaned.dropped_entities, ("e1",))
        self.assertEqual(cleaned.timestamps, ("t0", "t1", "t2"))

    def test_nothing_left(self):
        with self.assertRaises(DataConditionError):
            drop_incomplete(self.table([[np.nan, 1.0], [2.0, np.nan]]))

    def test_table_validation(self):
        with self.assertRaises(ValidationError):
            self.table([[1.0, 2.0]])
        with self.assertRaises(DimensionError):
            TimeSeriesTable(("a", "b"), ("t",), np.zeros((2, 2)))


def test_load_time_series(tmp_path):
    path = write(tmp_path, "temps.csv", "city,2000,2001,2002\nOslo,1.5,,2.5\nRome,10,11,12\n")
    t = load_time_series(path)
    assert t.entities == ("Oslo", "Rome")
    assert t.timestamps == ("2000", "2001", "2002")
    assert np.isnan(t.values[0, 1])
    assert t.values[1].tolist() == [10.0, 11.0, 12.0]


def test_load_time_series_rejects_text(tmp_path):
    path = write(tmp_path, "bad.csv", "city,2000,2001\nOslo,warm,1\nRome,1,2\n")
    with pytest.raises(ValidationError):
        load_time_series(path)
