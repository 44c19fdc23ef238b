import numpy as np
import pytest

from midlab import IncompleteDataset, ValidationError
from midlab import io as mio


def toy_dataset():
    values = np.array(
        [
            [0.1, 2.0, np.nan],
            [1.0 / 3.0, np.nan, -1.5e-17],
            [-4.25, 0.5, 3.0],
        ]
    )
    return IncompleteDataset.from_values(
        values, ("x1", "x2", "y"), ("predictor", "predictor", "outcome")
    )


class TestRoundTrip:
    def test_dataset_round_trip_exact(self, tmp_path):
        data = toy_dataset()
        path = tmp_path / "data.csv"
        mio.write_incomplete_csv(data, path)
        back = mio.read_incomplete_csv(path, "y", ["x1", "x2"])
        assert back.column_names == data.column_names
        assert back.roles == data.roles
        assert np.array_equal(back.mask, data.mask)
        obs = ~data.mask
        assert np.array_equal(back.values[obs], data.values[obs])

    def test_seventeen_digits_lossless(self, tmp_path):
        values = np.array([[0.1, 1.0 / 3.0], [np.pi, 2.0**-40]])
        path = tmp_path / "t.csv"
        mio.write_table(path, ("a", "b"), values)
        _, back = mio.read_table(path)
        assert np.array_equal(back, values)

    def test_mask_round_trip(self, tmp_path):
        mask = np.array([[True, False], [False, True], [False, False]])
        path = tmp_path / "mask.csv"
        mio.write_mask_csv(mask, ("a", "b"), path)
        names, back = mio.read_mask_csv(path)
        assert names == ["a", "b"]
        assert np.array_equal(back, mask)


class TestParsing:
    def test_na_token_accepted(self, tmp_path):
        path = tmp_path / "na.csv"
        path.write_text("a,b\n1,NA\nNA,2\n")
        _, matrix = mio.read_table(path)
        assert np.isnan(matrix[0, 1])
        assert np.isnan(matrix[1, 0])
        assert matrix[0, 0] == 1.0

    def test_empty_field_is_missing(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("a,b\n1,\n,2\n")
        _, matrix = mio.read_table(path)
        assert np.isnan(matrix[0, 1])
        assert np.isnan(matrix[1, 0])

    def test_bad_token_names_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n1,oops\n")
        with pytest.raises(ValidationError) as err:
            mio.read_table(path)
        assert "row 3" in str(err.value)
        assert "'b'" in str(err.value)

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("a,b\n1,2,3\n")
        with pytest.raises(ValidationError):
            mio.read_table(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValidationError):
            mio.read_table(path)

    def test_missing_declared_column(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValidationError) as err:
            mio.read_incomplete_csv(path, "y", ["a"])
        assert "y" in str(err.value)

    def test_undeclared_columns_dropped(self, tmp_path):
        path = tmp_path / "extra.csv"
        path.write_text("a,junk,y\n1,9,2\n3,9,4\n")
        data = mio.read_incomplete_csv(path, "y", ["a"])
        assert data.column_names == ("a", "y")

    def test_bad_mask_value_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValidationError):
            mio.read_mask_csv(path)


class TestPooledCsv:
    def test_columns_and_values(self, tmp_path):
        from midlab import CompletedFit, pool
        from midlab.strategies import StrategyResult

        fits = [
            CompletedFit(("a",), np.array([1.0]), np.array([1.0]), 100),
            CompletedFit(("a",), np.array([3.0]), np.array([1.0]), 100),
        ]
        result = StrategyResult("mi", pool(fits), 42, 2)
        path = tmp_path / "pooled.csv"
        mio.write_pooled_csv(result, path)
        lines = path.read_text().strip().splitlines()
        header = lines[0].split(",")
        assert header == list(mio.POOLED_COLUMNS)
        row = dict(zip(header, lines[1].split(",")))
        assert row["parameter"] == "a"
        assert float(row["theta_bar"]) == 2.0
        assert float(row["b"]) == 3.0
        assert float(row["gamma"]) == 0.75
        assert row["n_analyzed"] == "42"
