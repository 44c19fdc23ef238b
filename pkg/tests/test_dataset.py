import numpy as np
import pytest

from midlab import (
    ExperimentCell,
    ImputationMeta,
    ImputationSet,
    IncompleteDataset,
    MvnParams,
    ValidationError,
    rng_stream,
)


class TestRngStream:
    def test_identical_keys_identical_draws(self):
        a = rng_stream(42, 0, 0, 0).standard_normal(100)
        b = rng_stream(42, 0, 0, 0).standard_normal(100)
        assert np.array_equal(a, b)

    def test_distinct_chain_distinct_draws(self):
        a = rng_stream(42, 0, 0, 0).standard_normal(100)
        b = rng_stream(42, 0, 0, 1).standard_normal(100)
        assert not np.array_equal(a, b)

    def test_distinct_cell_and_replication_distinct_draws(self):
        base = rng_stream(42, 0, 0, 0).standard_normal(50)
        assert not np.array_equal(base, rng_stream(42, 1, 0, 0).standard_normal(50))
        assert not np.array_equal(base, rng_stream(42, 0, 1, 0).standard_normal(50))

    def test_standard_normal_mean(self):
        # Monte Carlo check; tolerance is about 3 sigma / sqrt(n).
        draws = rng_stream(42, 1, 1, 0).standard_normal(1_000_000)
        assert abs(draws.mean()) < 0.01

    def test_supports_chi_square(self):
        draws = rng_stream(1).chisquare(5, size=1000)
        assert np.all(draws > 0)

    def test_rejects_negative_keys(self):
        with pytest.raises(ValidationError):
            rng_stream(-1)
        with pytest.raises(ValidationError):
            rng_stream(1, chain=-2)


def toy_dataset():
    values = np.array([[1.0, 2.0], [3.0, np.nan], [5.0, 6.0]])
    return IncompleteDataset.from_values(values, ("x", "y"), ("predictor", "outcome"))


class TestIncompleteDataset:
    def test_from_values_masks_nan(self):
        data = toy_dataset()
        assert data.mask.tolist() == [[False, False], [False, True], [False, False]]
        assert np.isnan(data.values[1, 1])

    def test_masked_cells_stored_as_nan_even_if_value_given(self):
        values = np.array([[1.0, 99.0], [3.0, 4.0]])
        mask = np.array([[False, True], [False, False]])
        data = IncompleteDataset(values, mask, ("x", "y"), ("predictor", "outcome"))
        assert np.isnan(data.values[0, 1])

    def test_arrays_immutable(self):
        data = toy_dataset()
        with pytest.raises(ValueError):
            data.values[0, 0] = 9.0
        with pytest.raises(ValueError):
            data.mask[0, 0] = True

    def test_roles_and_indices(self):
        values = np.zeros((2, 3))
        data = IncompleteDataset(
            values, np.zeros((2, 3), bool), ("a", "b", "c"), ("predictor", "outcome", "auxiliary")
        )
        assert data.outcome_index == 1
        assert data.predictor_indices == (0,)
        assert data.auxiliary_indices == (2,)
        assert data.y_missing.tolist() == [False, False]

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            IncompleteDataset(np.zeros((2, 2)), np.zeros((3, 2), bool), ("a", "b"), ("predictor", "outcome"))

    def test_exactly_one_outcome_required(self):
        values = np.zeros((2, 2))
        mask = np.zeros((2, 2), bool)
        with pytest.raises(ValidationError):
            IncompleteDataset(values, mask, ("a", "b"), ("predictor", "predictor"))
        with pytest.raises(ValidationError):
            IncompleteDataset(values, mask, ("a", "b"), ("outcome", "outcome"))

    def test_minimum_size(self):
        with pytest.raises(ValidationError):
            IncompleteDataset(np.zeros((2, 1)), np.zeros((2, 1), bool), ("a",), ("outcome",))
        with pytest.raises(ValidationError):
            IncompleteDataset(np.zeros((0, 2)), np.zeros((0, 2), bool), ("a", "b"), ("predictor", "outcome"))

    def test_unmasked_nan_rejected(self):
        values = np.array([[1.0, np.nan], [3.0, 4.0]])
        with pytest.raises(ValidationError):
            IncompleteDataset(values, np.zeros((2, 2), bool), ("a", "b"), ("predictor", "outcome"))

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValidationError):
            IncompleteDataset(np.zeros((2, 2)), np.zeros((2, 2), bool), ("a", "a"), ("predictor", "outcome"))

    def test_subset_rows(self):
        data = toy_dataset()
        sub = data.subset_rows(np.array([True, False, True]))
        assert sub.n_rows == 2
        assert sub.column_names == data.column_names
        assert np.array_equal(sub.values[:, 0], [1.0, 5.0])


class TestMvnParams:
    def test_valid(self):
        params = MvnParams([0.0, 1.0], [[2.0, 0.5], [0.5, 1.0]])
        assert params.k == 2

    def test_asymmetric_rejected(self):
        sigma = np.array([[1.0, 0.5 + 1e-6], [0.5, 1.0]])
        with pytest.raises(ValidationError):
            MvnParams([0.0, 0.0], sigma)

    def test_tiny_asymmetry_tolerated(self):
        sigma = np.array([[1.0, 0.5 + 1e-12], [0.5, 1.0]])
        MvnParams([0.0, 0.0], sigma)

    def test_not_positive_definite_rejected(self):
        with pytest.raises(ValidationError):
            MvnParams([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(ValidationError):
            MvnParams([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])


class TestImputationSet:
    def build(self, completed=None):
        data = toy_dataset()
        if completed is None:
            completed = np.stack([data.values, data.values])
            completed[:, 1, 1] = [7.0, 8.0]
        return ImputationSet(data, completed, ImputationMeta(1, 10, 3))

    def test_valid_and_properties(self):
        imps = self.build()
        assert imps.m == 2
        assert imps.y_imputed.tolist() == [False, True, False]
        assert np.array_equal(imps.original_mask, imps.source.mask)

    def test_observed_cells_must_match(self):
        data = toy_dataset()
        completed = np.stack([data.values, data.values])
        completed[:, 1, 1] = [7.0, 8.0]
        completed[0, 0, 0] = 99.0
        with pytest.raises(ValidationError):
            ImputationSet(data, completed, ImputationMeta(1, 10, 3))

    def test_needs_two_copies(self):
        data = toy_dataset()
        completed = np.stack([data.values])
        completed[:, 1, 1] = 7.0
        with pytest.raises(ValidationError):
            ImputationSet(data, completed, ImputationMeta(1, 10, 3))

    def test_no_missing_cells_allowed(self):
        data = toy_dataset()
        completed = np.stack([data.values, data.values])
        with pytest.raises(ValidationError):
            ImputationSet(data, completed, ImputationMeta(1, 10, 3))


class TestExperimentCell:
    def test_valid(self):
        cell = ExperimentCell(n=50, rho12=0.5, r2=0.5, p=0.2, pattern="mcar", m=2, d=10)
        assert cell.seed is None
        assert cell.with_seed(3).seed == 3

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(rho12=1.0),
            dict(rho12=-1.0),
            dict(r2=0.0),
            dict(r2=1.0),
            dict(p=-0.1),
            dict(p=0.6),
            dict(pattern="other"),
            dict(m=1),
            dict(d=0),
            dict(rho_yz=1.0),
            dict(rho_yz=-0.2),
            dict(n=0),
        ],
    )
    def test_invalid(self, kwargs):
        base = dict(n=50, rho12=0.5, r2=0.5, p=0.2, pattern="mcar", m=2, d=10)
        base.update(kwargs)
        with pytest.raises(ValidationError):
            ExperimentCell(**base)
