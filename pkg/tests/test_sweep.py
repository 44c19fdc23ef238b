import numpy as np
import pytest

from midlab import SingularPivotError, ValidationError, reverse_sweep, sweep


def random_spd(rng, k):
    a = rng.standard_normal((k, k + 2))
    return a @ a.T / (k + 2) + 0.05 * np.eye(k)


def test_hand_example_single_pivot():
    a = [[2.0, 1.0], [1.0, 2.0]]
    expected = [[-0.5, 0.5], [0.5, 1.5]]
    assert np.allclose(sweep(a, [0]), expected, atol=1e-12)


def test_sweep_then_reverse_restores():
    rng = np.random.default_rng(7)
    for k in (2, 3, 5, 6):
        a = random_spd(rng, k)
        pivots = rng.choice(k, size=rng.integers(1, k + 1), replace=False)
        restored = reverse_sweep(sweep(a, pivots), pivots)
        assert np.max(np.abs(restored - a)) < 1e-10


def test_full_sweep_of_identity_is_negated_identity():
    k = 4
    out = sweep(np.eye(k), range(k))
    assert np.array_equal(out, -np.eye(k))


def test_full_sweep_is_negative_inverse():
    rng = np.random.default_rng(11)
    for k in (2, 3, 4):
        a = random_spd(rng, k)
        assert np.allclose(sweep(a, range(k)), -np.linalg.inv(a), atol=1e-9)


def test_nonpositive_pivot_raises():
    with pytest.raises(SingularPivotError):
        sweep([[0.0, 0.0], [0.0, 1.0]], [0])
    with pytest.raises(SingularPivotError):
        sweep([[-1.0, 0.0], [0.0, 1.0]], [0])


def test_dependent_pivot_block_raises():
    # Second pivot becomes zero after the first sweep: singular pivot block.
    a = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularPivotError):
        sweep(a, [0, 1])


def test_pivot_validation():
    a = np.eye(3)
    with pytest.raises(ValidationError):
        sweep(a, [0, 0])
    with pytest.raises(ValidationError):
        sweep(a, [3])
    with pytest.raises(ValidationError):
        sweep(np.ones((2, 3)), [0])


def test_input_not_mutated():
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    before = a.copy()
    sweep(a, [0])
    reverse_sweep(a, [0])
    assert np.array_equal(a, before)
