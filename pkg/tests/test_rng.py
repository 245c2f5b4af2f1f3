import numpy as np

from vecpomdp.rng import RowRng


def test_identical_inputs_identical_outputs():
    a = RowRng.from_seed(42).derive(3, 5).uniform(np.arange(100))
    b = RowRng.from_seed(42).derive(3, 5).uniform(np.arange(100))
    np.testing.assert_array_equal(a, b)


def test_batch_width_does_not_change_row_draws():
    rng = RowRng.from_seed(9).derive(1)
    small = rng.uniform(np.arange(4))
    large = rng.uniform(np.arange(4096))
    np.testing.assert_array_equal(small, large[:4])
    small2 = rng.uniform(np.arange(4), k=3)
    large2 = rng.uniform(np.arange(4096), k=3)
    np.testing.assert_array_equal(small2, large2[:4])


def test_different_sites_and_rows_decorrelated():
    rng = RowRng.from_seed(0)
    a = rng.derive(1).uniform(np.arange(10_000))
    b = rng.derive(2).uniform(np.arange(10_000))
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.05
    assert not np.array_equal(a, b)


def test_uniform_range_and_mean():
    u = RowRng.from_seed(5).derive(0).uniform(np.arange(200_000))
    assert u.min() >= 0.0 and u.max() < 1.0
    # mean of U(0,1): se = 1/sqrt(12 n)
    assert abs(u.mean() - 0.5) < 3.0 / np.sqrt(12 * len(u))


def test_normal_moments():
    z = RowRng.from_seed(5).derive(0).normal(np.arange(200_000))
    n = len(z)
    assert abs(z.mean()) < 3.0 / np.sqrt(n)
    assert abs(z.std() - 1.0) < 3.0 / np.sqrt(2 * n)
    assert np.all(np.isfinite(z))


def test_derive_rejects_negative_words():
    import pytest

    with pytest.raises(ValueError):
        RowRng.from_seed(1).derive(-1)


def test_bound_rng_carries_rows():
    rng = RowRng.from_seed(3).derive(7)
    bound = rng.bind([5, 6])
    np.testing.assert_array_equal(bound.uniform(), rng.uniform(np.array([5, 6])))
    assert len(bound) == 2


def test_uniform1_matches_row_zero():
    rng = RowRng.from_seed(12).derive(4)
    assert rng.uniform1() == rng.uniform(np.array([0]))[0]
