import numpy as np
import pytest

from ncconv.core.nc_conv import standardize
from ncconv.core.tensor import make_rng, matmul, randn, reduce_stats, resolve_dtype
from ncconv.errors import DimensionError, NcConvError


class TestMatmul:

    def test_identity(self):
        b = np.array([[3.0, 4.0], [5.0, 6.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), b), b)

    def test_hand_product(self):
        np.testing.assert_array_equal(matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]])), [[11.0]])

    def test_zeros(self, rng):
        np.testing.assert_array_equal(matmul(np.zeros((2, 3)), rng.standard_normal((3, 2))), np.zeros((2, 2)))

    def test_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.zeros((2, 3)), np.zeros((2, 2)))


class TestRandn:

    def test_zero_std_is_constant(self):
        t = randn((3, 4), make_rng(0), mean=2.5, std=0.0)
        np.testing.assert_array_equal(t, np.full((3, 4), 2.5))

    def test_same_seed_same_stream(self):
        np.testing.assert_array_equal(randn((5, 5), make_rng(7)), randn((5, 5), make_rng(7)))

    def test_derived_streams_differ(self):
        assert not np.array_equal(randn((5,), make_rng(7, 0)), randn((5,), make_rng(7, 1)))

    def test_sample_mean_within_clt_bound(self):
        samples = randn((10 ** 6,), make_rng(1))
        assert abs(samples.mean()) < 4.0 / np.sqrt(10 ** 6)

    def test_element_type_does_not_change_stream(self):
        a = randn((4,), make_rng(3), dtype=np.float32)
        b = randn((4,), make_rng(3), dtype=np.float64)
        assert a.dtype == np.float32
        np.testing.assert_array_equal(a, b.astype(np.float32))

    def test_negative_std_rejected(self):
        with pytest.raises(NcConvError):
            randn((2,), make_rng(0), std=-1.0)


class TestReduceStats:

    def test_population_variance(self):
        mean, var = reduce_stats(np.array([1.0, 2.0, 3.0]), 0)
        assert mean == 2.0
        np.testing.assert_allclose(var, 2.0 / 3.0, rtol=1e-15)

    def test_constant_and_singleton(self):
        mean, var = reduce_stats(np.array([4.0, 4.0, 4.0]), 0)
        assert (mean, var) == (4.0, 0.0)
        mean, var = reduce_stats(np.array([-1.5]), 0)
        assert (mean, var) == (-1.5, 0.0)

    @pytest.mark.parametrize("axis", [0, 1, (0, 2), (1, 2)])
    def test_matches_second_moment_form(self, rng, axis):
        t = rng.standard_normal((4, 9, 7))
        mean, var = reduce_stats(t, axis)
        np.testing.assert_allclose(var, (t * t).mean(axis=axis) - mean * mean, atol=1e-12)
        np.testing.assert_allclose(mean, t.mean(axis=axis), atol=1e-15)

    def test_empty_axis_rejected(self):
        with pytest.raises(DimensionError):
            reduce_stats(np.zeros((3, 0)), 1)
        with pytest.raises(DimensionError):
            reduce_stats(np.zeros((3,)), 2)


def test_unknown_element_type():
    assert resolve_dtype("float64") == np.float64
    with pytest.raises(NcConvError, match="float16"):
        resolve_dtype("float16")


class TestInputsUntouched:

    def test_matmul(self, rng):
        a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2))
        a_before, b_before = a.copy(), b.copy()
        matmul(a, b)
        np.testing.assert_array_equal(a, a_before)
        np.testing.assert_array_equal(b, b_before)

    def test_reduce_stats(self, rng):
        t = rng.standard_normal((5, 6))
        before = t.copy()
        reduce_stats(t, (0, 1))
        np.testing.assert_array_equal(t, before)

    def test_standardize(self, rng):
        columns = np.vstack([rng.standard_normal((8, 4)), np.full((1, 4), 2.0)])
        before = columns.copy()
        standardize(columns, 1e-5)
        np.testing.assert_array_equal(columns, before)
