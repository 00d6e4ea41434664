import numpy as np
import pytest

from ncconv.core.gradcheck import numerical_gradient, relative_error
from ncconv.core.im2col import unfold, unfold_batch
from ncconv.core.nc_conv import (
    affine,
    conv_backward,
    conv_forward,
    gemm_columns,
    init_layer_state,
    naive_conv,
    nc_backward,
    nc_forward,
    standardize,
    standardize_backward,
    standardize_columns,
)
from ncconv.core.parallel import get_num_threads, set_num_threads
from ncconv.core.tensor import make_rng
from ncconv.data_types import NcLayerState
from ncconv.errors import DimensionError, StateError

from .conftest import geometry


def layer(weights, gamma=None, beta=None, epsilon=1e-5) -> NcLayerState:
    weights = np.asarray(weights, dtype=np.float64)
    out = weights.shape[0]
    return NcLayerState(
        weights=weights,
        gamma=np.ones(out) if gamma is None else np.asarray(gamma, dtype=np.float64),
        beta=np.zeros(out) if beta is None else np.asarray(beta, dtype=np.float64),
        epsilon=epsilon,
    )


class TestStandardize:

    def test_hand_column(self):
        xhat, stats = standardize(np.array([[1.0], [2.0], [3.0]]), 1e-12)
        np.testing.assert_allclose(xhat[:, 0], [-1.224744871391589, 0.0, 1.224744871391589], rtol=1e-10)
        np.testing.assert_allclose(stats.mu, [2.0])
        np.testing.assert_allclose(stats.sigma, [0.816496580927726], rtol=1e-12)

    @pytest.mark.parametrize("value", [0.1, 0.7, -3.3])
    @pytest.mark.parametrize("dtype", [np.float64, np.float32])
    @pytest.mark.parametrize("eps", [1e-5, 1e-8])
    def test_constant_column(self, value, dtype, eps):
        xhat, stats = standardize(np.full((27, 2), value, dtype=dtype), eps)
        np.testing.assert_array_equal(xhat, np.zeros((27, 2)))
        np.testing.assert_array_equal(stats.sigma, 0.0)
        np.testing.assert_array_equal(stats.mu, np.full(2, value, dtype=dtype))
        assert xhat.dtype == dtype

    def test_constant_patch_next_to_varying_one(self, rng):
        columns = np.column_stack([np.full(9, 0.7), rng.standard_normal(9)])
        xhat, stats = standardize(columns, 1e-5)
        np.testing.assert_array_equal(xhat[:, 0], 0.0)
        assert stats.sigma[1] > 0
        np.testing.assert_allclose(xhat[:, 1], (columns[:, 1] - columns[:, 1].mean()) / (columns[:, 1].std() + 1e-5))

    def test_repeated_values_in_varying_column_are_kept(self):
        xhat, _ = standardize(np.array([[1.0], [2.0], [1.0]]), 0.0)
        np.testing.assert_allclose(xhat[:, 0], [-0.7071067811865476, 1.4142135623730951, -0.7071067811865476])

    def test_fixed_point(self):
        column = np.array([[-1.0], [1.0]])
        xhat, _ = standardize(column, 1e-12)
        np.testing.assert_allclose(xhat, column, atol=1e-11)

    def test_squared_norm_equals_patch_size(self, rng):
        columns = 3.0 * rng.standard_normal((4, 27, 50)) + 1.5
        xhat, _ = standardize(columns, 0.0)
        np.testing.assert_allclose((xhat * xhat).sum(axis=-2), 27.0, rtol=1e-9)

    def test_shift_invariance(self, rng):
        g = geometry(2, 1, 3, h=6, w=6)
        x = rng.standard_normal((1, 2, 6, 6))
        base, _ = standardize(unfold_batch(x, g), 1e-5)
        shifted, _ = standardize(unfold_batch(x + 3.25, g), 1e-5)
        np.testing.assert_allclose(shifted, base, atol=1e-10)

    @pytest.mark.parametrize("scale", [0.5, 3.0])
    def test_scale_invariance_as_eps_vanishes(self, rng, scale):
        columns = rng.standard_normal((9, 20))
        base, _ = standardize(columns, 1e-12)
        scaled, _ = standardize(scale * columns, 1e-12)
        np.testing.assert_allclose(scaled, base, atol=1e-9)

    def test_im2col_matrix_wrapper(self, rng):
        g = geometry(1, 1, 2, h=3, w=3)
        m = unfold(rng.standard_normal((1, 1, 3, 3)), g)[0]
        standardized, stats = standardize_columns(m, 1e-5)
        assert standardized.geometry == g and standardized.data.shape == (4, 4)
        np.testing.assert_array_equal(standardized.data, standardize(m.data, 1e-5)[0])
        assert stats.denom.shape == (g.num_columns,)


class TestStandardizeBackward:

    def test_matches_finite_differences(self, rng):
        columns = rng.standard_normal((9, 6))
        upstream = rng.standard_normal((9, 6))
        xhat, stats = standardize(columns, 1e-5)
        analytic = standardize_backward(upstream, columns, stats)
        numeric = numerical_gradient(lambda: float(np.sum(upstream * standardize(columns, 1e-5)[0])), columns)
        assert relative_error(analytic, numeric) < 1e-7

    def test_constant_column_is_finite(self, rng):
        # for a constant column the centered part vanishes; the gradient is (g - mean g) / eps
        eps = 1e-2
        columns = np.full((4, 1), 0.5)
        upstream = rng.standard_normal((4, 1))
        _, stats = standardize(columns, eps)
        analytic = standardize_backward(upstream, columns, stats)
        assert np.all(np.isfinite(analytic))
        np.testing.assert_allclose(analytic, (upstream - upstream.mean()) / eps, rtol=1e-12)
        numeric = numerical_gradient(lambda: float(np.sum(upstream * standardize(columns, eps)[0])), columns, 1e-8)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-7)


class TestNcForward:

    def test_hand_example(self):
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        g = geometry(1, 1, 2, h=2, w=2)
        y = nc_forward(x, layer([[1.0, 0.0, 0.0, 0.0]], epsilon=1e-12), g)
        np.testing.assert_allclose(y.ravel(), [-1.3416407864998738], rtol=1e-10)
        y = nc_forward(x, layer([[1.0, 0.0, 0.0, 0.0]], gamma=[2.0], beta=[1.0], epsilon=1e-12), g)
        np.testing.assert_allclose(y.ravel(), [-1.6832815729997477], rtol=1e-10)

    def test_constant_filter_gives_zero(self, rng):
        g = geometry(3, 2, 3, s=2, p=1, h=7, w=7)
        y = nc_forward(rng.standard_normal((2, 3, 7, 7)), layer(np.ones((2, 27))), g)
        np.testing.assert_allclose(y, 0.0, atol=1e-10)

    @pytest.mark.parametrize("dtype", [np.float64, np.float32])
    def test_constant_image_gives_beta(self, rng, dtype):
        g = geometry(3, 2, 3, s=2, h=7, w=7)
        st = init_layer_state(g, rng, dtype)
        st.beta[:] = [0.25, -1.5]
        y = nc_forward(np.full((1, 3, 7, 7), 0.1, dtype=dtype), st, g)
        np.testing.assert_array_equal(y, np.broadcast_to(st.beta[:, np.newaxis, np.newaxis], y.shape[1:])[np.newaxis])

    def test_equals_explicit_standardize_then_gemm(self, rng):
        g = geometry(2, 3, 3, s=1, p=1, h=5, w=6)
        x = rng.standard_normal((2, 2, 5, 6))
        st = init_layer_state(g, rng)
        st.gamma[:] = [0.5, 2.0, -1.0]
        st.beta[:] = [0.1, 0.0, 3.0]
        xhat, _ = standardize(unfold_batch(x, g), st.epsilon)
        expected = affine(gemm_columns(xhat, st), st).reshape(2, 3, 5, 6)
        np.testing.assert_array_equal(nc_forward(x, st, g), expected)

    def test_patch_size_one_warns(self, rng):
        with pytest.warns(RuntimeWarning, match="patch size 1"):
            st = init_layer_state(geometry(1, 2, 1), rng)
        y = nc_forward(rng.standard_normal((1, 1, 5, 5)), st, geometry(1, 2, 1))
        np.testing.assert_array_equal(y, 0.0)

    def test_weight_mismatch(self, rng):
        with pytest.raises(DimensionError):
            gemm_columns(np.zeros((1, 4, 3)), layer(np.zeros((2, 5))))


class TestStandardConv:

    @pytest.mark.parametrize("index", range(10))
    def test_matches_naive_loops(self, index):
        rng = make_rng(100, index)
        k = int(rng.choice([1, 2, 3]))
        g = geometry(
            int(rng.integers(1, 4)), int(rng.integers(1, 4)), k,
            s=int(rng.integers(1, 3)), p=int(rng.integers(0, 2)), h=8, w=int(rng.integers(6, 9)),
        )
        x = rng.standard_normal((1, g.in_channels, *g.input_size))
        st = init_layer_state(g, rng, normalized=False)
        np.testing.assert_allclose(conv_forward(x, st, g), naive_conv(x, st.weights, g), atol=1e-10)

    def test_unit_pointwise_kernel_is_identity(self, rng):
        x = rng.standard_normal((2, 1, 4, 4))
        np.testing.assert_array_equal(conv_forward(x, layer([[1.0]]), geometry(1, 1, 1, h=4, w=4)), x)

    def test_nc_is_conv_on_standardized_input(self, rng):
        g = geometry(1, 2, 2, s=2, h=4, w=4)
        x = rng.standard_normal((1, 1, 4, 4))
        st = init_layer_state(g, rng)
        # non-overlapping patches: standardizing each patch in image space is the same as per column
        xhat, _ = standardize(unfold_batch(x, g), st.epsilon)
        patches = xhat[0].reshape(2, 2, 2, 2).transpose(2, 0, 3, 1).reshape(1, 1, 4, 4)
        np.testing.assert_array_equal(conv_forward(patches, st, g), nc_forward(x, st, g))


BACKWARD_GEOMETRIES = [
    (k, s, p, seed)
    for k in (1, 3)
    for s in (1, 2)
    for p in (0, 1)
    for seed in range(3)
]


class TestBackward:

    @pytest.mark.parametrize("normalized", [True, False])
    @pytest.mark.parametrize("k,s,p,seed", BACKWARD_GEOMETRIES)
    def test_matches_finite_differences(self, normalized, k, s, p, seed):
        rng = make_rng(500, k, s, p, seed)
        c = int(rng.integers(3, 5)) if k == 1 else int(rng.integers(2, 4))
        o = int(rng.integers(1, 4))
        h, w = int(rng.integers(k + 2, k + 5)), int(rng.integers(k + 2, k + 5))
        g = geometry(c, o, k, s=s, p=p, h=h, w=w)
        st = init_layer_state(g, rng, normalized=normalized)
        st.gamma[:] = rng.uniform(0.5, 1.5, o)
        st.beta[:] = rng.standard_normal(o)
        x = rng.standard_normal((int(rng.integers(1, 3)), c, h, w))
        forward = nc_forward if normalized else conv_forward
        backward = nc_backward if normalized else conv_backward
        upstream = rng.standard_normal(forward(x, st, g).shape)
        grads = backward(upstream, st, g)

        def loss() -> float:
            return float(np.sum(upstream * forward(x, st, g)))

        for analytic, value in zip(grads, (x, st.weights, st.gamma, st.beta)):
            assert relative_error(analytic, numerical_gradient(loss, value)) < 1e-6

    def test_zero_upstream_gradient(self, rng):
        g = geometry(2, 3, 3, p=1)
        st = init_layer_state(g, rng)
        y = nc_forward(rng.standard_normal((2, 2, 5, 5)), st, g)
        for grad in nc_backward(np.zeros_like(y), st, g):
            np.testing.assert_array_equal(grad, 0.0)

    def test_missing_cache(self, rng):
        g = geometry(2, 3, 3)
        with pytest.raises(StateError):
            nc_backward(np.zeros((1, 3, 3, 3)), init_layer_state(g, rng), g)

    def test_cache_from_other_kind(self, rng):
        g = geometry(2, 3, 3)
        st = init_layer_state(g, rng)
        y = conv_forward(rng.standard_normal((1, 2, 5, 5)), st, g)
        with pytest.raises(StateError):
            nc_backward(np.ones_like(y), st, g)

    def test_stale_cache(self, rng):
        g = geometry(2, 3, 3)
        st = init_layer_state(g, rng)
        nc_forward(rng.standard_normal((1, 2, 5, 5)), st, g)
        with pytest.raises(StateError):
            nc_backward(np.ones((2, 3, 3, 3)), st, g)


class TestThreads:

    @pytest.fixture(autouse=True)
    def restore_threads(self):
        previous = get_num_threads()
        yield
        set_num_threads(previous)

    def run(self, threads: int):
        set_num_threads(threads)
        rng = make_rng(77)
        g = geometry(3, 4, 3, s=2, p=1, h=9, w=8)
        st = init_layer_state(g, rng)
        x = rng.standard_normal((6, 3, 9, 8))
        y = nc_forward(x, st, g)
        return (y, *nc_backward(rng.standard_normal(y.shape), st, g))

    def test_outputs_do_not_depend_on_thread_count(self):
        single = self.run(1)
        for threads in (2, 4):
            for a, b in zip(single, self.run(threads)):
                np.testing.assert_array_equal(a, b)
