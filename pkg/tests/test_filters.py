import numpy as np
import pytest

from freqfilter.filters import (
    FilterModuleState,
    PointwiseLinear,
    SpectralKernel,
    blend_with_original,
    filter_backward,
    filter_forward,
    moving_average,
    zero_gradients,
)
from freqfilter.spectral import Spectrum, circular_convolve, irfft
from freqfilter.tensor import ComplexPlane

from numgrad import central_difference, max_relative_error


class TestMovingAverage:
    def test_constant_sequence_unchanged(self):
        x = np.full(9, 4.2)
        for window in (1, 3, 5, 20):
            np.testing.assert_allclose(moving_average(x, window), x, atol=1e-12)

    def test_hand_evaluated_impulse(self):
        x = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
        expected = np.array([0.0, 0.0, 0.0, 0.25, 0.2, 0.2, 0.2])
        np.testing.assert_allclose(moving_average(x, 5), expected, atol=1e-12)

    def test_window_one_is_identity(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(11)
        np.testing.assert_array_equal(moving_average(x, 1), x)

    def test_window_zero_rejected(self):
        with pytest.raises(ValueError, match="window"):
            moving_average(np.ones(4), 0)

    def test_output_stays_in_input_range(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = rng.standard_normal(rng.integers(1, 200)) * 50
            y = moving_average(x, int(rng.integers(1, 12)))
            assert y.min() >= x.min() - 1e-12
            assert y.max() <= x.max() + 1e-12

    def test_applies_along_requested_axis(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((3, 10, 2))
        y = moving_average(x, 4, time_axis=1)
        for v in range(3):
            for f in range(2):
                np.testing.assert_allclose(y[v, :, f], moving_average(x[v, :, f], 4), atol=1e-12)


class TestBlend:
    def test_idempotent_on_equal_inputs(self):
        x = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(blend_with_original(x, x), x)

    def test_arithmetic_mean(self):
        np.testing.assert_array_equal(blend_with_original([0.0, 2.0], [2.0, 0.0]), [1.0, 1.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            blend_with_original(np.zeros(3), np.zeros(4))

    def test_reduces_peak_deviation_on_spike(self):
        x = np.full(20, 10.0)
        x[12] = 25.0  # one-step spike on a constant level
        blended = blend_with_original(x, moving_average(x, 5))
        assert np.max(np.abs(blended - 10.0)) < np.max(np.abs(x - 10.0))


def identity_module(n, d):
    return FilterModuleState.initialize(n, d, d)


class TestFilterForward:
    def test_identity_kernel_identity_lift_is_passthrough(self):
        rng = np.random.default_rng(3)
        state = identity_module(12, 2)
        x = rng.standard_normal((12, 2))
        np.testing.assert_allclose(filter_forward(state, x), x, atol=1e-9)

    def test_zero_kernel_annihilates(self):
        rng = np.random.default_rng(4)
        state = identity_module(8, 2)
        state.kernel.k_re[...] = 0.0
        x = rng.standard_normal((8, 2))
        np.testing.assert_allclose(filter_forward(state, x), np.zeros((8, 2)), atol=1e-12)

    def test_matches_circular_convolution_with_time_kernel(self):
        rng = np.random.default_rng(5)
        n, d = 8, 3
        state = identity_module(n, d)
        state.kernel.k_re[...] = rng.standard_normal(state.kernel.k_re.shape)
        state.kernel.k_im[...] = rng.standard_normal(state.kernel.k_im.shape)
        state.kernel.enforce_pins()
        x = rng.standard_normal((n, d))
        y = filter_forward(state, x)
        for c in range(d):
            time_kernel = irfft(
                Spectrum(ComplexPlane(state.kernel.k_re[:, c], state.kernel.k_im[:, c]), n)
            )
            expected = circular_convolve(x[:, c], time_kernel)
            np.testing.assert_allclose(y[:, c], expected, atol=1e-8)

    def test_shape_mismatch_names_expected_dims(self):
        state = identity_module(8, 2)
        with pytest.raises(ValueError, match=r"\(8, 2\)"):
            filter_forward(state, np.zeros((9, 2)))

    def test_output_is_real_and_finite_for_random_kernels(self):
        rng = np.random.default_rng(6)
        for n in (2, 7, 12):
            state = identity_module(n, 2)
            state.kernel.k_re[...] = rng.standard_normal(state.kernel.k_re.shape)
            state.kernel.k_im[...] = rng.standard_normal(state.kernel.k_im.shape)
            state.kernel.enforce_pins()
            y = filter_forward(state, rng.standard_normal((n, 2)))
            assert y.dtype == np.float64
            assert np.all(np.isfinite(y))

    @pytest.mark.parametrize("n", list(range(2, 33)))
    def test_convolution_equivalence_across_window_lengths(self, n):
        rng = np.random.default_rng(n + 300)
        state = identity_module(n, 1)
        state.kernel.k_re[...] = rng.standard_normal(state.kernel.k_re.shape)
        state.kernel.k_im[...] = rng.standard_normal(state.kernel.k_im.shape)
        state.kernel.enforce_pins()
        x = rng.standard_normal((n, 1))
        y = filter_forward(state, x)
        time_kernel = irfft(Spectrum(ComplexPlane(state.kernel.k_re[:, 0], state.kernel.k_im[:, 0]), n))
        np.testing.assert_allclose(y[:, 0], circular_convolve(x[:, 0], time_kernel), atol=1e-8)


def random_module(rng, n=8, features=2, width=3):
    state = FilterModuleState.initialize(n, features, width, rng=rng)
    state.lift.weight[...] = rng.normal(0, 0.8, state.lift.weight.shape)
    state.lift.bias[...] = rng.normal(0, 0.3, state.lift.bias.shape)
    state.kernel.k_re[...] = rng.normal(0, 0.8, state.kernel.k_re.shape)
    state.kernel.k_im[...] = rng.normal(0, 0.8, state.kernel.k_im.shape)
    state.kernel.enforce_pins()
    return state


class TestFilterBackward:
    def test_zero_gradient_in_zero_gradient_out(self):
        rng = np.random.default_rng(7)
        state = random_module(rng)
        x = rng.standard_normal((8, 2))
        filter_forward(state, x)
        grad_x = filter_backward(state, np.zeros((8, 3)))
        np.testing.assert_array_equal(grad_x, np.zeros((8, 2)))
        for slot in state.parameters():
            np.testing.assert_array_equal(slot.grad, np.zeros_like(slot.grad))

    def test_finite_difference_check_all_parameters_and_inputs(self):
        rng = np.random.default_rng(8)
        state = random_module(rng)
        x = rng.standard_normal((8, 2))
        weights = rng.standard_normal((8, 3))

        def loss():
            return float(np.sum(weights * filter_forward(state, x, cache=False)))

        zero_gradients(state)
        filter_forward(state, x)
        grad_x = filter_backward(state, weights)

        for slot in state.parameters():
            numeric = central_difference(loss, slot.value, skip_mask=slot.pin_mask)
            assert max_relative_error(slot.grad, numeric) < 1e-4, slot.name
        numeric_x = central_difference(loss, x)
        assert max_relative_error(grad_x, numeric_x) < 1e-4

    def test_identity_map_sum_loss_gives_unit_input_gradient(self):
        # identity lift and all-ones kernel make the module an identity map,
        # so d(sum of outputs)/dx is all ones; cross-checked by differences.
        state = identity_module(8, 2)
        rng = np.random.default_rng(9)
        x = rng.standard_normal((8, 2))
        filter_forward(state, x)
        grad_x = filter_backward(state, np.ones((8, 2)))
        np.testing.assert_allclose(grad_x, np.ones((8, 2)), atol=1e-9)

        def loss():
            return float(np.sum(filter_forward(state, x, cache=False)))

        numeric = central_difference(loss, x)
        assert max_relative_error(grad_x, numeric) < 1e-4

    def test_backward_without_forward_rejected(self):
        state = identity_module(4, 1)
        with pytest.raises(RuntimeError, match="forward"):
            filter_backward(state, np.zeros((4, 1)))


class TestZeroGradients:
    def test_fresh_state_has_zero_buffers(self):
        state = identity_module(6, 2)
        for slot in state.parameters():
            np.testing.assert_array_equal(slot.grad, np.zeros_like(slot.grad))

    def test_zeroing_after_backward(self):
        rng = np.random.default_rng(10)
        state = random_module(rng)
        x = rng.standard_normal((8, 2))
        filter_forward(state, x)
        filter_backward(state, rng.standard_normal((8, 3)))
        zero_gradients(state)
        for slot in state.parameters():
            np.testing.assert_array_equal(slot.grad, np.zeros_like(slot.grad))

    def test_accumulation_is_sum_of_single_passes(self):
        rng = np.random.default_rng(11)
        state = random_module(rng)
        x1, x2 = rng.standard_normal((8, 2)), rng.standard_normal((8, 2))
        g1, g2 = rng.standard_normal((8, 3)), rng.standard_normal((8, 3))

        def grads_after(passes):
            zero_gradients(state)
            for x, g in passes:
                filter_forward(state, x)
                filter_backward(state, g)
            return [slot.grad.copy() for slot in state.parameters()]

        combined = grads_after([(x1, g1), (x2, g2)])
        first = grads_after([(x1, g1)])
        second = grads_after([(x2, g2)])
        for c, a, b in zip(combined, first, second):
            np.testing.assert_allclose(c, a + b, atol=1e-12)


class TestKernelInvariants:
    def test_pinned_rows_for_even_and_odd_windows(self):
        even = SpectralKernel(8, 2)
        assert even.pinned_rows == (0, 4)
        odd = SpectralKernel(7, 2)
        assert odd.pinned_rows == (0,)

    def test_identity_initialization(self):
        k = SpectralKernel(10, 3)
        np.testing.assert_array_equal(k.k_re, np.ones((6, 3)))
        np.testing.assert_array_equal(k.k_im, np.zeros((6, 3)))

    def test_batched_forward_matches_per_window(self):
        rng = np.random.default_rng(12)
        state = random_module(rng)
        batch = rng.standard_normal((4, 8, 2))
        out = filter_forward(state, batch, cache=False)
        for i in range(4):
            np.testing.assert_allclose(out[i], filter_forward(state, batch[i], cache=False), atol=1e-12)


def test_pointwise_linear_backward_matches_differences():
    rng = np.random.default_rng(13)
    layer = PointwiseLinear(rng.standard_normal((3, 2)), rng.standard_normal(2))
    x = rng.standard_normal((5, 3))
    w = rng.standard_normal((5, 2))

    def loss():
        return float(np.sum(w * layer.forward(x, cache=False)))

    layer.zero_grad()
    layer.forward(x)
    grad_x = layer.backward(w)
    assert max_relative_error(layer.g_weight, central_difference(loss, layer.weight)) < 1e-4
    assert max_relative_error(layer.g_bias, central_difference(loss, layer.bias)) < 1e-4
    assert max_relative_error(grad_x, central_difference(loss, x)) < 1e-4
