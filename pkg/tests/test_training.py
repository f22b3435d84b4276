import numpy as np
import pytest

from freqfilter.data_io import SyntheticConfig, fit_normalization, generate_synthetic
from freqfilter.filters import SpectralKernel
from freqfilter.predictors import CopyLastStepPredictor, FilterPredictorState, rolling_evaluate
from freqfilter.tensor import TimeSeriesTensor, slice_window
from freqfilter.training import (
    Adam,
    TrainConfig,
    TrainingDivergedError,
    adam_step,
    evaluate_loss,
    mae_loss,
    make_windows,
    train,
)

from numgrad import central_difference, max_relative_error


def toy_series(n_steps, n_nodes=1, seed=0):
    rng = np.random.default_rng(seed)
    values = rng.normal(50.0, 5.0, (n_nodes, n_steps, 1))
    return TimeSeriesTensor(values, tuple(f"n{i}" for i in range(n_nodes)))


class TestMakeWindows:
    def test_minimal_series_single_split(self):
        series = toy_series(7)
        ds = make_windows(series, 4, 3, (1.0, 0.0, 0.0))
        assert ds.n_windows("train") == 1
        assert ds.n_windows("val") == 0
        assert ds.n_windows("test") == 0

    def test_window_count_formula(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            h = int(rng.integers(1, 6))
            t = int(rng.integers(1, 6))
            length = int(rng.integers(h + t, h + t + 30))
            series = toy_series(length)
            ds = make_windows(series, h, t, (1.0, 0.0, 0.0))
            # enumerate valid anchors by hand
            expected = sum(1 for a in range(length) if a + h + t <= length)
            assert ds.n_windows("train") == expected == length - h - t + 1

    def test_chronological_split_order(self):
        series = toy_series(200)
        ds = make_windows(series, 6, 3, (0.5, 0.2, 0.3))
        assert ds.split_anchors["train"].max() < ds.split_anchors["val"].min()
        assert ds.split_anchors["val"].max() < ds.split_anchors["test"].min()

    def test_no_window_straddles_a_split_boundary(self):
        series = toy_series(100)
        ds = make_windows(series, 5, 4, (0.6, 0.2, 0.2))
        for name, (start, stop) in ds.split_ranges.items():
            for anchor in ds.split_anchors[name]:
                assert start <= anchor
                assert anchor + 5 + 4 <= stop

    def test_targets_follow_history_immediately(self):
        series = toy_series(40)
        ds = make_windows(series, 5, 4, (1.0, 0.0, 0.0))
        hist, targ = ds.sample("train", 3)
        np.testing.assert_array_equal(hist, series.values[:, 3:8, :])
        np.testing.assert_array_equal(targ, series.values[:, 8:12, :])

    def test_insufficient_length_reports_requirement(self):
        series = toy_series(20)
        with pytest.raises(ValueError, match="at least 15"):
            make_windows(series, 10, 5, (0.5, 0.3, 0.2))

    def test_ratio_validation(self):
        series = toy_series(50)
        with pytest.raises(ValueError, match="sum to 1"):
            make_windows(series, 4, 2, (0.5, 0.2, 0.2))
        with pytest.raises(ValueError, match="non-negative"):
            make_windows(series, 4, 2, (1.2, -0.1, -0.1))


class TestMaeLoss:
    def test_zero_on_equal_inputs(self):
        x = np.arange(6.0).reshape(2, 3)
        loss, grad = mae_loss(x, x)
        assert loss == 0.0
        np.testing.assert_array_equal(grad, np.zeros_like(x))

    def test_single_element(self):
        loss, grad = mae_loss(np.array([2.0]), np.array([0.0]))
        assert loss == 2.0
        np.testing.assert_array_equal(grad, np.array([1.0]))

    def test_matches_finite_differences_away_from_ties(self):
        rng = np.random.default_rng(2)
        target = rng.standard_normal((4, 3))
        pred = target + rng.choice([-1.0, 1.0], size=(4, 3)) * rng.uniform(0.5, 2.0, (4, 3))
        _, grad = mae_loss(pred, target)

        def loss():
            return mae_loss(pred, target)[0]

        numeric = central_difference(loss, pred, eps=1e-6)
        assert max_relative_error(grad, numeric) < 1e-6

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            mae_loss(np.zeros(3), np.zeros(4))


class TestAdamStep:
    def test_zero_gradient_leaves_parameters_bitwise(self):
        param = np.array([1.25, -3.5])
        before = param.copy()
        m = np.zeros(2)
        v = np.zeros(2)
        adam_step(param, np.zeros(2), m, v, step=1, lr=0.1)
        np.testing.assert_array_equal(param, before)

    def test_first_step_closed_form(self):
        param = np.array([0.0])
        m = np.zeros(1)
        v = np.zeros(1)
        adam_step(param, np.array([1.0]), m, v, step=1, lr=0.1)
        assert abs(param[0] + 0.1) < 1e-8

    def test_non_finite_gradient_rejected(self):
        with pytest.raises(FloatingPointError):
            adam_step(np.zeros(1), np.array([np.nan]), np.zeros(1), np.zeros(1), step=1, lr=0.1)

    def test_pinned_imaginary_bins_survive_many_steps(self):
        rng = np.random.default_rng(3)
        kernel = SpectralKernel(8, 2)
        slots = kernel.parameters("k")
        opt = Adam(slots, lr=0.05)
        for _ in range(100):
            kernel.g_re[...] = rng.standard_normal(kernel.g_re.shape)
            kernel.g_im[...] = rng.standard_normal(kernel.g_im.shape)
            opt.step()
        rows = list(kernel.pinned_rows)
        np.testing.assert_array_equal(kernel.k_im[rows], np.zeros((len(rows), 2)))


def prepared_state(series, h=12, t=12, width=4, seed=0):
    ds = make_windows(series, h, t, (0.7, 0.1, 0.2))
    norm = fit_normalization(series, ds.split_ranges["train"])
    state = FilterPredictorState.initialize(h, t, series.n_features, width, norm, seed=seed)
    return state, ds


class TestTrain:
    def test_zero_learning_rate_is_a_no_op(self):
        series = generate_synthetic(SyntheticConfig(n_nodes=2, n_days=2, rng_seed=4))
        state, ds = prepared_state(series)
        before = [s.value.copy() for s in state.parameters()]
        cfg = TrainConfig(learning_rate=0.0, epochs=3, batch_size=64, seed=1)
        log = train(state, ds, cfg)
        for slot, saved in zip(state.parameters(), before):
            np.testing.assert_array_equal(slot.value, saved)
        vals = [entry[2] for entry in log.entries]
        assert all(v == vals[0] for v in vals)

    def test_epoch_zero_val_loss_equals_copy_last_step(self):
        # clean sinusoid, untrained predictor: the initialization contract makes
        # epoch-0 validation loss the CopyLastStep MAE on the validation windows
        cfg = SyntheticConfig(
            n_nodes=2, n_days=3, gaussian_noise_std=0.0, spike_probability=0.0, rng_seed=5
        )
        series = generate_synthetic(cfg)
        state, ds = prepared_state(series)
        log = train(state, ds, TrainConfig(learning_rate=0.0, epochs=1, seed=0))
        start, stop = ds.split_ranges["val"]
        val_region = slice_window(series, start, stop - start)
        copy = rolling_evaluate(CopyLastStepPredictor(12), val_region, 12, 12)
        assert log.entries[0][2] == pytest.approx(copy.aggregate.mae, abs=1e-9)

    def test_validation_loss_improves_on_noisy_data(self):
        series = generate_synthetic(
            SyntheticConfig(n_nodes=2, n_days=4, gaussian_noise_std=2.0, spike_probability=0.02, rng_seed=6)
        )
        state, ds = prepared_state(series)
        cfg = TrainConfig(learning_rate=1e-3, epochs=3, batch_size=128, seed=6)
        log = train(state, ds, cfg)
        assert log.entries[-1][2] < log.entries[0][2]

    def test_one_step_changes_at_least_one_kernel_parameter(self):
        series = generate_synthetic(
            SyntheticConfig(n_nodes=2, n_days=2, gaussian_noise_std=1.5, rng_seed=7)
        )
        state, ds = prepared_state(series)
        before = state.filter.kernel.k_re.copy()
        cfg = TrainConfig(learning_rate=1e-3, epochs=1, batch_size=4096, seed=7)
        train(state, ds, cfg)
        assert not np.array_equal(before, state.filter.kernel.k_re)

    def test_divergence_aborts_with_epoch_and_batch(self):
        series = generate_synthetic(SyntheticConfig(n_nodes=2, n_days=2, rng_seed=8))
        state, ds = prepared_state(series)
        cfg = TrainConfig(learning_rate=1e150, epochs=5, batch_size=64, seed=8)
        with np.errstate(over="ignore", invalid="ignore"), pytest.raises(
            TrainingDivergedError, match=r"epoch \d+, batch \d+"
        ):
            train(state, ds, cfg)

    def test_determinism_same_seed_bitwise(self):
        def run():
            series = generate_synthetic(
                SyntheticConfig(n_nodes=2, n_days=3, gaussian_noise_std=2.0, rng_seed=9)
            )
            state, ds = prepared_state(series, seed=9)
            log = train(state, ds, TrainConfig(learning_rate=1e-3, epochs=2, batch_size=128, seed=9))
            return [s.value.copy() for s in state.parameters()], log.to_text()

        params_a, log_a = run()
        params_b, log_b = run()
        assert log_a == log_b
        for a, b in zip(params_a, params_b):
            np.testing.assert_array_equal(a, b)

    def test_early_stopping_restores_best_parameters(self):
        series = generate_synthetic(
            SyntheticConfig(n_nodes=2, n_days=4, gaussian_noise_std=2.0, rng_seed=10)
        )
        state, ds = prepared_state(series)
        cfg = TrainConfig(learning_rate=1e-3, epochs=40, batch_size=256, seed=10, early_stop_patience=2)
        log = train(state, ds, cfg)
        if log.stopped_early:
            # restored parameters must reproduce the best validation loss
            best_val = min(entry[2] for entry in log.entries)
            assert evaluate_loss(state, ds, "val") == pytest.approx(best_val, abs=1e-12)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=-1.0).validate()
        with pytest.raises(ValueError):
            TrainConfig(epochs=0).validate()
        with pytest.raises(ValueError):
            TrainConfig(optimizer="rmsprop").validate()

    def test_sgd_optimizer_also_trains(self):
        series = generate_synthetic(
            SyntheticConfig(n_nodes=1, n_days=3, gaussian_noise_std=1.0, rng_seed=11)
        )
        state, ds = prepared_state(series)
        cfg = TrainConfig(learning_rate=1e-2, epochs=2, batch_size=256, optimizer="sgd", seed=11)
        log = train(state, ds, cfg)
        assert log.entries[-1][1] <= log.entries[0][1]

    def test_multi_feature_series_learns_cross_feature_structure(self):
        # the second feature leads the first by eight steps, so a trained
        # predictor can beat last-value copying by reading it through the lift
        rng = np.random.default_rng(20)
        steps = 1200
        t = np.arange(steps + 8)
        clean = 10.0 * np.sin(2 * np.pi * t / 96.0)
        lagging = clean[:steps] + rng.normal(0, 1.0, (3, steps)) + 50.0
        leading = clean[8 : steps + 8] + rng.normal(0, 1.0, (3, steps)) + 30.0
        series = TimeSeriesTensor(np.stack([lagging, leading], axis=2), ("a", "b", "c"))
        ds = make_windows(series, 8, 4, (0.7, 0.1, 0.2))
        norm = fit_normalization(series, ds.split_ranges["train"])
        state = FilterPredictorState.initialize(8, 4, 2, 3, norm, seed=1)
        train(state, ds, TrainConfig(learning_rate=2e-3, epochs=8, batch_size=128, seed=1))
        start, stop = ds.split_ranges["test"]
        region = slice_window(series, start, stop - start)
        model = rolling_evaluate(state, region, 8, 4)
        copy = rolling_evaluate(CopyLastStepPredictor(4), region, 8, 4)
        assert model.aggregate.mae < 0.9 * copy.aggregate.mae


def test_log_serialization_round_trip_text():
    series = generate_synthetic(SyntheticConfig(n_nodes=1, n_days=2, rng_seed=12))
    ds = make_windows(series, 12, 12, (0.7, 0.1, 0.2))
    norm = fit_normalization(series, ds.split_ranges["train"])
    state = FilterPredictorState.initialize(12, 12, 1, 4, norm)
    log = train(state, ds, TrainConfig(epochs=2, batch_size=256, seed=12))
    text = log.to_text()
    lines = text.strip().splitlines()
    assert len(lines) == len(log.entries)
    first = lines[0].split()
    assert first[0] == "0" and len(first) == 3
