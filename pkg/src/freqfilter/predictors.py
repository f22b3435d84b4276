"""Forecasters: last-value baselines and the trainable spectral-filter predictor.

All predictors share one calling convention: histories of shape
(..., history, features) in, forecasts of shape (..., horizon, features) out,
with parameters shared across nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .filters import (
    FilterModuleState,
    ParamSlot,
    PointwiseLinear,
    blend_with_original,
    filter_backward,
    filter_forward,
    moving_average,
)
from .metrics import MetricsReport, compute_metrics
from .tensor import TimeSeriesTensor

if TYPE_CHECKING:  # pragma: no cover
    from .data_io import NormStats

DEFAULT_SMOOTHING_WINDOW = 5


def copy_last_step(history, horizon: int) -> np.ndarray:
    """Predict every future step as the most recent observation."""
    history = np.asarray(history, dtype=np.float64)
    if history.ndim < 2 or history.shape[-2] < 1:
        raise ValueError("history must contain at least one time step")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    last = history[..., -1:, :]
    return np.repeat(last, horizon, axis=-2)


def filtered_copy_last_step(history, horizon: int, window: int = DEFAULT_SMOOTHING_WINDOW) -> np.ndarray:
    """Smooth the history (trailing mean blended 50/50 with the original) before copying."""
    history = np.asarray(history, dtype=np.float64)
    if history.ndim < 2 or history.shape[-2] < 1:
        raise ValueError("history must contain at least one time step")
    smoothed = moving_average(history, window, time_axis=-2)
    blended = blend_with_original(history, smoothed)
    return copy_last_step(blended, horizon)


class CopyLastStepPredictor:
    """Naive last-value forecaster."""

    def __init__(self, horizon: int):
        self.horizon = horizon

    def predict(self, histories) -> np.ndarray:
        return copy_last_step(histories, self.horizon)

    def transform_series(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64)


class FilteredCopyLastStepPredictor:
    """Last-value forecaster reading from the smoothed+blended series."""

    def __init__(self, horizon: int, window: int = DEFAULT_SMOOTHING_WINDOW):
        self.horizon = horizon
        self.window = window

    def predict(self, histories) -> np.ndarray:
        return filtered_copy_last_step(histories, self.horizon, self.window)

    def transform_series(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        smoothed = moving_average(values, self.window, time_axis=-2)
        return blend_with_original(values, smoothed)


class FilterPredictorState:
    """normalize -> lift+spectral filter -> linear readout over the flattened window -> denormalize.

    The readout maps the (history * width) filtered window to the full
    (horizon * features) forecast block in one linear step. Freshly
    initialized, the readout copies the last time step and the kernel is the
    identity filter, so an untrained predictor reproduces copy_last_step;
    training can only improve on that anchor.
    """

    def __init__(
        self,
        filter_module: FilterModuleState,
        readout: PointwiseLinear,
        norm: "NormStats | None",
        horizon: int,
    ):
        history = filter_module.window_length
        width = filter_module.width
        features = filter_module.in_features
        if readout.d_in != history * width:
            raise ValueError(f"readout input width {readout.d_in} != history*width {history * width}")
        if readout.d_out != horizon * features:
            raise ValueError(
                f"readout output width {readout.d_out} != horizon*features {horizon * features}"
            )
        self.filter = filter_module
        self.readout = readout
        self.norm = norm
        self.horizon = horizon
        self.history = history
        self.features = features
        self.width = width
        self._batch: int | None = None
        self._single = False

    @classmethod
    def initialize(
        cls,
        history: int,
        horizon: int,
        n_features: int,
        width: int,
        norm: "NormStats | None" = None,
        seed: int = 0,
    ) -> "FilterPredictorState":
        rng = np.random.default_rng(seed)
        filter_module = FilterModuleState.initialize(history, n_features, width, rng=rng)
        weight = np.zeros((history * width, horizon * n_features))
        for step in range(horizon):
            for f in range(n_features):
                weight[(history - 1) * width + f, step * n_features + f] = 1.0
        readout = PointwiseLinear(weight, np.zeros(horizon * n_features))
        return cls(filter_module, readout, norm, horizon)

    def _require_norm(self) -> "NormStats":
        if self.norm is None:
            raise ValueError("normalization statistics are not fitted; supply NormStats before predicting")
        return self.norm

    def forward(self, histories, cache: bool = True) -> np.ndarray:
        norm = self._require_norm()
        x = np.asarray(histories, dtype=np.float64)
        single = x.ndim == 2
        xb = x[None] if single else x
        if xb.ndim != 3 or xb.shape[1] != self.history or xb.shape[2] != self.features:
            raise ValueError(
                f"history must have shape ({self.history}, {self.features}) per window, got {x.shape}"
            )
        b = xb.shape[0]
        normalized = norm.apply(xb)
        filtered = filter_forward(self.filter, normalized, cache=cache)
        flat = filtered.reshape(b, self.history * self.width)
        block = self.readout.forward(flat, cache=cache)
        out = norm.invert(block.reshape(b, self.horizon, self.features))
        if cache:
            self._batch = b
            self._single = single
        return out[0] if single else out

    def backward(self, grad_out) -> np.ndarray:
        norm = self._require_norm()
        if self._batch is None:
            raise RuntimeError("backward called without a cached forward pass")
        g = np.asarray(grad_out, dtype=np.float64)
        if self._single:
            g = g[None]
        if g.shape != (self._batch, self.horizon, self.features):
            raise ValueError(
                f"gradient shape {g.shape} does not match forecast shape "
                f"{(self._batch, self.horizon, self.features)}"
            )
        g_block = (g * norm.std).reshape(self._batch, self.horizon * self.features)
        g_flat = self.readout.backward(g_block)
        g_filtered = g_flat.reshape(self._batch, self.history, self.width)
        g_normalized = filter_backward(self.filter, g_filtered)
        g_raw = g_normalized / norm.std
        return g_raw[0] if self._single else g_raw

    def predict(self, histories) -> np.ndarray:
        return self.forward(histories, cache=False)

    def parameters(self) -> list[ParamSlot]:
        return self.filter.parameters("filter") + self.readout.parameters("readout")

    def zero_gradients(self) -> None:
        self.filter.lift.zero_grad()
        self.filter.kernel.zero_grad()
        self.readout.zero_grad()


def filter_predict(state: FilterPredictorState, history) -> np.ndarray:
    """Forecast from one (H, F) window or a batch of them; inference only, no caching."""
    return state.predict(history)


@dataclass(frozen=True)
class RollingReport:
    """Rolling-evaluation metrics, one report per horizon step plus the aggregate."""

    per_step: tuple[MetricsReport, ...]
    aggregate: MetricsReport
    interval_seconds: int

    def step_minutes(self, step_index: int) -> float:
        return (step_index + 1) * self.interval_seconds / 60.0


def rolling_evaluate(
    predictor,
    series: TimeSeriesTensor,
    history: int,
    horizon: int,
    stride: int = 1,
    predecessor_mode: bool = False,
    mape_epsilon: float = 1e-6,
) -> RollingReport:
    """Slide a (history, horizon) window over the series and score the predictor.

    In the default one-shot mode every window is forecast from its history
    alone. With predecessor_mode=True each future step is instead predicted by its
    true predecessor, read from the predictor's transformed view of the
    series; this is the protocol under which last-value baselines report the
    same error at every horizon step.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    values = series.values
    n_nodes, total, _ = values.shape
    needed = history + horizon
    if total < needed:
        raise ValueError(f"series has {total} steps but history+horizon needs {needed}")
    anchors = np.arange(0, total - needed + 1, stride)
    n_windows = anchors.size

    target_idx = anchors[:, None] + history + np.arange(horizon)[None, :]
    targets = values[:, target_idx, :].transpose(1, 0, 2, 3)  # (windows, nodes, horizon, F)

    if predecessor_mode:
        transform = getattr(predictor, "transform_series", None)
        if transform is None:
            raise TypeError(
                f"{type(predictor).__name__} does not support the rolling-predecessor protocol"
            )
        source = transform(values)
        preds = source[:, target_idx - 1, :].transpose(1, 0, 2, 3)
    else:
        hist_idx = anchors[:, None] + np.arange(history)[None, :]
        histories = values[:, hist_idx, :].transpose(1, 0, 2, 3).reshape(
            n_windows * n_nodes, history, -1
        )
        preds = predictor.predict(histories)
        preds = np.asarray(preds).reshape(n_windows, n_nodes, horizon, -1)
        if preds.shape != targets.shape:
            raise ValueError(f"predictor returned shape {preds.shape}, expected {targets.shape}")

    per_step = tuple(
        compute_metrics(preds[:, :, step, :], targets[:, :, step, :], mape_epsilon)
        for step in range(horizon)
    )
    aggregate = compute_metrics(preds, targets, mape_epsilon)
    return RollingReport(per_step, aggregate, series.interval_seconds)
