"""Sliding-window datasets, MAE loss, and the first-order training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .filters import ParamSlot
from .tensor import TimeSeriesTensor

SPLIT_NAMES = ("train", "val", "test")


class TrainingDivergedError(RuntimeError):
    """Loss turned NaN/Inf during training."""


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 20
    batch_size: int = 128
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    early_stop_patience: int | None = None

    def validate(self) -> None:
        # learning_rate 0 is allowed: it is the documented no-op update.
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.early_stop_patience is not None and self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be >= 0 when set")


@dataclass
class WindowedDataset:
    """Sliding (history, horizon) samples cut from a series, split chronologically.

    Windows are stored as history-start anchors into the source values; every
    sample's history immediately precedes its target block and no window
    crosses a split boundary.
    """

    values: np.ndarray  # (n_nodes, n_steps, n_features), original units
    history: int
    horizon: int
    split_ranges: dict[str, tuple[int, int]]
    split_anchors: dict[str, np.ndarray]
    rng_seed: int = 0

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[2]

    def n_windows(self, split: str) -> int:
        return self.split_anchors[split].size

    def n_samples(self, split: str) -> int:
        return self.n_windows(split) * self.n_nodes

    def sample(self, split: str, index: int) -> tuple[np.ndarray, np.ndarray]:
        """(history (N, H, F), target (N, T, F)) for one window."""
        a = int(self.split_anchors[split][index])
        h = self.values[:, a : a + self.history, :]
        t = self.values[:, a + self.history : a + self.history + self.horizon, :]
        return h, t

    def gather(self, split: str, sample_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-node batches: sample id = window * n_nodes + node."""
        anchors = self.split_anchors[split]
        w = sample_ids // self.n_nodes
        v = sample_ids % self.n_nodes
        starts = anchors[w][:, None]
        hist = self.values[v[:, None], starts + np.arange(self.history)[None, :], :]
        targ = self.values[
            v[:, None], starts + self.history + np.arange(self.horizon)[None, :], :
        ]
        return hist, targ


def make_windows(
    series: TimeSeriesTensor,
    history: int,
    horizon: int,
    split_ratios: tuple[float, float, float],
) -> WindowedDataset:
    """Chronological train/val/test regions with stride-1 windows inside each."""
    if history < 1 or horizon < 1:
        raise ValueError("history and horizon must be >= 1")
    ratios = tuple(float(r) for r in split_ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError(f"split_ratios must be three non-negative numbers, got {split_ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split_ratios must sum to 1, got {sum(ratios)}")

    total = series.n_steps
    needed = history + horizon
    sizes = [int(np.floor(total * r)) for r in ratios]
    leftover = total - sum(sizes)
    for i in (2, 1, 0):
        if ratios[i] > 0:
            sizes[i] += leftover
            break

    ranges: dict[str, tuple[int, int]] = {}
    anchors: dict[str, np.ndarray] = {}
    cursor = 0
    for name, size, ratio in zip(SPLIT_NAMES, sizes, ratios):
        ranges[name] = (cursor, cursor + size)
        if ratio > 0 and size < needed:
            raise ValueError(
                f"{name} split has {size} steps but needs at least {needed} (history {history} + horizon {horizon})"
            )
        if size >= needed:
            anchors[name] = np.arange(cursor, cursor + size - needed + 1)
        else:
            anchors[name] = np.arange(0)
        cursor += size

    return WindowedDataset(
        values=series.values,
        history=history,
        horizon=horizon,
        split_ranges=ranges,
        split_anchors=anchors,
    )


def mae_loss(pred, target) -> tuple[float, np.ndarray]:
    """Mean absolute error and its subgradient w.r.t. pred (sign(0) taken as 0)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return loss, grad


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    step: int,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected moment update, in place on param/m/v."""
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient passed to adam_step")
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Adam over a fixed list of parameter slots; re-pins constrained entries after each step."""

    def __init__(self, slots: list[ParamSlot], lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.slots = slots
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(s.value) for s in slots]
        self.v = [np.zeros_like(s.value) for s in slots]

    def step(self) -> None:
        self.step_count += 1
        for slot, m, v in zip(self.slots, self.m, self.v):
            adam_step(slot.value, slot.grad, m, v, self.step_count, self.lr, self.beta1, self.beta2, self.eps)
            slot.apply_pins()


class SGD:
    """Plain gradient descent over parameter slots."""

    def __init__(self, slots: list[ParamSlot], lr: float):
        self.slots = slots
        self.lr = lr

    def step(self) -> None:
        for slot in self.slots:
            if not np.all(np.isfinite(slot.grad)):
                raise FloatingPointError(f"non-finite gradient in {slot.name}")
            slot.value -= self.lr * slot.grad
            slot.apply_pins()


@dataclass
class TrainingLog:
    """Per-epoch (epoch, train_loss, val_loss) records; epoch 0 is the untrained state."""

    entries: list[tuple[int, float, float]] = field(default_factory=list)
    best_epoch: int | None = None
    stopped_early: bool = False

    def to_text(self) -> str:
        lines = [f"{e} {tr:.12g} {va:.12g}" for e, tr, va in self.entries]
        return "\n".join(lines) + "\n"

    def final_val_loss(self) -> float:
        return self.entries[-1][2]


def _make_optimizer(cfg: TrainConfig, slots: list[ParamSlot]):
    if cfg.optimizer == "adam":
        return Adam(slots, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_epsilon)
    return SGD(slots, cfg.learning_rate)


def evaluate_loss(state, data: WindowedDataset, split: str, chunk: int = 4096) -> float:
    """MAE of the predictor over a whole split, in original units; NaN if the split is empty."""
    n = data.n_samples(split)
    if n == 0:
        return float("nan")
    total_abs = 0.0
    count = 0
    ids = np.arange(n)
    for lo in range(0, n, chunk):
        hist, targ = data.gather(split, ids[lo : lo + chunk])
        pred = state.forward(hist, cache=False)
        total_abs += float(np.sum(np.abs(pred - targ)))
        count += targ.size
    return total_abs / count


def train(state, data: WindowedDataset, cfg: TrainConfig) -> TrainingLog:
    """Minibatch training with MAE loss; deterministic for a fixed seed.

    Logs epoch 0 (no updates) first, then one entry per epoch. When early
    stopping triggers, the best-validation parameters are restored before
    returning.
    """
    cfg.validate()
    n_samples = data.n_samples("train")
    if n_samples == 0:
        raise ValueError("training split is empty")

    slots = state.parameters()
    optimizer = _make_optimizer(cfg, slots)
    rng = np.random.default_rng(cfg.seed)

    log = TrainingLog()
    train_loss = evaluate_loss(state, data, "train")
    val_loss = evaluate_loss(state, data, "val")
    log.entries.append((0, train_loss, val_loss))

    best_val = val_loss
    best_epoch = 0
    best_params = [s.value.copy() for s in slots] if cfg.early_stop_patience is not None else None
    stale = 0

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n_samples)
        batch_losses = []
        for bi, lo in enumerate(range(0, n_samples, cfg.batch_size)):
            hist, targ = data.gather("train", order[lo : lo + cfg.batch_size])
            pred = state.forward(hist)
            loss, grad = mae_loss(pred, targ)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch}, batch {bi}"
                )
            state.backward(grad)
            optimizer.step()
            state.zero_gradients()
            batch_losses.append(loss)

        train_loss = float(np.mean(batch_losses))
        val_loss = evaluate_loss(state, data, "val")
        log.entries.append((epoch, train_loss, val_loss))

        if not np.isfinite(val_loss):
            continue  # no validation split: early stopping cannot apply
        if not np.isfinite(best_val) or val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            stale = 0
            if best_params is not None:
                best_params = [s.value.copy() for s in slots]
        else:
            stale += 1
            if cfg.early_stop_patience is not None and stale > cfg.early_stop_patience:
                for slot, saved in zip(slots, best_params):
                    slot.value[...] = saved
                log.stopped_early = True
                break

    log.best_epoch = best_epoch
    return log
