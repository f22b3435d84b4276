"""Dense real/complex array containers shared by the rest of the toolkit.

Time series are immutable once constructed; all mutation in the package
happens on dedicated parameter/gradient buffers in the filter module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeSeriesTensor:
    """Real observations indexed (node, time, feature).

    values has shape (n_nodes, n_steps, n_features) and is frozen after
    construction; node_ids are unique opaque identifiers; interval_seconds
    is the sampling period (300 for the usual 5-minute traffic feeds).
    """

    values: np.ndarray
    node_ids: tuple[str, ...]
    interval_seconds: int = 300

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 3:
            raise ValueError(f"values must be 3-D (node, time, feature), got shape {values.shape}")
        if min(values.shape) < 1:
            raise ValueError(f"all dimensions must be >= 1, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("values contain NaN or Inf entries")
        node_ids = tuple(str(n) for n in self.node_ids)
        if len(node_ids) != values.shape[0]:
            raise ValueError(
                f"got {len(node_ids)} node ids for {values.shape[0]} nodes"
            )
        if len(set(node_ids)) != len(node_ids):
            raise ValueError("node_ids must be unique")
        if int(self.interval_seconds) != self.interval_seconds or self.interval_seconds <= 0:
            raise ValueError(f"interval_seconds must be a positive integer, got {self.interval_seconds!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "node_ids", node_ids)
        object.__setattr__(self, "interval_seconds", int(self.interval_seconds))

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    @property
    def n_features(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class ComplexPlane:
    """Complex array stored as separate real/imaginary float planes."""

    re: np.ndarray
    im: np.ndarray

    def __post_init__(self) -> None:
        re = np.asarray(self.re, dtype=np.float64)
        im = np.asarray(self.im, dtype=np.float64)
        if re.shape != im.shape:
            raise ValueError(f"re/im shape mismatch: {re.shape} vs {im.shape}")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.re.shape

    @classmethod
    def from_complex(cls, z: np.ndarray) -> "ComplexPlane":
        z = np.asarray(z, dtype=np.complex128)
        return cls(z.real.copy(), z.imag.copy())

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im


def elementwise_complex_multiply(a: ComplexPlane, b: ComplexPlane) -> ComplexPlane:
    """Entrywise complex product of two equally shaped planes."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    re = a.re * b.re - a.im * b.im
    im = a.re * b.im + a.im * b.re
    return ComplexPlane(re, im)


def slice_window(t: TimeSeriesTensor, start: int, length: int) -> TimeSeriesTensor:
    """Contiguous slice along the time axis; node ids and interval carry over."""
    if length <= 0:
        raise ValueError(f"length must be positive, got {length}")
    if start < 0 or start + length > t.n_steps:
        raise ValueError(
            f"requested time range [{start}, {start + length}) outside available [0, {t.n_steps})"
        )
    return TimeSeriesTensor(
        values=t.values[:, start : start + length, :],
        node_ids=t.node_ids,
        interval_seconds=t.interval_seconds,
    )
