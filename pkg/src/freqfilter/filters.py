"""Denoisers: a fixed trailing moving average and a trainable spectral filter.

The trainable module lifts each time step with a per-step linear map, moves
every lifted channel to the frequency domain, multiplies by a learned complex
kernel, and transforms back. Forward activations are cached on the module so
the analytic backward pass can accumulate parameter gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Spectrum, half_bin_multiplicity, half_length, irfft, rfft
from .tensor import ComplexPlane


def moving_average(x, window: int, time_axis: int = 0) -> np.ndarray:
    """Causal trailing mean; the window shrinks at the start so length is preserved."""
    if int(window) != window or window < 1:
        raise ValueError(f"window must be a positive integer, got {window!r}")
    window = int(window)
    x = np.asarray(x, dtype=np.float64)
    moved = np.moveaxis(x, time_axis, 0)
    n = moved.shape[0]
    w = min(window, n)
    out = np.empty_like(moved)
    sliding = np.lib.stride_tricks.sliding_window_view(moved, w, axis=0)
    out[w - 1 :] = sliding.mean(axis=-1)
    for t in range(w - 1):
        out[t] = moved[: t + 1].mean(axis=0)
    return np.moveaxis(out, 0, time_axis)


def blend_with_original(x, y) -> np.ndarray:
    """Elementwise mean of a signal and its filtered version."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return (x + y) / 2.0


@dataclass
class ParamSlot:
    """One trainable array with its gradient buffer and optional pinned entries."""

    name: str
    value: np.ndarray
    grad: np.ndarray
    pin_mask: np.ndarray | None = None

    def apply_pins(self) -> None:
        if self.pin_mask is not None:
            self.value[self.pin_mask] = 0.0
            self.grad[self.pin_mask] = 0.0


class PointwiseLinear:
    """Linear map over the trailing feature axis, applied independently per position.

    Equivalent to a width-1 convolution along time: every time step is mapped
    by the same (d_in, d_out) weight and bias.
    """

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        weight = np.array(weight, dtype=np.float64)
        bias = np.array(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.ndim != 1 or bias.shape[0] != weight.shape[1]:
            raise ValueError(
                f"expected weight (d_in, d_out) and bias (d_out,), got {weight.shape} and {bias.shape}"
            )
        if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
            raise ValueError("parameters must be finite")
        self.weight = weight
        self.bias = bias
        self.g_weight = np.zeros_like(weight)
        self.g_bias = np.zeros_like(bias)
        self._input: np.ndarray | None = None

    @classmethod
    def zeros(cls, d_in: int, d_out: int) -> "PointwiseLinear":
        return cls(np.zeros((d_in, d_out)), np.zeros(d_out))

    @property
    def d_in(self) -> int:
        return self.weight.shape[0]

    @property
    def d_out(self) -> int:
        return self.weight.shape[1]

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        if x.shape[-1] != self.d_in:
            raise ValueError(f"expected trailing width {self.d_in}, got {x.shape[-1]}")
        if cache:
            self._input = x
        return x @ self.weight + self.bias

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._input is None:
            raise RuntimeError("backward called without a cached forward pass")
        x2 = self._input.reshape(-1, self.d_in)
        g2 = grad_out.reshape(-1, self.d_out)
        self.g_weight += x2.T @ g2
        self.g_bias += g2.sum(axis=0)
        return (g2 @ self.weight.T).reshape(self._input.shape)

    def zero_grad(self) -> None:
        self.g_weight[...] = 0.0
        self.g_bias[...] = 0.0

    def parameters(self, prefix: str) -> list[ParamSlot]:
        return [
            ParamSlot(f"{prefix}.weight", self.weight, self.g_weight),
            ParamSlot(f"{prefix}.bias", self.bias, self.g_bias),
        ]


class SpectralKernel:
    """Trainable complex filter over the half spectrum, one coefficient per (bin, channel).

    Initialized to the identity filter (1 + 0i), i.e. no filtering until
    training says otherwise. Imaginary parts at bin 0 and at the Nyquist bin
    (even windows) are pinned to zero: those frequencies must stay real for
    the filtered spectrum to invert to a real sequence.
    """

    def __init__(self, window_length: int, width: int):
        if window_length < 1 or width < 1:
            raise ValueError("window_length and width must be >= 1")
        self.window_length = window_length
        self.width = width
        n_half = half_length(window_length)
        self.k_re = np.ones((n_half, width))
        self.k_im = np.zeros((n_half, width))
        self.g_re = np.zeros((n_half, width))
        self.g_im = np.zeros((n_half, width))

    @property
    def n_half(self) -> int:
        return self.k_re.shape[0]

    @property
    def pinned_rows(self) -> tuple[int, ...]:
        if self.window_length % 2 == 0 and self.n_half > 1:
            return (0, self.n_half - 1)
        return (0,)

    def im_pin_mask(self) -> np.ndarray:
        mask = np.zeros_like(self.k_im, dtype=bool)
        mask[list(self.pinned_rows)] = True
        return mask

    def enforce_pins(self) -> None:
        rows = list(self.pinned_rows)
        self.k_im[rows] = 0.0
        self.g_im[rows] = 0.0

    def zero_grad(self) -> None:
        self.g_re[...] = 0.0
        self.g_im[...] = 0.0

    def parameters(self, prefix: str) -> list[ParamSlot]:
        return [
            ParamSlot(f"{prefix}.re", self.k_re, self.g_re),
            ParamSlot(f"{prefix}.im", self.k_im, self.g_im, pin_mask=self.im_pin_mask()),
        ]


class FilterModuleState:
    """Per-step lift followed by the learnable frequency-domain filter.

    Holds the forward activations (input window, lifted window, spectrum
    before and after the kernel multiply) needed by filter_backward; a state
    is therefore single-threaded-exclusive across a forward/backward pair.
    """

    def __init__(self, lift: PointwiseLinear, kernel: SpectralKernel):
        if lift.d_out != kernel.width:
            raise ValueError(
                f"lift output width {lift.d_out} != kernel width {kernel.width}"
            )
        self.lift = lift
        self.kernel = kernel
        self.window_length = kernel.window_length
        self._x: np.ndarray | None = None
        self._lifted: np.ndarray | None = None
        self._spec_in: ComplexPlane | None = None
        self._spec_out: ComplexPlane | None = None
        self._single = False

    @classmethod
    def initialize(
        cls,
        window_length: int,
        in_features: int,
        width: int,
        rng: np.random.Generator | None = None,
        extra_column_std: float = 0.05,
    ) -> "FilterModuleState":
        """Identity-style init: embed the input features, pass extra channels through zero.

        The first in_features lift columns form an identity embedding. Extra
        columns (width > in_features) start at small random values when an
        rng is supplied so they can break symmetry during training; they do
        not affect the output until a downstream readout picks them up.
        """
        if width < in_features:
            raise ValueError(
                f"width {width} must be >= in_features {in_features} for the identity embedding"
            )
        weight = np.zeros((in_features, width))
        weight[np.arange(in_features), np.arange(in_features)] = 1.0
        if rng is not None and width > in_features:
            weight[:, in_features:] = rng.normal(0.0, extra_column_std, (in_features, width - in_features))
        lift = PointwiseLinear(weight, np.zeros(width))
        return cls(lift, SpectralKernel(window_length, width))

    @property
    def in_features(self) -> int:
        return self.lift.d_in

    @property
    def width(self) -> int:
        return self.kernel.width

    def parameters(self, prefix: str = "filter") -> list[ParamSlot]:
        return self.lift.parameters(f"{prefix}.lift") + self.kernel.parameters(f"{prefix}.kernel")


def _as_batched_window(x, window_length: int, features: int, what: str):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    batched = x[None] if single else x
    if batched.ndim != 3 or batched.shape[1] != window_length or batched.shape[2] != features:
        raise ValueError(
            f"{what} must have shape ({window_length}, {features}) per window, got {x.shape}"
        )
    return batched, single


def _apply_kernel(kernel: SpectralKernel, re: np.ndarray, im: np.ndarray):
    # (n_half, B, width) spectra times the shared (n_half, width) kernel.
    kr = kernel.k_re[:, None, :]
    ki = kernel.k_im[:, None, :]
    return re * kr - im * ki, re * ki + im * kr


def filter_forward(state: FilterModuleState, x, cache: bool = True) -> np.ndarray:
    """Lift, transform, multiply by the kernel, transform back.

    Accepts one (n, F) window or a batch (B, n, F); returns the filtered
    window(s) with the lifted width. With the identity kernel this is a
    pass-through of the lifted signal.
    """
    xb, single = _as_batched_window(x, state.window_length, state.in_features, "input window")
    lifted = state.lift.forward(xb, cache=cache)
    b, n, d = lifted.shape
    cols = lifted.transpose(1, 0, 2).reshape(n, b * d)
    spectrum = rfft(cols)
    n_half = spectrum.n_half
    s_re = spectrum.planes.re.reshape(n_half, b, d)
    s_im = spectrum.planes.im.reshape(n_half, b, d)
    f_re, f_im = _apply_kernel(state.kernel, s_re, s_im)
    filtered = Spectrum(ComplexPlane(f_re.reshape(n_half, b * d), f_im.reshape(n_half, b * d)), n)
    out_cols = irfft(filtered)
    out = out_cols.reshape(n, b, d).transpose(1, 0, 2)
    if cache:
        state._x = xb
        state._lifted = lifted
        state._spec_in = ComplexPlane(s_re, s_im)
        state._spec_out = ComplexPlane(f_re, f_im)
        state._single = single
    return out[0] if single else out


def filter_backward(state: FilterModuleState, grad_out) -> np.ndarray:
    """Accumulate kernel and lift gradients; return the gradient w.r.t. the input window.

    Let s be the cached input spectrum and g the incoming gradient. Pulling g
    back through the 1/n inverse transform weights each half-spectrum bin by
    its multiplicity c/n (interior bins stand for two conjugate full-spectrum
    bins), giving t = (c/n) * rfft(g). The kernel gradient is conj(s) * t per
    bin and channel, summed over the batch; the gradient w.r.t. the lifted
    signal is irfft(conj(K) * rfft(g)), where the c/n weights cancel against
    the transform pair. Pinned imaginary bins stay exactly zero throughout.
    """
    if state._x is None or state._spec_in is None:
        raise RuntimeError("filter_backward requires a cached forward pass")
    g = np.asarray(grad_out, dtype=np.float64)
    if state._single:
        if g.ndim != 2:
            raise ValueError(f"expected a single (n, d) gradient window, got shape {g.shape}")
        g = g[None]
    b, n, d = state._lifted.shape
    if g.shape != (b, n, d):
        raise ValueError(f"gradient shape {g.shape} does not match forward output {(b, n, d)}")

    cols = g.transpose(1, 0, 2).reshape(n, b * d)
    gradient_spectrum = rfft(cols)
    n_half = gradient_spectrum.n_half
    g_re = gradient_spectrum.planes.re.reshape(n_half, b, d)
    g_im = gradient_spectrum.planes.im.reshape(n_half, b, d)

    scale = (half_bin_multiplicity(n) / n)[:, None, None]
    t_re = scale * g_re
    t_im = scale * g_im

    s_re = state._spec_in.re
    s_im = state._spec_in.im
    kernel = state.kernel
    kernel.g_re += np.sum(s_re * t_re + s_im * t_im, axis=1)
    kernel.g_im += np.sum(s_re * t_im - s_im * t_re, axis=1)
    kernel.g_im[list(kernel.pinned_rows)] = 0.0

    # conj(K) applied to the unscaled gradient spectrum.
    kr = kernel.k_re[:, None, :]
    ki = kernel.k_im[:, None, :]
    u_re = kr * g_re + ki * g_im
    u_im = kr * g_im - ki * g_re
    back = Spectrum(ComplexPlane(u_re.reshape(n_half, b * d), u_im.reshape(n_half, b * d)), n)
    grad_lifted = irfft(back).reshape(n, b, d).transpose(1, 0, 2)

    grad_x = state.lift.backward(grad_lifted)
    return grad_x[0] if state._single else grad_x


def zero_gradients(state: FilterModuleState) -> None:
    """Clear all gradient accumulators on the module."""
    state.lift.zero_grad()
    state.kernel.zero_grad()
