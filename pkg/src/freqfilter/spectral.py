"""Discrete Fourier transforms, reference and fast, plus a circular-convolution oracle.

Conventions: the forward transform carries no scale factor and uses the
e^{-i 2 pi n k / N} kernel; the inverse carries the 1/N factor. Real windows
are represented by their half spectrum (bins 0..floor(n/2)); conjugate
symmetry of the remaining bins is structural, so inverting a filtered half
spectrum always produces a real sequence rather than one whose imaginary
residue has to be discarded by convention.

The fast path is a mixed-radix decimation-in-time recursion: pull out the
smallest prime factor p of n and combine p interleaved sub-transforms with a
p-point DFT matrix. Large prime lengths fall back to the chirp transform
(Bluestein), which evaluates the DFT as a power-of-two circular convolution,
keeping the whole path O(n log n) for every n.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .tensor import ComplexPlane

# Prime lengths up to this bound use a direct DFT matrix; larger primes go
# through the chirp transform.
_DIRECT_PRIME_LIMIT = 61


def _smallest_prime_factor(n: int) -> int:
    if n % 2 == 0:
        return 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return f
        f += 2
    return n


@lru_cache(maxsize=None)
def _dft_matrix(p: int) -> np.ndarray:
    k = np.arange(p)
    m = np.exp(-2j * np.pi * np.outer(k, k) / p)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=None)
def _twiddles(n: int, p: int) -> np.ndarray:
    # w[j, q] = exp(-2i pi j q / n) for j < p, q < n // p
    j = np.arange(p)[:, None]
    q = np.arange(n // p)[None, :]
    w = np.exp(-2j * np.pi * (j * q) / n)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def _chirp_tables(n: int) -> tuple[np.ndarray, np.ndarray, int]:
    # j^2 reduced mod 2n keeps the phase argument small for exact angles.
    j = np.arange(n, dtype=np.int64)
    sq = (j * j) % (2 * n)
    chirp = np.exp(-1j * np.pi * sq / n)
    m = 1
    while m < 2 * n - 1:
        m <<= 1
    kernel = np.zeros(m, dtype=np.complex128)
    inv = np.conj(chirp)
    kernel[:n] = inv
    kernel[m - n + 1 :] = inv[1:][::-1]
    kernel_hat = _fft(kernel[:, None])[:, 0]
    chirp.setflags(write=False)
    kernel_hat.setflags(write=False)
    return chirp, kernel_hat, m


def _chirp_fft(a: np.ndarray) -> np.ndarray:
    # DFT of prime length via linear convolution with a conjugate chirp,
    # evaluated as a power-of-two circular convolution.
    n, cols = a.shape
    chirp, kernel_hat, m = _chirp_tables(n)
    padded = np.zeros((m, cols), dtype=np.complex128)
    padded[:n] = a * chirp[:, None]
    conv = _ifft(_fft(padded) * kernel_hat[:, None])
    return chirp[:, None] * conv[:n]


def _fft(a: np.ndarray) -> np.ndarray:
    """Unnormalized forward transform along axis 0 of a 2-D complex array."""
    n = a.shape[0]
    if n == 1:
        return a.copy()
    p = _smallest_prime_factor(n)
    if p == n:
        if n <= _DIRECT_PRIME_LIMIT:
            return _dft_matrix(n) @ a
        return _chirp_fft(a)
    m = n // p
    cols = a.shape[1]
    # grouped[q, j] = a[q * p + j]: column j is the j-th interleaved subsequence.
    grouped = a.reshape(m, p * cols)
    inner = _fft(grouped).reshape(m, p, cols)
    z = inner * _twiddles(n, p).T[:, :, None]
    combined = np.einsum("tj,qjc->tqc", _dft_matrix(p), z)
    return combined.reshape(n, cols)


def _ifft(spectrum: np.ndarray) -> np.ndarray:
    n = spectrum.shape[0]
    return np.conj(_fft(np.conj(spectrum))) / n


def dft_reference(x) -> np.ndarray:
    """Direct O(n^2) DFT of a 1-D sequence; the oracle the fast path is tested against."""
    x = np.asarray(x)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("dft_reference expects a non-empty 1-D sequence")
    n = x.size
    k = np.arange(n)
    kernel = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return kernel @ x.astype(np.complex128)


def idft_reference(spectrum) -> np.ndarray:
    """Direct inverse DFT with the 1/n factor; inverse of dft_reference."""
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    if spectrum.ndim != 1 or spectrum.size == 0:
        raise ValueError("idft_reference expects a non-empty 1-D sequence")
    n = spectrum.size
    k = np.arange(n)
    kernel = np.exp(2j * np.pi * np.outer(k, k) / n)
    return (kernel @ spectrum) / n


def half_length(n: int) -> int:
    """Number of half-spectrum bins for a real window of length n."""
    return n // 2 + 1


def half_bin_multiplicity(n: int) -> np.ndarray:
    """How many full-spectrum bins each half-spectrum bin stands for (1 or 2)."""
    mult = np.full(half_length(n), 2.0)
    mult[0] = 1.0
    if n % 2 == 0:
        mult[-1] = 1.0
    return mult


@dataclass(frozen=True)
class Spectrum:
    """Half spectrum of a real window along the time axis.

    planes holds bins 0..floor(n/2) of the full transform; the imaginary
    part must vanish at bin 0 and, for even windows, at the Nyquist bin,
    which is exactly the conjugate-symmetry boundary condition of a real
    signal's spectrum.
    """

    planes: ComplexPlane
    window_length: int

    def __post_init__(self) -> None:
        n = self.window_length
        if n < 1:
            raise ValueError(f"window_length must be >= 1, got {n}")
        if self.planes.shape[0] != half_length(n):
            raise ValueError(
                f"expected {half_length(n)} bins for window length {n}, got {self.planes.shape[0]}"
            )
        _check_boundary_bins(self.planes.im, n)

    @property
    def n_half(self) -> int:
        return self.planes.shape[0]


def _check_boundary_bins(im: np.ndarray, n: int) -> None:
    if np.any(im[0] != 0.0):
        raise ValueError("imaginary part at bin 0 must be zero for a real window")
    if n % 2 == 0 and np.any(im[n // 2] != 0.0):
        raise ValueError("imaginary part at the Nyquist bin must be zero for a real window")


def rfft(x) -> Spectrum:
    """Half spectrum of a real window; 2-D input transforms each column."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[0] == 0:
        raise ValueError(f"rfft expects a non-empty 1-D or 2-D real array, got shape {x.shape}")
    n = x.shape[0]
    flat = x.reshape(n, -1).astype(np.complex128)
    full = _fft(flat)
    half = full[: half_length(n)]
    re = np.ascontiguousarray(half.real)
    im = np.ascontiguousarray(half.imag)
    # Boundary bins of a real signal are real; zero the rounding residue so
    # the invariant is exact rather than approximate.
    im[0] = 0.0
    if n % 2 == 0:
        im[n // 2] = 0.0
    shape = (half_length(n),) if x.ndim == 1 else (half_length(n), x.shape[1])
    return Spectrum(ComplexPlane(re.reshape(shape), im.reshape(shape)), n)


def _expand_half(re: np.ndarray, im: np.ndarray, n: int) -> np.ndarray:
    # Rebuild the full conjugate-symmetric spectrum from the stored half.
    cols = re.shape[1]
    full = np.empty((n, cols), dtype=np.complex128)
    full[: half_length(n)] = re + 1j * im
    mirrored = (n - 1) // 2
    if mirrored >= 1:
        k = np.arange(1, mirrored + 1)
        full[n - k] = np.conj(full[k])
    return full


def spectrum_to_full(s: Spectrum) -> np.ndarray:
    """Full complex spectrum implied by the half spectrum's conjugate symmetry."""
    n = s.window_length
    re = s.planes.re.reshape(s.n_half, -1)
    im = s.planes.im.reshape(s.n_half, -1)
    full = _expand_half(re, im, n)
    if s.planes.re.ndim == 1:
        return full[:, 0]
    return full


def irfft(s: Spectrum) -> np.ndarray:
    """Real window recovered from a half spectrum (1/n-scaled inverse)."""
    n = s.window_length
    re = s.planes.re.reshape(s.n_half, -1)
    im = s.planes.im.reshape(s.n_half, -1)
    # Planes are not defensively copied at construction, so revalidate here:
    # a violated boundary bin would ask for a non-real reconstruction.
    _check_boundary_bins(im, n)
    full = _expand_half(re, im, n)
    x = _ifft(full).real
    if s.planes.re.ndim == 1:
        return np.ascontiguousarray(x[:, 0])
    return np.ascontiguousarray(x)


def circular_convolve(x, k) -> np.ndarray:
    """Cyclic convolution (x * k)[m] = sum_i x[i] k[(m - i) mod n].

    Direct O(n^2) evaluation; kept as the time-domain oracle for the
    frequency-domain kernel-multiplication path, not used in hot loops.
    """
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if x.ndim != 1 or k.ndim != 1:
        raise ValueError("circular_convolve expects 1-D sequences")
    if x.shape[0] != k.shape[0]:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {k.shape[0]}")
    n = x.shape[0]
    out = np.zeros(n)
    for m in range(n):
        acc = 0.0
        for i in range(n):
            acc += x[i] * k[(m - i) % n]
        out[m] = acc
    return out
