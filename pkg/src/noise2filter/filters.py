"""Reconstruction filters: dense representation, exponentially binned
piecewise-linear basis, FFT convolution, Ram-Lak, and the two standard
noise-suppression filter transforms (Gaussian smoothing and frequency
scaling).

A dense filter spans the symmetric support ``[-half_width, half_width]``;
``coeffs[k + half_width]`` is the tap at offset ``k``.  All filters here
are even.

The binned basis places knots at offsets ``0, 1, 2, 4, ..., half_width``
(doubling, clipped at the edge).  Basis element ``i`` is the symmetric hat
that is 1 at offset ``+-knots[i]``, decays linearly to 0 at the
neighboring knots, and is 0 beyond.  A coefficient vector therefore
expands to the even filter whose profile is the linear interpolation of
the coefficients over the knots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

__all__ = [
    "Filter",
    "ExpBinBasis",
    "make_basis",
    "basis_element",
    "expand_filter",
    "ram_lak",
    "convolve_sinogram",
    "gaussian_smooth",
    "frequency_scale",
]


@dataclass(frozen=True)
class Filter:
    half_width: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if coeffs.shape != (2 * self.half_width + 1,):
            raise ValueError("coeffs length must be 2*half_width + 1")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("filter coefficients must be finite")
        if np.max(np.abs(coeffs - coeffs[::-1])) > 1e-12 * max(
            1.0, np.max(np.abs(coeffs))
        ):
            raise ValueError("filter must be symmetric")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def __getitem__(self, k: int) -> float:
        """Tap at signed offset ``k``."""
        return float(self.coeffs[k + self.half_width])


@dataclass(frozen=True)
class ExpBinBasis:
    half_width: int
    knots: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=np.intp)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        if knots[0] != 0 or knots[-1] != self.half_width:
            raise ValueError("knots must start at 0 and end at half_width")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")

    @property
    def n_elems(self) -> int:
        return len(self.knots)


def make_basis(half_width: int) -> ExpBinBasis:
    """Exponentially binned knot grid: 0, 1, 2, 4, ... clipped to the edge."""
    if half_width < 1:
        raise ValueError("half_width must be >= 1")
    knots = [0, 1]
    while knots[-1] < half_width:
        knots.append(min(2 * knots[-1], half_width))
    return ExpBinBasis(half_width=half_width, knots=np.array(knots))


def expand_filter(b: ExpBinBasis, c: np.ndarray) -> Filter:
    """Dense even filter with values ``c`` at the knots, linear in between."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (b.n_elems,):
        raise ValueError(f"expected {b.n_elems} coefficients, got {c.shape}")
    offsets = np.abs(np.arange(-b.half_width, b.half_width + 1))
    coeffs = np.interp(offsets, b.knots, c)
    return Filter(half_width=b.half_width, coeffs=coeffs)


def basis_element(b: ExpBinBasis, i: int) -> Filter:
    """The i-th hat function of the binned basis."""
    if not 0 <= i < b.n_elems:
        raise IndexError(f"basis element index {i} out of range")
    c = np.zeros(b.n_elems)
    c[i] = 1.0
    return expand_filter(b, c)


def ram_lak(half_width: int, pixel_size: float = 1.0) -> Filter:
    """Band-limited ramp filter in the spatial domain."""
    if half_width < 1:
        raise ValueError("half_width must be >= 1")
    t = pixel_size
    k = np.arange(-half_width, half_width + 1)
    coeffs = np.zeros(2 * half_width + 1)
    coeffs[half_width] = 1.0 / (4.0 * t * t)
    odd = k % 2 != 0
    coeffs[odd] = -1.0 / (np.pi**2 * k[odd].astype(np.float64) ** 2 * t * t)
    return Filter(half_width=half_width, coeffs=coeffs)


def convolve_sinogram(s, f: Filter):
    """1D linear convolution along detector columns, FFT-accelerated.

    ``s`` is either a raw array of shape (..., det_cols) or a Sinogram;
    the output matches the input kind, cropped to the detector width
    (zero padding outside).  Linear in both arguments.
    """
    if hasattr(s, "data") and hasattr(s, "geometry"):
        return type(s)(geometry=s.geometry, data=convolve_sinogram(s.data, f))
    data = np.asarray(s)
    out = fftconvolve(
        data.astype(np.float64, copy=False),
        f.coeffs[(None,) * (data.ndim - 1)],
        mode="same",
        axes=-1,
    )
    return out.astype(np.float32)


def convolve_sinogram_bank(s, filters: list) -> list:
    """Convolve one sinogram with several filters, sharing the data FFT.

    Equivalent to ``[convolve_sinogram(s, f) for f in filters]`` but the
    forward transform of the data is computed once, which matters when
    filtering with a whole basis.
    """
    if hasattr(s, "data") and hasattr(s, "geometry"):
        return [
            type(s)(geometry=s.geometry, data=out)
            for out in convolve_sinogram_bank(s.data, filters)
        ]
    data = np.asarray(s)
    nc = data.shape[-1]
    widths = {f.half_width for f in filters}
    if len(widths) != 1:
        raise ValueError("filters in a bank must share a half width")
    (hw,) = widths
    from scipy import fft as sp_fft

    length = sp_fft.next_fast_len(nc + 2 * hw)
    spectrum = sp_fft.rfft(data.astype(np.float64, copy=False), length, axis=-1)
    outs = []
    for f in filters:
        kernel = sp_fft.rfft(f.coeffs, length)
        full = sp_fft.irfft(spectrum * kernel, length, axis=-1)
        outs.append(full[..., hw : hw + nc].astype(np.float32))
    return outs


def gaussian_smooth(f: Filter, sigma: float) -> Filter:
    """Convolve the filter with a unit-sum discrete Gaussian of width sigma.

    The support is re-cropped to the original half width.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    radius = max(1, int(np.ceil(4 * sigma)))
    j = np.arange(-radius, radius + 1)
    g = np.exp(-(j.astype(np.float64) ** 2) / (2.0 * sigma * sigma))
    g /= g.sum()
    full = np.convolve(f.coeffs, g)
    center = f.half_width + radius
    coeffs = full[center - f.half_width : center + f.half_width + 1]
    return Filter(half_width=f.half_width, coeffs=coeffs)


def frequency_scale(f: Filter, f_sc: float) -> Filter:
    """Zero all filter spectrum content above ``f_sc`` times Nyquist."""
    if not 0 < f_sc <= 1:
        raise ValueError("f_sc must lie in (0, 1]")
    n = len(f.coeffs)
    spectrum = np.fft.rfft(np.fft.ifftshift(f.coeffs))
    freqs = np.fft.rfftfreq(n)  # cycles per sample, Nyquist = 0.5
    spectrum[freqs > f_sc * 0.5] = 0.0
    coeffs = np.fft.fftshift(np.fft.irfft(spectrum, n))
    # Enforce exact evenness against rounding noise.
    coeffs = 0.5 * (coeffs + coeffs[::-1])
    return Filter(half_width=f.half_width, coeffs=coeffs)
