"""Discrete <-> continuous Fourier alignment.

This module owns the single convention used everywhere else.  A sampled
axis is the closed symmetric grid

    x_j = -X + j*h,   h = 2X/(n-1),   j = 0..n-1,

treated as one period of length L = n*h (one spacing longer than the
span, so -X and +X are distinct samples).  The continuous transform

    fhat(w) = integral f(x) exp(-i w x) dx

is approximated on the frequency comb w_l = 2*pi*l/L by

    fhat(w_l) ~= h * exp(+i w_l X) * DFT[f]_l

and the inverse by  f(x_j) ~= IDFT[fhat * exp(-i w_l X)]_j / h.
Radial multipliers need no phase factors (they are diagonal either way).
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sp_fft


def axis(extent: float, n: int) -> np.ndarray:
    """Sample positions of one axis."""
    return np.linspace(-extent, extent, n)


def spacing(extent: float, n: int) -> float:
    return 2.0 * extent / (n - 1)


def freqs(extent: float, n: int) -> np.ndarray:
    """Angular frequencies w_l = 2*pi*l/L in FFT (wrapped) order."""
    return 2.0 * np.pi * sp_fft.fftfreq(n, d=spacing(extent, n))


def forward(values: np.ndarray, extents, axes=None) -> np.ndarray:
    """Aligned DFT: returns samples of fhat on the freqs() comb.

    `extents` is one extent per transformed axis (scalar allowed when a
    single axis is transformed).
    """
    if axes is None:
        axes = tuple(range(values.ndim))
    extents = np.atleast_1d(np.asarray(extents, dtype=float))
    if len(extents) != len(axes):
        raise ValueError("one extent per transformed axis required")
    out = np.asarray(values, dtype=complex)
    for ax, X in zip(axes, extents):
        n = out.shape[ax]
        h = spacing(X, n)
        w = freqs(X, n)
        phase = h * np.exp(1j * w * X)
        shape = [1] * out.ndim
        shape[ax] = n
        out = sp_fft.fft(out, axis=ax) * phase.reshape(shape)
    return out


def inverse(spectrum: np.ndarray, extents, axes=None) -> np.ndarray:
    """Inverse of forward(); returns (complex) samples on the axis grid."""
    if axes is None:
        axes = tuple(range(spectrum.ndim))
    extents = np.atleast_1d(np.asarray(extents, dtype=float))
    if len(extents) != len(axes):
        raise ValueError("one extent per transformed axis required")
    out = np.asarray(spectrum, dtype=complex)
    for ax, X in zip(axes, extents):
        n = out.shape[ax]
        h = spacing(X, n)
        w = freqs(X, n)
        phase = np.exp(-1j * w * X)
        shape = [1] * out.ndim
        shape[ax] = n
        out = sp_fft.ifft(out * phase.reshape(shape), axis=ax) / h
    return out


def radial_freq_grid(extents, counts) -> np.ndarray:
    """|w| on the full FFT-ordered frequency lattice of a sampled box."""
    extents = np.atleast_1d(np.asarray(extents, dtype=float))
    sq = None
    for i, (X, n) in enumerate(zip(extents, counts)):
        w = freqs(X, n)
        shape = [1] * len(counts)
        shape[i] = n
        term = (w ** 2).reshape(shape)
        sq = term if sq is None else sq + term
    return np.sqrt(sq)


def apply_radial_multiplier(values: np.ndarray, extents, symbol) -> np.ndarray:
    """Apply the Fourier multiplier symbol(|w|) to real samples.

    Returns the real part; the imaginary residue is the caller's
    consistency check (exposed via the second return value).
    """
    spec = sp_fft.fftn(np.asarray(values, dtype=float))
    spec *= symbol(radial_freq_grid(extents, values.shape))
    out = sp_fft.ifftn(spec)
    return out.real, float(np.max(np.abs(out.imag)))
