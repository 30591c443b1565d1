"""Polynomial null space machinery.

Monomial basis m_n(x) = x^n/n!, the dual Schwartz basis m_n* synthesized
from a radial spectral bump, the induced projector onto low-degree
polynomials, and biorthogonality verification.  The duals are bandlimited
(spectral support inside the unit ball), so trapezoid pairings against
polynomials on grids with spacing h < pi carry no aliasing error; grid
extent and spacing defaults below were chosen by measurement so that the
Gram matrix of the pairing is the identity to well under 1e-6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fourier

MultiIndex = tuple  # d nonnegative integers


def enumerate_multi_indices(d: int, n_max: int) -> list:
    """All multi-indices with |n| <= n_max in graded lexicographic order."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if n_max <= -1:
        return []
    out = []
    for deg in range(n_max + 1):
        level = []

        def rec(prefix, remaining, slots):
            if slots == 1:
                level.append(prefix + (remaining,))
                return
            for v in range(remaining + 1):
                rec(prefix + (v,), remaining - v, slots - 1)

        rec((), deg, d)
        out.extend(sorted(level))
    return out


def monomial_eval(n: MultiIndex, x) -> np.ndarray:
    """m_n(x) = prod x_i^{n_i} / prod n_i!  (x: (..., d) or scalar for d=1)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != len(n):
        raise ValueError("dimension mismatch between index and point")
    out = np.ones(x.shape[:-1])
    for i, ni in enumerate(n):
        if ni:
            out = out * x[..., i] ** ni / math.factorial(ni)
    return out


def kappa_hat(omega, R0: float = 0.5):
    """Radial spectral bump: 1 on [0, R0], 0 on [1, inf), smooth between."""
    if not (0.0 < R0 <= 0.5):
        raise ValueError("transition radius R0 must lie in (0, 1/2]")
    w = np.abs(np.asarray(omega, dtype=float))
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    out = np.zeros_like(w)
    out[w <= R0] = 1.0
    mid = (w > R0) & (w < 1.0)
    if np.any(mid):
        s = (1.0 - w[mid]) / (1.0 - R0)
        hs = np.exp(-1.0 / s)
        hc = np.exp(-1.0 / (1.0 - s))
        out[mid] = hs / (hs + hc)
    return float(out[0]) if scalar else out


# measured defaults: (extent, points per axis) per dimension
_GRID_DEFAULTS = {1: (1024.0, 8193), 2: (1024.0, 2049), 3: (256.0, 193)}


@dataclass
class PolyCorrector:
    """Cached samples of the dual basis on a quadrature grid."""

    d: int
    n_L: int
    extent: float
    points: int
    R0: float
    indices: list
    duals: np.ndarray = field(repr=False)  # (len(indices), points^d)
    imag_residue: float = 0.0
    edge_ratio: float = 0.0

    @property
    def h(self) -> float:
        return fourier.spacing(self.extent, self.points)

    def axis(self) -> np.ndarray:
        return fourier.axis(self.extent, self.points)

    def grid_shape(self) -> tuple:
        return (self.points,) * self.d

    def grid_points(self) -> np.ndarray:
        """(points^d, d) array of sample locations (row-major)."""
        ax = self.axis()
        mesh = np.meshgrid(*([ax] * self.d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def pair_samples(self, values: np.ndarray) -> np.ndarray:
        """<m_n*, f> for f sampled on the corrector grid (trapezoid weights)."""
        flat = np.asarray(values, dtype=float).ravel()
        if flat.shape[0] != self.duals.shape[1]:
            raise ValueError("sample array does not match the corrector grid")
        return self.h ** self.d * (self.duals @ flat)

    def pair_function(self, fn) -> np.ndarray:
        """<m_n*, fn> with fn evaluated on the corrector grid points."""
        return self.pair_samples(fn(self.grid_points()))


def build_corrector(d: int, n_L: int, extent: float | None = None,
                    points: int | None = None, R0: float = 0.5) -> PolyCorrector:
    """Synthesize the dual basis by inverse DFT of (-i xi)^n kappa_hat(|xi|)."""
    if d not in (1, 2, 3):
        raise ValueError("corrector grids are supported for d in {1, 2, 3}")
    if n_L > 3:
        raise ValueError("degree bound n_L <= 3 at desk scale")
    if extent is None or points is None:
        dx, dn = _GRID_DEFAULTS[d]
        extent = dx if extent is None else extent
        points = dn if points is None else points
    h = fourier.spacing(extent, points)
    if h >= np.pi:
        raise ValueError(
            f"grid spacing {h:.3f} >= pi: dual-basis pairings would alias; "
            "increase points or reduce extent")
    indices = enumerate_multi_indices(d, n_L)
    counts = (points,) * d
    extents = (extent,) * d
    wgrids = [fourier.freqs(extent, points)] * d
    radial = fourier.radial_freq_grid(extents, counts)
    bump = kappa_hat(radial, R0)
    del radial
    duals = np.empty((len(indices), points ** d))
    imag_residue = 0.0
    for row, n in enumerate(indices):
        F = np.asarray(bump, dtype=complex)
        for axis_i, ni in enumerate(n):
            if ni:
                shape = [1] * d
                shape[axis_i] = points
                F = F * (-1j * wgrids[axis_i].reshape(shape)) ** ni
        vals = fourier.inverse(F, extents)
        del F
        imag_residue = max(imag_residue, float(np.max(np.abs(vals.imag))))
        duals[row] = vals.real.ravel()
        del vals
    if imag_residue > 1e-10:
        raise ValueError(f"dual synthesis imaginary residue {imag_residue:.2e} > 1e-10")
    # boundary magnitude relative to peak, for the decay diagnostics
    grid = duals.reshape((len(indices),) + counts)
    edge = 0.0
    for axis_i in range(d):
        sl = [slice(None)] * (d + 1)
        sl[axis_i + 1] = 0
        edge = max(edge, float(np.max(np.abs(grid[tuple(sl)]))))
        sl[axis_i + 1] = -1
        edge = max(edge, float(np.max(np.abs(grid[tuple(sl)]))))
    peak = float(np.max(np.abs(duals)))
    return PolyCorrector(d=d, n_L=n_L, extent=float(extent), points=int(points),
                         R0=R0, indices=indices, duals=duals,
                         imag_residue=imag_residue,
                         edge_ratio=edge / peak if peak else 0.0)


@dataclass
class PolyCoeffs:
    """Coefficients b_n of p(x) = sum b_n m_n(x), degree bound n_L."""

    d: int
    degree: int
    coeffs: dict

    def __post_init__(self):
        for n in self.coeffs:
            if len(n) != self.d or sum(n) > self.degree:
                raise ValueError(f"index {n} violates the degree bound")

    def vector(self, indices=None) -> np.ndarray:
        if indices is None:
            indices = enumerate_multi_indices(self.d, self.degree)
        return np.array([self.coeffs.get(n, 0.0) for n in indices])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim <= 1 and self.d == 1 or x.ndim == 1
        pts = np.atleast_2d(x) if self.d > 1 else np.asarray(x).reshape(-1, 1)
        out = np.zeros(pts.shape[0])
        for n, b in self.coeffs.items():
            if b:
                out += b * monomial_eval(n, pts)
        return float(out[0]) if (squeeze and out.size == 1) else out

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector()))

    @classmethod
    def zero(cls, d: int, degree: int) -> "PolyCoeffs":
        return cls(d=d, degree=degree,
                   coeffs={n: 0.0 for n in enumerate_multi_indices(d, degree)})


def project_poly(corrector: PolyCorrector, values: np.ndarray) -> PolyCoeffs:
    """Coefficients <m_n*, f> of the polynomial projection of sampled f."""
    b = corrector.pair_samples(values)
    return PolyCoeffs(d=corrector.d, degree=corrector.n_L,
                      coeffs=dict(zip(corrector.indices, b.tolist())))


def gram_matrix(corrector: PolyCorrector) -> np.ndarray:
    """Pairings <m_n*, m_j> over the corrector's index set (identity, ideally)."""
    pts = corrector.grid_points()
    cols = np.stack([monomial_eval(n, pts) for n in corrector.indices], axis=-1)
    return corrector.h ** corrector.d * (corrector.duals @ cols)
