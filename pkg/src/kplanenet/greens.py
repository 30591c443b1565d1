"""Closed-form radial impulse responses and the corrected kernel.

For the fractional-power radial symbol |w|^alpha acting on functions of m
variables (alpha > m), the impulse response is a radial power or
power-times-log profile with an explicit constant.  This module evaluates
those profiles, certifies them numerically through a weak-identity
quadrature oracle, and assembles the polynomially corrected kernel
g(A, t, x) = rho(Ax - t) - sum_n <m_n*, rho(A. - t)> m_n(x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fourier
from .kplane import GridFunction
from .operators import OperatorSpec
from .polyspace import PolyCorrector, project_poly

# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GreensProfile:
    """Radial impulse-response profile of |w|^alpha on R^m."""

    m: int
    alpha: float
    case: str               # "power" or "power_log"
    constant: float
    m_prime: int | None = None

    def __post_init__(self):
        if self.case not in ("power", "power_log"):
            raise ValueError(f"unknown case {self.case!r}")
        if self.case == "power_log" and self.m_prime is None:
            raise ValueError("power_log case requires m_prime")


def greens_constant(alpha: float, m: int) -> tuple:
    """Branch tag and constant of the radial impulse response.

    power:      A = Gamma((m-alpha)/2) / (2^alpha pi^{m/2} Gamma(alpha/2))
    power_log:  B = (-1)^{1+m'} / (2^{2m'+m-1} pi^{m/2} Gamma(m'+m/2) m'!)
                for alpha - m = 2m'.
    """
    alpha = float(alpha)
    m = int(m)
    if m < 1:
        raise ValueError("m must be a positive integer")
    if alpha <= m:
        raise ValueError("pointwise Green's function undefined for alpha <= m")
    half = (alpha - m) / 2.0
    m_prime = round(half)
    if m_prime >= 1 and abs(half - m_prime) < 1e-12:
        sign = -1.0 if (1 + m_prime) % 2 else 1.0
        const = sign / (2.0 ** (2 * m_prime + m - 1) * math.pi ** (m / 2.0)
                        * math.gamma(m_prime + m / 2.0) * math.factorial(m_prime))
        return "power_log", const
    const = math.gamma((m - alpha) / 2.0) / (
        2.0 ** alpha * math.pi ** (m / 2.0) * math.gamma(alpha / 2.0))
    return "power", const


def profile(alpha: float, m: int) -> GreensProfile:
    case, const = greens_constant(alpha, m)
    m_prime = round((alpha - m) / 2.0) if case == "power_log" else None
    return GreensProfile(m=int(m), alpha=float(alpha), case=case,
                         constant=const, m_prime=m_prime)


def rho_radial(prof: GreensProfile, r) -> np.ndarray:
    """Profile value at radius r >= 0; exactly 0 at r = 0 (the limit)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape)
    pos = r > 0
    if prof.case == "power":
        out[pos] = prof.constant * r[pos] ** (prof.alpha - prof.m)
    else:
        rp = r[pos]
        out[pos] = prof.constant * rp ** (2 * prof.m_prime) * np.log(rp)
    return out


def drho_radial(prof: GreensProfile, r) -> np.ndarray:
    """Radial derivative of the profile; 0 at r = 0 (subgradient choice)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape)
    pos = r > 0
    if prof.case == "power":
        p = prof.alpha - prof.m
        out[pos] = prof.constant * p * r[pos] ** (p - 1.0)
    else:
        two_mp = 2 * prof.m_prime
        rp = r[pos]
        out[pos] = prof.constant * rp ** (two_mp - 1) * (two_mp * np.log(rp) + 1.0)
    return out


def rho(prof: GreensProfile, t) -> np.ndarray:
    """Profile evaluated at vectors t in R^m (last axis), or radii if m = 1."""
    t = np.asarray(t, dtype=float)
    if t.ndim >= 1 and t.shape[-1] == prof.m:
        r = np.linalg.norm(t, axis=-1)
    elif prof.m == 1:
        r = np.abs(t)
    else:
        raise ValueError(f"expected vectors with trailing axis {prof.m}")
    out = rho_radial(prof, np.atleast_1d(r))
    return float(out[0]) if r.ndim == 0 else out.reshape(r.shape)


# ---------------------------------------------------------------------------
# activation aliases (null-space-equivalent nonlinearities)
# ---------------------------------------------------------------------------

ACTIVATION_ALIASES = {
    "relu": {
        "alpha": 2.0,
        "m": 1,
        "evaluate": lambda z: np.maximum(z, 0.0),
        "note": "relu(z) = z/2 - rho(z): differs from the alpha=2, m=1 "
                "profile by the degree-1 polynomial z/2, which the "
                "unpenalized polynomial block absorbs",
    },
}


def alias_info(name: str) -> dict:
    try:
        return ACTIVATION_ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown activation alias {name!r}") from None


# ---------------------------------------------------------------------------
# weak-identity oracle
# ---------------------------------------------------------------------------

# Default quadrature boxes per (alpha, m).  Local profiles (even alpha) are
# spacing-limited; fractional/odd alpha makes the multiplier nonlocal, so the
# product rho * (L phi) decays only algebraically and the box must be large.
_ORACLE_GRIDS = {
    (2.0, 1): (20.0, 4097),
    (4.0, 2): (16.0, 513),
    (3.0, 1): (65536.0, 2 ** 21 + 1),
    (3.0, 2): (120.0, 2049),
}


def oracle_default_grid(alpha: float, m: int) -> tuple:
    """(extent, points per axis) used by the oracle when none are given."""
    key = (float(alpha), int(m))
    if key not in _ORACLE_GRIDS:
        raise ValueError(f"no default oracle grid for (alpha, m) = {key}; "
                         "pass extent and points explicitly")
    return _ORACLE_GRIDS[key]


def _unit_gaussian(pts: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * np.sum(pts ** 2, axis=-1))


def weak_identity_residual(prof: GreensProfile, testfn=None, extent=None,
                           points=None, refine: float = 1.0,
                           boundary_tol: float = 1e-8) -> float:
    """|<rho, L phi> - phi(0)| on a trapezoid grid, L applied spectrally.

    testfn may be a GridFunction (used as-is), a callable on (..., m) point
    arrays, or None for a unit-height Gaussian.  refine > 1 refines in a
    balanced way: points per axis scale by refine, the extent by
    sqrt(refine), so both the spacing-limited and the tail-limited error
    contributions shrink.
    """
    m = prof.m
    if isinstance(testfn, GridFunction):
        if refine != 1.0:
            raise ValueError("refine applies only to callable test functions")
        phi = testfn
        if phi.d != m:
            raise ValueError("test function dimension must equal the profile arity")
        phi0 = float(phi.interp(np.zeros(m)))
    else:
        if extent is None or points is None:
            default_extent, default_points = oracle_default_grid(prof.alpha, m)
            extent = default_extent if extent is None else extent
            points = default_points if points is None else points
        if refine < 1.0:
            raise ValueError("refine must be >= 1")
        n = int(round((points - 1) * refine)) + 1
        X = float(extent) * math.sqrt(refine)
        fn = testfn if testfn is not None else _unit_gaussian
        phi = GridFunction.from_callable(fn, (X,) * m, (n,) * m)
        phi0 = float(np.asarray(fn(np.zeros((1, m)))).ravel()[0])

    if phi.boundary_ratio() > boundary_tol:
        raise ValueError("configuration error: test function does not decay "
                         "below the boundary tolerance at the grid edge; "
                         "enlarge the extent")

    lphi, _ = fourier.apply_radial_multiplier(
        phi.values, phi.extents, lambda w: w ** prof.alpha)
    axes = phi.axes()
    mesh = np.meshgrid(*axes, indexing="ij", sparse=True)
    rad = np.sqrt(sum(a ** 2 for a in mesh))
    rho_vals = rho_radial(prof, rad)
    cell = float(np.prod(phi.spacings()))
    pairing = cell * float(np.sum(rho_vals * lphi))
    return abs(pairing - phi0)


# ---------------------------------------------------------------------------
# corrected kernel
# ---------------------------------------------------------------------------


def kernel_g(spec: OperatorSpec, A: np.ndarray, t, x,
             corrector: PolyCorrector | None = None):
    """rho(Ax - t) minus its dual-projected polynomial part.

    corrector=None means "no correction terms" (empty polynomial space);
    otherwise the corrector must match the spec's (d, n_L).  x may be a
    single point (d,) or a batch (..., d).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    r, d = A.shape
    if d != spec.d or r != spec.d - spec.k:
        raise ValueError("direction matrix shape does not match the operator")
    if t.shape != (r,):
        raise ValueError("offset vector must have one entry per matrix row")
    prof = profile(spec.alpha, spec.m)

    vals = rho(prof, pts @ A.T - t)
    if corrector is not None:
        if corrector.d != spec.d or corrector.n_L != spec.n_L:
            raise ValueError("corrector dimension mismatch: built for "
                             f"(d={corrector.d}, n_L={corrector.n_L}), "
                             f"operator needs (d={spec.d}, n_L={spec.n_L})")
        on_grid = rho(prof, corrector.grid_points() @ A.T - t)
        coeffs = project_poly(corrector, on_grid)
        vals = vals - coeffs(pts)
    return float(vals[0]) if single else vals.reshape(x.shape[:-1])
