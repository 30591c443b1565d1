"""Independent references: polyharmonic interpolation, 1-D grid-knot
optimum, and the sparsity certificate.

These deliberately avoid the main solver's machinery where possible (dense
saddle solve with partial pivoting, simple dictionaries) so they can serve
as cross-checks.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import linalg as sp_linalg

from . import greens
from .network import Model, merge_atoms
from .operators import null_space_dim
from .polyspace import PolyCoeffs, enumerate_multi_indices, monomial_eval
from .solver import lasso


def polyharmonic_interpolate(X, y, alpha: float):
    """Interpolation weights (a, b) from the kernel/polynomial saddle system.

    K a + P b = y with P^T a = 0, where K_ij = rho(x_i - x_j) for the
    d-variate profile of |w|^alpha and P spans polynomials of degree
    floor((alpha - d)/2) -- the classical side-condition order that makes
    the kernel conditionally positive definite.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    M, d = X.shape
    if alpha <= d:
        raise ValueError("alpha must exceed the data dimension")
    diff = X[:, None, :] - X[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    off = dist + np.eye(M)
    if np.min(off) == 0.0:
        raise ValueError("data points must be distinct")
    degree = int(math.floor((alpha - d) / 2))
    idx = enumerate_multi_indices(d, degree)
    q = len(idx)
    if M < q:
        raise ValueError(f"need at least {q} points for the degree-{degree} "
                         "side conditions")
    P = np.stack([monomial_eval(n, X) for n in idx], axis=-1)
    sv = np.linalg.svd(P, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise ValueError("polynomial block rank-deficient on these points")
    prof = greens.profile(alpha, d)
    K = greens.rho_radial(prof, dist)
    S = np.zeros((M + q, M + q))
    S[:M, :M] = K
    S[:M, M:] = P
    S[M:, :M] = P.T
    rhs = np.concatenate([y, np.zeros(q)])
    try:
        sol = sp_linalg.solve(S, rhs)
    except sp_linalg.LinAlgError as exc:
        raise ValueError(f"saddle system singular: {exc}") from None
    a, b = sol[:M], sol[M:]
    interp_res = np.max(np.abs(K @ a + P @ b - y))
    side_res = np.max(np.abs(P.T @ a)) if q else 0.0
    scale = max(np.max(np.abs(y)), 1e-300)
    if interp_res > 1e-8 * scale or side_res > 1e-8:
        raise ValueError("saddle system too ill-conditioned: residuals "
                         f"{interp_res:.2e} / {side_res:.2e}")
    poly = PolyCoeffs(d=d, degree=degree, coeffs=dict(zip(idx, b.tolist())))
    return a, poly


def polyharmonic_eval(X_sites, a, poly: PolyCoeffs, alpha: float, x):
    """Evaluate the interpolant sum_i a_i rho(x - x_i) + poly(x)."""
    X_sites = np.atleast_2d(np.asarray(X_sites, dtype=float))
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    prof = greens.profile(alpha, X_sites.shape[1])
    dist = np.linalg.norm(pts[:, None, :] - X_sites[None, :, :], axis=-1)
    vals = greens.rho_radial(prof, dist) @ a + poly(pts)
    return vals if np.ndim(x) > 1 else float(vals[0])


def grid_knot_optimum_1d(x, y, lam: float, knots=1000, alpha: float = 2.0,
                         tol_kkt: float = 1e-12) -> float:
    """Optimal objective of the lasso over knot-aligned 1-D atoms.

    The dictionary holds rho(+x - t_j) and rho(-x - t_j) for every knot t_j
    plus the unpenalized polynomial block; the returned objective is a
    reference lower bound (up to knot resolution) for the trainer.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if isinstance(knots, (int, np.integer)):
        span = float(x.max() - x.min())
        pad = 0.1 * span if span > 0 else 1.0
        knots = np.linspace(x.min() - pad, x.max() + pad, int(knots))
    else:
        knots = np.asarray(knots, dtype=float)
        if knots.min() > x.min() or knots.max() < x.max():
            raise ValueError("knots must span the data range")
    prof = greens.profile(alpha, 1)
    n_L = math.ceil(alpha) - 1
    G = np.concatenate([greens.rho_radial(prof, np.abs(s * x[:, None] - knots))
                        for s in (1.0, -1.0)], axis=1)
    P = np.stack([x ** p for p in range(n_L + 1)], axis=-1)
    v, c, _ = lasso(G, P, y, lam, tol_kkt=tol_kkt)
    resid = y - G @ v - P @ c
    return float(resid @ resid + lam * np.sum(np.abs(v)))


def sparsity_certificate(model: Model, M: int) -> dict:
    """Check nnz(atoms) <= M - dim(null space) after merging duplicates."""
    merged = [a for a in merge_atoms(model.atoms) if a.v != 0.0]
    bound = int(M) - null_space_dim(model.spec.d, model.spec.n_L)
    return {"ok": len(merged) <= bound, "nnz": len(merged), "bound": bound}
