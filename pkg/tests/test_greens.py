"""Radial impulse responses and the polynomially corrected kernel.

The corrected-kernel golden value is frozen from an independent reduction:
for the (alpha=2, d=2, k=1) operator with direction (1, 0) and offset 0,
pairing rho(x1) = -|x1|/2 against the constant dual collapses to a 1-D
frequency integral, giving

    g(0) = (2 - J) / pi,    J = integral_{1/2}^{1} kappa_hat(w) / w^2 dw,

because the plateau of kappa_hat reproduces |t|-type kinks exactly at
t = 0 and the tail correction is the elementary integral of 1/w^2.  J is
re-derived here by adaptive quadrature and pinned to 15 digits.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from kplanenet import (OperatorSpec, build_corrector, greens_constant,
                       kernel_g, profile, project_poly, rho, rho_radial,
                       drho_radial, weak_identity_residual)
from kplanenet.greens import ACTIVATION_ALIASES, alias_info
from kplanenet.kplane import GridFunction
from kplanenet.polyspace import kappa_hat

J_FROZEN = 0.650286808517398
G0_FROZEN = 0.429627052361588


def test_constant_branches_match_closed_forms():
    case, const = greens_constant(2.0, 1)
    assert case == "power" and const == pytest.approx(-0.5, rel=1e-15)
    case, const = greens_constant(3.0, 2)
    assert case == "power" and const == pytest.approx(-1 / (2 * math.pi), rel=1e-14)
    case, const = greens_constant(4.0, 2)    # alpha - m = 2: log branch
    assert case == "power_log" and const == pytest.approx(1 / (8 * math.pi), rel=1e-14)
    case, const = greens_constant(3.0, 1)
    assert case == "power_log" and const == pytest.approx(1 / (2 * math.pi), rel=1e-14)


def test_no_pointwise_profile_at_or_below_arity():
    with pytest.raises(ValueError):
        greens_constant(2.0, 2)
    with pytest.raises(ValueError):
        profile(1.5, 2)


def test_power_profile_homogeneity():
    prof = profile(2.5, 1)   # rho(r) = const * r^{1.5}
    r = np.array([0.3, 1.0, 2.7])
    np.testing.assert_allclose(rho_radial(prof, 2.0 * r),
                               2.0 ** 1.5 * rho_radial(prof, r), rtol=1e-13)
    assert rho_radial(prof, 0.0) == 0.0


def test_log_profile_scaling_identity():
    # rho(r) = B r^2 log r at (4, 2): rho(2r) - 4 rho(r) = 4 B log(2) r^2
    prof = profile(4.0, 2)
    r = np.array([0.5, 1.0, 3.0])
    lhs = rho_radial(prof, 2.0 * r) - 4.0 * rho_radial(prof, r)
    np.testing.assert_allclose(lhs, 4.0 * prof.constant * math.log(2.0) * r ** 2,
                               rtol=1e-13)
    assert rho_radial(prof, 0.0) == 0.0   # r^2 log r -> 0


def test_radial_derivative_matches_finite_differences():
    for prof in (profile(2.0, 1), profile(4.0, 2), profile(2.5, 1)):
        r = np.array([0.4, 1.1, 2.3])
        h = 1e-6
        fd = (rho_radial(prof, r + h) - rho_radial(prof, r - h)) / (2 * h)
        np.testing.assert_allclose(drho_radial(prof, r), fd, rtol=1e-7)


def test_rho_vectorizes_offsets():
    prof = profile(3.0, 2)
    z = np.array([[0.3, -0.4], [1.0, 0.0]])
    np.testing.assert_allclose(rho(prof, z),
                               rho_radial(prof, np.hypot(z[:, 0], z[:, 1])),
                               rtol=1e-15)


# -- weak identity -----------------------------------------------------------


def test_weak_identity_small_case():
    res = weak_identity_residual(profile(2.0, 1))
    assert res <= 1e-3


def test_weak_identity_guards():
    prof = profile(2.0, 1)
    with pytest.raises(ValueError):
        weak_identity_residual(prof, refine=0.5)
    with pytest.raises(ValueError, match="decay"):
        # extent far too small for the Gaussian to vanish at the edge
        weak_identity_residual(prof, extent=2.0, points=64)
    with pytest.raises(ValueError):
        grid = GridFunction(extents=(8.0, 8.0), values=np.zeros((16, 16)))
        weak_identity_residual(prof, testfn=grid)   # wrong dimension


# -- corrected kernel golden value -------------------------------------------


def test_kernel_correction_golden_value():
    J, quad_err = quad(lambda w: kappa_hat(w) / w ** 2, 0.5, 1.0)
    assert abs(J - J_FROZEN) <= 1e-8 and quad_err < 1e-6
    g0_exact = (2.0 - J_FROZEN) / math.pi
    assert g0_exact == pytest.approx(G0_FROZEN, abs=1e-15)

    spec = OperatorSpec(alpha=2.0, d=2, k=1)
    A = np.array([[1.0, 0.0]])
    t = np.array([0.0])
    prof = profile(spec.alpha, spec.m)

    errors = {}
    for h in (0.5, 0.25):
        cor = build_corrector(2, 1, extent=1024.0 * h, points=2049)
        g0 = kernel_g(spec, A, t, np.zeros(2), corrector=cor)
        errors[h] = g0 - G0_FROZEN
        coeffs = project_poly(cor, rho(prof, cor.grid_points() @ A.T - t))
        # parity of |x1| on the symmetric grid forces the linear part to zero
        assert abs(coeffs.coeffs[(1, 0)]) + abs(coeffs.coeffs[(0, 1)]) <= 1e-12

    assert abs(errors[0.25]) <= 2e-3
    # the kink of |x1| at the nodes makes the pairing second-order accurate
    assert 3.5 <= errors[0.5] / errors[0.25] <= 4.5


def test_kernel_without_corrector_is_raw_profile():
    spec = OperatorSpec(alpha=2.0, d=2, k=1)
    A, t = np.array([[0.6, 0.8]]), np.array([0.25])
    x = np.array([0.5, -0.5])
    prof = profile(2.0, 1)
    expected = float(rho(prof, (A @ x - t)))
    assert kernel_g(spec, A, t, x) == pytest.approx(expected, rel=1e-15)


def test_kernel_shape_guards():
    spec = OperatorSpec(alpha=2.0, d=2, k=1)
    with pytest.raises(ValueError):
        kernel_g(spec, np.eye(2), np.zeros(2), np.zeros(2))   # r mismatch
    with pytest.raises(ValueError):
        kernel_g(spec, np.array([[1.0, 0.0]]), np.zeros(2), np.zeros(2))
    cor = build_corrector(1, 1, extent=64.0, points=513)
    with pytest.raises(ValueError, match="corrector"):
        kernel_g(spec, np.array([[1.0, 0.0]]), np.zeros(1), np.zeros(2),
                 corrector=cor)


def test_relu_alias_contract():
    info = alias_info("relu")
    assert info["alpha"] == 2.0 and info["m"] == 1
    z = np.array([-1.5, 0.0, 2.0])
    np.testing.assert_array_equal(info["evaluate"](z), np.maximum(z, 0.0))
    # relu differs from the profile by the absorbable linear part z/2
    prof = profile(2.0, 1)
    np.testing.assert_allclose(info["evaluate"](z),
                               z / 2.0 - rho_radial(prof, np.abs(z)), atol=1e-15)
    assert "relu" in ACTIVATION_ALIASES
    with pytest.raises(ValueError):
        alias_info("gelu")
