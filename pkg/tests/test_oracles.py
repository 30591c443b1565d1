"""Independent reference computations used to cross-check the solver."""

import numpy as np
import pytest

from kplanenet import (Atom, Model, OperatorSpec, forward,
                       grid_knot_optimum_1d, polyharmonic_eval,
                       polyharmonic_interpolate, reg_cost,
                       sparsity_certificate)
from kplanenet.polyspace import PolyCoeffs


def _cloud(seed=12, M=14, d=2):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.5, 1.5, size=(M, d))
    y = rng.standard_normal(M)
    return X, y


def test_interpolation_and_side_conditions():
    X, y = _cloud()
    a, poly = polyharmonic_interpolate(X, y, alpha=4.0)
    at_sites = polyharmonic_eval(X, a, poly, 4.0, X)
    np.testing.assert_allclose(at_sites, y, atol=1e-8)
    # degree-1 side conditions: a annihilates constants and coordinates
    assert abs(np.sum(a)) <= 1e-8
    np.testing.assert_allclose(X.T @ a, 0.0, atol=1e-8)


def test_interpolant_is_ordering_independent():
    X, y = _cloud(seed=4)
    probes = np.random.default_rng(9).uniform(-1, 1, size=(7, 2))
    a, poly = polyharmonic_interpolate(X, y, alpha=4.0)
    ref = polyharmonic_eval(X, a, poly, 4.0, probes)
    perm = np.random.default_rng(10).permutation(len(y))
    a2, poly2 = polyharmonic_interpolate(X[perm], y[perm], alpha=4.0)
    got = polyharmonic_eval(X[perm], a2, poly2, 4.0, probes)
    np.testing.assert_allclose(got, ref, atol=1e-8)


def test_interpolate_guards():
    X, y = _cloud()
    with pytest.raises(ValueError, match="exceed"):
        polyharmonic_interpolate(X, y, alpha=2.0)   # alpha <= d
    with pytest.raises(ValueError, match="distinct"):
        polyharmonic_interpolate(np.vstack([X, X[:1]]),
                                 np.append(y, 0.0), alpha=4.0)
    with pytest.raises(ValueError, match="rank"):
        collinear = np.column_stack([np.linspace(0, 1, 8), np.zeros(8)])
        polyharmonic_interpolate(collinear, np.ones(8), alpha=6.0)


def _univariate_instance(seed=8, M=8):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(-2.0, 2.0, M))
    y = rng.standard_normal(M)
    return x, y


def test_grid_optimum_lower_bounds_knot_aligned_models():
    """Direct objective comparison on shared instances.

    Any model whose biases sit on the knot grid is feasible for the grid
    problem, so its objective can never undercut the returned optimum.
    """
    x, y = _univariate_instance()
    lam = 0.1
    knots = np.linspace(x.min() - 0.4, x.max() + 0.4, 41)
    best = grid_knot_optimum_1d(x, y, lam, knots=knots)
    spec = OperatorSpec(alpha=2.0, d=1, k=0)
    rng = np.random.default_rng(0)
    X = x[:, None]
    for _ in range(12):
        picks = rng.choice(len(knots), size=3, replace=False)
        atoms = [Atom(v=rng.standard_normal(),
                      A=[[rng.choice([-1.0, 1.0])]], t=[knots[j]])
                 for j in picks]
        coeffs = rng.standard_normal(2)
        poly = PolyCoeffs(d=1, degree=1,
                          coeffs={(0,): coeffs[0], (1,): coeffs[1]})
        model = Model(spec=spec, atoms=atoms, poly=poly)
        resid = y - forward(model, X)
        objective = float(resid @ resid) + lam * reg_cost(model)
        assert best <= objective + 1e-10


def test_grid_optimum_knot_span_guard():
    x, y = _univariate_instance()
    with pytest.raises(ValueError, match="span"):
        grid_knot_optimum_1d(x, y, 0.1, knots=np.linspace(-1.0, 1.0, 11))


def test_grid_optimum_monotone_under_knot_refinement():
    x, y = _univariate_instance()
    fine = np.linspace(x.min() - 0.4, x.max() + 0.4, 801)
    coarse = fine[::4]   # nested: every coarse dictionary column reappears
    f_opt = grid_knot_optimum_1d(x, y, 0.05, knots=fine)
    c_opt = grid_knot_optimum_1d(x, y, 0.05, knots=coarse)
    assert f_opt <= c_opt + 1e-9
    # the integer form pads the data range by 10% and stays finite
    assert np.isfinite(grid_knot_optimum_1d(x, y, 0.05, knots=64))


def test_sparsity_certificate_counts_merged_atoms():
    spec = OperatorSpec(alpha=2.0, d=2, k=1)
    A, t = np.array([[0.6, 0.8]]), np.array([0.1])
    atoms = [Atom(v=1.0, A=A, t=t),
             Atom(v=0.5, A=-A, t=-t),            # same plane: merges
             Atom(v=-2.0, A=[[0.0, 1.0]], t=[0.3])]
    model = Model(spec=spec, atoms=atoms, poly=PolyCoeffs.zero(2, 1))
    cert = sparsity_certificate(model, M=10)
    assert cert == {"ok": True, "nnz": 2, "bound": 7}
    assert not sparsity_certificate(model, M=4)["ok"]   # bound 4 - 3 = 1
