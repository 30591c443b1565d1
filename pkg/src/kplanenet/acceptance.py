"""End-to-end verification suite with pinned configurations.

Every check is a self-contained function returning a CheckResult; run_all
executes them in a fixed order (the trainer-invariant check reuses the
training run of the univariate-optimum check through a module cache, so a
full sweep trains exactly once).  Tolerances are frozen here and nowhere
else; the test suite and the CLI `verify` subcommand both call into this
module.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from . import greens, kplane, network, operators, oracles, polyspace, solver

# ---------------------------------------------------------------------------
# result plumbing
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict
    runtime: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        body = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items())
        return f"{status} {self.name} ({self.runtime:.1f}s): {body}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3e}"
    return str(v)


def _timed(fn):
    def wrapper() -> CheckResult:
        t0 = time.time()
        name, passed, details = fn()
        return CheckResult(name=name, passed=bool(passed), details=details,
                           runtime=time.time() - t0)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ---------------------------------------------------------------------------
# pinned configuration shared between the identity check and the CLI sweep
# ---------------------------------------------------------------------------

FBP_EXTENT = 8.0
FBP_POINTS = 256
FBP_CENTER = (-3.5, -3.5)
FBP_SIGMA = 0.10
FBP_T_EXTENT = FBP_EXTENT * math.sqrt(2.0)
FBP_T_POINTS = 363          # 2 * ceil(t_extent / h) + 1 for the 256-grid h


def _fbp_test_function() -> kplane.GridFunction:
    return kplane.GridFunction.gaussian(2, FBP_EXTENT, FBP_POINTS,
                                        center=FBP_CENTER, sigma=FBP_SIGMA)


def fbp_direction_sweep(counts=(45, 90, 180, 360), threads: int = 1) -> list:
    """Residual of the inversion identity per direction count (CSV rows)."""
    spec = operators.OperatorSpec(d=2, k=1, alpha=2.0)
    phi = _fbp_test_function()
    rows = []
    for n in counts:
        res = kplane.fbp_identity_residual(
            phi, spec, kplane.half_circle_design(int(n)),
            FBP_T_EXTENT, FBP_T_POINTS, threads=threads)
        rows.append({"directions": int(n), "residual": float(res)})
    return rows


# ---------------------------------------------------------------------------
# the checks
# ---------------------------------------------------------------------------


@_timed
def check_constants():
    """Normalization constants against 50-digit independent evaluations."""
    mp.mp.dps = 50
    items = [
        ("c_2_1", operators.backprojection_constant(2, 1),
         1 / (4 * mp.pi)),
        ("c_3_2", operators.backprojection_constant(3, 2),
         1 / (8 * mp.pi ** 2)),
        ("A_3_2", greens.greens_constant(3.0, 2)[1],
         -1 / (2 * mp.pi)),
        ("B_1_2", greens.greens_constant(4.0, 2)[1],
         1 / (8 * mp.pi)),
        ("sphere_S2", operators.sphere_area(3),
         4 * mp.pi),
    ]
    details = {}
    worst = 0.0
    for label, got, ref in items:
        rel = float(abs((mp.mpf(got) - ref) / ref))
        details[label] = rel
        worst = max(worst, rel)
    return "constants", worst <= 1e-12, details


@_timed
def check_greens_weak_identity():
    """<rho, L phi> recovers phi(0) on the default grids; refining helps."""
    details = {}
    ok = True
    for alpha, m in [(2.0, 1), (3.0, 1), (4.0, 2), (3.0, 2)]:
        prof = greens.profile(alpha, m)
        base = greens.weak_identity_residual(prof)
        fine = greens.weak_identity_residual(prof, refine=2.0)
        details[f"a{alpha:g}m{m}"] = base
        details[f"a{alpha:g}m{m}_refined"] = fine
        ok = ok and base <= 1e-3 and fine < base
    return "greens_weak_identity", ok, details


@_timed
def check_fourier_slice():
    """Offset-domain spectra match restricted box spectra for Gaussians."""
    phi2 = kplane.GridFunction.gaussian(2, 8.0, 256, center=(0.5, -0.25),
                                        sigma=1.0)
    th = math.radians(30.0)
    r2 = kplane.fourier_slice_residual(phi2, np.array([[math.cos(th),
                                                        math.sin(th)]]))
    phi3 = kplane.GridFunction.gaussian(3, 8.0, 96, center=(0.3, -0.2, 0.4),
                                        sigma=1.0)
    A3 = np.array([[1.0, 2.0, 2.0], [2.0, 1.0, -2.0]])
    A3 = A3 / np.linalg.norm(A3, axis=1, keepdims=True)
    r3 = kplane.fourier_slice_residual(phi3, A3)
    ok = r2 <= 1e-3 and r3 <= 5e-3
    return "fourier_slice", ok, {"d2": r2, "d3": r3}


@_timed
def check_fbp_identity():
    """Backproject(filter(transform)) reproduces the input on the center box."""
    spec = operators.OperatorSpec(d=2, k=1, alpha=2.0)
    phi = _fbp_test_function()
    r180 = kplane.fbp_identity_residual(phi, spec,
                                        kplane.half_circle_design(180),
                                        FBP_T_EXTENT, FBP_T_POINTS)
    r360 = kplane.fbp_identity_residual(phi, spec,
                                        kplane.half_circle_design(360),
                                        FBP_T_EXTENT, FBP_T_POINTS)
    spec0 = operators.OperatorSpec(d=2, k=0, alpha=3.0)
    phi0 = kplane.GridFunction.gaussian(2, 6.0, 128, center=(0.5, -0.75),
                                        sigma=1.1)
    r0 = kplane.fbp_identity_residual(phi0, spec0,
                                      kplane.signed_permutation_design(2),
                                      6.0, 128)
    ok = r180 <= 2e-2 and r360 < r180 and r0 <= 1e-12
    return "fbp_identity", ok, {"dirs180": r180, "dirs360": r360,
                                "strict_decrease": r360 < r180, "k0": r0}


@_timed
def check_biorthogonality():
    """Dual pairings are the identity on monomials; projector reproduces."""
    rng = np.random.default_rng(5)
    details = {}
    ok = True
    for d, n_L in [(1, 3), (2, 2)]:
        corr = polyspace.build_corrector(d, n_L)
        gram = polyspace.gram_matrix(corr)
        dev = float(np.max(np.abs(gram - np.eye(len(corr.indices)))))
        details[f"gram_d{d}"] = dev
        truth = polyspace.PolyCoeffs(
            d=d, degree=n_L,
            coeffs={n: float(rng.standard_normal())
                    for n in polyspace.enumerate_multi_indices(d, n_L)})
        rec = polyspace.project_poly(corr, truth(corr.grid_points()))
        pdev = max(abs(rec.coeffs[n] - truth.coeffs[n]) for n in truth.coeffs)
        details[f"projector_d{d}"] = pdev
        ok = ok and dev <= 1e-6 and pdev <= 1e-6
    return "biorthogonality", ok, details


@_timed
def check_representer_sparsity():
    """Pruned lasso fit meets the data-count sparsity bound exactly."""
    spec = operators.OperatorSpec(d=2, k=1, alpha=2.0)
    rng = np.random.default_rng(6)
    M, natoms = 10, 500
    X = rng.standard_normal((M, 2))
    y = rng.standard_normal(M)
    mats = np.array([solver.stiefel_project(rng.standard_normal((1, 2)), rng)
                     for _ in range(natoms)])
    biases = rng.uniform(-2.0, 2.0, size=(natoms, 1))
    G, P = network.dictionary_matrix(spec, list(zip(mats, biases)), X)
    lam = 0.1 * solver.lambda_max(G, P, y)
    v, c, kkt = solver.lasso(G, P, y, lam)
    v2, c2 = solver.prune_support(G, P, v.copy(), c.copy(), y)
    nnz = int(np.sum(v2 != 0))
    bound = M - operators.null_space_dim(2, spec.n_L)
    pred_dev = float(np.max(np.abs((G @ v2 + P @ c2) - (G @ v + P @ c))))
    l1_before = math.fsum(abs(w) for w in v)
    l1_after = math.fsum(abs(w) for w in v2)
    kkt_after = solver._kkt_residual(G, P, y, v2, c2, lam)
    atoms = [network.Atom(v=v2[i], A=mats[i], t=biases[i])
             for i in np.flatnonzero(v2)]
    poly = polyspace.PolyCoeffs(
        d=2, degree=spec.n_L,
        coeffs=dict(zip(polyspace.enumerate_multi_indices(2, spec.n_L),
                        c2.tolist())))
    model = network.Model(spec=spec, atoms=atoms, poly=poly)
    cost_exact = network.reg_cost(model) == l1_after
    ok = (kkt <= 1e-8 and kkt_after <= 1e-8 and nnz <= bound
          and pred_dev <= 1e-8 and l1_after <= l1_before and cost_exact)
    return "representer_sparsity", ok, {
        "kkt": kkt, "kkt_after_prune": kkt_after, "nnz": nnz, "bound": bound,
        "prediction_dev": pred_dev, "l1_delta": l1_after - l1_before,
        "reg_cost_exact": cost_exact}


@_timed
def check_k0_reduction():
    """Full-rank atoms reduce to shifts; interpolation oracle is consistent."""
    rng = np.random.default_rng(7)
    prof = greens.profile(4.0, 2)
    worst = 0.0
    for _ in range(100):
        A = solver.stiefel_project(rng.standard_normal((2, 2)), rng)
        t = rng.standard_normal(2)
        x = rng.standard_normal(2)
        lhs = greens.rho(prof, (A @ x - t)[None])[0]
        rhs = greens.rho(prof, (x - A.T @ t)[None])[0]
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    Xp = rng.standard_normal((20, 2))
    yp = np.sin(Xp[:, 0]) + 0.3 * Xp[:, 1] ** 2
    a, b = oracles.polyharmonic_interpolate(Xp, yp, 4.0)
    fit = oracles.polyharmonic_eval(Xp, a, b, 4.0, Xp)
    interp_dev = float(np.max(np.abs(fit - yp)))
    Pm = np.stack([polyspace.monomial_eval(n, Xp)
                   for n in polyspace.enumerate_multi_indices(2, 1)], axis=-1)
    side_dev = float(np.max(np.abs(Pm.T @ a)))
    ok = worst <= 1e-12 and interp_dev <= 1e-8 and side_dev <= 1e-8
    return "k0_reduction", ok, {"shift_identity": worst,
                                "interpolation": interp_dev,
                                "side_condition": side_dev}


# cache shared by the univariate-optimum and trainer-invariant checks
_train_cache: dict = {}


def _univariate_run() -> dict:
    if not _train_cache:
        rng = np.random.default_rng(8)
        x = np.sort(rng.uniform(-2.0, 2.0, 8))
        y = rng.standard_normal(8)
        ref = oracles.grid_knot_optimum_1d(x, y, 0.05, knots=1000, alpha=2.0)
        spec = operators.OperatorSpec(d=1, k=0, alpha=2.0)
        cfg = solver.FitConfig(lam=0.05, width=32, seed=0)
        model, trace = solver.train(network.Dataset(X=x.reshape(-1, 1), y=y),
                                    spec, cfg)
        _train_cache.update(model=model, trace=trace, ref=ref,
                            objective=trace.rows[-1][1])
    return _train_cache


@_timed
def check_univariate_optimum():
    """Trainer matches the dense-knot reference on a 1-D instance."""
    run = _univariate_run()
    ratio = run["objective"] / run["ref"]
    ok = run["objective"] <= 1.01 * run["ref"]
    return "univariate_optimum", ok, {"objective": run["objective"],
                                      "reference": run["ref"], "ratio": ratio}


@_timed
def check_trainer_invariants():
    """Orthonormality held and the objective never increased while training."""
    run = _univariate_run()
    trace = run["trace"]
    viol = trace.max_stiefel_violation()
    objs = trace.objectives()
    mono = bool(np.all(objs[1:] <= objs[:-1] + 1e-12))
    ok = viol <= 1e-10 and mono
    return "trainer_invariants", ok, {"stiefel_violation": viol,
                                      "monotone": mono,
                                      "iterations": len(trace.rows)}


@_timed
def check_isotropy():
    """Direction-averaging is a projector; transforms and costs respect it."""
    # idempotency on designs closed under the U-samples
    rng = np.random.default_rng(10)
    des1 = kplane.full_circle_design(36)
    g1 = kplane.PlaneFunction(design=des1, t_extents=(4.0,),
                              values=rng.standard_normal((36, 41)))
    p1 = kplane.project_iso(g1)
    p2 = kplane.project_iso(p1)
    idem1 = float(np.max(np.abs(p2.values - p1.values)))

    des0 = kplane.signed_permutation_design(2)
    g0 = kplane.PlaneFunction(design=des0, t_extents=(3.0, 3.0),
                              values=rng.standard_normal((len(des0.weights),
                                                          21, 21)))
    q1 = kplane.project_iso(g0)
    q2 = kplane.project_iso(q1)
    idem0 = float(np.max(np.abs(q2.values - q1.values)))

    # transform outputs are fixed points
    phi = kplane.GridFunction.gaussian(2, 6.0, 96, center=(0.7, -0.3),
                                       sigma=0.8)
    g = kplane.kplane_transform(phi, des1, 6.0 * math.sqrt(2.0), 137)
    fp = float(np.max(np.abs(kplane.project_iso(g).values - g.values)))

    # merged regularization cost under (A, t) -> (UA, Ut)
    spec1 = operators.OperatorSpec(d=2, k=1, alpha=2.0)
    A = np.array([[0.6, 0.8]])
    t = np.array([0.35])
    m1 = network.Model(spec=spec1,
                       atoms=[network.Atom(v=0.75, A=A, t=t),
                              network.Atom(v=-0.25, A=-A, t=-t)],
                       poly=polyspace.PolyCoeffs.zero(2, 1))
    exact1 = network.reg_cost(m1) == abs(0.75 - 0.25)

    spec0 = operators.OperatorSpec(d=2, k=0, alpha=3.0)
    U = np.array([[0.0, -1.0], [1.0, 0.0]])
    A2 = np.array([[0.6, 0.8], [-0.8, 0.6]])
    t2 = np.array([0.2, -0.4])
    m0 = network.Model(spec=spec0,
                       atoms=[network.Atom(v=1.25, A=A2, t=t2),
                              network.Atom(v=0.5, A=U @ A2, t=U @ t2)],
                       poly=polyspace.PolyCoeffs.zero(2, 2))
    exact0 = network.reg_cost(m0) == abs(1.25 + 0.5)

    ok = (idem1 <= 1e-12 and idem0 <= 1e-12 and fp <= 1e-10
          and exact1 and exact0)
    return "isotropy", ok, {"idempotent_circle": idem1,
                            "idempotent_signed_perm": idem0,
                            "transform_fixed_point": fp,
                            "merge_cost_exact": exact1 and exact0}


ALL_CHECKS = (
    check_constants,
    check_greens_weak_identity,
    check_fourier_slice,
    check_fbp_identity,
    check_biorthogonality,
    check_representer_sparsity,
    check_k0_reduction,
    check_univariate_optimum,
    check_trainer_invariants,
    check_isotropy,
)


def run_all(names=None) -> list:
    """Execute the verification suite (all checks, or the named subset)."""
    wanted = None if names is None else set(names)
    results = []
    for fn in ALL_CHECKS:
        probe = fn.__name__.removeprefix("check_")
        if wanted is None or probe in wanted:
            results.append(fn())
    return results


def report(results) -> dict:
    """JSON-ready summary of a run_all sweep."""
    return {
        "passed": all(r.passed for r in results),
        "checks": [{"name": r.name, "passed": r.passed,
                    "runtime_seconds": round(r.runtime, 3),
                    "details": r.details} for r in results],
    }
