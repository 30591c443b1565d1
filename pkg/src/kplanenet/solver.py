"""Fitting routes: dictionary lasso, support pruning, nonconvex trainer.

The objective throughout is sum((y - f)^2) + lambda * ||v||_1 with no 1/M
factor; the polynomial block is never penalized.  The trainer enforces
orthonormal atom rows by polar retraction after every gradient step and
keeps the objective non-increasing through backtracking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import greens
from .network import Atom, Dataset, Model
from .operators import OperatorSpec
from .polyspace import PolyCoeffs, enumerate_multi_indices, monomial_eval

# ---------------------------------------------------------------------------
# configuration and trace
# ---------------------------------------------------------------------------


@dataclass
class FitConfig:
    lam: float = 0.1
    width: int = 32
    max_iter: int = 500
    step: float = 0.1
    shrink: float = 0.5
    decrease_slack: float = 1e-12
    tol_kkt: float = 1e-10
    seed: int = 0
    loss: str = "squared"
    init: str = "lasso_warm"     # or "zero_weights"
    lasso_polish: bool = True
    max_backtracks: int = 60

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if self.loss != "squared":
            raise ValueError("only the squared loss is implemented")
        if self.init not in ("lasso_warm", "zero_weights"):
            raise ValueError(f"unknown init scheme {self.init!r}")

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["lambda"] = doc.pop("lam")
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "FitConfig":
        doc = dict(doc)
        if "lambda" in doc:
            doc["lam"] = doc.pop("lambda")
        return cls(**doc)


TRACE_COLUMNS = ("iteration", "objective", "data_fit", "l1_term",
                 "stiefel_violation", "step")


@dataclass
class Trace:
    rows: list = field(default_factory=list)

    def append(self, iteration, objective, data_fit, l1_term,
               stiefel_violation, step) -> None:
        if not np.isfinite(objective):
            raise ValueError("non-finite objective recorded")
        self.rows.append((int(iteration), float(objective), float(data_fit),
                          float(l1_term), float(stiefel_violation), float(step)))

    def objectives(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    def max_stiefel_violation(self) -> float:
        return max((r[4] for r in self.rows), default=0.0)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for row in self.rows:
                fh.write(",".join(repr(x) for x in row) + "\n")


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------


def soft_threshold(x, tau):
    """sign(x) * max(|x| - tau, 0), elementwise."""
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)
    return float(out) if out.ndim == 0 else out


def stiefel_project(mtx, rng=None):
    """Nearest orthonormal-row matrix: the orthogonal polar factor U V^T.

    A rank-deficient input is perturbed once by a seeded Gaussian of scale
    1e-12 * ||mtx||_F; if it is still deficient, a numerical error is
    raised.
    """
    mtx = np.atleast_2d(np.asarray(mtx, dtype=float))
    r, d = mtx.shape
    if r > d:
        raise ValueError("need no more rows than columns")
    u, s, vt = np.linalg.svd(mtx, full_matrices=False)
    if s[-1] <= 1e-13 * max(s[0], 1e-300):
        rng = np.random.default_rng(0) if rng is None else rng
        jitter = 1e-12 * np.linalg.norm(mtx) * rng.standard_normal((r, d))
        u, s, vt = np.linalg.svd(mtx + jitter, full_matrices=False)
        if s[-1] <= 1e-13 * max(s[0], 1e-300):
            raise np.linalg.LinAlgError(
                "rank-deficient input; polar factor undefined")
    return u @ vt


def _poly_qr(P: np.ndarray):
    if P.shape[1] == 0:
        return None, None
    q, rmat = np.linalg.qr(P)
    diag = np.abs(np.diag(rmat))
    if diag.min() <= 1e-12 * max(diag.max(), 1e-300):
        raise ValueError(
            "data-fitting problem ill-posed over the null space "
            "(rank-deficient polynomial block)")
    return q, rmat


def _poly_ls(q, rmat, target):
    if q is None:
        return np.zeros(0)
    return np.linalg.solve(rmat, q.T @ target)


def lambda_max(G: np.ndarray, P: np.ndarray, y: np.ndarray) -> float:
    """Smallest lambda at which the lasso solution has v = 0."""
    q, rmat = _poly_qr(P)
    c = _poly_ls(q, rmat, y)
    r = y - P @ c if P.shape[1] else y
    return 2.0 * float(np.max(np.abs(G.T @ r))) if G.shape[1] else 0.0


def _kkt_residual(G, P, y, v, c, lam):
    r = y - G @ v - (P @ c if P.shape[1] else 0.0)
    worst = 0.0
    if G.shape[1]:
        g = 2.0 * (G.T @ r)
        active = v != 0
        if active.any():
            worst = float(np.max(np.abs(g[active] - lam * np.sign(v[active]))))
        if (~active).any():
            worst = max(worst, float(np.max(np.maximum(
                np.abs(g[~active]) - lam, 0.0))))
    if P.shape[1]:
        worst = max(worst, float(np.max(np.abs(P.T @ r))))
    return worst


def lasso(G, P, y, lam, tol_kkt: float = 1e-10, max_sweeps: int = 50000):
    """Coordinate descent on ||y - Gv - Pc||^2 + lam ||v||_1.

    Exact prox steps per v coordinate, exact least-squares refresh of c per
    sweep; once the support stabilizes, an exact solve on the active set is
    attempted, which typically lands the KKT residual at roundoff.
    Deterministic given the input order.
    """
    G = np.asarray(G, dtype=float)
    P = np.asarray(P, dtype=float)
    y = np.asarray(y, dtype=float)
    M, N = G.shape
    lam = float(lam)
    q_mat, r_mat = _poly_qr(P)
    v = np.zeros(N)
    c = _poly_ls(q_mat, r_mat, y)
    resid = y - (P @ c if P.shape[1] else 0.0)
    norms2 = np.einsum("mi,mi->i", G, G)
    half = lam / 2.0
    prev_support = None
    obj_prev = np.inf
    polish_left = 4
    for sweep in range(max_sweeps):
        for i in range(N):
            n2 = norms2[i]
            if n2 == 0.0:
                continue
            gi = G[:, i]
            zi = gi @ resid + n2 * v[i]
            az = abs(zi) - half
            vi_new = 0.0 if az <= 0.0 else (az if zi > 0.0 else -az) / n2
            if vi_new != v[i]:
                resid -= gi * (vi_new - v[i])
                v[i] = vi_new
        if P.shape[1]:
            c_new = _poly_ls(q_mat, r_mat, y - G @ v)
            resid = y - G @ v - P @ c_new
            c = c_new
        kkt = _kkt_residual(G, P, y, v, c, lam)
        if kkt <= tol_kkt:
            return v, c, kkt
        obj = float(resid @ resid) + lam * float(np.sum(np.abs(v)))
        stalled = obj_prev - obj <= 1e-13 * max(abs(obj), 1.0)
        obj_prev = obj
        support = tuple(np.flatnonzero(v))
        if (sweep == 24 or stalled or support == prev_support) and polish_left:
            # first polish grows a support one pivot at a time from zero (on
            # degenerate dictionaries the sign-fixed systems stay near full
            # rank); retries pivot from wherever descent has moved since
            seed = (np.zeros(N), np.zeros(P.shape[1])) if polish_left == 4 \
                else (v, c)
            polish_left -= 1
            v2, c2, kkt2 = _feature_sign(G, P, y, seed[0], seed[1], lam, tol_kkt)
            if kkt2 < kkt:
                v, c = v2, c2
                resid = y - G @ v - (P @ c if P.shape[1] else 0.0)
                obj_prev = np.inf
                if kkt2 <= tol_kkt:
                    return v, c, kkt2
        prev_support = support
    return v, c, _kkt_residual(G, P, y, v, c, lam)


def _sign_fixed_solve(G, P, y, act, s, lam):
    """Minimum-norm stationarity solve with the active signs held fixed."""
    Ga = G[:, act]
    top = np.concatenate([2.0 * Ga.T @ Ga, 2.0 * Ga.T @ P], axis=1)
    bot = np.concatenate([2.0 * P.T @ Ga, 2.0 * P.T @ P], axis=1)
    A = np.concatenate([top, bot], axis=0)
    rhs = np.concatenate([2.0 * Ga.T @ y - lam * s, 2.0 * P.T @ y])
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return sol[:len(act)], sol[len(act):]


def _feature_sign(G, P, y, v, c, lam, tol_kkt, max_pivots=400):
    """Active-set polish: sign-fixed exact solves plus add/drop pivots.

    Feature-sign search from the current iterate; pivots stop at the first
    sign crossing, newly violating coordinates enter with the sign of their
    correlation, and the best KKT residual encountered is returned.  A
    coordinate that leaves immediately after entering is barred from
    re-entry so ties cannot cycle.
    """
    q = P.shape[1]
    v = v.copy()
    c = np.asarray(c, dtype=float).reshape(q).copy()
    act = np.flatnonzero(v).tolist()
    s = [float(np.sign(v[i])) for i in act]
    banned: set = set()
    last_added = None
    best = (_kkt_residual(G, P, y, v, c, lam), v.copy(), c.copy())
    for _ in range(max_pivots):
        va, ca = _sign_fixed_solve(G, P, y, act, np.array(s), lam)
        bad = [j for j in range(len(act)) if va[j] * s[j] < 0.0]
        if bad:
            cur = v[act] if act else np.zeros(0)
            thetas = np.array([cur[j] / (cur[j] - va[j]) for j in bad])
            pick = int(np.argmin(thetas))
            theta = float(thetas[pick])
            jrel = bad[pick]
            moved = cur + theta * (va - cur)
            moved[jrel] = 0.0
            for jj, idx in enumerate(act):
                v[idx] = moved[jj]
            c = c + theta * (ca - c) if q else ca
            dropped = act.pop(jrel)
            s.pop(jrel)
            v[dropped] = 0.0
            if theta == 0.0 and dropped == last_added:
                banned.add(dropped)
            continue
        for jj, idx in enumerate(act):
            v[idx] = va[jj]
        c = ca
        zero = [jj for jj in range(len(act)) if v[act[jj]] == 0.0]
        for jj in reversed(zero):
            act.pop(jj)
            s.pop(jj)
        r = y - G @ v - (P @ c if q else 0.0)
        kkt = _kkt_residual(G, P, y, v, c, lam)
        if best is None or kkt < best[0]:
            best = (kkt, v.copy(), c.copy())
        if kkt <= tol_kkt:
            return v, c, kkt
        corr = 2.0 * (G.T @ r)
        if act:
            corr[act] = 0.0
        if banned:
            corr[list(banned)] = 0.0
        j = int(np.argmax(np.abs(corr)))
        if np.abs(corr[j]) <= lam * (1.0 + 1e-12):
            break
        act.append(j)
        s.append(float(np.sign(corr[j])))
        last_added = j
    return best[1], best[2], best[0]


def prune_support(G, P, v, c, y):
    """Reduce nnz(v) to at most M - q without changing predictions.

    While the active columns plus the polynomial block outnumber the data,
    pick a null-space direction of [G_active P], walk along it in the
    l1-nonincreasing sign until the first weight hits zero, and repeat.
    The walk keeps G v + P c constant up to the null-space accuracy and
    never increases ||v||_1.
    """
    G = np.asarray(G, dtype=float)
    P = np.asarray(P, dtype=float)
    v = np.array(v, dtype=float)
    c = np.array(c, dtype=float)
    M = G.shape[0]
    q = P.shape[1]
    for _ in range(len(v) + 1):
        act = np.flatnonzero(v)
        if len(act) + q <= M:
            break
        B = np.concatenate([G[:, act], P], axis=1)
        _, s, vt = np.linalg.svd(B)
        tol = 1e-12 * (s[0] if s.size else 1.0)
        rank = int(np.sum(s > tol))
        null_rows = vt[rank:]
        if null_rows.size == 0:
            raise np.linalg.LinAlgError(
                "dimension count demands a null direction but none was found")
        na = len(act)
        best = int(np.argmax(np.max(np.abs(null_rows[:, :na]), axis=1)))
        z = null_rows[best]
        zmax = float(np.max(np.abs(z[:na])))
        if zmax <= 1e-12:
            raise np.linalg.LinAlgError(
                "null directions do not touch the active weights")
        z = z / zmax
        zv, zc = z[:na], z[na:]
        slope = float(np.sign(v[act]) @ zv)
        if slope > 0:
            zv, zc = -zv, -zc
        crossing = np.flatnonzero(np.sign(zv) == -np.sign(v[act]))
        thetas = -v[act[crossing]] / zv[crossing]
        j = int(np.argmin(thetas))
        theta = float(thetas[j])
        v[act] += theta * zv
        c += theta * zc
        v[act[crossing[j]]] = 0.0
    return v, c


# ---------------------------------------------------------------------------
# nonconvex trainer
# ---------------------------------------------------------------------------


def _objective(prof, lam, X, y, P, A_stack, T, v, c):
    Z = np.einsum("md,nrd->mnr", X, A_stack) - T[None]
    R = np.linalg.norm(Z, axis=2)
    Gmat = greens.rho_radial(prof, R)
    f = Gmat @ v + (P @ c if P.shape[1] else 0.0)
    resid = f - y
    return float(resid @ resid), float(lam * np.sum(np.abs(v))), Gmat, Z, R, resid


def _stiefel_violation(A_stack):
    r = A_stack.shape[1]
    eye = np.eye(r)
    return max(float(np.linalg.norm(A @ A.T - eye)) for A in A_stack)


def train(dataset: Dataset, spec: OperatorSpec, config: FitConfig):
    """Proximal-gradient training of the atom parameters.

    Gradient steps on {A_n} (retracted back to orthonormal rows), {t_n} and
    the polynomial block; soft-threshold prox on {v_n}; backtracking keeps
    the objective non-increasing (slack 1e-12) at every accepted step.
    Atom biases start at projected data sites; by default the outer
    weights are warm-started by a dictionary lasso at the initial atoms,
    and a final lasso polish is recorded as the last trace row.
    """
    X, y = dataset.X, dataset.y
    M, d = X.shape
    if d != spec.d:
        raise ValueError("dataset dimension does not match the operator spec")
    r = spec.d - spec.k
    N = config.width
    prof = greens.profile(spec.alpha, spec.m)
    rng = np.random.default_rng(config.seed)

    idx = enumerate_multi_indices(d, spec.n_L) if spec.n_L >= 0 else []
    P = (np.stack([monomial_eval(n, X) for n in idx], axis=-1)
         if idx else np.zeros((M, 0)))
    _poly_qr(P)  # fail fast on an ill-posed polynomial block

    A_stack = np.stack([stiefel_project(rng.standard_normal((r, d)), rng=rng)
                        for _ in range(N)])
    T = np.stack([A_stack[n] @ X[n % M] for n in range(N)])
    v = np.zeros(N)
    if config.init == "lasso_warm":
        G0 = greens.rho_radial(prof, np.linalg.norm(
            np.einsum("md,nrd->mnr", X, A_stack) - T[None], axis=2))
        v, c, _ = lasso(G0, P, y, config.lam, tol_kkt=config.tol_kkt)
    else:
        c = _poly_ls(*_poly_qr(P), y) if P.shape[1] else np.zeros(0)

    trace = Trace()
    fit, l1, Gmat, Z, R, resid = _objective(prof, config.lam, X, y, P,
                                            A_stack, T, v, c)
    F = fit + l1
    if not np.isfinite(F):
        raise RuntimeError("non-finite objective at initialization")
    trace.append(0, F, fit, l1, _stiefel_violation(A_stack), 0.0)

    step = config.step
    stalled = 0
    for it in range(1, config.max_iter + 1):
        # gradients of the smooth part at the current point
        dv = 2.0 * (Gmat.T @ resid)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(R[..., None] > 0, Z / np.where(R == 0, 1.0, R)[..., None], 0.0)
        W = 2.0 * resid[:, None] * v[None, :] * greens.drho_radial(prof, R)
        dT = -np.einsum("mn,mnr->nr", W, unit)
        dA = np.einsum("mn,mnr,md->nrd", W, unit, X)
        dc = 2.0 * (P.T @ resid) if P.shape[1] else np.zeros(0)

        accepted = False
        step = min(step * 2.0, config.step * 1e3)
        for _ in range(config.max_backtracks):
            A_try = np.stack([stiefel_project(A_stack[n] - step * dA[n], rng=rng)
                              for n in range(N)])
            T_try = T - step * dT
            c_try = c - step * dc
            v_try = soft_threshold(v - step * dv, config.lam * step)
            fit_t, l1_t, G_t, Z_t, R_t, resid_t = _objective(
                prof, config.lam, X, y, P, A_try, T_try, v_try, c_try)
            F_try = fit_t + l1_t
            if not np.isfinite(F_try):
                step *= config.shrink
                continue
            if F_try <= F + config.decrease_slack:
                accepted = True
                break
            step *= config.shrink
        if not accepted:
            break
        progress = F - F_try
        A_stack, T, v, c = A_try, T_try, v_try, c_try
        fit, l1, Gmat, Z, R, resid = fit_t, l1_t, G_t, Z_t, R_t, resid_t
        F = F_try
        trace.append(it, F, fit, l1, _stiefel_violation(A_stack), step)
        stalled = stalled + 1 if progress <= 1e-14 * max(1.0, abs(F)) else 0
        if stalled >= 5:
            break

    if config.lasso_polish:
        v_p, c_p, _ = lasso(Gmat, P, y, config.lam, tol_kkt=config.tol_kkt)
        fit_p, l1_p, *_ = _objective(prof, config.lam, X, y, P, A_stack, T,
                                     v_p, c_p)
        if fit_p + l1_p <= F + config.decrease_slack:
            v, c = v_p, c_p
            F, fit, l1 = fit_p + l1_p, fit_p, l1_p
            trace.append(trace.rows[-1][0] + 1, F, fit, l1,
                         _stiefel_violation(A_stack), 0.0)

    atoms = [Atom(v=v[n], A=A_stack[n], t=T[n]) for n in range(N) if v[n] != 0.0]
    coeffs = dict(zip(idx, c.tolist())) if idx else {}
    poly = PolyCoeffs(d=d, degree=max(spec.n_L, 0) if idx else 0, coeffs=coeffs)
    model = Model(spec=spec, atoms=atoms, poly=poly)
    return model, trace
