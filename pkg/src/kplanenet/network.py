"""Shallow ridge-atom models: forward pass, cost, dictionary, JSON codec.

A model is a weighted sum of atoms v * rho(A x - t) over orthonormal-row
matrices A, plus an unpenalized polynomial block.  The regularization cost
is the l1 norm of the outer weights after merging atoms that parameterize
the same plane, i.e. pairs related by (A, t) -> (U A, U t) with U
orthogonal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import greens
from .operators import OperatorSpec
from .polyspace import PolyCoeffs, enumerate_multi_indices, monomial_eval

STIEFEL_TOL = 1e-10


@dataclass
class Atom:
    v: float
    A: np.ndarray   # (d-k, d)
    t: np.ndarray   # (d-k,)

    def __post_init__(self):
        self.v = float(self.v)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.t = np.atleast_1d(np.asarray(self.t, dtype=float))
        r, _ = self.A.shape
        if self.t.shape != (r,):
            raise ValueError("offset length must equal the matrix row count")
        dev = float(np.linalg.norm(self.A @ self.A.T - np.eye(r)))
        if dev > STIEFEL_TOL:
            raise ValueError(f"atom matrix violates orthonormal rows ({dev:.2e})")


@dataclass
class Dataset:
    X: np.ndarray   # (M, d)
    y: np.ndarray   # (M,)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if self.X.shape[0] != self.y.shape[0] or self.X.shape[0] < 1:
            raise ValueError("need M >= 1 rows with matching target length")
        if not (np.isfinite(self.X).all() and np.isfinite(self.y).all()):
            raise ValueError("dataset contains non-finite entries")

    @property
    def M(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass
class Model:
    spec: OperatorSpec
    atoms: list
    poly: PolyCoeffs
    activation_alias: str | None = field(default=None)

    def __post_init__(self):
        r = self.spec.d - self.spec.k
        for a in self.atoms:
            if a.A.shape != (r, self.spec.d):
                raise ValueError("atom shape does not match the operator spec")
        if self.poly.d != self.spec.d:
            raise ValueError("polynomial dimension mismatch")
        if self.poly.degree > self.spec.n_L:
            raise ValueError("polynomial degree exceeds the null-space bound")
        if self.activation_alias is not None:
            info = greens.alias_info(self.activation_alias)
            if info["alpha"] != self.spec.alpha or info["m"] != r:
                raise ValueError("activation alias does not match (alpha, d-k)")


def _nonlinearity(model: Model):
    if model.activation_alias is not None:
        ev = greens.alias_info(model.activation_alias)["evaluate"]
        return lambda z: ev(z[..., 0])
    prof = greens.profile(model.spec.alpha, model.spec.m)
    return lambda z: greens.rho(prof, z)


def forward(model: Model, x) -> np.ndarray:
    """poly(x) + sum_n v_n rho(A_n x - t_n) for x of shape (d,) or (..., d)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[-1] != model.spec.d:
        raise ValueError("input dimension mismatch")
    nl = _nonlinearity(model)
    out = np.zeros(pts.shape[0])
    p = model.poly(pts)
    out += p if np.ndim(p) else float(p)
    for a in model.atoms:
        out += a.v * nl(pts @ a.A.T - a.t)
    return float(out[0]) if single else out.reshape(x.shape[:-1])


# ---------------------------------------------------------------------------
# atom equivalence and the regularization cost
# ---------------------------------------------------------------------------


def _canonical_key(A: np.ndarray, t: np.ndarray) -> np.ndarray:
    """(A^T A, A^T t) flattened -- invariant under (A,t) -> (UA, Ut)."""
    return np.concatenate([(A.T @ A).ravel(), A.T @ t])


def merge_atoms(atoms: list, tol: float = 1e-9) -> list:
    """Sum weights of atoms that parameterize the same plane.

    Atoms are sorted by their orthogonal-invariant key and merged while
    consecutive keys stay within tol, so exact duplicates can never land in
    different groups.
    """
    if not atoms:
        return []
    keys = [_canonical_key(a.A, a.t) for a in atoms]
    order = sorted(range(len(atoms)), key=lambda i: tuple(keys[i]))
    merged = []
    group_key = None
    for i in order:
        if merged and np.max(np.abs(keys[i] - group_key)) <= tol:
            merged[-1] = Atom(v=merged[-1].v + atoms[i].v,
                              A=merged[-1].A, t=merged[-1].t)
        else:
            merged.append(Atom(v=atoms[i].v, A=atoms[i].A, t=atoms[i].t))
            group_key = keys[i]
    return merged


def reg_cost(model: Model) -> float:
    """l1 norm of the outer weights after merging equivalent atoms.

    Summation uses fsum, so the value is the correctly rounded sum and does
    not depend on atom order.
    """
    return math.fsum(abs(a.v) for a in merge_atoms(model.atoms))


# ---------------------------------------------------------------------------
# dictionary assembly
# ---------------------------------------------------------------------------


def dictionary_matrix(spec: OperatorSpec, atom_params: list, X) -> tuple:
    """(G, P) with G[m,i] = rho(A_i x_m - t_i), P the graded-lex monomials.

    atom_params is a list of (A, t) pairs; a row-orthonormality violation
    of 1e-8 or worse is a domain error.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.d:
        raise ValueError("data dimension mismatch")
    r = spec.d - spec.k
    prof = greens.profile(spec.alpha, spec.m)
    G = np.empty((X.shape[0], len(atom_params)))
    for i, (A, t) in enumerate(atom_params):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        dev = float(np.linalg.norm(A @ A.T - np.eye(r)))
        if dev >= 1e-8:
            raise ValueError(f"atom {i} violates orthonormal rows ({dev:.2e})")
        G[:, i] = greens.rho(prof, X @ A.T - t)
    if spec.n_L >= 0:
        idx = enumerate_multi_indices(spec.d, spec.n_L)
        P = np.stack([monomial_eval(n, X) for n in idx], axis=-1)
    else:
        P = np.zeros((X.shape[0], 0))
    return G, P


# ---------------------------------------------------------------------------
# JSON codec
# ---------------------------------------------------------------------------


def _index_key(n: tuple) -> str:
    return "(" + ",".join(str(int(v)) for v in n) + ")"


def _parse_index(key: str) -> tuple:
    inner = key.strip().strip("()")
    parts = [p for p in inner.split(",") if p.strip()]
    return tuple(int(p) for p in parts)


def serialize(model: Model) -> str:
    doc = {
        "spec": model.spec.to_dict(),
        "atoms": [{"v": a.v, "A": a.A.tolist(), "t": a.t.tolist()}
                  for a in model.atoms],
        "poly": {"degree": model.poly.degree,
                 "coeffs": {_index_key(n): float(b)
                            for n, b in sorted(model.poly.coeffs.items())}},
    }
    if model.activation_alias is not None:
        doc["activation_alias"] = model.activation_alias
    return json.dumps(doc, indent=2)


def deserialize(text) -> Model:
    doc = json.loads(text) if isinstance(text, str) else dict(text)
    extra = set(doc) - {"spec", "atoms", "poly", "activation_alias"}
    if extra or not {"spec", "atoms", "poly"} <= set(doc):
        raise ValueError(f"model document schema violation (keys {sorted(doc)})")
    spec = OperatorSpec.from_dict(doc["spec"])
    atoms = [Atom(v=a["v"], A=np.array(a["A"], dtype=float),
                  t=np.array(a["t"], dtype=float)) for a in doc["atoms"]]
    pd = doc["poly"]
    coeffs = {_parse_index(k): float(b) for k, b in pd["coeffs"].items()}
    poly = PolyCoeffs(d=spec.d, degree=int(pd["degree"]), coeffs=coeffs)
    return Model(spec=spec, atoms=atoms, poly=poly,
                 activation_alias=doc.get("activation_alias"))


def save_model(path, model: Model) -> None:
    with open(path, "w") as fh:
        fh.write(serialize(model))


def load_model(path) -> Model:
    with open(path) as fh:
        return deserialize(fh.read())
