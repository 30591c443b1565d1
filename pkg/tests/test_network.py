"""Atoms, models, the merge-invariant cost, and the JSON codec."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kplanenet import (Atom, Dataset, Model, OperatorSpec, deserialize,
                       dictionary_matrix, forward, load_model, merge_atoms,
                       profile, reg_cost, rho, save_model, serialize)
from kplanenet.polyspace import PolyCoeffs

SPEC21 = OperatorSpec(alpha=2.0, d=2, k=1)


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def make_model(atoms, poly=None, spec=SPEC21):
    if poly is None:
        poly = PolyCoeffs.zero(spec.d, max(spec.n_L, 0))
    return Model(spec=spec, atoms=atoms, poly=poly)


def test_atom_validation():
    Atom(v=1.0, A=[[0.6, 0.8]], t=[0.3])
    with pytest.raises(ValueError):
        Atom(v=1.0, A=[[1.0, 1.0]], t=[0.3])
    with pytest.raises(ValueError):
        Atom(v=1.0, A=[[1.0, 0.0]], t=[0.3, 0.4])


def test_dataset_validation():
    ds = Dataset(X=[[0.0, 1.0], [2.0, 3.0]], y=[1.0, -1.0])
    assert (ds.M, ds.d) == (2, 2)
    with pytest.raises(ValueError):
        Dataset(X=[[0.0, np.nan]], y=[1.0])
    with pytest.raises(ValueError):
        Dataset(X=[[0.0, 1.0]], y=[1.0, 2.0])


def test_forward_single_atom_matches_profile():
    a = Atom(v=2.0, A=[[0.6, 0.8]], t=[0.1])
    poly = PolyCoeffs(d=2, degree=1, coeffs={(0, 0): 0.5, (1, 0): 1.0})
    model = make_model([a], poly=poly)
    x = np.array([0.3, -0.7])
    prof = profile(2.0, 1)
    expected = 0.5 + 1.0 * x[0] + 2.0 * rho(prof, a.A @ x - a.t)
    assert forward(model, x) == pytest.approx(expected, rel=1e-14)
    batch = forward(model, np.stack([x, 2 * x]))
    assert batch.shape == (2,) and batch[0] == pytest.approx(expected)


def test_model_guards():
    with pytest.raises(ValueError, match="degree"):
        make_model([], poly=PolyCoeffs(d=2, degree=2, coeffs={(2, 0): 1.0}))
    with pytest.raises(ValueError, match="shape"):
        Model(spec=OperatorSpec(alpha=2.0, d=2, k=0),
              atoms=[Atom(v=1.0, A=[[1.0, 0.0]], t=[0.0])],
              poly=PolyCoeffs.zero(2, 1))
    with pytest.raises(ValueError, match="alias"):
        Model(spec=OperatorSpec(alpha=3.0, d=2, k=1), atoms=[],
              poly=PolyCoeffs.zero(2, 2), activation_alias="relu")


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=-3.0, max_value=3.0),
       st.floats(min_value=0.1, max_value=6.0),
       st.floats(min_value=-2.0, max_value=2.0))
def test_merge_is_orthogonal_invariant(theta, w, t0):
    """(A, t) and (UA, Ut) parameterize one plane and merge into one atom."""
    A = np.array([[0.6, 0.8], [-0.8, 0.6]])
    t = np.array([t0, 0.7])
    U = rotation(theta)
    atoms = [Atom(v=w, A=A, t=t), Atom(v=1.0, A=U @ A, t=U @ t)]
    merged = merge_atoms(atoms)
    assert len(merged) == 1
    assert merged[0].v == pytest.approx(w + 1.0, rel=1e-15)


def test_merge_keeps_distinct_planes():
    a = Atom(v=1.0, A=[[1.0, 0.0]], t=[0.5])
    b = Atom(v=1.0, A=[[1.0, 0.0]], t=[-0.5])
    c = Atom(v=1.0, A=[[0.0, 1.0]], t=[0.5])
    assert len(merge_atoms([a, b, c])) == 3


@settings(max_examples=30, deadline=None)
@given(st.permutations(range(5)))
def test_reg_cost_is_order_independent(order):
    rng = np.random.default_rng(11)
    frames = [np.array([[np.cos(th), np.sin(th)]])
              for th in rng.uniform(0, np.pi, 5)]
    atoms = [Atom(v=rng.standard_normal(), A=frames[i], t=[rng.uniform()])
             for i in range(5)]
    base = reg_cost(make_model(atoms))
    shuffled = reg_cost(make_model([atoms[i] for i in order]))
    assert shuffled == base   # fsum: bitwise identical, any order


def test_reg_cost_cancels_opposite_duplicates():
    A, t = np.array([[0.6, 0.8]]), np.array([0.35])
    atoms = [Atom(v=0.75, A=A, t=t), Atom(v=-0.25, A=-A, t=-t)]
    assert reg_cost(make_model(atoms)) == 0.5


def test_dictionary_matrix_shapes_and_guard(rng):
    X = rng.uniform(-1, 1, size=(6, 2))
    params = [(np.array([[0.6, 0.8]]), np.array([0.1])),
              (np.array([[0.0, 1.0]]), np.array([-0.2]))]
    G, P = dictionary_matrix(SPEC21, params, X)
    assert G.shape == (6, 2) and P.shape == (6, 3)
    np.testing.assert_allclose(P[:, 0], 1.0)
    with pytest.raises(ValueError, match="orthonormal"):
        dictionary_matrix(SPEC21, [(np.array([[1.0, 1.0]]), np.array([0.0]))], X)


# -- codec --------------------------------------------------------------------


def test_serialize_round_trip(tmp_path, rng):
    atoms = [Atom(v=rng.standard_normal(),
                  A=np.array([[np.cos(th), np.sin(th)]]),
                  t=[rng.uniform(-1, 1)])
             for th in rng.uniform(0, np.pi, 4)]
    poly = PolyCoeffs(d=2, degree=1, coeffs={(0, 0): 1.5, (0, 1): -2.0})
    model = make_model(atoms, poly=poly)
    back = deserialize(serialize(model))
    assert back.spec == model.spec
    assert len(back.atoms) == 4
    for a, b in zip(model.atoms, back.atoms):
        assert a.v == b.v
        np.testing.assert_array_equal(a.A, b.A)
        np.testing.assert_array_equal(a.t, b.t)
    assert back.poly.coeffs == model.poly.coeffs

    path = tmp_path / "model.json"
    save_model(path, model)
    x = rng.uniform(-1, 1, size=(8, 2))
    np.testing.assert_array_equal(forward(load_model(path), x),
                                  forward(model, x))


def test_deserialize_rejects_unknown_keys():
    doc = serialize(make_model([]))
    with pytest.raises(ValueError, match="schema"):
        deserialize(doc.replace('"atoms"', '"ghost": 1, "atoms"', 1))


def test_deserialize_revalidates_invariants():
    """A corrupted matrix must fail the orthonormal-row check on load."""
    text = serialize(make_model([Atom(v=1.0, A=[[0.6, 0.8]], t=[0.0])]))
    with pytest.raises(ValueError, match="orthonormal"):
        deserialize(text.replace("0.6", "0.9"))
