import numpy as np
import pytest
from hypothesis import given, settings

from helpers import basis_of, random_hermitian, random_state, rng, seeds
from weaktrace.hilbert import (
    BasisMismatchError,
    ModeLabel,
    NotHermitianError,
    Operator,
    StateVector,
    eigh,
    inner,
    make_basis,
    product_basis,
    projector,
    resolve_modes,
    tensor,
)


@pytest.mark.parametrize("text", ["A", "A.H", "B.V", "C#1", "D.V#0", "B1_sink.H"])
def test_label_parse_roundtrip(text):
    assert str(ModeLabel.parse(text)) == text


@pytest.mark.parametrize("bad", ["", "A.X", "A.H.V"])
def test_label_parse_rejects(bad):
    with pytest.raises(ValueError):
        ModeLabel.parse(bad)


def test_basis_is_sorted_and_unique():
    b = make_basis(["C", "A", "B"])
    assert [str(x) for x in b] == ["A", "B", "C"]
    with pytest.raises(BasisMismatchError):
        make_basis(["A", "A"])


def test_path_reference_selects_internal_modes():
    b = product_basis(["L", "R"], pols=("H", "V"))
    assert [str(b[i]) for i in resolve_modes(b, ["R"])] == ["R.H", "R.V"]
    with pytest.raises(BasisMismatchError):
        resolve_modes(b, ["Q"])


def test_projector_is_exact_diagonal():
    b = basis_of(4)
    p = projector(["m01", "m03"], b)
    assert np.array_equal(np.diag(p.matrix).real, [0, 1, 0, 1])
    assert p @ p == p


def test_inner_is_antilinear_in_bra():
    b = basis_of(2)
    s = StateVector.basis_state(b, "m00")
    assert inner(s * 1j, s) == -1j


def test_operator_flags_bad_projector():
    b = basis_of(2)
    with pytest.raises(ValueError):
        Operator(b, np.array([[1, 1], [0, 0]]), projector=True)


def test_state_rejects_wrong_length():
    with pytest.raises(BasisMismatchError):
        StateVector(basis_of(3), np.ones(2))


def test_eigh_rejects_non_hermitian():
    b = basis_of(2)
    with pytest.raises(NotHermitianError):
        eigh(Operator(b, np.array([[0, 1], [0, 0]])))


def test_degenerate_eigenvalues_grouped():
    b = basis_of(4)
    op = projector(["m00", "m02"], b)
    groups = eigh(op).eigenprojectors()
    assert [v for v, _ in groups] == [0.0, 1.0]
    assert groups[1][1] == op


def test_tensor_associative_and_labelled():
    paths = StateVector.basis_state(make_basis(["A", "B"]), "B")
    pol = StateVector(make_basis([ModeLabel("", "H"), ModeLabel("", "V")]), np.array([0.6, 0.8]))
    tag = StateVector(make_basis([ModeLabel("", None, "0"), ModeLabel("", None, "1")]), np.array([1, 0]))
    left = tensor(tensor(paths, pol), tag)
    right = tensor(paths, tensor(pol, tag))
    assert left == right
    assert left.amplitude("B.V#0") == pytest.approx(0.8)


def test_tensor_rejects_double_polarization():
    pol = make_basis([ModeLabel("", "H"), ModeLabel("", "V")])
    s = StateVector.basis_state(pol, ModeLabel("", "H"))
    with pytest.raises(BasisMismatchError):
        tensor(s, s)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_eigendecomposition_reconstructs(seed):
    r = rng(seed)
    op = random_hermitian(r, basis_of(int(r.integers(1, 7))))
    dec = eigh(op)
    assert np.allclose(dec.reconstruct(), op.matrix, atol=1e-12)
    total = sum(p.matrix for _, p in dec.eigenprojectors())
    assert np.allclose(total, np.eye(op.dim), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_random_states_normalized(seed):
    s = random_state(rng(seed), basis_of(5))
    assert s.is_normalized()
    assert abs(inner(s, s) - 1) < 1e-12
