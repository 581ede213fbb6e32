import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import PAULI, ansatz_gates, circuit_matrix, pauli_matrix

from postvar.exceptions import DimensionError, RangeError
from postvar.pauli import (
    PauliDecomposition,
    PauliString,
    count_local_paulis,
    enumerate_local_paulis,
    pauli_decompose,
    shadow_norm_bound,
)


def test_label_round_trip_and_properties():
    p = PauliString.from_label("XIZY")
    assert p.label == "XIZY"
    assert p.locality == 3
    assert p.support == (0, 2, 3)
    assert p.n_y == 1
    np.testing.assert_allclose(p.matrix(), pauli_matrix("XIZY"))


def test_n1_enumeration():
    assert [p.label for p in enumerate_local_paulis(1, 1)] == ["I", "X", "Y", "Z"]


def test_n4_l2_length_and_first():
    ps = enumerate_local_paulis(4, 2)
    assert len(ps) == 67
    assert ps[0].label == "IIII"


@pytest.mark.parametrize("n,L,expected", [(4, 1, 13), (4, 2, 67), (4, 3, 175), (5, 0, 1)])
def test_counts(n, L, expected):
    assert count_local_paulis(n, L) == expected


def test_enumeration_order_rule():
    labels = [p.label for p in enumerate_local_paulis(2, 2)]
    assert labels[:7] == ["II", "XI", "YI", "ZI", "IX", "IY", "IZ"]
    assert labels[7:] == ["XX", "XY", "XZ", "YX", "YY", "YZ", "ZX", "ZY", "ZZ"]


@settings(max_examples=30, deadline=None)
@given(n=st.integers(0, 6), data=st.data())
def test_count_equals_enumeration(n, data):
    if n == 0:
        return
    L = data.draw(st.integers(0, n))
    ps = enumerate_local_paulis(n, L)
    brute = [w for w in itertools.product("IXYZ", repeat=n) if sum(c != "I" for c in w) <= L]
    assert len(ps) == count_local_paulis(n, L) == len(brute) == sum(comb(n, l) * 3**l for l in range(L + 1))
    assert len({p.label for p in ps}) == len(ps)
    assert [p.locality for p in ps] == sorted(p.locality for p in ps)


def test_locality_errors():
    with pytest.raises(RangeError):
        enumerate_local_paulis(2, 3)
    with pytest.raises(RangeError):
        count_local_paulis(2, 3)


def test_shadow_norm_bound():
    assert shadow_norm_bound(PauliString.identity(3)) == 1
    assert shadow_norm_bound("XZII") == 16
    assert shadow_norm_bound("XYZ") == 64


def test_orthogonality():
    for n in (1, 2, 3):
        words = ["".join(w) for w in itertools.product("IXYZ", repeat=n)]
        mats = [PauliString.from_label(w).matrix() for w in words]
        gram = np.array([[np.trace(a @ b) for b in mats] for a in mats])
        np.testing.assert_allclose(gram, 2**n * np.eye(len(words)), atol=1e-12)


def test_decompose_zi():
    dec = pauli_decompose(np.kron(PAULI["Z"], PAULI["I"]))
    assert dec.as_labels() == pytest.approx({"ZI": 1.0})
    assert dec["XX"] == 0.0


def test_decompose_x_plus_z():
    dec = pauli_decompose((PAULI["X"] + PAULI["Z"]) / np.sqrt(2))
    assert dec.as_labels() == pytest.approx({"X": 2**-0.5, "Z": 2**-0.5}, abs=1e-15)


def _trace_coefficients(h):
    n = int(np.log2(h.shape[0]))
    return {"".join(w): np.real(np.trace(pauli_matrix("".join(w)) @ h)) / 2**n
            for w in itertools.product("IXYZ", repeat=n)}


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_decompose_random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    h = (a + a.conj().T) / 2
    dec = pauli_decompose(h)
    assert len(dec) <= 4**n
    assert np.max(np.abs(dec.to_matrix() - h)) < 1e-10
    oracle = _trace_coefficients(h)
    for word, value in dec.as_labels().items():
        assert value == pytest.approx(oracle[word], abs=1e-12)


def test_variational_observable_decomposition():
    rng = np.random.default_rng(3)
    for _ in range(5):
        theta = rng.uniform(-np.pi, np.pi, 4)
        u = circuit_matrix(2, ansatz_gates(2, 2, theta))
        h = u.conj().T @ pauli_matrix("ZI") @ u
        dec = pauli_decompose(h)
        assert len(dec) <= 16
        assert np.max(np.abs(dec.to_matrix() - h)) < 1e-10


def test_decompose_errors():
    with pytest.raises(ValueError):
        pauli_decompose(np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(DimensionError):
        pauli_decompose(np.eye(3))
    with pytest.raises(DimensionError):
        pauli_decompose(np.eye(2**7))


def test_decomposition_object():
    dec = PauliDecomposition(1, {PauliString.from_label("Z"): 0.5})
    np.testing.assert_allclose(dec.to_matrix(), 0.5 * PAULI["Z"])
