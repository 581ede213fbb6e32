"""Pauli strings in (x-mask, z-mask) form, locality enumeration and dense decomposition.

Qubit 0 is the most significant bit of a computational-basis index, so the
letter at position ``q`` of a word such as ``"XZII"`` maps to bit ``n - 1 - q``
of both masks.  A ``Y`` sets the bit in both masks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Iterator

import numpy as np

from .exceptions import DimensionError, RangeError

LETTERS = "IXYZ"
_INT64_MAX = 2**63 - 1

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, order=False)
class PauliString:
    """Tensor product of single-qubit Paulis on ``n`` qubits.

    Parameters
    ----------
    n : int
        Number of qubits.
    x_mask, z_mask : int
        Bitmasks; qubit ``q`` owns bit ``n - 1 - q``.
    """

    n: int
    x_mask: int
    z_mask: int

    def __post_init__(self):
        if self.n < 0:
            raise DimensionError(f"qubit count must be non-negative, got {self.n}")
        full = (1 << self.n) - 1
        if self.x_mask & ~full or self.z_mask & ~full:
            raise DimensionError(f"masks exceed {self.n} qubits")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        label = label.strip().upper()
        n = len(label)
        x = z = 0
        for q, ch in enumerate(label):
            if ch not in LETTERS:
                raise ValueError(f"invalid Pauli letter {ch!r} in {label!r}")
            bit = 1 << (n - 1 - q)
            if ch in "XY":
                x |= bit
            if ch in "ZY":
                z |= bit
        return cls(n, x, z)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0)

    def letter(self, q: int) -> str:
        bit = 1 << (self.n - 1 - q)
        x = bool(self.x_mask & bit)
        z = bool(self.z_mask & bit)
        return "IZXY"[2 * x + z]

    @property
    def label(self) -> str:
        return "".join(self.letter(q) for q in range(self.n))

    @property
    def support(self) -> tuple[int, ...]:
        """Qubits on which the string acts non-trivially."""
        mask = self.x_mask | self.z_mask
        return tuple(q for q in range(self.n) if mask & (1 << (self.n - 1 - q)))

    @property
    def locality(self) -> int:
        return (self.x_mask | self.z_mask).bit_count()

    @property
    def n_y(self) -> int:
        return (self.x_mask & self.z_mask).bit_count()

    def matrix(self) -> np.ndarray:
        """Dense ``2^n x 2^n`` matrix built from Kronecker products."""
        out = np.ones((1, 1), dtype=complex)
        for ch in self.label:
            out = np.kron(out, _SINGLE[ch])
        return out

    def __str__(self) -> str:
        return self.label

    def __repr__(self) -> str:
        return f"PauliString({self.label!r})"


def as_pauli(p) -> PauliString:
    """Accept either a :class:`PauliString` or its text word."""
    if isinstance(p, PauliString):
        return p
    return PauliString.from_label(str(p))


def _check_locality_args(n: int, L: int) -> None:
    if n < 0 or L < 0:
        raise RangeError(f"n and L must be non-negative, got n={n}, L={L}")
    if L > n:
        raise RangeError(f"locality L={L} exceeds qubit count n={n}")


def count_local_paulis(n: int, L: int) -> int:
    """Number of Pauli strings on ``n`` qubits with at most ``L`` non-identity letters."""
    _check_locality_args(n, L)
    total = sum(comb(n, ell) * 3**ell for ell in range(L + 1))
    if total > _INT64_MAX:
        raise OverflowError(f"count_local_paulis({n}, {L}) exceeds 64-bit range")
    return total


def iter_local_paulis(n: int, L: int) -> Iterator[PauliString]:
    _check_locality_args(n, L)
    for ell in range(L + 1):
        for positions in itertools.combinations(range(n), ell):
            for letters in itertools.product("XYZ", repeat=ell):
                word = ["I"] * n
                for q, ch in zip(positions, letters):
                    word[q] = ch
                yield PauliString.from_label("".join(word))


def enumerate_local_paulis(n: int, L: int) -> list[PauliString]:
    """All strings of locality <= L.

    Ordered by locality, then by the sorted tuple of support positions, then by
    letters with X < Y < Z.  The first element is always the identity.
    """
    return list(iter_local_paulis(n, L))


def shadow_norm_bound(p) -> float:
    """Upper bound ``4**locality`` on the squared shadow norm under random Pauli measurements."""
    return float(4 ** as_pauli(p).locality)


@dataclass
class PauliDecomposition:
    """Real coefficients of a Hermitian matrix in the Pauli basis."""

    n: int
    coefficients: dict[PauliString, float] = field(default_factory=dict)

    def __len__(self):
        return len(self.coefficients)

    def __getitem__(self, p) -> float:
        return self.coefficients.get(as_pauli(p), 0.0)

    def as_labels(self) -> dict[str, float]:
        return {p.label: c for p, c in self.coefficients.items()}

    def to_matrix(self) -> np.ndarray:
        dim = 2**self.n
        out = np.zeros((dim, dim), dtype=complex)
        for p, c in self.coefficients.items():
            out += c * p.matrix()
        return out


def _pauli_transform(h: np.ndarray, n: int) -> np.ndarray:
    """Return ``tr(P h) / 2^n`` for all 4^n strings, indexed by base-4 digits (I,X,Y,Z).

    Works one tensor factor at a time, O(n 4^n) instead of 4^n dense traces.
    """
    # interleave (row_q, col_q) so each qubit owns one length-4 axis
    t = h.reshape((2,) * (2 * n))
    t = t.transpose([ax for q in range(n) for ax in (q, n + q)]).reshape((4,) * n)
    # tr(sigma A) / 2 = sum_{ab} sigma[b, a] A[a, b] / 2
    basis = np.stack([_SINGLE[ch] for ch in LETTERS])
    proj = basis.transpose(0, 2, 1).reshape(4, 4) / 2.0
    for q in range(n):
        t = np.moveaxis(np.tensordot(proj, t, axes=([1], [q])), 0, q)
    return t.reshape(4**n)


def pauli_decompose(h, atol: float = 1e-10, drop_below: float = 1e-12) -> PauliDecomposition:
    """Decompose a Hermitian matrix into real Pauli-basis coefficients ``tr(P h) / 2^n``.

    Coefficients with magnitude below ``drop_below`` are discarded.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {h.shape}")
    dim = h.shape[0]
    n = dim.bit_length() - 1
    if 2**n != dim:
        raise DimensionError(f"matrix dimension {dim} is not a power of two")
    if n > 6:
        raise DimensionError(f"dense decomposition is limited to n <= 6, got n={n}")
    if not np.allclose(h, h.conj().T, atol=atol, rtol=0):
        raise ValueError("matrix is not Hermitian within tolerance")
    coeffs = _pauli_transform(h, n)
    out = {}
    for idx in np.flatnonzero(np.abs(coeffs) >= drop_below):
        digits = np.base_repr(int(idx), 4).rjust(n, "0") if n else ""
        word = "".join(LETTERS[int(c)] for c in digits)
        out[PauliString.from_label(word)] = float(coeffs[idx].real)
    return PauliDecomposition(n, out)
