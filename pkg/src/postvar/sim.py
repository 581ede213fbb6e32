"""Dense statevector simulation for small RX/RY/RZ/CNOT circuits.

Conventions
-----------
* ``RP(phi) = exp(-i phi P / 2)`` for P in {X, Y, Z}.
* Qubit 0 is the most significant bit of the basis index, so ``|10>`` on two
  qubits is index 2.
* Global phase is not tracked.

Internally amplitudes are handled as arrays of shape ``(batch, 2, ..., 2)`` so
that one gate can be applied to many states at once; the public functions
accept and return :class:`StateVector` objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, InvalidGateError
from .pauli import PauliString, as_pauli

MAX_QUBITS = 20
NORM_ATOL = 1e-10

_GATE_KINDS = ("RX", "RY", "RZ", "CNOT")


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state on ``n`` qubits.

    The amplitude array is copied and made read-only on construction.
    """

    n: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise DimensionError(f"qubit count must be in [1, {MAX_QUBITS}], got {self.n}")
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 2**self.n:
            raise DimensionError(f"expected {2**self.n} amplitudes, got {amps.shape[0]}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_ATOL:
            raise ValueError(f"amplitudes are not normalized (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        return cls.basis(n, 0)

    @classmethod
    def basis(cls, n: int, index) -> "StateVector":
        """Computational basis state; ``index`` is an int or a bit string like ``"10"``."""
        if isinstance(index, str):
            if len(index) != n:
                raise DimensionError(f"bit string {index!r} has length != {n}")
            index = int(index, 2)
        amps = np.zeros(2**n, dtype=np.complex128)
        amps[index] = 1.0
        return cls(n, amps)

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = False) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        n = amps.shape[0].bit_length() - 1
        if 2**n != amps.shape[0]:
            raise DimensionError(f"length {amps.shape[0]} is not a power of two")
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(n, amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __len__(self):
        return self.amplitudes.shape[0]


@dataclass(frozen=True)
class Gate:
    """One of RX, RY, RZ (``qubits=(q,)``) or CNOT (``qubits=(control, target)``)."""

    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in _GATE_KINDS:
            raise InvalidGateError(f"unknown gate kind {self.kind!r}")
        qubits = tuple(int(q) for q in self.qubits)
        object.__setattr__(self, "qubits", qubits)
        expected = 2 if self.kind == "CNOT" else 1
        if len(qubits) != expected:
            raise InvalidGateError(f"{self.kind} takes {expected} qubit(s), got {qubits}")
        if any(q < 0 for q in qubits):
            raise InvalidGateError(f"negative qubit index in {qubits}")
        if self.kind == "CNOT" and qubits[0] == qubits[1]:
            raise InvalidGateError(f"CNOT control equals target ({qubits[0]})")
        object.__setattr__(self, "angle", float(self.angle))

    def matrix(self) -> np.ndarray:
        """Unitary of the gate (2x2, or 4x4 in (control, target) order)."""
        if self.kind == "CNOT":
            return np.array(
                [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
            )
        return _rotation(self.kind, self.angle)

    def inverse(self) -> "Gate":
        if self.kind == "CNOT":
            return self
        return Gate(self.kind, self.qubits, -self.angle)

    def check(self, n: int) -> None:
        if max(self.qubits) >= n:
            raise InvalidGateError(f"{self.kind} on qubits {self.qubits} invalid for n={n}")


def rx(angle, qubit) -> Gate:
    return Gate("RX", (qubit,), angle)


def ry(angle, qubit) -> Gate:
    return Gate("RY", (qubit,), angle)


def rz(angle, qubit) -> Gate:
    return Gate("RZ", (qubit,), angle)


def cnot(control, target) -> Gate:
    return Gate("CNOT", (control, target))


def _rotation(kind: str, angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=np.complex128)


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list on ``n`` qubits."""

    n: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise DimensionError(f"qubit count must be in [1, {MAX_QUBITS}], got {self.n}")
        gates = tuple(self.gates)
        for g in gates:
            if not isinstance(g, Gate):
                raise InvalidGateError(f"not a Gate: {g!r}")
            g.check(self.n)
        object.__setattr__(self, "gates", gates)

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if not isinstance(other, Circuit):
            return NotImplemented
        if other.n != self.n:
            raise DimensionError(f"cannot concatenate circuits on {self.n} and {other.n} qubits")
        return Circuit(self.n, self.gates + other.gates)

    def inverse(self) -> "Circuit":
        """Adjoint circuit: reversed order, each gate inverted."""
        return Circuit(self.n, tuple(g.inverse() for g in reversed(self.gates)))

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)


# --- batched kernels -------------------------------------------------------


def _apply_batch(psi: np.ndarray, gate: Gate, angles=None) -> np.ndarray:
    """Apply ``gate`` to a batch ``psi`` of shape (B, 2, ..., 2).

    ``angles`` optionally gives one rotation angle per batch element, which
    lets data-dependent encodings run over a whole dataset in one pass.
    """
    if gate.kind == "CNOT":
        c, t = gate.qubits
        out = psi.copy()
        sl = [slice(None)] * psi.ndim
        sl[c + 1] = 1
        sl = tuple(sl)
        # axis of the target inside the sliced view (control axis removed)
        t_ax = t + 1 if t < c else t
        out[sl] = np.flip(psi[sl], axis=t_ax)
        return out
    q = gate.qubits[0] + 1
    if angles is None:
        mat = gate.matrix()
        out = np.tensordot(psi, mat, axes=([q], [1]))
        return np.moveaxis(out, -1, q)
    angles = np.asarray(angles, dtype=float)
    c, s = np.cos(angles / 2), np.sin(angles / 2)
    a0 = np.take(psi, 0, axis=q)
    a1 = np.take(psi, 1, axis=q)
    shape = (-1,) + (1,) * (a0.ndim - 1)
    c, s = c.reshape(shape), s.reshape(shape)
    if gate.kind == "RX":
        b0, b1 = c * a0 - 1j * s * a1, -1j * s * a0 + c * a1
    elif gate.kind == "RY":
        b0, b1 = c * a0 - s * a1, s * a0 + c * a1
    else:
        ph = np.exp(-0.5j * angles).reshape(shape)
        b0, b1 = ph * a0, ph.conj() * a1
    return np.stack([b0, b1], axis=q)


def run_batch(psi: np.ndarray, circuit: Circuit) -> np.ndarray:
    """Run ``circuit`` on a (B, 2^n) amplitude matrix, returning a new (B, 2^n) matrix."""
    n = circuit.n
    batch = psi.shape[0]
    t = np.asarray(psi, dtype=np.complex128).reshape((batch,) + (2,) * n)
    for g in circuit.gates:
        t = _apply_batch(t, g)
    return t.reshape(batch, 2**n)


def _parities(indices: np.ndarray, mask: int) -> np.ndarray:
    return (np.bitwise_count(indices & mask) & 1).astype(np.int8)


def expectation_batch(psi: np.ndarray, pauli: PauliString) -> np.ndarray:
    """Real expectations ``<psi_b|P|psi_b>`` for each row of a (B, 2^n) amplitude matrix.

    Uses ``P|i> = i^{n_y} (-1)^{popcount(i & z)} |i ^ x>``; the observable
    matrix is never formed.
    """
    dim = psi.shape[1]
    idx = np.arange(dim, dtype=np.int64)
    sign = 1 - 2 * _parities(idx, pauli.z_mask)
    phase = (1j) ** (pauli.n_y % 4)
    flipped = psi[:, idx ^ pauli.x_mask]
    vals = phase * np.sum(flipped.conj() * sign * psi, axis=1)
    return vals.real


# --- public single-state API ----------------------------------------------


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Return ``gate`` applied to ``state``."""
    gate.check(state.n)
    psi = state.amplitudes.reshape((1,) + (2,) * state.n)
    return StateVector(state.n, _apply_batch(psi, gate).reshape(-1))


def run_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    """Apply the gates of ``circuit`` in list order."""
    if circuit.n != state.n:
        raise DimensionError(f"circuit has {circuit.n} qubits, state has {state.n}")
    if not circuit.gates:
        return state
    out = run_batch(state.amplitudes[None, :], circuit)[0]
    # renormalise away accumulated rounding (deep circuits on many qubits)
    return StateVector(state.n, out / np.linalg.norm(out))


def simulate(circuit: Circuit) -> StateVector:
    """Run ``circuit`` from ``|0...0>``."""
    return run_circuit(StateVector.zero(circuit.n), circuit)


def expectation(state: StateVector, pauli) -> float:
    """``<psi|P|psi>`` for a Pauli string given as object or word."""
    pauli = as_pauli(pauli)
    if pauli.n != state.n:
        raise DimensionError(f"Pauli on {pauli.n} qubits, state has {state.n}")
    return float(expectation_batch(state.amplitudes[None, :], pauli)[0])


def state_fidelity(a: StateVector, b: StateVector) -> float:
    """``|<a|b>|^2``."""
    if a.n != b.n:
        raise DimensionError(f"states on {a.n} and {b.n} qubits")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_SDG = np.array([[1, 0], [0, -1j]], dtype=np.complex128)
_BASIS_ROTATION = {"X": _H, "Y": _H @ _SDG, "Z": np.eye(2, dtype=np.complex128)}


def _check_basis(basis: str, n: int) -> str:
    basis = basis.upper()
    if len(basis) != n:
        raise DimensionError(f"basis word {basis!r} has length != {n}")
    if set(basis) - set("XYZ"):
        raise ValueError(f"basis word {basis!r} must use letters X, Y, Z")
    return basis


def basis_probabilities_batch(psi: np.ndarray, basis: str) -> np.ndarray:
    """Born probabilities after rotating each qubit into ``basis`` (rows of a (B, 2^n) matrix)."""
    n = len(basis)
    batch = psi.shape[0]
    t = psi.reshape((batch,) + (2,) * n)
    for q, ch in enumerate(basis):
        if ch == "Z":
            continue
        t = np.moveaxis(np.tensordot(t, _BASIS_ROTATION[ch], axes=([q + 1], [1])), -1, q + 1)
    probs = np.abs(t.reshape(batch, 2**n)) ** 2
    return probs / probs.sum(axis=1, keepdims=True)


def basis_probabilities(state: StateVector, basis: str) -> np.ndarray:
    basis = _check_basis(basis, state.n)
    return basis_probabilities_batch(state.amplitudes[None, :], basis)[0]


def index_to_bits(index: int, n: int) -> str:
    return format(int(index), f"0{n}b")


def sample_in_basis(state: StateVector, basis: str, rng, shots: int | None = None):
    """Measure every qubit in the X, Y or Z basis.

    X uses H, Y uses S-dagger followed by H, Z measures directly; outcome
    ``0`` corresponds to eigenvalue +1.  Returns one bit string, or a list of
    ``shots`` bit strings when ``shots`` is given.
    """
    basis = _check_basis(basis, state.n)
    rng = np.random.default_rng(rng)
    probs = basis_probabilities(state, basis)
    if shots is None:
        return index_to_bits(rng.choice(probs.shape[0], p=probs), state.n)
    draws = rng.choice(probs.shape[0], size=int(shots), p=probs)
    return [index_to_bits(i, state.n) for i in draws]


def dense_unitary(circuit: Circuit) -> np.ndarray:
    """Full ``2^n x 2^n`` unitary (columns are images of basis states)."""
    dim = 2**circuit.n
    return run_batch(np.eye(dim, dtype=np.complex128), circuit).T


def is_identity(circuit: Circuit, atol: float = 1e-12) -> bool:
    """True when the circuit maps every basis state to itself up to one global phase."""
    u = dense_unitary(circuit)
    phase = u[0, 0]
    if abs(abs(phase) - 1.0) > atol:
        return False
    return bool(np.allclose(u, phase * np.eye(u.shape[0]), atol=atol, rtol=0))
