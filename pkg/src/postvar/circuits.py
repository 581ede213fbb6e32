"""Data-encoding circuit, layered RY/CNOT-ring Ansatz and parameter-shift enumeration."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, pi

import numpy as np

from .exceptions import DimensionError, RangeError
from .sim import Circuit, Gate, cnot, ry

HALF_PI = pi / 2
TWO_PI = 2 * pi
_INT64_MAX = 2**63 - 1

ENTANGLERS = ("reversed", "forward", "none")


def encode_data(x, n: int, first: str = "RZ") -> Circuit:
    """Encode a flat feature vector as alternating RZ/RX layers.

    ``x`` is read row-major as an ``(len(x) // n, n)`` grid: column ``j`` goes
    to qubit ``j`` and row ``r`` becomes one layer of rotations, RZ on even
    rows and RX on odd rows (swap with ``first="RX"``).

    Raises
    ------
    DimensionError
        If ``len(x)`` is not a multiple of ``n``.
    RangeError
        If any feature lies outside ``[0, 2*pi)``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if n < 1 or x.shape[0] % n:
        raise DimensionError(f"feature length {x.shape[0]} is not divisible by n={n}")
    bad = (x < 0) | (x >= TWO_PI) | ~np.isfinite(x)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise RangeError(f"feature {i} = {x[i]!r} outside [0, 2pi)")
    kinds = ("RZ", "RX") if first.upper() == "RZ" else ("RX", "RZ")
    gates = []
    for r in range(x.shape[0] // n):
        kind = kinds[r % 2]
        for j in range(n):
            gates.append(Gate(kind, (j,), x[r * n + j]))
    return Circuit(n, tuple(gates))


def _ring(n: int) -> list[tuple[int, int]]:
    if n < 2:
        return []
    return [(q, (q + 1) % n) for q in range(n)]


@dataclass(frozen=True)
class AnsatzSpec:
    """Layered hardware-efficient Ansatz: per layer an RY on every qubit, then a CNOT ring.

    ``entangler`` selects the ring layout:

    * ``"reversed"`` (default): odd-numbered layers emit the ring in reverse
      gate order, so consecutive rings cancel and the circuit is the identity
      at ``theta = 0`` (requires an even layer count when ``n >= 2``).
    * ``"forward"``: the same ring every layer.
    * ``"none"``: no entangling gates.
    """

    n: int
    layers: int = 2
    entangler: str = "reversed"

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError(f"n must be >= 1, got {self.n}")
        if self.layers < 1:
            raise RangeError(f"layers must be >= 1, got {self.layers}")
        if self.entangler not in ENTANGLERS:
            raise ValueError(f"entangler must be one of {ENTANGLERS}, got {self.entangler!r}")
        if self.entangler == "reversed" and not _rings_cancel(self):
            raise ValueError(
                f"reversed-ring Ansatz with n={self.n}, layers={self.layers} is not the "
                "identity at theta=0; use an even layer count or entangler='forward'"
            )

    @property
    def k(self) -> int:
        return self.n * self.layers

    def ring(self, layer: int) -> list[tuple[int, int]]:
        if self.entangler == "none":
            return []
        pairs = _ring(self.n)
        if self.entangler == "reversed" and layer % 2 == 1:
            pairs = pairs[::-1]
        return pairs


def _rings_cancel(spec: AnsatzSpec) -> bool:
    """Check the theta=0 circuit is the identity by composing the CNOT permutations."""
    if spec.n < 2:
        return True
    idx = np.arange(2**spec.n, dtype=np.int64)
    perm = idx.copy()
    for layer in range(spec.layers):
        for c, t in spec.ring(layer):
            cbit, tbit = 1 << (spec.n - 1 - c), 1 << (spec.n - 1 - t)
            perm = np.where(perm & cbit, perm ^ tbit, perm)
    return bool(np.array_equal(perm, idx))


def build_ansatz(spec: AnsatzSpec, theta) -> Circuit:
    """Instantiate the Ansatz; ``theta[layer * n + q]`` drives the RY on qubit ``q``."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != spec.k:
        raise DimensionError(f"expected {spec.k} parameters, got {theta.shape[0]}")
    gates = []
    for layer in range(spec.layers):
        for q in range(spec.n):
            gates.append(ry(theta[layer * spec.n + q], q))
        for c, t in spec.ring(layer):
            gates.append(cnot(c, t))
    return Circuit(spec.n, tuple(gates))


@dataclass(frozen=True)
class ShiftVector:
    """Parameter setting with every entry in {0, +pi/2, -pi/2}.

    Stored as integer signs (-1, 0, +1); :attr:`values` gives the angles.
    """

    signs: tuple[int, ...]

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        if any(s not in (-1, 0, 1) for s in signs):
            raise RangeError(f"shift signs must be in {{-1, 0, 1}}, got {signs}")
        object.__setattr__(self, "signs", signs)

    @classmethod
    def zero(cls, k: int) -> "ShiftVector":
        return cls((0,) * k)

    @property
    def k(self) -> int:
        return len(self.signs)

    @property
    def values(self) -> np.ndarray:
        return HALF_PI * np.asarray(self.signs, dtype=float)

    @property
    def order(self) -> int:
        return sum(1 for s in self.signs if s)

    def shifted(self, u: int, sign: int) -> "ShiftVector":
        signs = list(self.signs)
        signs[u] = sign
        return ShiftVector(tuple(signs))

    def label(self) -> str:
        """Compact text such as ``"0+-0"``."""
        return "".join("0+-"[s] for s in self.signs)

    def __str__(self):
        return self.label()


def _check_order_args(k: int, R: int) -> None:
    if k < 0 or R < 0:
        raise RangeError(f"k and R must be non-negative, got k={k}, R={R}")
    if R > k:
        raise RangeError(f"derivative order R={R} exceeds parameter count k={k}")


def count_shifts(k: int, R: int) -> int:
    """Number of shift vectors with at most ``R`` nonzero entries: sum_l C(k, l) 2^l."""
    _check_order_args(k, R)
    total = sum(comb(k, ell) * 2**ell for ell in range(R + 1))
    if total > _INT64_MAX:
        raise OverflowError(f"count_shifts({k}, {R}) exceeds 64-bit range")
    return total


def enumerate_shifts(k: int, R: int) -> list[ShiftVector]:
    """All shift vectors of order <= R in canonical order.

    Ascending order, then lexicographic in the positions of the nonzero
    entries, then in their signs with ``+`` before ``-``.  The all-zero shift
    comes first.
    """
    _check_order_args(k, R)
    out = []
    for ell in range(R + 1):
        for positions in itertools.combinations(range(k), ell):
            for signs in itertools.product((1, -1), repeat=ell):
                vec = [0] * k
                for u, s in zip(positions, signs):
                    vec[u] = s
                out.append(ShiftVector(tuple(vec)))
    return out


def parse_shift(label: str) -> ShiftVector:
    """Inverse of :meth:`ShiftVector.label`."""
    table = {"0": 0, "+": 1, "-": -1}
    try:
        return ShiftVector(tuple(table[c] for c in label))
    except KeyError as exc:
        raise ValueError(f"invalid shift label {label!r}") from exc
