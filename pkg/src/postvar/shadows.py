"""Random-Pauli-basis classical shadows and measurement-budget planning.

Bases and outcomes are kept as small integer arrays: basis letters are coded
X=1, Y=2, Z=3 and outcome bits as 0/1 (0 is the +1 eigenvalue).
"""

from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .exceptions import DimensionError, EstimationError, RangeError
from .pauli import as_pauli
from .sim import Circuit, basis_probabilities_batch, simulate

_LETTER_CODE = {"X": 1, "Y": 2, "Z": 3}
_CODE_LETTER = "?XYZ"

STRATEGIES = ("ansatz-expansion", "observable-construction", "hybrid")
MODES = ("direct", "shadows")
DEFAULT_SHADOW_CONST = 34.0


@dataclass(frozen=True)
class ShadowRecord:
    """One snapshot: the measured basis word and the observed bit string."""

    basis: str
    outcome: str

    def __post_init__(self):
        if len(self.basis) != len(self.outcome):
            raise DimensionError(f"basis {self.basis!r} and outcome {self.outcome!r} differ in length")


class ShadowSet(Sequence):
    """Array-backed sequence of :class:`ShadowRecord`.

    Parameters
    ----------
    bases : ndarray of shape (T, n)
        Letter codes (1=X, 2=Y, 3=Z).
    outcomes : ndarray of shape (T, n)
        Outcome bits.
    """

    def __init__(self, bases, outcomes, seed=None):
        self.bases = np.asarray(bases, dtype=np.int8)
        self.outcomes = np.asarray(outcomes, dtype=np.int8)
        if self.bases.ndim != 2 or self.bases.shape != self.outcomes.shape:
            raise DimensionError("bases and outcomes must be equal-shape (T, n) arrays")
        self.seed = seed

    @classmethod
    def from_records(cls, records, n=None):
        records = list(records)
        if not records:
            return cls(np.zeros((0, n or 0)), np.zeros((0, n or 0)))
        bases = [[_LETTER_CODE[c] for c in r.basis] for r in records]
        outs = [[int(c) for c in r.outcome] for r in records]
        return cls(bases, outs)

    @property
    def n(self) -> int:
        return self.bases.shape[1]

    def __len__(self):
        return self.bases.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return ShadowSet(self.bases[i], self.outcomes[i])
        return ShadowRecord(
            "".join(_CODE_LETTER[c] for c in self.bases[i]),
            "".join(str(int(b)) for b in self.outcomes[i]),
        )

    def __iter__(self) -> Iterator[ShadowRecord]:
        for i in range(len(self)):
            yield self[i]

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"n={self.n} T={len(self)} seed={self.seed}\n")
        for rec in self:
            buf.write(f"{rec.basis}\t{rec.outcome}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "ShadowSet":
        lines = text.splitlines()
        if not lines:
            raise ValueError("empty shadow file")
        header = dict(tok.split("=", 1) for tok in lines[0].split())
        n, T = int(header["n"]), int(header["T"])
        seed = header.get("seed")
        seed = None if seed in (None, "None") else int(seed)
        records = []
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            basis, outcome = line.split("\t")
            if len(basis) != n:
                raise DimensionError(f"line {lineno}: basis length {len(basis)} != n={n}")
            records.append(ShadowRecord(basis, outcome))
        if len(records) != T:
            raise ValueError(f"header declares T={T} records, found {len(records)}")
        out = cls.from_records(records, n=n)
        out.seed = seed
        return out

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ShadowSet":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def collect_from_amplitudes(psi: np.ndarray, n: int, T: int, rng) -> ShadowSet:
    """Draw ``T`` snapshots of the pure state with amplitudes ``psi``.

    Each snapshot picks a basis word uniformly from {X, Y, Z}^n and samples
    one outcome from the rotated Born distribution.
    """
    rng = np.random.default_rng(rng)
    T = int(T)
    bases = rng.integers(1, 4, size=(T, n), dtype=np.int8)
    outcomes = np.zeros((T, n), dtype=np.int8)
    if T == 0:
        return ShadowSet(bases, outcomes)
    # group snapshots by basis word so each rotated distribution is computed once
    keys = (bases.astype(np.int64) - 1) @ (3 ** np.arange(n - 1, -1, -1, dtype=np.int64))
    psi = np.asarray(psi, dtype=np.complex128).reshape(1, -1)
    shifts = np.arange(n - 1, -1, -1)
    for key in np.unique(keys):
        rows = np.flatnonzero(keys == key)
        word = "".join(_CODE_LETTER[c] for c in bases[rows[0]])
        probs = basis_probabilities_batch(psi, word)[0]
        draws = rng.choice(probs.shape[0], size=rows.shape[0], p=probs)
        outcomes[rows] = (draws[:, None] >> shifts) & 1
    return ShadowSet(bases, outcomes)


def collect_shadows(prep: Circuit, T: int, rng) -> ShadowSet:
    """Collect ``T`` random-Pauli snapshots of ``prep`` applied to ``|0...0>``."""
    if T < 0:
        raise RangeError(f"T must be >= 0, got {T}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    state = simulate(prep)
    out = collect_from_amplitudes(state.amplitudes, prep.n, T, rng)
    out.seed = seed
    return out


def snapshot_values(shadows: ShadowSet, pauli) -> np.ndarray:
    """Single-snapshot unbiased estimates of ``tr(P rho)``.

    For each record: product over the support of P of
    ``3 * [basis letter == P letter] * (+1 / -1 from the outcome bit)``.
    """
    p = as_pauli(pauli)
    if p.n != shadows.n:
        raise DimensionError(f"Pauli on {p.n} qubits, shadows on {shadows.n}")
    vals = np.ones(len(shadows), dtype=float)
    for q in p.support:
        code = _LETTER_CODE[p.letter(q)]
        hit = shadows.bases[:, q] == code
        vals *= np.where(hit, 3.0 * (1 - 2 * shadows.outcomes[:, q]), 0.0)
    return vals


def median_of_means(values: np.ndarray, s: int) -> float:
    """Median of the means of ``s`` contiguous, near-equal groups."""
    values = np.asarray(values, dtype=float)
    if s < 1:
        raise EstimationError(f"group count must be >= 1, got {s}")
    if values.shape[0] < s:
        raise EstimationError(f"{values.shape[0]} samples cannot fill {s} groups")
    return float(np.median([g.mean() for g in np.array_split(values, s)]))


def estimate_pauli(shadows: ShadowSet, p, s: int = 1) -> float:
    """Median-of-means estimate of ``tr(P rho)`` from a shadow set."""
    if len(shadows) == 0:
        raise EstimationError("cannot estimate from an empty shadow set")
    if not isinstance(shadows, ShadowSet):
        shadows = ShadowSet.from_records(shadows)
    return median_of_means(snapshot_values(shadows, p), s)


@dataclass(frozen=True)
class BudgetPlan:
    """Measurement budget for estimating all ``m * d`` neuron outputs to within ``epsilon_H``.

    ``shots_per_unit`` is per (neuron, datum) in direct mode and per group
    per (Ansatz, datum) in shadows mode, where ``groups_s`` groups feed the
    median-of-means estimator.
    """

    strategy: str
    mode: str
    p: int
    q: int
    m: int
    n: int
    d: int
    epsilon_H: float
    delta: float
    shots_per_unit: int
    total_shots: int
    groups_s: int
    shadow_norm_max: float
    shadow_const: float
    favored_mode: str

    @property
    def records_per_block(self) -> int:
        """Snapshots collected per (datum, Ansatz) block in shadows mode."""
        return self.shots_per_unit * self.groups_s

    def to_dict(self) -> dict:
        return asdict(self)


def _ceil(x: float) -> int:
    # absorb float noise such as 2 * ln(e) = 2.0000000000000004
    return int(math.ceil(x - 1e-9))


def favored_mode(strategy: str, q: int, shadow_norm_max: float) -> str:
    """Mode with the smaller bound: direct for Ansatz expansion, shadows for local observable sets."""
    if strategy == "ansatz-expansion" or q <= 1:
        return "direct"
    return "shadows" if shadow_norm_max < q else "direct"


def plan_budget(
    strategy: str,
    mode: str,
    p: int,
    q: int,
    n: int,
    d: int,
    epsilon_H: float,
    delta: float,
    shadow_norm_max: float = 1.0,
    shadow_const: float = DEFAULT_SHADOW_CONST,
) -> BudgetPlan:
    """Shot counts from the Hoeffding/union bound (direct) or median-of-means shadows.

    Direct: ``ceil(2 / eps^2 * ln(2 m d / delta))`` shots per neuron and datum.
    Shadows: ``ceil(C * shadow_norm_max / eps^2)`` snapshots per group and
    ``ceil(2 ln(2 m d / delta))`` groups, per Ansatz and datum.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    for name, val in (("p", p), ("q", q), ("n", n), ("d", d)):
        if int(val) < 1:
            raise RangeError(f"{name} must be >= 1, got {val}")
    if not 0 < epsilon_H < 2:
        raise RangeError(f"epsilon_H must lie in (0, 2), got {epsilon_H}")
    if not 0 < delta < 1:
        raise RangeError(f"delta must lie in (0, 1), got {delta}")
    if shadow_norm_max <= 0:
        raise RangeError(f"shadow_norm_max must be positive, got {shadow_norm_max}")
    m = p * q
    log_term = math.log(2 * m * d / delta)
    if mode == "direct":
        spu = max(1, _ceil(2.0 / epsilon_H**2 * log_term))
        groups = 1
        total = m * d * spu
    else:
        spu = max(1, _ceil(shadow_const * shadow_norm_max / epsilon_H**2))
        groups = max(1, _ceil(2.0 * log_term))
        total = p * d * spu * groups
    return BudgetPlan(
        strategy=strategy,
        mode=mode,
        p=int(p),
        q=int(q),
        m=int(m),
        n=int(n),
        d=int(d),
        epsilon_H=float(epsilon_H),
        delta=float(delta),
        shots_per_unit=spu,
        total_shots=total,
        groups_s=groups,
        shadow_norm_max=float(shadow_norm_max),
        shadow_const=float(shadow_const),
        favored_mode=favored_mode(strategy, q, shadow_norm_max),
    )


def estimate_block(psi: np.ndarray, n: int, paulis, plan: BudgetPlan, rng) -> np.ndarray:
    """Shadow-estimate every Pauli in ``paulis`` from one shared snapshot set of ``psi``."""
    shadows = collect_from_amplitudes(psi, n, plan.records_per_block, rng)
    return np.array([estimate_pauli(shadows, p, plan.groups_s) for p in paulis])

