"""Post-variational feature matrices.

Every column is a quantum neuron: one fixed shifted Ansatz ``U_a`` paired
with one Pauli observable ``O_b``, evaluated as
``tr(U_a^dagger O_b U_a rho(x_i))`` on each encoded datum.  Columns run
shift-major, Pauli-minor, so column ``a * q + b`` belongs to
``(shifts[a], paulis[b])``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .circuits import TWO_PI, AnsatzSpec, ShiftVector, build_ansatz, encode_data, enumerate_shifts
from .exceptions import DimensionError, PlanMismatchError, RangeError
from .pauli import PauliString, as_pauli, enumerate_local_paulis, shadow_norm_bound
from .shadows import STRATEGIES, BudgetPlan, estimate_block, plan_budget
from .sim import (
    _apply_batch,
    basis_probabilities_batch,
    expectation_batch,
    run_batch,
)


@dataclass(frozen=True)
class NeuronSpec:
    """Identifies one feature column: shift index ``a`` and Pauli observable."""

    shift_index: int
    pauli: PauliString

    @property
    def label(self) -> str:
        return f"s{self.shift_index}:{self.pauli.label}"

    @classmethod
    def parse(cls, text: str) -> "NeuronSpec":
        head, _, word = text.partition(":")
        if not head.startswith("s") or not word:
            raise ValueError(f"malformed column spec {text!r}")
        return cls(int(head[1:]), PauliString.from_label(word))

    def __str__(self):
        return self.label


def neuron_specs(n_shifts: int, paulis: Sequence[PauliString], shift_ids=None) -> list[NeuronSpec]:
    ids = list(range(n_shifts)) if shift_ids is None else list(shift_ids)
    return [NeuronSpec(a, p) for a in ids for p in paulis]


@dataclass
class FeatureMatrix:
    """``d x m`` matrix of neuron outputs plus its row and column bookkeeping."""

    Q: np.ndarray
    row_ids: list
    col_specs: list[NeuronSpec]
    mode: str = "exact"
    labels: np.ndarray | None = None
    plan: BudgetPlan | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        if self.Q.ndim != 2:
            raise DimensionError(f"Q must be 2-D, got shape {self.Q.shape}")
        if len(self.row_ids) != self.Q.shape[0]:
            raise DimensionError(f"{len(self.row_ids)} row ids for {self.Q.shape[0]} rows")
        if len(self.col_specs) != self.Q.shape[1]:
            raise DimensionError(f"{len(self.col_specs)} column specs for {self.Q.shape[1]} columns")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape[0] != self.Q.shape[0]:
                raise DimensionError("labels length does not match row count")

    @property
    def shape(self):
        return self.Q.shape

    @property
    def column_labels(self) -> list[str]:
        return [c.label for c in self.col_specs]

    def select_columns(self, mask) -> "FeatureMatrix":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask
        return FeatureMatrix(
            self.Q[:, idx],
            list(self.row_ids),
            [self.col_specs[i] for i in idx],
            self.mode,
            self.labels,
            self.plan,
            dict(self.meta),
        )

    def to_csv(self, path=None, meta: dict | None = None) -> str:
        """Write ``id,label,<colspecs...>`` CSV; ``meta`` goes into leading ``#`` lines."""
        buf = io.StringIO()
        info = dict(self.meta)
        if meta:
            info.update(meta)
        info.setdefault("mode", self.mode)
        if self.plan is not None:
            info.setdefault("plan", self.plan.to_dict())
        buf.write("# " + json.dumps(info, sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "label"] + self.column_labels)
        labels = self.labels if self.labels is not None else [""] * self.Q.shape[0]
        for rid, lab, row in zip(self.row_ids, labels, self.Q):
            writer.writerow([rid, _fmt_label(lab)] + [repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "FeatureMatrix":
        text = _read_text(path_or_text)
        meta, rows = {}, []
        for line in text.splitlines():
            if line.startswith("#"):
                try:
                    meta.update(json.loads(line[1:]))
                except json.JSONDecodeError:
                    pass
            elif line.strip():
                rows.append(line)
        reader = csv.reader(rows)
        header = next(reader)
        if header[:2] != ["id", "label"]:
            raise ValueError(f"feature CSV must start with id,label; got {header[:2]}")
        specs = [NeuronSpec.parse(h) for h in header[2:]]
        ids, labels, vals = [], [], []
        for rec in reader:
            ids.append(_parse_id(rec[0]))
            labels.append(rec[1])
            vals.append([float(v) for v in rec[2:]])
        Q = np.array(vals, dtype=float).reshape(len(ids), len(specs))
        return cls(Q, ids, specs, meta.get("mode", "exact"), _parse_labels(labels), None, meta)


def _fmt_label(lab) -> str:
    if lab is None or (isinstance(lab, str) and lab == ""):
        return ""
    if isinstance(lab, (float, np.floating)):
        return repr(float(lab))
    return str(lab.item() if hasattr(lab, "item") else lab)


def _parse_id(tok: str):
    try:
        return int(tok)
    except ValueError:
        return tok


def _parse_labels(labels: list[str]):
    if all(lab == "" for lab in labels):
        return None
    try:
        ints = [int(lab) for lab in labels]
        return np.array(ints)
    except ValueError:
        return np.array([float(lab) for lab in labels])


def _read_text(path_or_text) -> str:
    if isinstance(path_or_text, Path) or (
        isinstance(path_or_text, str) and "\n" not in path_or_text
    ):
        return Path(path_or_text).read_text(encoding="utf-8")
    return str(path_or_text)


# --- state preparation ------------------------------------------------------


def _check_features(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionError(f"dataset must be 2-D, got shape {X.shape}")
    if X.shape[1] % n:
        raise DimensionError(f"feature length {X.shape[1]} is not divisible by n={n}")
    bad = (X < 0) | (X >= TWO_PI) | ~np.isfinite(X)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise RangeError(f"feature ({i}, {j}) = {X[i, j]!r} outside [0, 2pi)")
    return X


def encoded_states(X, n: int, first: str = "RZ") -> np.ndarray:
    """Amplitudes ``S(x_i)|0^n>`` for every row of ``X`` as a ``(d, 2^n)`` matrix.

    Gate structure comes from :func:`encode_data`; angles are applied per row
    in one batched pass.
    """
    X = _check_features(X, n)
    d = X.shape[0]
    template = encode_data(np.zeros(X.shape[1]), n, first=first)
    psi = np.zeros((d,) + (2,) * n, dtype=np.complex128)
    psi.reshape(d, -1)[:, 0] = 1.0
    for col, gate in enumerate(template.gates):
        psi = _apply_batch(psi, gate, angles=X[:, col])
    return psi.reshape(d, 2**n)


def shifted_states(psi0: np.ndarray, spec: AnsatzSpec | None, shift: ShiftVector) -> np.ndarray:
    """Apply ``U(theta')`` for one shift vector to a batch of encoded states."""
    if spec is None:
        return psi0
    return run_batch(psi0, build_ansatz(spec, shift.values))


# --- generation -------------------------------------------------------------


def _registries(spec, shifts, paulis):
    shifts = list(shifts)
    paulis = [as_pauli(p) for p in paulis]
    if not shifts:
        raise ValueError("shift registry is empty")
    if not paulis:
        raise ValueError("Pauli registry is empty")
    n = paulis[0].n
    if any(p.n != n for p in paulis):
        raise DimensionError("Paulis in the registry act on different qubit counts")
    if spec is not None:
        if spec.n != n:
            raise DimensionError(f"Ansatz on {spec.n} qubits, Paulis on {n}")
        if any(s.k != spec.k for s in shifts):
            raise DimensionError(f"shift vectors must have length k={spec.k}")
    return shifts, paulis, n


def generate_features_exact(
    X,
    ansatz_spec: AnsatzSpec | None,
    shifts: Sequence[ShiftVector],
    paulis,
    labels=None,
    row_ids=None,
    shift_ids=None,
    first: str = "RZ",
) -> FeatureMatrix:
    """Exact simulated neuron outputs, ``Q[i, a*q + b] = <psi_ia| O_b |psi_ia>``."""
    shifts, paulis, n = _registries(ansatz_spec, shifts, paulis)
    psi0 = encoded_states(X, n, first=first)
    d, q = psi0.shape[0], len(paulis)
    Q = np.empty((d, len(shifts) * q))
    for a, shift in enumerate(shifts):
        psi = shifted_states(psi0, ansatz_spec, shift)
        for b, p in enumerate(paulis):
            Q[:, a * q + b] = expectation_batch(psi, p)
    return FeatureMatrix(
        Q,
        list(range(d)) if row_ids is None else list(row_ids),
        neuron_specs(len(shifts), paulis, shift_ids),
        "exact",
        labels,
    )


def _measurement_basis(p: PauliString) -> str:
    return "".join("Z" if ch == "I" else ch for ch in p.label)


def _direct_block(psi: np.ndarray, n: int, paulis, shots: int, rng) -> np.ndarray:
    """Sample means of ``shots`` single-shot +-1 outcomes per Pauli for one state."""
    idx = np.arange(2**n, dtype=np.int64)
    out = np.empty(len(paulis))
    for b, p in enumerate(paulis):
        probs = basis_probabilities_batch(psi[None, :], _measurement_basis(p))[0]
        counts = rng.multinomial(shots, probs)
        sign = 1 - 2 * (np.bitwise_count(idx & (p.x_mask | p.z_mask)).astype(np.int64) & 1)
        out[b] = float(counts @ sign) / shots
    return out


def block_rng(seed: int, i: int, a: int) -> np.random.Generator:
    """Independent generator for the (datum, shift) block."""
    return np.random.default_rng([int(seed), int(i), int(a)])


def _base_seed(rng) -> int:
    if rng is None:
        return int(np.random.SeedSequence().entropy % (2**63))
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    return int(np.random.default_rng(rng).integers(2**63))


def generate_features_sampled(
    X,
    ansatz_spec: AnsatzSpec | None,
    shifts: Sequence[ShiftVector],
    paulis,
    plan: BudgetPlan,
    rng=None,
    labels=None,
    row_ids=None,
    shift_ids=None,
    first: str = "RZ",
    n_jobs=None,
) -> FeatureMatrix:
    """Estimate the feature matrix from finite measurements.

    ``plan.mode == "direct"`` measures each neuron ``shots_per_unit`` times in
    the eigenbasis of its Pauli.  ``"shadows"`` draws one snapshot set per
    (datum, shift) and reads every Pauli of that block from it.  Each block
    has its own generator derived from ``(seed, i, a)``, so results do not
    depend on ``n_jobs``.
    """
    shifts, paulis, n = _registries(ansatz_spec, shifts, paulis)
    psi0 = encoded_states(X, n, first=first)
    d, p, q = psi0.shape[0], len(shifts), len(paulis)
    if (plan.p, plan.q, plan.d) != (p, q, d):
        raise PlanMismatchError(
            f"plan is for (p, q, d) = ({plan.p}, {plan.q}, {plan.d}), "
            f"registries give ({p}, {q}, {d})"
        )
    seed = _base_seed(rng)
    states = [shifted_states(psi0, ansatz_spec, s) for s in shifts]

    def block(i, a):
        g = block_rng(seed, i, a)
        if plan.mode == "direct":
            return _direct_block(states[a][i], n, paulis, plan.shots_per_unit, g)
        return estimate_block(states[a][i], n, paulis, plan, g)

    jobs = [(i, a) for i in range(d) for a in range(p)]
    if n_jobs in (None, 1):
        results = [block(i, a) for i, a in jobs]
    else:
        results = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(block)(i, a) for i, a in jobs)
    Q = np.empty((d, p * q))
    for (i, a), vals in zip(jobs, results):
        Q[i, a * q:(a + 1) * q] = vals
    return FeatureMatrix(
        Q,
        list(range(d)) if row_ids is None else list(row_ids),
        neuron_specs(p, paulis, shift_ids),
        plan.mode,
        labels,
        plan,
        {"seed": seed},
    )


# --- pruning ---------------------------------------------------------------


@dataclass(frozen=True)
class PruneDecision:
    parameter: int
    score: float
    threshold: float
    method: str

    @property
    def keep(self) -> bool:
        return not self.drop

    @property
    def drop(self) -> bool:
        return self.score < self.threshold


def _shift_pair(spec: AnsatzSpec, u: int, base_shift: ShiftVector | None):
    if not 0 <= u < spec.k:
        raise RangeError(f"parameter index {u} outside [0, {spec.k})")
    base = ShiftVector.zero(spec.k) if base_shift is None else base_shift
    theta = base.values
    plus, minus = theta.copy(), theta.copy()
    plus[u] += np.pi / 2
    minus[u] -= np.pi / 2
    return build_ansatz(spec, plus), build_ansatz(spec, minus)


def gradient_differences(X, spec: AnsatzSpec, u: int, base_shift, pauli, first: str = "RZ"):
    """Per-datum ``tr(O rho(theta + pi/2 e_u)) - tr(O rho(theta - pi/2 e_u))``."""
    pauli = as_pauli(pauli)
    up, down = _shift_pair(spec, u, base_shift)
    psi0 = encoded_states(X, spec.n, first=first)
    return expectation_batch(run_batch(psi0, up), pauli) - expectation_batch(
        run_batch(psi0, down), pauli
    )


def prune_by_gradient(
    X, ansatz_spec: AnsatzSpec, u: int, base_shift, pauli, tau_g: float = 1e-3, first: str = "RZ"
) -> PruneDecision:
    """Score = mean squared parameter-shift difference; drop when below ``tau_g``."""
    if tau_g < 0:
        raise RangeError(f"tau_g must be >= 0, got {tau_g}")
    diff = gradient_differences(X, ansatz_spec, u, base_shift, pauli, first=first)
    return PruneDecision(u, float(np.mean(diff**2)), float(tau_g), "gradient")


def shifted_fidelities(X, spec: AnsatzSpec, u: int, base_shift, first: str = "RZ", atol=1e-10):
    """Fidelity of the +pi/2 and -pi/2 shifted states, per datum.

    Computed twice: as ``|<a|b>|^2`` and as the probability of ``0^n`` after
    ``S^dagger U^dagger(theta+) U(theta-) S |0^n>``.  The two must agree.
    """
    up, down = _shift_pair(spec, u, base_shift)
    X = _check_features(X, spec.n)
    psi0 = encoded_states(X, spec.n, first=first)
    a, b = run_batch(psi0, up), run_batch(psi0, down)
    overlap = np.abs(np.sum(a.conj() * b, axis=1)) ** 2

    echo = np.empty(X.shape[0])
    for i, x in enumerate(X):
        enc = encode_data(x, spec.n, first=first)
        circ = enc + down + up.inverse() + enc.inverse()
        zero = np.zeros((1, 2**spec.n), dtype=np.complex128)
        zero[0, 0] = 1.0
        echo[i] = abs(run_batch(zero, circ)[0, 0]) ** 2
    if not np.allclose(overlap, echo, atol=atol, rtol=0):
        raise AssertionError(
            f"fidelity routes disagree (max gap {np.max(np.abs(overlap - echo)):.3e})"
        )
    return overlap, echo


def prune_by_fidelity(
    X, ansatz_spec: AnsatzSpec, u: int, base_shift=None, tau_f: float = 1e-3, first: str = "RZ"
) -> PruneDecision:
    """Score = mean of ``4 (1 - F)``; an upper bound on every Pauli's gradient score."""
    if not 0 <= tau_f <= 4:
        raise RangeError(f"tau_f must lie in [0, 4], got {tau_f}")
    fid, _ = shifted_fidelities(X, ansatz_spec, u, base_shift, first=first)
    return PruneDecision(u, float(np.mean(4.0 * (1.0 - fid))), float(tau_f), "fidelity")


def prune_shifts(shifts: Sequence[ShiftVector], base_shift: ShiftVector | None, u: int):
    """Drop the two shifts of parameter ``u`` on top of ``base_shift`` and all their descendants.

    A descendant has a nonzero entry at ``u`` and agrees with ``base_shift``
    on every nonzero entry of the base.
    """
    base = (0,) * shifts[0].k if base_shift is None else base_shift.signs
    if base[u] != 0:
        return list(shifts)

    def descends(s):
        return s.signs[u] != 0 and all(s.signs[j] == b for j, b in enumerate(base) if b)

    return [s for s in shifts if not descends(s)]


# --- registries ------------------------------------------------------------


def default_observable(n: int) -> PauliString:
    return PauliString.from_label("Z" + "I" * (n - 1))


def build_registries(strategy: str, n: int, locality: int = 1, order: int = 1, layers: int = 2,
                     entangler: str = "reversed", observable=None):
    """Ansatz spec, shift list and Pauli list for one strategy.

    * ``ansatz-expansion``: shifts up to ``order``, one observable (default ``Z`` on qubit 0).
    * ``observable-construction``: the zero shift only, all Paulis of locality <= ``locality``.
    * ``hybrid``: both ensembles.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    spec = AnsatzSpec(n, layers, entangler)
    if strategy == "observable-construction":
        shifts = [ShiftVector.zero(spec.k)]
    else:
        shifts = enumerate_shifts(spec.k, order)
    if strategy == "ansatz-expansion":
        paulis = [as_pauli(observable) if observable is not None else default_observable(n)]
    else:
        paulis = enumerate_local_paulis(n, locality)
    return spec, shifts, paulis


class PostVariationalFeatures(TransformerMixin, BaseEstimator):
    """Transformer mapping angle-encoded data to post-variational neuron outputs.

    Parameters
    ----------
    n_qubits : int, default=4
    strategy : {"hybrid", "observable-construction", "ansatz-expansion"}, default="hybrid"
    locality : int, default=1
        Maximum Pauli weight of the observable ensemble.
    order : int, default=1
        Derivative-order truncation of the shift ensemble.
    layers : int, default=2
    entangler : {"reversed", "forward", "none"}, default="reversed"
    observable : str or None
        Observable for Ansatz expansion; defaults to ``Z`` on qubit 0.
    mode : {"exact", "direct", "shadows"}, default="exact"
    epsilon, delta : float
        Target per-entry additive error and failure probability of sampled modes.
    shadow_const : float, default=34
    prune : {None, "gradient", "fidelity"}
        First-order pruning heuristic evaluated on the data passed to ``fit``.
    tau_g, tau_f : float, default=1e-3
    random_state : int or None
    n_jobs : int or None
    """

    def __init__(
        self,
        n_qubits=4,
        strategy="hybrid",
        locality=1,
        order=1,
        layers=2,
        entangler="reversed",
        observable=None,
        mode="exact",
        epsilon=0.1,
        delta=0.05,
        shadow_const=34.0,
        prune=None,
        tau_g=1e-3,
        tau_f=1e-3,
        random_state=None,
        n_jobs=None,
    ):
        self.n_qubits = n_qubits
        self.strategy = strategy
        self.locality = locality
        self.order = order
        self.layers = layers
        self.entangler = entangler
        self.observable = observable
        self.mode = mode
        self.epsilon = epsilon
        self.delta = delta
        self.shadow_const = shadow_const
        self.prune = prune
        self.tau_g = tau_g
        self.tau_f = tau_f
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        _check_features(X, self.n_qubits)
        if self.mode not in ("exact", "direct", "shadows"):
            raise ValueError(f"mode must be exact, direct or shadows, got {self.mode!r}")
        spec, shifts, paulis = build_registries(
            self.strategy, self.n_qubits, self.locality, self.order, self.layers,
            self.entangler, self.observable,
        )
        all_shifts = list(shifts)
        self.prune_decisions_ = []
        if self.prune is not None and self.strategy != "observable-construction":
            for u in range(spec.k):
                if self.prune == "gradient":
                    scores = [prune_by_gradient(X, spec, u, None, p, self.tau_g) for p in paulis]
                    dec = max(scores, key=lambda d: d.score)
                elif self.prune == "fidelity":
                    dec = prune_by_fidelity(X, spec, u, None, self.tau_f)
                else:
                    raise ValueError(f"prune must be None, 'gradient' or 'fidelity', got {self.prune!r}")
                self.prune_decisions_.append(dec)
                if dec.drop:
                    shifts = prune_shifts(shifts, None, u)
        self.ansatz_spec_ = spec
        self.shifts_ = list(shifts)
        self.shift_ids_ = [all_shifts.index(s) for s in self.shifts_]
        self.paulis_ = list(paulis)
        self.n_features_in_ = X.shape[1]
        return self

    def plan_for(self, d: int) -> BudgetPlan:
        check_is_fitted(self, "shifts_")
        sampled = "shadows" if self.mode == "shadows" else "direct"
        return plan_budget(
            self.strategy, sampled, len(self.shifts_), len(self.paulis_), self.n_qubits, d,
            self.epsilon, self.delta,
            max(shadow_norm_bound(p) for p in self.paulis_), self.shadow_const,
        )

    def generate(self, X, labels=None, row_ids=None) -> FeatureMatrix:
        """Like :meth:`transform` but returns the full :class:`FeatureMatrix`."""
        check_is_fitted(self, "shifts_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        if self.mode == "exact":
            return generate_features_exact(
                X, self.ansatz_spec_, self.shifts_, self.paulis_, labels, row_ids, self.shift_ids_
            )
        plan = self.plan_for(X.shape[0])
        return generate_features_sampled(
            X, self.ansatz_spec_, self.shifts_, self.paulis_, plan, self.random_state,
            labels, row_ids, self.shift_ids_, n_jobs=self.n_jobs,
        )

    def transform(self, X):
        return self.generate(X).Q

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "shifts_")
        return np.array([s.label for s in neuron_specs(len(self.shifts_), self.paulis_, self.shift_ids_)],
                        dtype=object)
