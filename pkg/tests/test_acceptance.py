"""Acceptance criteria 1-8, each at its stated tolerance and runtime budget.

Each test records one ``criterion <k>: PASS|FAIL|SKIP`` line, printed at the
end of the run (and immediately with ``-s``).
"""

import itertools
import time
from contextlib import contextmanager

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES
from oracles import ansatz_gates, circuit_matrix, pauli_matrix

from postvar.bounds import lemma_trial, theorem1_trial, theorem2_trial, wedin_trial
from postvar.circuits import AnsatzSpec, build_ansatz, count_shifts, encode_data, enumerate_shifts
from postvar.cli import RunConfig, planted_linear
from postvar.data import fashion_mnist_available, load_fashion_binary, synth_dataset
from postvar.features import PostVariationalFeatures, _direct_block, prune_by_fidelity, prune_by_gradient
from postvar.head import fit_least_squares, fit_logistic, predict, training_loss
from postvar.pauli import count_local_paulis, enumerate_local_paulis, pauli_decompose, shadow_norm_bound
from postvar.shadows import estimate_block, plan_budget
from postvar.sim import Circuit, StateVector, expectation, run_batch, ry, rz, simulate


@contextmanager
def criterion(k: int, budget_s: float):
    """Run a criterion body, enforce its runtime budget and record one result line."""
    start = time.perf_counter()
    detail = {}
    try:
        yield detail
        elapsed = time.perf_counter() - start
        assert elapsed < budget_s, f"runtime {elapsed:.1f}s exceeds {budget_s}s"
    except pytest.skip.Exception as exc:
        line = f"criterion {k}: SKIP ({exc.msg})"
        ACCEPTANCE_LINES[k] = line
        print(line)
        raise
    except BaseException as exc:
        line = f"criterion {k}: FAIL ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
        ACCEPTANCE_LINES[k] = line
        print(line)
        raise
    extra = " ".join(f"{key}={value}" for key, value in detail.items())
    line = f"criterion {k}: PASS ({elapsed:.1f}s) {extra}".rstrip()
    ACCEPTANCE_LINES[k] = line
    print(line)


def product_state(n, rng):
    gates = []
    for q in range(n):
        gates += [ry(rng.uniform(0, np.pi), q), rz(rng.uniform(0, 2 * np.pi), q)]
    return simulate(Circuit(n, tuple(gates)))


def test_criterion_1_counting():
    with criterion(1, 1.0) as info:
        for k, R, expected in ((8, 1, 17), (8, 2, 129)):
            brute = [v for v in itertools.product((0, 1, -1), repeat=k) if sum(map(bool, v)) <= R]
            assert count_shifts(k, R) == expected == len(enumerate_shifts(k, R)) == len(brute)
        for L, expected in ((1, 13), (2, 67), (3, 175)):
            brute = [w for w in itertools.product("IXYZ", repeat=4) if sum(c != "I" for c in w) <= L]
            assert count_local_paulis(4, L) == expected == len(enumerate_local_paulis(4, L)) == len(brute)
        info["shifts"] = "17,129"
        info["paulis"] = "13,67,175"


def test_criterion_2_identity_and_parameter_shift():
    with criterion(2, 10.0) as info:
        spec = AnsatzSpec(4, 2)
        identity = build_ansatz(spec, np.zeros(spec.k))
        for i in range(16):
            out = run_batch(StateVector.basis(4, i).amplitudes[None, :], identity)[0]
            assert np.max(np.abs(out - StateVector.basis(4, i).amplitudes)) < 1e-10

        rng = np.random.default_rng(2024)
        h, worst = 1e-5, 0.0
        for _ in range(50):
            x = rng.uniform(0, 2 * np.pi, 16)
            theta = rng.uniform(-np.pi, np.pi, spec.k)
            word = "".join(rng.choice(list("IXYZ"), 4))
            u = int(rng.integers(spec.k))
            e = np.eye(spec.k)[u]
            enc = encode_data(x, 4)

            def energy(t):
                return expectation(simulate(enc + build_ansatz(spec, t)), word)

            shift = (energy(theta + np.pi / 2 * e) - energy(theta - np.pi / 2 * e)) / 2
            fd = (energy(theta + h * e) - energy(theta - h * e)) / (2 * h)
            worst = max(worst, abs(shift - fd))
        assert worst < 1e-6
        info["max_shift_fd_gap"] = f"{worst:.1e}"


def test_criterion_3_pauli_decomposition():
    with criterion(3, 5.0) as info:
        rng = np.random.default_rng(3)
        worst, most = 0.0, 0
        for _ in range(20):
            theta = rng.uniform(-np.pi, np.pi, 4)
            u = circuit_matrix(2, ansatz_gates(2, 2, theta))
            h = u.conj().T @ pauli_matrix("ZI") @ u
            dec = pauli_decompose(h)
            worst = max(worst, float(np.max(np.abs(dec.to_matrix() - h))))
            most = max(most, len(dec))
        assert worst < 1e-10 and most <= 16
        info["max_entry_error"] = f"{worst:.1e}"
        info["max_terms"] = most


def _coverage(mode, paulis, states, exact, epsilon, delta, rng, trials=100):
    snorm = max(shadow_norm_bound(p) for p in paulis)
    plan = plan_budget("observable-construction", mode, 1, len(paulis), 2, len(states), epsilon, delta, snorm)
    ok = 0
    for _ in range(trials):
        if mode == "shadows":
            est = np.array([estimate_block(s.amplitudes, 2, paulis, plan, rng) for s in states])
        else:
            est = np.array([_direct_block(s.amplitudes, 2, paulis, plan.shots_per_unit, rng) for s in states])
        ok += np.max(np.abs(est - exact)) <= epsilon
    return ok


def test_criterion_4_shadow_and_direct_coverage():
    with criterion(4, 300.0) as info:
        rng = np.random.default_rng(4)
        paulis = enumerate_local_paulis(2, 2)[1:]
        assert len(paulis) == 15  # all non-identity Paulis of weight <= 2 on two qubits
        states = [product_state(2, rng) for _ in range(5)]
        exact = np.array([[expectation(s, p) for p in paulis] for s in states])
        shadow_ok = _coverage("shadows", paulis, states, exact, 0.2, 0.1, rng)
        direct_ok = _coverage("direct", paulis, states, exact, 0.2, 0.1, rng)
        info["shadows"] = f"{shadow_ok}/100"
        info["direct"] = f"{direct_ok}/100"
        assert shadow_ok >= 90 and direct_ok >= 90


def test_criterion_5_error_propagation_bounds():
    with criterion(5, 120.0) as info:
        rng = np.random.default_rng(5)
        counts = {"ball": 0, "logistic_ball": 0, "unconstrained": 0}
        for mode in ("ball", "logistic_ball"):
            for _ in range(100):
                r = theorem2_trial(rng, mode, d=50, m=10, epsilon=0.1, fraction=0.9)
                assert r.within_threshold
                assert r.delta_loss <= r.chain_bound + 1e-12
                counts[mode] += r.delta_loss < r.epsilon
        for _ in range(100):
            r = theorem1_trial(rng, d=20, m=10, epsilon=0.1)
            assert r.within_threshold
            counts["unconstrained"] += r.delta_loss < r.epsilon
        lemma_bad = sum(1 for p, a, b in (lemma_trial(rng) for _ in range(200)) if p and a != b)
        wedin_bad = sum(1 for lhs, rhs in (wedin_trial(rng) for _ in range(200)) if lhs > rhs + 1e-10)
        info.update({k: f"{v}/100" for k, v in counts.items()})
        info["lemma_violations"] = lemma_bad
        info["wedin_violations"] = wedin_bad
        assert all(v == 100 for v in counts.values())
        assert lemma_bad == 0 and wedin_bad == 0


def test_criterion_6_end_to_end_synthetic():
    with criterion(6, 120.0) as info:
        cfg = RunConfig(n=4, strategy="observable-construction", locality=2, order=0, d=100, seed=6).validate()
        ds = planted_linear(cfg, np.random.default_rng(cfg.seed))
        assert ds.features.shape == (100, 16)
        pv = PostVariationalFeatures(n_qubits=4, strategy="observable-construction", locality=2).fit(ds.features)
        Q = pv.transform(ds.features)
        rmse = training_loss(fit_least_squares(Q, ds.labels), Q, ds.labels)
        info["planted_rmse"] = f"{rmse:.1e}"
        assert rmse < 0.05

        blobs = synth_dataset("blobs", {"d": 100}, np.random.default_rng(60))
        y = blobs.labels.astype(int)
        lam = 1.0 / (2 * len(y))

        def train_accuracy(F):
            model = fit_logistic(F, y, "ridge", lam, fit_intercept=True)
            return float(np.mean((predict(model, F) > 0.5) == y))

        raw = train_accuracy(blobs.features)
        pv2 = PostVariationalFeatures(n_qubits=4, strategy="observable-construction", locality=2)
        post = train_accuracy(pv2.fit_transform(blobs.features))
        info["raw_acc"] = f"{raw:.2%}"
        info["pv_acc"] = f"{post:.2%}"
        assert post - raw >= 0.05


VARIATIONAL_BASELINE = 0.5583
THREE_LOCAL_REFERENCE = 0.7867


def test_criterion_7_fashion_mnist():
    with criterion(7, 1800.0) as info:
        if not fashion_mnist_available():
            pytest.skip("Fashion-MNIST IDX files not found under $POSTVAR_DATA_DIR or ./data")
        from postvar.cli import run_fmnist_rows

        ds = load_fashion_binary(seed=0)
        rows = {r["config"]: r for r in run_fmnist_rows(RunConfig(seed=0), ds)}
        acc = {name: r["train_accuracy"] for name, r in rows.items()}
        info.update({name.replace(" ", "_"): f"{v:.2%}" for name, v in acc.items()})
        assert acc["observable 1-local"] < acc["observable 2-local"] < acc["observable 3-local"]
        assert all(v > VARIATIONAL_BASELINE for name, v in acc.items() if name != "classical logistic")
        assert abs(acc["observable 3-local"] - THREE_LOCAL_REFERENCE) <= 0.05


def test_criterion_8_pruning_soundness():
    with criterion(8, 60.0) as info:
        rng = np.random.default_rng(8)
        X = rng.uniform(0, 2 * np.pi, size=(40, 8))
        y = rng.normal(size=40)
        spec = AnsatzSpec(2, 1, "none")
        # RY on qubit 1 commutes with Z on qubit 0: its parameter has zero gradient
        dec = prune_by_gradient(X, spec, 1, None, "ZI", tau_g=1e-3)
        assert dec.drop and dec.score < 1e-20
        kw = dict(n_qubits=2, strategy="ansatz-expansion", layers=1, entangler="none", observable="ZI")
        full = PostVariationalFeatures(**kw).fit(X)
        pruned = PostVariationalFeatures(**kw, prune="gradient").fit(X)
        assert [d.drop for d in pruned.prune_decisions_] == [False, True]
        Qf, Qp = full.transform(X), pruned.transform(X)
        assert Qp.shape[1] == Qf.shape[1] - 2
        gap = abs(training_loss(fit_least_squares(Qf, y), Qf, y) - training_loss(fit_least_squares(Qp, y), Qp, y))
        info["loss_change"] = f"{gap:.1e}"
        assert gap < 1e-6

        violations = 0
        for _ in range(100):
            n = int(rng.integers(1, 4))
            layers = 2 if n > 1 else 1
            spec = AnsatzSpec(n, layers)
            Xr = rng.uniform(0, 2 * np.pi, size=(5, 4 * n))
            u = int(rng.integers(spec.k))
            word = "".join(rng.choice(list("IXYZ"), n))
            g = prune_by_gradient(Xr, spec, u, None, word).score
            f = prune_by_fidelity(Xr, spec, u, None).score
            violations += g > f + 1e-12
        info["fidelity_bound_violations"] = violations
        assert violations == 0
