import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import neuron_value
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from postvar.circuits import AnsatzSpec, ShiftVector, enumerate_shifts
from postvar.exceptions import DimensionError, PlanMismatchError
from postvar.features import (
    FeatureMatrix,
    NeuronSpec,
    PostVariationalFeatures,
    block_rng,
    build_registries,
    generate_features_exact,
    generate_features_sampled,
    prune_by_fidelity,
    prune_by_gradient,
    prune_shifts,
    shifted_fidelities,
)
from postvar.head import LogisticHead, compute_loss, fit_least_squares, predict
from postvar.pauli import PauliString, enumerate_local_paulis, shadow_norm_bound
from postvar.shadows import estimate_block, plan_budget

TWO_PI = 2 * np.pi


def uniform_data(d, ell, seed):
    return np.random.default_rng(seed).uniform(0, TWO_PI, size=(d, ell))


# --- exact generation -----------------------------------------------------------


def test_zero_datum_identity_shift():
    spec = AnsatzSpec(4, 2)
    fm = generate_features_exact(np.zeros((1, 16)), spec, [ShiftVector.zero(8)], ["ZIII"])
    np.testing.assert_allclose(fm.Q, [[1.0]], atol=1e-14)


def test_shape_p17_q13():
    spec, shifts, paulis = build_registries("hybrid", 4, locality=1, order=1)
    fm = generate_features_exact(uniform_data(3, 16, 0), spec, shifts, paulis)
    assert (len(shifts), len(paulis)) == (17, 13)
    assert fm.shape == (3, 221)
    assert fm.col_specs[0].label == "s0:IIII"
    assert fm.col_specs[13].label == "s1:IIII"


def test_exact_matches_dense_oracle():
    spec, shifts, paulis = build_registries("hybrid", 2, locality=2, order=1)
    X = uniform_data(4, 8, 1)
    fm = generate_features_exact(X, spec, shifts, paulis)
    q = len(paulis)
    for i, x in enumerate(X):
        for a, s in enumerate(shifts):
            for b, p in enumerate(paulis):
                assert fm.Q[i, a * q + b] == pytest.approx(neuron_value(x, 2, 2, s.values, p.label), abs=1e-10)


def test_entries_within_unit_interval():
    spec, shifts, paulis = build_registries("hybrid", 3, locality=2, order=1)
    fm = generate_features_exact(uniform_data(5, 6, 2), spec, shifts, paulis)
    assert np.all(np.abs(fm.Q) <= 1 + 1e-12)


def test_registry_errors():
    spec = AnsatzSpec(2, 2)
    with pytest.raises(ValueError):
        generate_features_exact(np.zeros((1, 4)), spec, [], ["ZI"])
    with pytest.raises(ValueError):
        generate_features_exact(np.zeros((1, 4)), spec, [ShiftVector.zero(4)], [])
    with pytest.raises(DimensionError):
        generate_features_exact(np.zeros((1, 4)), spec, [ShiftVector.zero(3)], ["ZI"])
    with pytest.raises(DimensionError):
        generate_features_exact(np.zeros((1, 5)), spec, [ShiftVector.zero(4)], ["ZI"])


def test_hybrid_locality_restriction():
    for L in (1, 2):
        _, _, paulis = build_registries("hybrid", 3, locality=L, order=1)
        fm = generate_features_exact(uniform_data(2, 6, 3), *build_registries("hybrid", 3, L, 1))
        assert all(c.pauli.locality <= L for c in fm.col_specs)
        assert {c.pauli.label for c in fm.col_specs} == {p.label for p in enumerate_local_paulis(3, L)}


def test_strategy_registries():
    spec, shifts, paulis = build_registries("ansatz-expansion", 4, order=2)
    assert len(shifts) == 129 and [p.label for p in paulis] == ["ZIII"]
    spec, shifts, paulis = build_registries("observable-construction", 4, locality=3)
    assert len(shifts) == 1 and len(paulis) == 175


# --- CSV -------------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    spec, shifts, paulis = build_registries("hybrid", 2, locality=1, order=1)
    fm = generate_features_exact(uniform_data(3, 4, 4), spec, shifts, paulis, labels=np.array([0, 1, 1]),
                                 row_ids=[10, 11, 12])
    text = fm.to_csv(tmp_path / "f.csv", meta={"seed": 3})
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    assert lines[1].split(",")[:3] == ["id", "label", "s0:II"]
    back = FeatureMatrix.from_csv(tmp_path / "f.csv")
    np.testing.assert_array_equal(back.Q, fm.Q)
    assert back.row_ids == [10, 11, 12] and list(back.labels) == [0, 1, 1]
    assert back.column_labels == fm.column_labels
    assert back.meta["seed"] == 3


def test_neuron_spec_parse():
    assert NeuronSpec.parse("s12:XIZ") == NeuronSpec(12, PauliString.from_label("XIZ"))
    with pytest.raises(ValueError):
        NeuronSpec.parse("12:XIZ")


# --- sampled generation ----------------------------------------------------------


def _direct_plan(p, q, n, d, shots):
    plan = plan_budget("hybrid", "direct", p, q, n, d, 0.5, 0.5)
    return dataclasses.replace(plan, shots_per_unit=shots, total_shots=p * q * d * shots)


def test_many_shots_close_to_exact():
    X = uniform_data(1, 4, 5)
    spec = AnsatzSpec(2, 2)
    shifts = [ShiftVector((1, 0, 0, -1))]
    exact = generate_features_exact(X, spec, shifts, ["XY"]).Q
    est = generate_features_sampled(X, spec, shifts, ["XY"], _direct_plan(1, 1, 2, 1, 100_000), rng=3).Q
    assert est[0, 0] == pytest.approx(exact[0, 0], abs=0.02)


def test_eigenstate_exact_with_one_shot():
    spec = AnsatzSpec(2, 2)
    fm = generate_features_sampled(np.zeros((2, 4)), spec, [ShiftVector.zero(4)], ["ZI", "ZZ", "IZ"],
                                   _direct_plan(1, 3, 2, 2, 1), rng=0)
    np.testing.assert_array_equal(fm.Q, np.ones((2, 3)))


def test_shadow_mode_reuses_one_set_per_block():
    spec, shifts, paulis = build_registries("hybrid", 2, locality=1, order=1)
    X = uniform_data(2, 4, 6)
    plan = plan_budget("hybrid", "shadows", len(shifts), len(paulis), 2, 2, 0.5, 0.5, 4.0)
    assert plan.total_shots == plan.p * plan.d * plan.records_per_block
    fm = generate_features_sampled(X, spec, shifts, paulis, plan, rng=21)
    from postvar.features import encoded_states, shifted_states

    psi0 = encoded_states(X, 2)
    for i in range(2):
        for a in (0, 3):
            psi = shifted_states(psi0, spec, shifts[a])[i]
            expected = estimate_block(psi, 2, paulis, plan, block_rng(21, i, a))
            np.testing.assert_array_equal(fm.Q[i, a * len(paulis):(a + 1) * len(paulis)], expected)


def test_plan_mismatch():
    spec, shifts, paulis = build_registries("hybrid", 2, locality=1, order=1)
    plan = plan_budget("hybrid", "direct", 1, 1, 2, 1, 0.5, 0.5)
    with pytest.raises(PlanMismatchError):
        generate_features_sampled(uniform_data(1, 4, 0), spec, shifts, paulis, plan, rng=0)


def test_sampled_reproducible_and_worker_independent():
    spec, shifts, paulis = build_registries("hybrid", 2, locality=1, order=1)
    X = uniform_data(3, 4, 7)
    plan = plan_budget("hybrid", "direct", len(shifts), len(paulis), 2, 3, 0.5, 0.5)
    a = generate_features_sampled(X, spec, shifts, paulis, plan, rng=5).Q
    b = generate_features_sampled(X, spec, shifts, paulis, plan, rng=5, n_jobs=2).Q
    np.testing.assert_array_equal(a, b)
    assert a.tobytes() == generate_features_sampled(X, spec, shifts, paulis, plan, rng=5).Q.tobytes()


@pytest.mark.parametrize("mode,strategy", [("direct", "hybrid"), ("shadows", "observable-construction")])
def test_mode_agreement_at_planned_budget(mode, strategy):
    epsilon, delta = 0.3, 0.2
    spec, shifts, paulis = build_registries(strategy, 2, locality=1, order=1)
    X = uniform_data(3, 4, 8)
    exact = generate_features_exact(X, spec, shifts, paulis).Q
    p = len(shifts)
    plan = plan_budget(strategy, mode, p, len(paulis), 2, 3, epsilon, delta,
                       max(shadow_norm_bound(x) for x in paulis))
    hits = 0
    for rerun in range(50):
        est = generate_features_sampled(X, spec, shifts, paulis, plan, rng=1000 + rerun).Q
        hits += np.max(np.abs(est - exact)) <= epsilon
    assert hits / 50 >= 1 - delta


# --- pruning -------------------------------------------------------------------


def test_commuting_observable_zero_gradient():
    spec = AnsatzSpec(2, 1, "none")
    X = uniform_data(10, 4, 9)
    dec = prune_by_gradient(X, spec, 1, None, "ZI", tau_g=1e-3)
    assert dec.score == pytest.approx(0.0, abs=1e-20)
    assert dec.drop


def test_tau_zero_never_drops():
    spec = AnsatzSpec(2, 1, "none")
    X = uniform_data(4, 4, 10)
    assert prune_by_gradient(X, spec, 1, None, "ZI", tau_g=0.0).keep


def test_gradient_score_matches_dense_oracle():
    spec = AnsatzSpec(2, 2)
    X = uniform_data(5, 4, 11)
    base = ShiftVector((0, 1, 0, 0))
    for u in (0, 2):
        for word in ("ZI", "XY"):
            dec = prune_by_gradient(X, spec, u, base, word)
            diffs = []
            for x in X:
                up, down = base.values.copy(), base.values.copy()
                up[u] += np.pi / 2
                down[u] -= np.pi / 2
                diffs.append(neuron_value(x, 2, 2, up, word) - neuron_value(x, 2, 2, down, word))
            assert dec.score == pytest.approx(np.mean(np.square(diffs)), abs=1e-10)


def test_fidelity_one_when_gate_acts_trivially():
    # RX(3pi/2)|0> is a Y eigenstate, so RY(+-pi/2) only adds a phase
    spec = AnsatzSpec(1, 1, "none")
    X = np.array([[0.0, 1.5 * np.pi]])
    dec = prune_by_fidelity(X, spec, 0, None, tau_f=1e-3)
    assert dec.score == pytest.approx(0.0, abs=1e-12)
    assert dec.drop


def test_fidelity_routes_agree():
    spec = AnsatzSpec(3, 2)
    overlap, echo = shifted_fidelities(uniform_data(4, 6, 12), spec, 2, ShiftVector((0, 0, 0, 1, 0, 0)))
    np.testing.assert_allclose(overlap, echo, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_gradient_score_bounded_by_fidelity_score(seed):
    rng = np.random.default_rng(seed)
    spec = AnsatzSpec(2, 2)
    X = rng.uniform(0, TWO_PI, size=(3, 4))
    u = int(rng.integers(spec.k))
    word = "".join(rng.choice(list("IXYZ"), 2))
    g = prune_by_gradient(X, spec, u, None, word)
    f = prune_by_fidelity(X, spec, u, None)
    assert g.score <= f.score + 1e-12


def test_prune_shifts_descendants():
    shifts = enumerate_shifts(3, 2)
    kept = prune_shifts(shifts, None, 1)
    assert all(s.signs[1] == 0 for s in kept)
    assert len(kept) == len(enumerate_shifts(2, 2))
    base = ShiftVector((1, 0, 0))
    kept = prune_shifts(shifts, base, 2)
    removed = {s.label() for s in shifts} - {s.label() for s in kept}
    assert removed == {"+0+", "+0-"}


def test_pruning_zero_gradient_column_keeps_loss():
    spec = AnsatzSpec(2, 1, "none")
    shifts = enumerate_shifts(2, 1)
    X = uniform_data(30, 4, 13)
    Y = np.random.default_rng(1).normal(size=30)
    full = generate_features_exact(X, spec, shifts, ["ZI"])
    assert prune_by_gradient(X, spec, 1, None, "ZI").score == pytest.approx(0.0, abs=1e-20)
    kept = prune_shifts(shifts, None, 1)
    pruned = generate_features_exact(X, spec, kept, ["ZI"])
    loss_full = compute_loss("rmse", Y, predict(fit_least_squares(full.Q, Y), full.Q))
    loss_pruned = compute_loss("rmse", Y, predict(fit_least_squares(pruned.Q, Y), pruned.Q))
    assert abs(loss_full - loss_pruned) < 1e-8


# --- estimator ------------------------------------------------------------------


def test_transformer_fit_transform_and_names():
    X = uniform_data(6, 8, 14)
    t = PostVariationalFeatures(n_qubits=2, strategy="hybrid", locality=1, order=1).fit(X)
    Q = t.transform(X)
    assert Q.shape == (6, 9 * 7)
    names = t.get_feature_names_out()
    assert names[0] == "s0:II" and len(names) == Q.shape[1]


def test_transformer_params_and_clone():
    t = PostVariationalFeatures(n_qubits=2, locality=2, mode="shadows", random_state=3)
    c = clone(t)
    assert c.get_params()["locality"] == 2 and c.get_params()["mode"] == "shadows"


def test_transformer_pruning_drops_dead_parameter():
    X = uniform_data(10, 8, 15)
    t = PostVariationalFeatures(n_qubits=2, strategy="ansatz-expansion", layers=1, entangler="none",
                                observable="ZI", prune="gradient").fit(X)
    assert [d.drop for d in t.prune_decisions_] == [False, True]
    assert [s.label() for s in t.shifts_] == ["00", "+0", "-0"]
    assert list(t.get_feature_names_out()) == ["s0:ZI", "s1:ZI", "s2:ZI"]


def test_pipeline_with_head():
    X = uniform_data(40, 4, 16)
    y = (np.cos(X[:, 2]) > 0).astype(int)
    pipe = make_pipeline(PostVariationalFeatures(n_qubits=2, strategy="observable-construction", locality=2),
                         LogisticHead())
    pipe.fit(X, y)
    assert pipe.score(X, y) > 0.8
