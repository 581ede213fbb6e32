import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from postvar.bounds import (
    matrix_rank,
    rank_lemma_premise,
    random_instance,
    random_perturbation,
    sigma_min,
    theorem1_threshold,
    theorem1_trial,
    theorem2_threshold,
    theorem2_trial,
    verify_loss_gap,
    wedin_gap,
    lemma_trial,
    wedin_trial,
)
from postvar.exceptions import DegenerateMatrixError, RangeError, RankMismatchError

# --- thresholds ---------------------------------------------------------------


def test_theorem1_identity_example():
    t = theorem1_threshold(np.eye(2), np.eye(2), [1, 1], 0.1)
    # rank branch: sigma_min / sqrt(min(m,d) m d) = 1 / sqrt(8)
    assert t.rank_branch == pytest.approx(1 / math.sqrt(8))
    # loss branch: eps / (6 sqrt(m) ||Y|| ||Q|| ||Q+||^2) = 0.1 / (6 * sqrt2 * sqrt2)
    assert t.loss_branch == pytest.approx(0.1 / 12)
    assert t.value == pytest.approx(min(1 / math.sqrt(8), 0.1 / 12))


def test_theorem1_scales_with_epsilon():
    rng = np.random.default_rng(0)
    Q, Y = random_instance(12, 9, rng)
    a, b = theorem1_threshold(Q, Q, Y, 0.01), theorem1_threshold(Q, Q, Y, 0.1)
    assert b.loss_branch == pytest.approx(10 * a.loss_branch)
    assert b.rank_branch == a.rank_branch


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_theorem1_positive_for_full_rank(seed):
    Q, Y = random_instance(10, 4, np.random.default_rng(seed))
    assert theorem1_threshold(Q, Q, Y, 0.1).value > 0


def test_theorem1_zero_matrix():
    with pytest.raises(DegenerateMatrixError):
        theorem1_threshold(np.zeros((3, 2)), np.zeros((3, 2)), np.ones(3), 0.1)


def test_theorem2_examples():
    assert theorem2_threshold(4, 0.1) == pytest.approx(0.025)
    assert theorem2_threshold(1, 2.0) == pytest.approx(1.0)
    assert theorem2_threshold(8, 0.3) == pytest.approx(theorem2_threshold(4, 0.3) / math.sqrt(2))
    with pytest.raises(RangeError):
        theorem2_threshold(0, 0.1)


# --- rank lemma and Wedin ----------------------------------------------------


def test_lemma_identical_matrices():
    A = np.random.default_rng(1).normal(size=(4, 3))
    assert rank_lemma_premise(A, A)
    assert matrix_rank(A) == matrix_rank(A.copy())


def test_lemma_small_perturbations_keep_rank():
    rng = np.random.default_rng(2)
    for _ in range(100):
        A = rng.normal(size=(5, 4))
        bound = sigma_min(A) / math.sqrt(4 * 5 * 4)
        B = A + random_perturbation(A.shape, 0.5 * bound, rng)
        if rank_lemma_premise(A, B):
            assert matrix_rank(A) == matrix_rank(B)


def test_lemma_near_singular_and_large_perturbation():
    A = np.diag([1.0, 1e-12])
    assert matrix_rank(A) == 1
    assert sigma_min(A) == 1.0
    assert not rank_lemma_premise(A, A + np.ones((2, 2)))


def test_lemma_randomized_no_counterexample():
    rng = np.random.default_rng(3)
    for _ in range(200):
        premise, ra, rb = lemma_trial(rng)
        if premise:
            assert ra == rb


def test_wedin_identical():
    A = np.random.default_rng(4).normal(size=(3, 3))
    lhs, rhs = wedin_gap(A, A)
    assert lhs == pytest.approx(0.0, abs=1e-12) and rhs == 0.0


def test_wedin_diagonal_closed_form():
    lhs, rhs = wedin_gap(np.diag([1.0, 2.0]), np.diag([1.0, 2.1]))
    assert lhs == pytest.approx(abs(1 / 2 - 1 / 2.1))
    assert rhs == pytest.approx(2 * 1 * 1 * 0.1)
    assert lhs <= rhs


def test_wedin_randomized():
    rng = np.random.default_rng(5)
    for _ in range(200):
        lhs, rhs = wedin_trial(rng)
        assert lhs <= rhs + 1e-10


def test_wedin_rank_mismatch():
    with pytest.raises(RankMismatchError):
        wedin_gap(np.diag([1.0, 0.0]), np.eye(2))


# --- loss gaps ----------------------------------------------------------------


@pytest.mark.parametrize("mode", ["unconstrained", "ball", "logistic_ball"])
def test_zero_perturbation_zero_gap(mode):
    Q, Y = random_instance(20, 4, np.random.default_rng(6))
    report = verify_loss_gap(Q, Q, Y, mode, 0.1)
    assert report.delta_loss == pytest.approx(0.0, abs=1e-12)
    assert report.satisfied


def test_mode_rejected():
    with pytest.raises(ValueError):
        verify_loss_gap(np.eye(2), np.eye(2), [1, 1], "hinge", 0.1)


def test_theorem2_trials_with_chain():
    rng = np.random.default_rng(7)
    for mode in ("ball", "logistic_ball"):
        for _ in range(25):
            r = theorem2_trial(rng, mode)
            assert r.within_threshold and r.satisfied and r.delta_loss < r.epsilon
            assert r.delta_loss <= r.chain_bound + 1e-12


def test_theorem1_trials():
    rng = np.random.default_rng(8)
    for _ in range(25):
        r = theorem1_trial(rng)
        assert r.theorem == "1" and r.within_threshold and r.delta_loss < r.epsilon
    with pytest.raises(RangeError):
        theorem1_trial(rng, d=8)
