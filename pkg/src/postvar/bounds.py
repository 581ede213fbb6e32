"""Error-propagation thresholds and their empirical verification.

Covers the unconstrained least-squares guarantee (threshold depending on the
conditioning of ``Q``), the l2-ball guarantee ``eps / (2 sqrt(m))`` shared by
the RMSE and BCE heads, the rank-perturbation lemma and the pseudoinverse
perturbation bound.  All spectral quantities come from SVDs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import DegenerateMatrixError, DimensionError, RangeError, RankMismatchError
from .head import compute_loss, fit_constrained, fit_least_squares, fit_logistic, predict

RANK_RCOND = 1e-10
MODES = ("unconstrained", "ball", "logistic_ball")
THEOREM_OF_MODE = {"unconstrained": "1", "ball": "2", "logistic_ball": "BCE"}


def _matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {A.shape}")
    return A


def singular_values(A) -> np.ndarray:
    return np.linalg.svd(_matrix(A), compute_uv=False)


def matrix_rank(A, rcond: float = RANK_RCOND) -> int:
    """Number of singular values above ``rcond * sigma_max``."""
    s = singular_values(A)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rcond * s[0]))


def sigma_min(A, rcond: float = RANK_RCOND) -> float:
    """Smallest nonzero singular value (nonzero meaning above ``rcond * sigma_max``).

    Raises
    ------
    DegenerateMatrixError
        For the zero matrix, which has no nonzero singular value.
    """
    s = singular_values(A)
    if s.size == 0 or s[0] == 0:
        raise DegenerateMatrixError("zero matrix has no nonzero singular value")
    return float(s[s > rcond * s[0]].min())


def pseudo_inverse(A, rcond: float = RANK_RCOND) -> np.ndarray:
    """Moore-Penrose inverse with the same rank cutoff as :func:`matrix_rank`."""
    A = _matrix(A)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(A.T.shape)
    keep = s > rcond * s[0]
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def spectral_norm(A) -> float:
    s = singular_values(A)
    return float(s[0]) if s.size else 0.0


def max_norm(A) -> float:
    A = np.asarray(A, dtype=float)
    return float(np.abs(A).max()) if A.size else 0.0


@dataclass(frozen=True)
class Theorem1Threshold:
    """Both branches of the unconstrained threshold and their minimum."""

    value: float
    rank_branch: float
    loss_branch: float


def theorem1_threshold(Q, Qhat, Y, epsilon: float) -> Theorem1Threshold:
    """Max-norm budget for the unconstrained least-squares guarantee.

    ``min(sigma_min(Q), sigma_min(Qhat)) / sqrt(min(m, d) m d)`` keeps the ranks
    equal and ``epsilon / (6 sqrt(m) ||Y|| ||Q|| ||Q^+||^2)`` bounds the loss.
    """
    Q, Qhat = _matrix(Q), _matrix(Qhat)
    if Q.shape != Qhat.shape:
        raise DimensionError(f"Q {Q.shape} and Qhat {Qhat.shape} differ in shape")
    if epsilon <= 0:
        raise RangeError(f"epsilon must be positive, got {epsilon}")
    Y = np.asarray(Y, dtype=float).reshape(-1)
    d, m = Q.shape
    rank_branch = min(sigma_min(Q), sigma_min(Qhat)) / math.sqrt(min(m, d) * m * d)
    q_norm = spectral_norm(Q)
    pinv_norm = 1.0 / sigma_min(Q)
    y_norm = float(np.linalg.norm(Y))
    denom = 6.0 * math.sqrt(m) * y_norm * q_norm * pinv_norm**2
    loss_branch = math.inf if denom == 0 else epsilon / denom
    return Theorem1Threshold(min(rank_branch, loss_branch), rank_branch, loss_branch)


def theorem2_threshold(m: int, epsilon: float) -> float:
    """``epsilon / (2 sqrt(m))``: the budget for ball-constrained RMSE and BCE heads."""
    if m < 1:
        raise RangeError(f"m must be >= 1, got {m}")
    if epsilon <= 0:
        raise RangeError(f"epsilon must be positive, got {epsilon}")
    return epsilon / (2.0 * math.sqrt(m))


def rank_lemma_premise(A, B, rcond: float = RANK_RCOND) -> bool:
    """True when ``||A - B||_max < min(sigma_min(A), sigma_min(B)) / sqrt(min(M, N) M N)``.

    A zero matrix on either side makes the premise false.
    """
    A, B = _matrix(A), _matrix(B)
    if A.shape != B.shape:
        raise DimensionError(f"shapes {A.shape} and {B.shape} differ")
    M, N = A.shape
    try:
        mu = min(sigma_min(A, rcond), sigma_min(B, rcond))
    except DegenerateMatrixError:
        return False
    return max_norm(A - B) < mu / math.sqrt(min(M, N) * M * N)


def wedin_gap(A, B, rcond: float = RANK_RCOND) -> tuple[float, float]:
    """``(||B^+ - A^+||, 2 ||A^+|| ||B^+|| ||B - A||)`` in spectral norm.

    Raises
    ------
    RankMismatchError
        If the numerical ranks of ``A`` and ``B`` differ.
    """
    A, B = _matrix(A), _matrix(B)
    if A.shape != B.shape:
        raise DimensionError(f"shapes {A.shape} and {B.shape} differ")
    ra, rb = matrix_rank(A, rcond), matrix_rank(B, rcond)
    if ra != rb:
        raise RankMismatchError(f"rank(A)={ra} differs from rank(B)={rb}")
    Ap, Bp = pseudo_inverse(A, rcond), pseudo_inverse(B, rcond)
    lhs = spectral_norm(Bp - Ap)
    rhs = 2.0 * spectral_norm(Ap) * spectral_norm(Bp) * spectral_norm(B - A)
    return lhs, rhs


@dataclass(frozen=True)
class PerturbationReport:
    """Outcome of one loss-gap check.

    ``satisfied`` is the theorem's implication: false only when the observed
    perturbation was inside the threshold and the loss gap still reached
    ``epsilon``.  ``chain_bound`` is ``2 sqrt(m) ||Qhat - Q||_max`` for the
    ball modes (the intermediate step of their proof) and NaN otherwise.
    """

    theorem: str
    m: int
    d: int
    epsilon: float
    max_norm_threshold: float
    observed_max_norm: float
    delta_loss: float
    satisfied: bool
    chain_bound: float = math.nan

    @property
    def within_threshold(self) -> bool:
        return self.observed_max_norm < self.max_norm_threshold

    def as_row(self) -> dict:
        return asdict(self)


def _targets_for(mode, Y):
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if mode == "logistic_ball" and not np.all((Y == 0) | (Y == 1)):
        # sign patterns map to binary labels
        Y = (Y > 0).astype(float)
    return Y


def verify_loss_gap(Q, Qhat, Y, mode: str, epsilon: float) -> PerturbationReport:
    """Fit on ``Q`` and on ``Qhat`` with the matching head and compare losses on ``Q``.

    ``mode`` is ``"unconstrained"`` (pseudoinverse, RMSE), ``"ball"`` (unit
    ball, RMSE) or ``"logistic_ball"`` (unit ball, BCE).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    Q, Qhat = _matrix(Q), _matrix(Qhat)
    if Q.shape != Qhat.shape:
        raise DimensionError(f"Q {Q.shape} and Qhat {Qhat.shape} differ in shape")
    Y = _targets_for(mode, Y)
    if Y.shape[0] != Q.shape[0]:
        raise DimensionError(f"{Q.shape[0]} rows but {Y.shape[0]} targets")
    d, m = Q.shape
    observed = max_norm(Qhat - Q)
    chain = math.nan
    if mode == "unconstrained":
        threshold = theorem1_threshold(Q, Qhat, Y, epsilon).value
        true_model, est_model = fit_least_squares(Q, Y), fit_least_squares(Qhat, Y)
        kind = "rmse"
    else:
        threshold = theorem2_threshold(m, epsilon)
        chain = 2.0 * math.sqrt(m) * observed
        if mode == "ball":
            true_model, est_model = fit_constrained(Q, Y, "ball"), fit_constrained(Qhat, Y, "ball")
            kind = "rmse"
        else:
            true_model, est_model = fit_logistic(Q, Y, "ball"), fit_logistic(Qhat, Y, "ball")
            kind = "bce"
    delta = compute_loss(kind, Y, predict(est_model, Q)) - compute_loss(kind, Y, predict(true_model, Q))
    satisfied = not (observed < threshold) or delta < epsilon
    return PerturbationReport(THEOREM_OF_MODE[mode], m, d, float(epsilon), float(threshold),
                              observed, float(delta), bool(satisfied), chain)


# --- randomized trials --------------------------------------------------------


def random_perturbation(shape, magnitude: float, rng) -> np.ndarray:
    """Random matrix whose largest absolute entry equals ``magnitude`` exactly."""
    E = rng.uniform(-1.0, 1.0, size=shape)
    return E * (magnitude / np.abs(E).max())


def random_instance(d: int, m: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix with entries in ``[-1, 1]`` and a random sign target."""
    Q = rng.uniform(-1.0, 1.0, size=(d, m))
    Y = rng.choice([-1.0, 1.0], size=d)
    return Q, Y


def theorem1_trial(rng, d: int = 20, m: int = 10, epsilon: float = 0.1,
                   fraction: float = 0.9) -> PerturbationReport:
    """One unconstrained trial with the perturbation strictly inside its own threshold.

    The threshold depends on ``sigma_min(Qhat)``, so the perturbation is sized
    from ``Q`` alone and halved until the post-hoc threshold admits it.
    Requires ``m, d >= 9``, the regime in which the guarantee is stated.
    """
    if m < 9 or d < 9:
        raise RangeError(f"unconstrained trials need m, d >= 9, got m={m}, d={d}")
    while True:
        Q, Y = random_instance(d, m, rng)
        if matrix_rank(Q) == m:
            break
    magnitude = fraction * theorem1_threshold(Q, Q, Y, epsilon).value
    E = random_perturbation(Q.shape, 1.0, rng)
    for _ in range(60):
        Qhat = Q + magnitude * E
        if max_norm(Qhat - Q) < theorem1_threshold(Q, Qhat, Y, epsilon).value:
            break
        magnitude *= 0.5
    return verify_loss_gap(Q, Qhat, Y, "unconstrained", epsilon)


def theorem2_trial(rng, mode: str = "ball", d: int = 50, m: int = 10, epsilon: float = 0.1,
                   fraction: float = 0.9) -> PerturbationReport:
    """One ball-constrained trial (RMSE or BCE) at ``fraction`` of the threshold."""
    Q, Y = random_instance(d, m, rng)
    Qhat = Q + random_perturbation(Q.shape, fraction * theorem2_threshold(m, epsilon), rng)
    return verify_loss_gap(Q, Qhat, Y, mode, epsilon)


def low_rank_matrix(M: int, N: int, r: int, rng) -> np.ndarray:
    return rng.normal(size=(M, r)) @ rng.normal(size=(r, N))


def lemma_trial(rng, max_dim: int = 8) -> tuple[bool, int, int]:
    """Random pair near the premise boundary; returns ``(premise, rank(A), rank(B))``.

    Mixes full-rank and rank-deficient ``A`` with perturbations that are either
    generic or confined to the row and column spaces of ``A``, scaled around
    the premise threshold.
    """
    M, N = (int(v) for v in rng.integers(2, max_dim + 1, size=2))
    r = int(rng.integers(1, min(M, N) + 1))
    A = low_rank_matrix(M, N, r, rng)
    if rng.random() < 0.5:
        U, _, Vt = np.linalg.svd(A, full_matrices=False)
        E = U[:, :r] @ rng.normal(size=(r, r)) @ Vt[:r]
    else:
        E = rng.normal(size=(M, N))
    bound = sigma_min(A) / math.sqrt(min(M, N) * M * N)
    B = A + E * (bound * rng.uniform(0.05, 2.0) / np.abs(E).max())
    return rank_lemma_premise(A, B), matrix_rank(A), matrix_rank(B)


def wedin_trial(rng, max_dim: int = 8) -> tuple[float, float]:
    """Random equal-rank pair; returns ``wedin_gap(A, B)``."""
    M, N = (int(v) for v in rng.integers(2, max_dim + 1, size=2))
    r = int(rng.integers(1, min(M, N) + 1))
    A = low_rank_matrix(M, N, r, rng)
    U, _, Vt = np.linalg.svd(A, full_matrices=False)
    E = U[:, :r] @ rng.normal(size=(r, r)) @ Vt[:r]
    B = A + E * rng.uniform(1e-3, 0.5) * spectral_norm(A) / spectral_norm(E)
    if matrix_rank(B) != r:
        B = A
    return wedin_gap(A, B)
