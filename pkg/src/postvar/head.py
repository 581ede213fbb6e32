"""Convex classical heads on top of a feature matrix.

Least squares (closed form and ridge), l2-ball constrained least squares,
logistic and softmax regression.  The functional API (``fit_*``, ``predict``)
works on plain arrays; :class:`LinearHead` and :class:`LogisticHead` wrap it
as scikit-learn estimators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit, log_softmax, logsumexp, softmax
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ConvergenceError, DimensionError, RangeError

BCE_CLIP = 1e-12
PINV_RCOND = 1e-12
LOSSES = ("rmse", "mae", "bce")
CONSTRAINTS = ("none", "ridge", "ball")


def _as_features(Q) -> np.ndarray:
    Q = getattr(Q, "Q", Q)
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2:
        raise DimensionError(f"feature matrix must be 2-D, got shape {Q.shape}")
    return Q


def compute_loss(kind: str, y, yhat) -> float:
    """RMSE ``||y - yhat||_2 / sqrt(d)``, MAE ``||y - yhat||_1 / d`` or mean binary cross-entropy."""
    kind = kind.lower()
    y = np.asarray(y, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    if y.shape != yhat.shape:
        raise DimensionError(f"length mismatch: {y.shape[0]} targets, {yhat.shape[0]} predictions")
    if kind == "rmse":
        return float(np.linalg.norm(y - yhat) / np.sqrt(y.shape[0]))
    if kind == "mae":
        return float(np.mean(np.abs(y - yhat)))
    if kind == "bce":
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("BCE needs binary targets in {0, 1}")
        p = np.clip(yhat, BCE_CLIP, 1 - BCE_CLIP)
        return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))
    raise ValueError(f"unknown loss {kind!r}; expected one of {LOSSES}")


@dataclass
class RegressionModel:
    """Fitted coefficients of a linear, logistic or softmax head.

    ``alpha`` is a vector for regression and binary tasks and an ``m x C``
    matrix for multiclass.  The intercept, when present, sits outside any
    norm constraint.
    """

    alpha: np.ndarray
    intercept: float | np.ndarray | None = None
    constraint: str = "none"
    lam: float = 0.0
    radius: float = 1.0
    task: str = "regression"
    classes: list | None = None
    col_specs: list[str] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        if self.intercept is not None and np.ndim(self.intercept):
            self.intercept = np.asarray(self.intercept, dtype=float)

    @property
    def n_features(self) -> int:
        return self.alpha.shape[0]

    @property
    def alpha_norm(self):
        """l2 norm of the coefficients (per class for multiclass)."""
        if self.alpha.ndim == 2:
            return np.linalg.norm(self.alpha, axis=0)
        return float(np.linalg.norm(self.alpha))

    def to_dict(self) -> dict:
        def conv(v):
            return v.tolist() if isinstance(v, np.ndarray) else v

        return {
            "task": self.task,
            "constraint": {"kind": self.constraint, "lambda": self.lam, "radius": self.radius},
            "alpha": self.alpha.tolist(),
            "intercept": conv(self.intercept),
            "classes": self.classes,
            "col_specs": self.col_specs,
            "metadata": self.metadata,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionModel":
        cons = d.get("constraint", {})
        return cls(
            alpha=np.asarray(d["alpha"], dtype=float),
            intercept=d.get("intercept"),
            constraint=cons.get("kind", "none"),
            lam=cons.get("lambda", 0.0),
            radius=cons.get("radius", 1.0),
            task=d.get("task", "regression"),
            classes=d.get("classes"),
            col_specs=d.get("col_specs"),
            metadata=d.get("metadata", {}),
        )

    @classmethod
    def from_json(cls, path_or_text) -> "RegressionModel":
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            text = Path(path_or_text).read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))


# --- solvers ----------------------------------------------------------------


def pinv_solve(Q: np.ndarray, Y: np.ndarray, rcond: float = PINV_RCOND) -> np.ndarray:
    """Minimum-norm least-squares solution ``Q^+ Y`` via SVD with relative cutoff ``rcond``."""
    U, s, Vt = np.linalg.svd(Q, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((Q.shape[1],) + Y.shape[1:])
    keep = s > rcond * s[0]
    coef = (U[:, keep].T @ Y) / s[keep].reshape((-1,) + (1,) * (Y.ndim - 1))
    return Vt[keep].T @ coef


def project_ball(x: np.ndarray, radius: float = 1.0, n_free: int = 0) -> np.ndarray:
    """Project the constrained block of ``x`` onto the l2 ball.

    The last ``n_free`` rows (intercepts) are left untouched; matrix
    arguments are projected column by column.
    """
    out = np.array(x, dtype=float, copy=True)
    block = out[: out.shape[0] - n_free] if n_free else out
    norms = np.linalg.norm(block, axis=0)
    scale = np.where(norms > radius, radius / np.where(norms > 0, norms, 1.0), 1.0)
    block *= scale
    return out


def minimize_projected(fun, grad, x0, project=None, tol=1e-8, max_iter=100_000, what="solver"):
    """Accelerated projected gradient descent with backtracking and adaptive restart.

    Stops once the gradient mapping ``L * (x - P(x - grad(x) / L))`` has norm
    at most ``tol``; without a projection that is just the gradient norm.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations, carrying the last iterate.
    """
    if project is None:
        def project(z):
            return z

    x = project(np.asarray(x0, dtype=float))
    y = x.copy()
    t, L = 1.0, 1.0
    res = np.inf
    for it in range(1, max_iter + 1):
        fy, gy = fun(y), grad(y)
        while True:
            x_new = project(y - gy / L)
            step = x_new - y
            f_new = fun(x_new)
            bound = fy + np.vdot(gy, step) + 0.5 * L * np.vdot(step, step)
            if f_new <= bound + 1e-13 * max(1.0, abs(fy)) or L > 1e16:
                break
            L *= 2.0
        g_new = grad(x_new)
        res = float(np.linalg.norm(L * (x_new - project(x_new - g_new / L))))
        if res <= tol:
            return x_new, it, res
        if np.vdot(y - x_new, x_new - x) > 0:
            # momentum points uphill: restart (gradient scheme, robust to float ties in f)
            t = 1.0
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_next) * (x_new - x)
        x, t = x_new, t_next
        L = max(L * 0.9, 1e-12)
    raise ConvergenceError(
        f"{what} did not reach stationarity {tol:g} in {max_iter} iterations (last {res:.3e})",
        last_iterate=x,
        residual=res,
        n_iter=max_iter,
    )


def _augment(Q, fit_intercept):
    if fit_intercept:
        return np.hstack([Q, np.ones((Q.shape[0], 1))])
    return Q


def _split(w, fit_intercept):
    if fit_intercept:
        return w[:-1], (float(w[-1]) if w.ndim == 1 else w[-1].copy())
    return w, None


# --- least squares -----------------------------------------------------------


def fit_least_squares(Q, Y, fit_intercept: bool = False, rcond: float = PINV_RCOND) -> RegressionModel:
    """Closed-form ``alpha = Q^+ Y`` (minimum-norm least-squares solution)."""
    Q = _as_features(Q)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if Q.shape[0] != Y.shape[0]:
        raise DimensionError(f"{Q.shape[0]} rows but {Y.shape[0]} targets")
    A = _augment(Q, fit_intercept)
    w = pinv_solve(A, Y, rcond)
    alpha, b = _split(w, fit_intercept)
    return RegressionModel(alpha, b, "none", task="regression")


def ridge_solve(A, Y, lam, n_free=0):
    d, m = A.shape
    pen = np.full(m, d * lam)
    if n_free:
        pen[-n_free:] = 0.0
    return np.linalg.solve(A.T @ A + np.diag(pen), A.T @ Y)


def fit_constrained(
    Q,
    Y,
    constraint: str = "ball",
    lam: float = 0.0,
    radius: float = 1.0,
    fit_intercept: bool = False,
    tol: float = 1e-8,
    max_iter: int = 100_000,
) -> RegressionModel:
    """Ridge (``(Q^T Q + d lam I)^-1 Q^T Y``) or l2-ball constrained least squares.

    The ball variant minimises the mean squared error by projected gradient
    descent and stops at first-order stationarity ``tol``.
    """
    Q = _as_features(Q)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if Q.shape[0] != Y.shape[0]:
        raise DimensionError(f"{Q.shape[0]} rows but {Y.shape[0]} targets")
    A = _augment(Q, fit_intercept)
    n_free = int(fit_intercept)
    d = A.shape[0]
    if constraint == "ridge":
        if lam < 0:
            raise RangeError(f"ridge lambda must be >= 0, got {lam}")
        if lam == 0:
            w = pinv_solve(A, Y)
        else:
            w = ridge_solve(A, Y, lam, n_free)
        alpha, b = _split(w, fit_intercept)
        return RegressionModel(alpha, b, "ridge", lam=lam, task="regression",
                               metadata={"alpha_norm": float(np.linalg.norm(alpha))})
    if constraint != "ball":
        raise ValueError(f"constraint must be 'ridge' or 'ball', got {constraint!r}")
    if radius <= 0:
        raise RangeError(f"radius must be positive, got {radius}")

    def fun(w):
        r = A @ w - Y
        return float(r @ r) / d

    def grad(w):
        return 2.0 * (A.T @ (A @ w - Y)) / d

    # inactive constraint: the closed form is already optimal
    w0 = pinv_solve(A, Y)
    if np.linalg.norm(w0[: A.shape[1] - n_free]) <= radius:
        w, n_iter, res = w0, 0, 0.0
    else:
        w, n_iter, res = minimize_projected(
            fun, grad, project_ball(w0, radius, n_free),
            lambda z: project_ball(z, radius, n_free), tol, max_iter, "ball least squares",
        )
    alpha, b = _split(w, fit_intercept)
    return RegressionModel(
        alpha, b, "ball", radius=radius, task="regression",
        metadata={"alpha_norm": float(np.linalg.norm(alpha)), "n_iter": n_iter, "stationarity": res},
    )


def ball_least_squares_exact(Q, Y, radius: float = 1.0) -> np.ndarray:
    """Ball-constrained least squares through the secular equation (reference solver).

    Finds ``lam >= 0`` with ``||(Q^T Q + lam I)^-1 Q^T Y|| = radius`` by
    bisection in the SVD basis.  Independent of :func:`minimize_projected`.
    """
    Q = _as_features(Q)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    U, s, Vt = np.linalg.svd(Q, full_matrices=False)
    c = U.T @ Y
    keep = s > PINV_RCOND * s[0]
    s, c, Vt = s[keep], c[keep], Vt[keep]

    def coef(lam):
        return s * c / (s**2 + lam)

    if np.linalg.norm(coef(0.0)) <= radius:
        return Vt.T @ coef(0.0)
    lo, hi = 0.0, float(np.linalg.norm(s * c)) / radius
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(coef(mid)) > radius:
            lo = mid
        else:
            hi = mid
    return Vt.T @ coef(hi)


# --- logistic / softmax ---------------------------------------------------------


def _penalty(lam, n_free):
    def pen(w):
        block = w[: w.shape[0] - n_free] if n_free else w
        return lam * float(np.sum(block * block))

    def pen_grad(w):
        g = 2.0 * lam * w
        if n_free:
            g[-n_free:] = 0.0
        return g

    return pen, pen_grad


def logistic_objective(A, y, lam=0.0, n_free=0):
    """Mean BCE of ``sigmoid(A w)`` plus ``lam ||w||^2`` on the non-intercept block."""
    d = A.shape[0]
    pen, pen_grad = _penalty(lam, n_free)

    def fun(w):
        z = A @ w
        return float(np.mean(np.logaddexp(0.0, z) - y * z)) + pen(w)

    def grad(w):
        return A.T @ (expit(A @ w) - y) / d + pen_grad(w)

    return fun, grad


def _check_constraint(constraint, lam, radius):
    if constraint not in CONSTRAINTS:
        raise ValueError(f"constraint must be one of {CONSTRAINTS}, got {constraint!r}")
    if lam < 0:
        raise RangeError(f"lambda must be >= 0, got {lam}")
    if radius <= 0:
        raise RangeError(f"radius must be positive, got {radius}")


def fit_logistic(
    Q,
    y,
    constraint: str = "none",
    lam: float = 0.0,
    radius: float = 1.0,
    fit_intercept: bool = False,
    tol: float = 1e-7,
    max_iter: int = 100_000,
) -> RegressionModel:
    """Binary logistic regression minimising mean BCE of ``sigmoid(Q alpha)``.

    ``constraint="ball"`` projects onto ``||alpha|| <= radius``;
    ``"ridge"`` adds ``lam ||alpha||^2``.
    """
    Q = _as_features(Q)
    y = np.asarray(y, dtype=float).reshape(-1)
    if Q.shape[0] != y.shape[0]:
        raise DimensionError(f"{Q.shape[0]} rows but {y.shape[0]} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("logistic head needs labels in {0, 1}")
    _check_constraint(constraint, lam, radius)
    A = _augment(Q, fit_intercept)
    n_free = int(fit_intercept)
    fun, grad = logistic_objective(A, y, lam if constraint == "ridge" else 0.0, n_free)
    project = (lambda z: project_ball(z, radius, n_free)) if constraint == "ball" else None
    w, n_iter, res = minimize_projected(
        fun, grad, np.zeros(A.shape[1]), project, tol, max_iter, "logistic regression"
    )
    alpha, b = _split(w, fit_intercept)
    return RegressionModel(
        alpha, b, constraint, lam=lam, radius=radius, task="binary", classes=[0, 1],
        metadata={"n_iter": n_iter, "stationarity": res, "train_bce": fun(w) if constraint != "ridge"
                  else compute_loss("bce", y, expit(A @ w))},
    )


def softmax_objective(A, onehot, lam=0.0, n_free=0):
    """Mean multiclass cross-entropy of ``softmax(A W)`` plus ``lam ||W||_F^2`` (intercepts free)."""
    d = A.shape[0]
    pen, pen_grad = _penalty(lam, n_free)

    def fun(W):
        Z = A @ W
        return float(np.mean(logsumexp(Z, axis=1) - np.sum(onehot * Z, axis=1))) + pen(W)

    def grad(W):
        return A.T @ (softmax(A @ W, axis=1) - onehot) / d + pen_grad(W)

    return fun, grad


def fit_softmax(
    Q,
    labels,
    n_classes: int | None = None,
    constraint: str = "none",
    lam: float = 0.0,
    radius: float = 1.0,
    fit_intercept: bool = False,
    tol: float = 1e-7,
    max_iter: int = 100_000,
) -> RegressionModel:
    """Multinomial logistic regression; ``labels`` are class ids in ``[0, C)``.

    With ``constraint="ball"`` each class column is projected separately.
    """
    Q = _as_features(Q)
    labels = np.asarray(labels).reshape(-1).astype(int)
    if Q.shape[0] != labels.shape[0]:
        raise DimensionError(f"{Q.shape[0]} rows but {labels.shape[0]} labels")
    C = int(n_classes if n_classes is not None else labels.max() + 1)
    if C < 2:
        raise RangeError(f"need at least two classes, got {C}")
    if labels.min() < 0 or labels.max() >= C:
        raise RangeError(f"labels must lie in [0, {C})")
    _check_constraint(constraint, lam, radius)
    A = _augment(Q, fit_intercept)
    n_free = int(fit_intercept)
    onehot = np.eye(C)[labels]
    fun, grad = softmax_objective(A, onehot, lam if constraint == "ridge" else 0.0, n_free)
    project = (lambda z: project_ball(z, radius, n_free)) if constraint == "ball" else None
    W, n_iter, res = minimize_projected(
        fun, grad, np.zeros((A.shape[1], C)), project, tol, max_iter, "softmax regression"
    )
    alpha, b = _split(W, fit_intercept)
    return RegressionModel(
        alpha, b, constraint, lam=lam, radius=radius, task="multiclass", classes=list(range(C)),
        metadata={"n_iter": n_iter, "stationarity": res},
    )


def decision_values(model: RegressionModel, Q) -> np.ndarray:
    Q = _as_features(Q)
    if Q.shape[1] != model.n_features:
        raise DimensionError(f"model expects {model.n_features} columns, got {Q.shape[1]}")
    z = Q @ model.alpha
    if model.intercept is not None:
        z = z + model.intercept
    return z


def predict(model: RegressionModel, Q) -> np.ndarray:
    """Linear output, sigmoid probability (binary) or ``d x C`` softmax probabilities."""
    z = decision_values(model, Q)
    if model.task == "binary":
        return expit(z)
    if model.task == "multiclass":
        return softmax(z, axis=1)
    return z


def training_loss(model: RegressionModel, Q, y) -> float:
    """RMSE for regression, BCE for binary, mean cross-entropy for multiclass."""
    if model.task == "regression":
        return compute_loss("rmse", y, predict(model, Q))
    if model.task == "binary":
        return compute_loss("bce", y, predict(model, Q))
    logp = log_softmax(decision_values(model, Q), axis=1)
    return float(-np.mean(logp[np.arange(logp.shape[0]), np.asarray(y, dtype=int)]))


# --- scikit-learn wrappers ------------------------------------------------------


class LinearHead(RegressorMixin, BaseEstimator):
    """Least-squares head: closed form, ridge or l2-ball constrained.

    Parameters
    ----------
    constraint : {"none", "ridge", "ball"}, default="none"
    lam : float, default=0.0
        Ridge strength (penalty ``lam * ||alpha||^2`` next to the mean squared error).
    radius : float, default=1.0
    fit_intercept : bool, default=False
    tol : float, default=1e-8
    max_iter : int, default=100000
    """

    def __init__(self, constraint="none", lam=0.0, radius=1.0, fit_intercept=False, tol=1e-8,
                 max_iter=100_000):
        self.constraint = constraint
        self.lam = lam
        self.radius = radius
        self.fit_intercept = fit_intercept
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if self.constraint == "none":
            model = fit_least_squares(X, y, self.fit_intercept)
        else:
            model = fit_constrained(X, y, self.constraint, self.lam, self.radius,
                                    self.fit_intercept, self.tol, self.max_iter)
        self.model_ = model
        self.coef_ = model.alpha
        self.intercept_ = 0.0 if model.intercept is None else model.intercept
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return predict(self.model_, check_array(X, dtype=float))


class LogisticHead(ClassifierMixin, BaseEstimator):
    """Logistic (two classes) or softmax (more classes) head.

    Parameters
    ----------
    constraint : {"none", "ridge", "ball"}, default="ridge"
    lam : float, default=1e-3
    radius : float, default=1.0
    fit_intercept : bool, default=True
    tol : float, default=1e-7
    max_iter : int, default=100000
    """

    def __init__(self, constraint="ridge", lam=1e-3, radius=1.0, fit_intercept=True, tol=1e-7,
                 max_iter=100_000):
        self.constraint = constraint
        self.lam = lam
        self.radius = radius
        self.fit_intercept = fit_intercept
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        check_classification_targets(y)
        self.classes_, codes = np.unique(y, return_inverse=True)
        kw = dict(constraint=self.constraint, lam=self.lam, radius=self.radius,
                  fit_intercept=self.fit_intercept, tol=self.tol, max_iter=self.max_iter)
        if self.classes_.shape[0] == 2:
            self.model_ = fit_logistic(X, codes, **kw)
        else:
            self.model_ = fit_softmax(X, codes, self.classes_.shape[0], **kw)
        self.model_.classes = self.classes_.tolist()
        self.coef_ = self.model_.alpha
        self.intercept_ = 0.0 if self.model_.intercept is None else self.model_.intercept
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        p = predict(self.model_, check_array(X, dtype=float))
        if p.ndim == 1:
            return np.column_stack([1 - p, p])
        return p

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return decision_values(self.model_, check_array(X, dtype=float))

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
