"""Least-squares and logistic fits, plain and frequency-weighted.

Weights are integer replication counts: a weighted fit returns exactly what
the plain fit would return on the dataset with row ``i`` repeated ``w[i]``
times, standard errors included. Zero-weight rows are dropped before the
factorisation, so a resample over ``b`` distinct rows costs O(b p^2) however
large the total weight is.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, SeparationError, SingularDesignError

__all__ = [
    "FitResult",
    "add_intercept",
    "fit_linear",
    "fit_linear_weighted",
    "fit_linear_many",
    "fit_logistic",
    "fit_logistic_weighted",
    "logistic_score",
]

RANK_TOL = 1e-10
LOGISTIC_TOL = 1e-8
LOGISTIC_MAX_ITER = 100
SEPARATION_BOUND = 30.0


@dataclass(frozen=True)
class FitResult:
    coefficients: np.ndarray
    std_errors: np.ndarray
    converged: bool = True
    iterations: int = 0
    residual_variance: float = float("nan")
    n_obs: float = 0.0


def add_intercept(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(X.shape[0]), X])


def _prepare(X, y, weights):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    if y.shape[0] != X.shape[0]:
        raise InvalidArgumentError(f"{X.shape[0]} design rows but {y.shape[0]} responses")
    if weights is None:
        return X, y, None
    w = np.asarray(weights)
    if w.shape != (X.shape[0],):
        raise InvalidArgumentError("weights must have one entry per row")
    if np.any(w < 0):
        raise InvalidArgumentError("weights must be non-negative")
    keep = w > 0
    if not keep.all():
        X, y, w = X[keep], y[keep], w[keep]
    return X, y, w.astype(float)


def _qr(A):
    """Reduced QR with a rank check on the diagonal of R."""
    q, r = np.linalg.qr(A)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or not diag.min() > RANK_TOL * diag.max():
        raise SingularDesignError("design matrix is rank deficient")
    return q, r


def _unscaled_cov_diag(r):
    # diag((R'R)^-1) = row sums of squares of R^-1
    rinv = np.linalg.solve(r, np.eye(r.shape[0]))
    return np.einsum("ij,ij->i", rinv, rinv)


def fit_linear_many(X, Y, weights=None) -> list[FitResult]:
    """Least squares for several responses sharing one design.

    ``Y`` is ``(n, k)``; one QR of the (weight-scaled) design serves all
    ``k`` columns. Returns one :class:`FitResult` per column.
    """
    X, Y, w = _prepare(X, Y, weights)
    if Y.ndim == 1:
        Y = Y[:, None]
    n_eff = float(X.shape[0]) if w is None else float(w.sum())
    p = X.shape[1]
    if X.shape[0] < p:
        raise SingularDesignError(f"{X.shape[0]} distinct rows for {p} regressors")
    if w is None:
        A, B = X, Y
    else:
        sw = np.sqrt(w)
        A, B = X * sw[:, None], Y * sw[:, None]
    q, r = _qr(A)
    coef = np.linalg.solve(r, q.T @ B)
    resid = B - A @ coef
    rss = np.einsum("ij,ij->j", resid, resid)
    dof = n_eff - p
    sigma2 = rss / dof if dof > 0 else np.full(rss.shape, np.nan)
    cov_diag = _unscaled_cov_diag(r)
    out = []
    for j in range(Y.shape[1]):
        out.append(
            FitResult(
                coefficients=coef[:, j],
                std_errors=np.sqrt(sigma2[j] * cov_diag),
                residual_variance=float(sigma2[j]),
                n_obs=n_eff,
            )
        )
    return out


def fit_linear(X, y) -> FitResult:
    """Ordinary least squares of ``y`` on the columns of ``X``.

    ``X`` must already contain an intercept column if one is wanted (see
    :func:`add_intercept`). Standard errors use ``RSS / (n - p)``.
    """
    return fit_linear_many(X, np.asarray(y, dtype=float)[:, None])[0]


def fit_linear_weighted(X, y, weights) -> FitResult:
    return fit_linear_many(X, np.asarray(y, dtype=float)[:, None], weights)[0]


def _log1pexp(t):
    return np.logaddexp(0.0, t)


def _neg_loglik(eta, y, w):
    # -sum w [y log p + (1 - y) log(1 - p)], p = expit(eta)
    ll = y * _log1pexp(-eta) + (1.0 - y) * _log1pexp(eta)
    return float(ll @ w) if w is not None else float(ll.sum())


def _expit(eta):
    return 0.5 * (1.0 + np.tanh(0.5 * eta))


def logistic_score(X, y, coefficients, weights=None) -> np.ndarray:
    """Gradient of the (weighted) log-likelihood at ``coefficients``."""
    X, y, w = _prepare(X, y, weights)
    resid = y - _expit(X @ np.asarray(coefficients, dtype=float))
    if w is not None:
        resid = resid * w
    return X.T @ resid


def _irls(X, y, w, start, tol, max_iter, single_class_error=InvalidArgumentError):
    n, p = X.shape
    if n < p:
        raise SingularDesignError(f"{n} distinct rows for {p} regressors")
    ones = np.ones(n) if w is None else w
    if not np.all((y == 0.0) | (y == 1.0)):
        raise InvalidArgumentError("logistic response must be 0/1")
    pos = float(ones @ y)
    if pos == 0.0 or pos == float(ones.sum()):
        raise single_class_error("logistic response has a single class")

    beta = np.zeros(p) if start is None else np.array(start, dtype=float)
    eta = X @ beta
    loss = _neg_loglik(eta, y, w)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = _expit(eta)
        var = mu * (1.0 - mu)
        sw = np.sqrt(ones * var)
        if np.count_nonzero(sw) < p:
            raise SeparationError("information matrix vanished (fitted probabilities 0/1)")
        try:
            q, r = _qr(X * sw[:, None])
        except SingularDesignError:
            raise SeparationError("information matrix numerically singular") from None
        # Newton step: (X'WX) step = X' w (y - mu), solved through the QR of W^{1/2} X
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(sw > 0, ones * (y - mu) / sw, 0.0)
        step = np.linalg.solve(r, q.T @ z)
        t = 1.0
        while True:
            cand = beta + t * step
            cand_eta = X @ cand
            cand_loss = _neg_loglik(cand_eta, y, w)
            if cand_loss <= loss * (1.0 + 1e-12) or t < 1e-10:
                break
            t *= 0.5
        change = np.max(np.abs(cand - beta))
        beta, eta, loss = cand, cand_eta, cand_loss
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            raise SeparationError(
                f"coefficient magnitude exceeded {SEPARATION_BOUND:g}; data look separated"
            )
        if change < tol:
            converged = True
            break

    mu = _expit(eta)
    sw = np.sqrt(ones * mu * (1.0 - mu))
    try:
        _, r = _qr(X * sw[:, None])
    except SingularDesignError:
        raise SeparationError("information matrix numerically singular at optimum") from None
    se = np.sqrt(_unscaled_cov_diag(r))
    return FitResult(
        coefficients=beta,
        std_errors=se,
        converged=converged,
        iterations=it,
        n_obs=float(ones.sum()),
    )


def fit_logistic(X, y, start=None, tol=LOGISTIC_TOL, max_iter=LOGISTIC_MAX_ITER) -> FitResult:
    """Maximum-likelihood logistic regression by Newton/IRLS with step halving.

    Stops when the largest coefficient change falls below ``tol``. Standard
    errors come from the inverse information at the optimum. Raises
    :class:`SeparationError` when any coefficient leaves ``[-30, 30]``.
    """
    X, y, _ = _prepare(X, y, None)
    return _irls(X, y, None, start, tol, max_iter)


def fit_logistic_weighted(
    X, y, weights, start=None, tol=LOGISTIC_TOL, max_iter=LOGISTIC_MAX_ITER
) -> FitResult:
    """Minimise the frequency-weighted negative log-likelihood."""
    X, y, w = _prepare(X, y, weights)
    if w.size == 0:
        raise InvalidArgumentError("all weights are zero")
    # a resample holding one class has no finite optimum, same as separation
    return _irls(X, y, w, start, tol, max_iter, single_class_error=SeparationError)
