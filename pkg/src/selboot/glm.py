"""Gaussian and logistic losses, with optional per-row weights.

The loss is l(beta) = sum_i w_i l_i(x_i' beta). Batched fits operate on
arrays with a leading replicate axis, which keeps bootstrap loops in numpy.
"""

from __future__ import annotations

import numpy as np
from scipy import special

from .errors import SolverError

LOSSES = ("gaussian", "logistic")


def check_loss(loss: str) -> str:
    loss = loss.lower()
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}; choose from {LOSSES}")
    return loss


def mean_function(eta, loss):
    return eta if loss == "gaussian" else special.expit(eta)


def variance_function(eta, loss):
    if loss == "gaussian":
        return np.ones_like(eta)
    p = special.expit(eta)
    return p * (1 - p)


def loss_value(X, y, beta, loss="gaussian", weights=None):
    eta = X @ beta
    w = 1.0 if weights is None else weights
    if loss == "gaussian":
        return 0.5 * np.sum(w * (y - eta) ** 2)
    return np.sum(w * (np.logaddexp(0.0, eta) - y * eta))


def gradient(X, y, beta, loss="gaussian", weights=None):
    r = y - mean_function(X @ beta, loss)
    if weights is not None:
        r = weights * r
    return -(X.T @ r)


def hessian(X, beta, loss="gaussian", weights=None, cols=None):
    """X' W X, optionally restricted to columns ``cols`` on the right."""
    v = variance_function(X @ beta, loss)
    if weights is not None:
        v = weights * v
    right = X if cols is None else X[:, cols]
    return X.T @ (v[:, None] * right)


def fit_mle(X, y, loss="gaussian", weights=None, tol=1e-10, max_iter=100):
    """Unpenalized fit by Newton's method with step halving.

    Raises ``np.linalg.LinAlgError`` if the Hessian is singular and
    ``SolverError`` if Newton fails to converge.
    """
    loss = check_loss(loss)
    k = X.shape[1]
    if k == 0:
        return np.zeros(0)
    if loss == "gaussian":
        w = np.ones(X.shape[0]) if weights is None else weights
        G = X.T @ (w[:, None] * X)
        _check_conditioning(G)
        return np.linalg.solve(G, X.T @ (w * y))
    beta = np.zeros(k)
    f = loss_value(X, y, beta, loss, weights)
    for it in range(max_iter):
        g = gradient(X, y, beta, loss, weights)
        H = hessian(X, beta, loss, weights)
        _check_conditioning(H)
        step = np.linalg.solve(H, g)
        t = 1.0
        while True:
            cand = beta - t * step
            fc = loss_value(X, y, cand, loss, weights)
            if fc <= f + 1e-12 * abs(f) or t < 1e-10:
                break
            t *= 0.5
        beta, f = cand, fc
        if np.max(np.abs(t * step)) < tol:
            return beta
    raise SolverError("logistic Newton iterations did not converge",
                      float(np.max(np.abs(gradient(X, y, beta, loss, weights)))), max_iter)


def _check_conditioning(G, limit=1e12):
    if G.size and np.linalg.cond(G) > limit:
        raise np.linalg.LinAlgError("design restricted to the model is rank deficient")


def fit_mle_batch(Xb, yb, loss="gaussian", max_iter=50, tol=1e-9):
    """Fit one model per leading index of ``Xb`` (B, n, k) and ``yb`` (B, n).

    Returns (betas, ok) where ``ok`` flags replicates that were well
    conditioned and converged.
    """
    loss = check_loss(loss)
    B, _, k = Xb.shape
    if k == 0:
        return np.zeros((B, 0)), np.ones(B, dtype=bool)
    if loss == "gaussian":
        G = np.einsum("bni,bnj->bij", Xb, Xb)
        rhs = np.einsum("bni,bn->bi", Xb, yb)
        ok = np.linalg.cond(G) < 1e12
        G[~ok] = np.eye(k)
        return np.linalg.solve(G, rhs[..., None])[..., 0], ok
    beta = np.zeros((B, k))
    ok = np.ones(B, dtype=bool)
    done = np.zeros(B, dtype=bool)
    for _ in range(max_iter):
        eta = np.einsum("bni,bi->bn", Xb, beta)
        p = special.expit(eta)
        g = np.einsum("bni,bn->bi", Xb, yb - p)
        H = np.einsum("bni,bn,bnj->bij", Xb, p * (1 - p), Xb)
        good = np.linalg.cond(H) < 1e12
        ok &= good
        H[~good] = np.eye(k)
        step = np.linalg.solve(H, g[..., None])[..., 0]
        # damp very long steps; separation shows up as diverging coefficients
        scale = np.minimum(1.0, 5.0 / np.maximum(np.max(np.abs(step), axis=1), 1e-300))
        step *= scale[:, None]
        step[done] = 0.0
        beta += step
        done |= np.max(np.abs(step), axis=1) < tol
        if done.all():
            break
    ok &= done & np.all(np.abs(beta) < 50, axis=1)
    return beta, ok
