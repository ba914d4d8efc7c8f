"""Target statistics, linear decomposition and bootstrap covariance estimates.

The data vector for a model E is D = (beta_bar_E, X_{-E}'(y - fit)), with
beta_bar_E the unpenalized fit on E. A target T is linear in D (or, for
multiple views, a jointly asymptotically Gaussian statistic), and the
decomposition D = C T + F keeps F fixed while T moves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import glm


@dataclass(frozen=True)
class DataSpec:
    """Recipe for recomputing a view's data vector on resampled data."""

    active: tuple
    loss: str = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "active", tuple(int(i) for i in self.active))
        object.__setattr__(self, "loss", glm.check_loss(self.loss))

    def to_dict(self):
        return {"active": list(self.active), "loss": self.loss}


def complement(E, p):
    mask = np.ones(p, dtype=bool)
    mask[list(E)] = False
    return np.flatnonzero(mask)


def data_vector(X, y, E, loss="gaussian"):
    """Return (D, beta_bar_E) with D ordered as (E block, complement block)."""
    E = np.asarray(E, dtype=int)
    XE = X[:, E]
    beta_bar = glm.fit_mle(XE, y, loss)
    resid = y - glm.mean_function(XE @ beta_bar, loss)
    rest = complement(E, X.shape[1])
    return np.concatenate([beta_bar, X[:, rest].T @ resid]), beta_bar


def data_vector_batch(Xb, yb, E, loss="gaussian"):
    E = np.asarray(E, dtype=int)
    XE = Xb[:, :, E]
    betas, ok = glm.fit_mle_batch(XE, yb, loss)
    fit = glm.mean_function(np.einsum("bni,bi->bn", XE, betas), loss)
    rest = complement(E, Xb.shape[2])
    other = np.einsum("bni,bn->bi", Xb[:, :, rest], yb - fit)
    return np.concatenate([betas, other], axis=1), ok


@dataclass
class TargetSpec:
    """Target T with null value theta and the decomposition D = C T + F."""

    T_obs: np.ndarray
    theta: np.ndarray
    Sigma_T: np.ndarray
    Sigma_DT: np.ndarray
    D_obs: np.ndarray
    A: np.ndarray | None = None

    def __post_init__(self):
        self.T_obs = np.atleast_1d(np.asarray(self.T_obs, dtype=float))
        self.theta = np.broadcast_to(np.asarray(self.theta, dtype=float), self.T_obs.shape).copy()
        self.Sigma_T = np.atleast_2d(np.asarray(self.Sigma_T, dtype=float))
        self.Sigma_T = _regularize(0.5 * (self.Sigma_T + self.Sigma_T.T))
        self.D_obs = np.atleast_1d(np.asarray(self.D_obs, dtype=float))
        self.Sigma_DT = np.asarray(self.Sigma_DT, dtype=float).reshape(self.D_obs.shape[0], self.dim)

    @property
    def dim(self):
        return self.T_obs.shape[0]

    @property
    def Sigma_T_inv(self):
        return np.linalg.inv(self.Sigma_T)

    @property
    def C_hat(self):
        return self.Sigma_DT @ self.Sigma_T_inv

    @property
    def F_obs(self):
        return self.D_obs - self.C_hat @ self.T_obs

    # the nuisance part D_A coincides with F
    D_A = F_obs

    def with_theta(self, theta):
        return TargetSpec(self.T_obs, theta, self.Sigma_T, self.Sigma_DT, self.D_obs, self.A)

    def reconstruct(self, T=None):
        T = self.T_obs if T is None else T
        return self.F_obs + self.C_hat @ T


def _regularize(S):
    a = S.shape[0]
    if np.min(np.linalg.eigvalsh(S)) <= 1e-10 * max(1.0, np.trace(S) / a):
        warnings.warn("target covariance is singular; adding a ridge of 1e-8 * trace / a",
                      RuntimeWarning, stacklevel=3)
        S = S + 1e-8 * max(np.trace(S), 1.0) / a * np.eye(a)
    return S


def decompose(D_obs, A, Sigma_hat, theta=None):
    """Decompose D against the linear target T = A' D."""
    D_obs = np.asarray(D_obs, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    Sigma_hat = np.asarray(Sigma_hat, dtype=float)
    Sigma_hat = 0.5 * (Sigma_hat + Sigma_hat.T)
    T_obs = A.T @ D_obs
    return TargetSpec(T_obs, np.zeros_like(T_obs) if theta is None else theta,
                      A.T @ Sigma_hat @ A, Sigma_hat @ A, D_obs, A)


def target_from_blocks(T_obs, Sigma_T, Sigma_DT, D_obs, theta=None):
    T_obs = np.atleast_1d(T_obs)
    return TargetSpec(T_obs, np.zeros_like(T_obs, dtype=float) if theta is None else theta,
                      Sigma_T, Sigma_DT, D_obs)


def pairs_bootstrap_draws(X, y, specs, B_reps, rng, chunk=250):
    """Recompute each spec's data vector on ``B_reps`` pairs resamples.

    All specs share the same resamples. Resamples with a singular or
    non-convergent fit are redrawn, at most ``10 * B_reps`` in total.
    """
    n = X.shape[0]
    out = [[] for _ in specs]
    kept, attempts = 0, 0
    while kept < B_reps:
        if attempts >= 10 * B_reps:
            raise np.linalg.LinAlgError(
                f"only {kept} of {B_reps} bootstrap resamples gave a nonsingular fit")
        m = min(chunk, B_reps - kept)
        attempts += m
        idx = rng.integers(0, n, size=(m, n))
        Xb, yb = X[idx], y[idx]
        ok = np.ones(m, dtype=bool)
        draws = []
        for spec in specs:
            D, good = data_vector_batch(Xb, yb, spec.active, spec.loss)
            ok &= good
            draws.append(D)
        for store, D in zip(out, draws):
            store.append(D[ok])
        kept += int(ok.sum())
    return [np.concatenate(store)[:B_reps] for store in out]


def pairs_bootstrap_cov(X, y, E, A, B_reps=1000, rng=None, loss="gaussian"):
    """Pairs-bootstrap estimates of (Sigma_T, Sigma_DT) for T = A' D."""
    if B_reps < 200:
        raise ValueError("pairs bootstrap needs at least 200 replicates")
    rng = np.random.default_rng(rng)
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    p = X.shape[1]
    if A.shape[0] == len(E) < p:
        # contrast on the selected coefficients only
        A = np.vstack([A, np.zeros((p - len(E), A.shape[1]))])
    elif A.shape[0] != p:
        raise ValueError("contrast must have |E| or p rows")
    (D,) = pairs_bootstrap_draws(X, y, [DataSpec(E, loss)], B_reps, rng)
    S = np.cov(D, rowvar=False).reshape(D.shape[1], D.shape[1])
    S = 0.5 * (S + S.T)
    return A.T @ S @ A, S @ A


def joint_covariance(draws):
    """Covariance of concatenated bootstrap draws, returned with block slices."""
    stacked = np.concatenate(draws, axis=1)
    S = np.cov(stacked, rowvar=False).reshape(stacked.shape[1], stacked.shape[1])
    slices, start = [], 0
    for d in draws:
        slices.append(slice(start, start + d.shape[1]))
        start += d.shape[1]
    return 0.5 * (S + S.T), slices


# wild bootstrap --------------------------------------------------------------

def wild_bootstrap_matrix(X_E, residuals_hat, A):
    """Matrix W with T(alpha) = W alpha = A'(X_E'X_E)^{-1} X_E' diag(res) alpha."""
    X_E = np.asarray(X_E, dtype=float)
    k = X_E.shape[1]
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.shape[0] != k:
        if A.shape[0] > k and np.allclose(A[k:], 0):
            A = A[:k]
        else:
            raise ValueError("contrast must act on the selected coefficients")
    G = X_E.T @ X_E
    if k and np.linalg.cond(G) > 1e12:
        raise np.linalg.LinAlgError("X_E'X_E is singular")
    return A.T @ np.linalg.solve(G, X_E.T * np.asarray(residuals_hat)[None, :])


def wild_bootstrap_target(X_E, residuals_hat, A, alpha):
    W = wild_bootstrap_matrix(X_E, residuals_hat, A)
    return np.asarray(alpha) @ W.T


MAMMEN_LOW = (1 - np.sqrt(5)) / 2
MAMMEN_HIGH = (1 + np.sqrt(5)) / 2
MAMMEN_P_LOW = (np.sqrt(5) + 1) / (2 * np.sqrt(5))


def normal_weights(rng, size):
    return rng.standard_normal(size)


def mammen_weights(rng, size):
    """Two-point law with mean 0, variance 1 and third moment 1."""
    return np.where(rng.random(size) < MAMMEN_P_LOW, MAMMEN_LOW, MAMMEN_HIGH)


WEIGHT_LAWS = {"normal": normal_weights, "mammen": mammen_weights}


def bootstrap_weights(law, rng, size):
    law = law.lower()
    if law not in WEIGHT_LAWS:
        raise ValueError(f"unknown bootstrap weight law {law!r}")
    return WEIGHT_LAWS[law](rng, size)
