"""Randomized selection procedures and their affine reconstruction maps.

Each procedure returns a ``SelectionOutcome`` and an ``AffineReconstruction``

    omega = M @ data + B @ V_pos + U @ V_sub + L,

where ``data`` is the view's data vector D (or, after ``with_target``, the
target T) and V = (V_pos, V_sub) are the optimization variables, which live
in ``constraint``. Rows of the map follow the original coordinate order of
the randomization vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from . import glm
from .constraints import Box, LinfNormalCone, Orthant, ProductRegion, Region, region_from_dict
from .errors import SolverError
from .randomization import RandomizationDist
from .targets import DataSpec, complement, data_vector


@dataclass
class SelectionOutcome:
    active_set: np.ndarray
    signs: np.ndarray
    observed_opt: np.ndarray
    observed_omega: np.ndarray
    method: str = ""
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.active_set = np.asarray(self.active_set, dtype=int)
        self.signs = np.asarray(self.signs, dtype=float)
        if len(set(self.active_set.tolist())) != self.active_set.size:
            raise ValueError("active set indices must be distinct")
        if self.signs.shape != self.active_set.shape:
            raise ValueError("need one sign per active index")

    @property
    def empty(self):
        return self.active_set.size == 0


@dataclass
class AffineReconstruction:
    M: np.ndarray
    B: np.ndarray
    U: np.ndarray
    L: np.ndarray
    constraint: Region
    observed_data: np.ndarray
    observed_opt: np.ndarray
    observed_omega: np.ndarray
    jacobian_log: float = 0.0
    data_spec: DataSpec | None = None
    in_target: bool = False

    def __post_init__(self):
        self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
        q = self.M.shape[0]
        self.B = np.asarray(self.B, dtype=float).reshape(q, -1)
        self.U = np.asarray(self.U, dtype=float).reshape(q, -1)
        self.L = np.asarray(self.L, dtype=float).reshape(q)
        self.observed_data = np.asarray(self.observed_data, dtype=float).reshape(self.M.shape[1])
        self.observed_opt = np.asarray(self.observed_opt, dtype=float).reshape(self.opt_dim)
        self.observed_omega = np.asarray(self.observed_omega, dtype=float).reshape(q)
        if self.constraint.dim != self.opt_dim:
            raise ValueError("constraint dimension does not match the optimization blocks")

    # aliases matching the decomposed notation
    @property
    def M_tilde(self):
        return self.M

    @property
    def L_tilde(self):
        return self.L

    @property
    def omega_dim(self):
        return self.M.shape[0]

    @property
    def data_dim(self):
        return self.M.shape[1]

    @property
    def opt_dim(self):
        return self.B.shape[1] + self.U.shape[1]

    @property
    def opt_matrix(self):
        return np.hstack([self.B, self.U])

    def omega(self, data, V):
        return np.asarray(data) @ self.M.T + np.asarray(V) @ self.opt_matrix.T + self.L

    def reconstruction_error(self):
        return float(np.max(np.abs(self.omega(self.observed_data, self.observed_opt)
                                   - self.observed_omega), initial=0.0))

    def reparametrize(self, G, offset=None, observed=None):
        """Express the map in new data x with old data = G x + offset."""
        G = np.atleast_2d(np.asarray(G, dtype=float))
        offset = np.zeros(self.data_dim) if offset is None else np.asarray(offset, dtype=float)
        if observed is None:
            observed = np.linalg.lstsq(G, self.observed_data - offset, rcond=None)[0]
        return replace(self, M=self.M @ G, L=self.L + self.M @ offset, observed_data=observed)

    def with_target(self, target):
        """Condition on the nuisance F: D = C T + F, so the map moves only T."""
        if self.in_target:
            raise ValueError("reconstruction is already expressed in target coordinates")
        if target.D_obs.shape[0] != self.data_dim:
            raise ValueError("target decomposition does not match this view's data vector")
        out = self.reparametrize(target.C_hat, target.F_obs, target.T_obs)
        out.in_target = True
        return out

    def whiten(self, chol_lower):
        """Left-multiply by the inverse of a lower Cholesky factor."""
        solve = lambda A: linalg.solve_triangular(chol_lower, A, lower=True)
        return replace(self, M=solve(self.M), B=solve(self.B), U=solve(self.U),
                       L=solve(self.L), observed_omega=solve(self.observed_omega))

    def to_dict(self):
        return {
            "M": self.M.tolist(), "B": self.B.tolist(), "U": self.U.tolist(), "L": self.L.tolist(),
            "constraint": self.constraint.to_dict(),
            "observed_data": self.observed_data.tolist(),
            "observed_opt": self.observed_opt.tolist(),
            "observed_omega": self.observed_omega.tolist(),
            "jacobian_log": self.jacobian_log,
            "data_spec": None if self.data_spec is None else self.data_spec.to_dict(),
            "in_target": self.in_target,
        }

    @classmethod
    def from_dict(cls, d):
        q = len(d["L"])
        spec = d.get("data_spec")
        return cls(
            np.asarray(d["M"], dtype=float).reshape(q, -1),
            np.asarray(d["B"], dtype=float).reshape(q, -1),
            np.asarray(d["U"], dtype=float).reshape(q, -1),
            np.asarray(d["L"], dtype=float), region_from_dict(d["constraint"]),
            d["observed_data"], d["observed_opt"], d["observed_omega"],
            d.get("jacobian_log", 0.0),
            None if spec is None else DataSpec(spec["active"], spec["loss"]),
            d.get("in_target", False),
        )


@dataclass
class MultiViewReconstruction:
    """Product of views that share one data (or target) block."""

    views: list
    dists: list

    def __post_init__(self):
        if not self.views:
            raise ValueError("need at least one view")
        dims = {v.data_dim for v in self.views}
        if len(dims) != 1:
            raise ValueError(f"views disagree on the data dimension: {sorted(dims)}")
        if len(self.dists) != len(self.views):
            raise ValueError("need one randomization law per view")
        self.dists = [d.resized(v.omega_dim) for d, v in zip(self.dists, self.views)]
        self.slices, start = [], 0
        for v in self.views:
            self.slices.append(slice(start, start + v.opt_dim))
            start += v.opt_dim
        self.constraint = ProductRegion([(f"view{k}", v.constraint) for k, v in enumerate(self.views)])

    @property
    def data_dim(self):
        return self.views[0].data_dim

    @property
    def opt_dim(self):
        return self.constraint.dim

    @property
    def observed_opt(self):
        return np.concatenate([v.observed_opt for v in self.views])

    @property
    def observed_data(self):
        return self.views[0].observed_data

    @property
    def jacobian_log(self):
        return float(sum(v.jacobian_log for v in self.views))

    def log_density(self, data, V):
        """Sum over views of log g_k(omega_k(data, V_k)) plus the Jacobian terms."""
        V = np.asarray(V, dtype=float)
        total = self.jacobian_log
        for v, dist, sl in zip(self.views, self.dists, self.slices):
            total = total + dist.log_density(v.omega(data, V[..., sl]))
        return total

    def reconstruction_errors(self):
        return [v.reconstruction_error() for v in self.views]

    def with_targets(self, targets):
        views = [v if v.in_target else v.with_target(t) for v, t in zip(self.views, targets)]
        return MultiViewReconstruction(views, self.dists)


def compose_views(views, dists=None):
    if isinstance(views, AffineReconstruction):
        views = [views]
    if dists is None:
        dists = [RandomizationDist("logistic", 1.0, v.omega_dim) for v in views]
    elif isinstance(dists, RandomizationDist):
        dists = [dists] * len(views)
    return MultiViewReconstruction(list(views), list(dists))


# randomized LASSO --------------------------------------------------------------

def _soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def kkt_residual(grad_smooth, beta, lam):
    """Max-norm violation of 0 in grad + lam * subdifferential(|beta|_1)."""
    r = np.where(beta != 0, np.abs(grad_smooth + lam * np.sign(beta)),
                 np.maximum(np.abs(grad_smooth) - lam, 0.0))
    return float(np.max(r, initial=0.0))


def _polish(X, y, beta, lam, eps, omega, loss, weights):
    """Solve the smooth problem on the current support with signs held fixed."""
    S = np.flatnonzero(beta)
    if S.size == 0:
        return beta
    s = np.sign(beta[S])
    XS = X[:, S]
    w = np.ones(X.shape[0]) if weights is None else weights
    rhs_lin = omega[S] - lam * s
    if loss == "gaussian":
        G = XS.T @ (w[:, None] * XS) + eps * np.eye(S.size)
        bS = np.linalg.solve(G, XS.T @ (w * y) + rhs_lin)
    else:
        bS = beta[S].copy()
        obj = lambda b: glm.loss_value(XS, y, b, loss, w) + 0.5 * eps * b @ b - rhs_lin @ b
        f = obj(bS)
        for _ in range(50):
            g = glm.gradient(XS, y, bS, loss, w) + eps * bS - rhs_lin
            H = glm.hessian(XS, bS, loss, w) + eps * np.eye(S.size)
            step = np.linalg.solve(H, g)
            t = 1.0
            while obj(bS - t * step) > f + 1e-13 * abs(f) and t > 1e-8:
                t *= 0.5
            bS = bS - t * step
            f = obj(bS)
            if np.max(np.abs(t * step)) < 1e-13:
                break
    if np.any(np.sign(bS) != s):
        return beta
    out = np.zeros_like(beta)
    out[S] = bS
    return out


def _solve_lasso(X, y, lam, eps, omega, loss, weights=None, tol=1e-7, max_iter=50000, beta0=None):
    """FISTA with backtracking and restarts, plus an active-set polish."""
    n, p = X.shape
    w = None if weights is None else np.asarray(weights, dtype=float)

    def smooth(b):
        return glm.loss_value(X, y, b, loss, w) + 0.5 * eps * b @ b - omega @ b

    def sgrad(b):
        return glm.gradient(X, y, b, loss, w) + eps * b - omega

    beta = np.zeros(p) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    wmax = 1.0 if w is None else float(np.max(w))
    curv = 1.0 if loss == "gaussian" else 0.25
    Lip = max(1e-3, curv * wmax * np.linalg.norm(X, 2) ** 2 + eps)
    z, t = beta.copy(), 1.0
    res = np.inf
    for it in range(1, max_iter + 1):
        g = sgrad(z)
        fz = smooth(z)
        while True:
            cand = _soft(z - g / Lip, lam / Lip)
            d = cand - z
            if smooth(cand) <= fz + g @ d + 0.5 * Lip * d @ d + 1e-14 * max(1.0, abs(fz)):
                break
            Lip *= 2.0
        # gradient-based restart: drop momentum when it points uphill
        if (z - cand) @ (cand - beta) > 0:
            t = 1.0
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = cand + ((t - 1) / t_new) * (cand - beta)
        beta, t = cand, t_new
        if it % 10 == 0:
            res = kkt_residual(sgrad(beta), beta, lam)
            if res <= tol:
                break
            if it % 20 == 0:
                pol = _polish(X, y, beta, lam, eps, omega, loss, w)
                r2 = kkt_residual(sgrad(pol), pol, lam)
                if r2 <= tol:
                    beta, res = pol, r2
                    break
    else:
        raise SolverError("proximal gradient did not reach the KKT tolerance", res, max_iter)
    pol = _polish(X, y, beta, lam, eps, omega, loss, w)
    if kkt_residual(sgrad(pol), pol, lam) <= res:
        beta = pol
    return beta


def lasso_reconstruction(X, y, beta_hat, lam, eps, omega, loss="gaussian"):
    """KKT reconstruction at a (randomized) LASSO solution for the full-data loss."""
    p = X.shape[1]
    E = np.flatnonzero(beta_hat)
    s = np.sign(beta_hat[E])
    rest = complement(E, p)
    D, beta_bar = data_vector(X, y, E, loss)
    I = np.eye(p)
    JE, JR = I[:, E], I[:, rest]
    bar_full = np.zeros(p)
    bar_full[E] = beta_bar
    H_E = glm.hessian(X, bar_full, loss, cols=E)
    M = -np.hstack([H_E, JR])
    Bm = H_E + eps * JE
    Um = lam * JR
    grad_hat = glm.gradient(X, y, beta_hat, loss)
    L = lam * (JE @ s)
    if loss != "gaussian":
        # linearization remainder around the restricted MLE, kept so the
        # identity is exact at the observed point
        L = L + grad_hat + H_E @ (beta_bar - beta_hat[E]) + JR @ D[E.size:]
    u = (omega - grad_hat - eps * beta_hat)[rest] / lam
    constraint = ProductRegion([("beta_E", Orthant(s)), ("u_sub", Box.cube(rest.size, 1.0))])
    recon = AffineReconstruction(M, Bm, Um, L, constraint, D, np.concatenate([beta_hat[E], u]),
                                 omega, 0.0, DataSpec(E, loss))
    outcome = SelectionOutcome(E, s, recon.observed_opt, omega, "lasso",
                               {"beta_hat": beta_hat, "lam": lam, "eps": eps, "loss": loss})
    return outcome, recon


def solve_randomized_lasso(X, y, lam, eps=None, omega=None, loss="gaussian", tol=1e-7,
                           max_iter=50000):
    """Minimize l(beta) + lam |beta|_1 + eps/2 |beta|^2 - omega' beta."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    loss = glm.check_loss(loss)
    if lam <= 0:
        raise ValueError("lam must be positive")
    eps = 1.0 / np.sqrt(n) if eps is None else float(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    omega = np.zeros(p) if omega is None else np.asarray(omega, dtype=float)
    if y.shape != (n,) or omega.shape != (p,):
        raise ValueError("inconsistent dimensions for X, y, omega")
    if loss == "logistic" and not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("logistic loss requires a 0/1 response")
    beta = _solve_lasso(X, y, lam, eps, omega, loss, tol=tol, max_iter=max_iter)
    return lasso_reconstruction(X, y, beta, lam, eps, omega, loss)


def default_lambda(X, y, rng=None, n_draws=2000, loss="gaussian"):
    """Heuristic lam = E |X' e|_inf with e ~ N(0, sigma_hat^2 I)."""
    rng = np.random.default_rng(0 if rng is None else rng)
    n, p = X.shape
    if loss == "logistic":
        m = float(np.mean(y))
        sigma = np.sqrt(max(m * (1 - m), 1e-4))
    elif n > p + 1:
        resid = y - X @ np.linalg.lstsq(X, y, rcond=None)[0]
        sigma = np.sqrt(resid @ resid / (n - p))
    else:
        sigma = float(np.std(y))
    e = rng.standard_normal((n_draws, n))
    return float(sigma * np.mean(np.max(np.abs(e @ X), axis=1)))


# marginal screening ------------------------------------------------------------

def marginal_screening(S, omega, c):
    """Randomized screening: eta = clip(S + omega, -c, c), E = {|S + omega| >= c}.

    The map is written in terms of S: omega = -S + J_E z_E + J_R eta_R + c J_E s_E.
    """
    S = np.asarray(S, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if c <= 0:
        raise ValueError("threshold c must be positive")
    if S.shape != omega.shape:
        raise ValueError("S and omega must have the same length")
    p = S.size
    v = S + omega
    E = np.flatnonzero(np.abs(v) >= c)
    s = np.where(v[E] >= 0, 1.0, -1.0)
    rest = complement(E, p)
    I = np.eye(p)
    z = v[E] - c * s
    eta = np.clip(v, -c, c)
    constraint = ProductRegion([("z_E", Orthant(s)), ("eta_sub", Box.cube(rest.size, c))])
    recon = AffineReconstruction(-I, I[:, E], I[:, rest], c * (I[:, E] @ s), constraint, S,
                                 np.concatenate([z, eta[rest]]), omega)
    outcome = SelectionOutcome(E, s, recon.observed_opt, omega, "screening",
                               {"eta_hat": eta, "c": c})
    return outcome, recon


def noise_scale(X, y):
    n, p = X.shape
    if n > p + 1:
        resid = y - X @ np.linalg.lstsq(X, y, rcond=None)[0]
        return float(np.sqrt(resid @ resid / (n - p)))
    return float(np.std(y))


def data_to_score_matrix(X, E):
    """N with X'y = N D for the Gaussian data vector of model E."""
    p = X.shape[1]
    E = np.asarray(E, dtype=int)
    rest = complement(E, p)
    return np.hstack([X.T @ X[:, E], np.eye(p)[:, rest]])


def screening_view(X, y, omega, c, sigma_hat=None):
    """Screening on marginal z-statistics, re-expressed in the data vector of E."""
    sigma_hat = noise_scale(X, y) if sigma_hat is None else sigma_hat
    scale = sigma_hat * np.linalg.norm(X, axis=0)
    S = X.T @ y / scale
    outcome, recon = marginal_screening(S, omega, c)
    E = outcome.active_set
    D, _ = data_vector(X, y, E)
    G = data_to_score_matrix(X, E) / scale[:, None]
    recon = recon.reparametrize(G, None, D)
    recon.data_spec = DataSpec(E, "gaussian")
    outcome.info["sigma_hat"] = sigma_hat
    return outcome, recon


# forward stepwise ----------------------------------------------------------------

def forward_stepwise(X, y, K, omegas):
    """K steps of randomized forward stepwise; one reconstruction per step.

    Each step's map is written in the Gaussian data vector of the final set
    E_K. ``omegas[k]`` may have length p (subset to the inactive set) or the
    size of the inactive set at that step.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if not 1 <= K < min(n, p):
        raise ValueError("need 1 <= K < min(n, p)")
    if len(omegas) != K:
        raise ValueError("need one randomization vector per step")
    active, signs, steps = [], [], []
    for k in range(K):
        inactive = complement(active, p)
        w = np.asarray(omegas[k], dtype=float)
        if w.size == p:
            w = w[inactive]
        elif w.size != inactive.size:
            raise ValueError(f"step {k + 1}: omega has length {w.size}")
        if active:
            XA = X[:, active]
            G = XA.T @ XA
            if np.linalg.cond(G) > 1e12:
                raise np.linalg.LinAlgError(f"step {k + 1}: selected columns are rank deficient")
            resid = y - XA @ np.linalg.solve(G, XA.T @ y)
        else:
            resid = y
        z = X[:, inactive].T @ resid + w
        pos = int(np.argmax(np.abs(z)))
        sgn = 1.0 if z[pos] >= 0 else -1.0
        steps.append((list(active), inactive, pos, sgn, z, w))
        active.append(int(inactive[pos]))
        signs.append(sgn)
    EK = np.asarray(active)
    XK = X[:, EK]
    if np.linalg.cond(XK.T @ XK) > 1e12:
        raise np.linalg.LinAlgError(f"step {K}: selected columns are rank deficient")
    D, _ = data_vector(X, y, EK)
    N = data_to_score_matrix(X, EK)
    outcomes, recons = [], []
    for k, (prev, inactive, pos, sgn, z, w) in enumerate(steps):
        R = np.zeros((inactive.size, p))
        R[:, inactive] = np.eye(inactive.size)
        if prev:
            XP = X[:, prev]
            R[:, prev] = -X[:, inactive].T @ XP @ np.linalg.inv(XP.T @ XP)
        q = inactive.size
        region = ProductRegion([("z", LinfNormalCone(q, pos, sgn))])
        recon = AffineReconstruction(-R @ N, np.zeros((q, 0)), np.eye(q), np.zeros(q), region,
                                     D, z, w, 0.0, DataSpec(EK, "gaussian"))
        recons.append(recon)
        outcomes.append(SelectionOutcome(EK[: k + 1], np.asarray(signs[: k + 1]), z, w, "stepwise",
                                         {"step": k + 1, "inactive": inactive, "pivot": pos}))
    return outcomes, recons


# data carving ----------------------------------------------------------------------

def carving_omega(X, y, subsample, loss, beta_hat):
    """Implicit randomization grad l(beta) - (1/rho) grad l_1(beta) of a split."""
    n = X.shape[0]
    idx = np.unique(np.asarray(subsample, dtype=int))
    rho = idx.size / n
    w = np.zeros(n)
    w[idx] = 1.0 / rho
    return glm.gradient(X, y, beta_hat, loss) - glm.gradient(X, y, beta_hat, loss, w)


def carve_randomization(X, y, subsample_indices, loss, beta_hat, B_reps=500, rng=None):
    """Realized carving randomization and a pairs-bootstrap estimate of its covariance.

    Each bootstrap replicate resamples the rows and re-draws the split, so
    the estimate tracks the split-to-split variability of omega.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    loss = glm.check_loss(loss)
    idx = np.unique(np.asarray(subsample_indices, dtype=int))
    if idx.size == 0 or idx.size > n:
        raise ValueError("subsample must be a nonempty subset of the rows")
    if idx.size == n:
        raise ValueError("rho = 1 leaves no randomization; use non-randomized inference")
    rng = np.random.default_rng(rng)
    beta_hat = np.asarray(beta_hat, dtype=float)
    omega = carving_omega(X, y, idx, loss, beta_hat)
    rho = idx.size / n
    psi = -X * (y - glm.mean_function(X @ beta_hat, loss))[:, None]
    draws = np.empty((B_reps, p))
    for b in range(B_reps):
        rows = rng.integers(0, n, n)
        coef = np.ones(n)
        coef[rng.permutation(n)[: idx.size]] -= 1.0 / rho
        draws[b] = coef @ psi[rows]
    return omega, np.cov(draws, rowvar=False).reshape(p, p)


def carving_cross_covariance(X, y, subsample_size, loss, beta_hat, E, B_reps=500, rng=None):
    """Bootstrap estimate of Cov(omega, D) for a random split of the given size."""
    rng = np.random.default_rng(rng)
    n, p = X.shape
    rho = subsample_size / n
    om, Ds = [], []
    for _ in range(B_reps):
        rows = rng.integers(0, n, n)
        Xb, yb = X[rows], y[rows]
        try:
            D, _ = data_vector(Xb, yb, E, loss)
        except (np.linalg.LinAlgError, SolverError):
            continue
        split = rng.permutation(n)[:subsample_size]
        w = np.zeros(n)
        w[split] = 1.0 / rho
        om.append(glm.gradient(Xb, yb, beta_hat, loss) - glm.gradient(Xb, yb, beta_hat, loss, w))
        Ds.append(D)
    om, Ds = np.asarray(om), np.asarray(Ds)
    om -= om.mean(0)
    Ds -= Ds.mean(0)
    return om.T @ Ds / (len(om) - 1), om.T @ om / (len(om) - 1)


def carved_lasso(X, y, rho, lam, eps=None, loss="logistic", rng=None, B_reps=500, subsample=None):
    """LASSO on a subsample, recast as a Gaussian-randomized full-data problem.

    The returned view is whitened by the Cholesky factor of the estimated
    randomization covariance, so its randomization law is i.i.d. N(0, 1).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    loss = glm.check_loss(loss)
    if not 0 < rho < 1:
        raise ValueError("carving needs 0 < rho < 1")
    rng = np.random.default_rng(rng)
    eps = 1.0 / np.sqrt(n) if eps is None else float(eps)
    if subsample is None:
        subsample = np.sort(rng.choice(n, int(np.floor(rho * n)), replace=False))
    subsample = np.asarray(subsample, dtype=int)
    rho_eff = subsample.size / n
    w = np.zeros(n)
    w[subsample] = 1.0 / rho_eff
    beta = _solve_lasso(X, y, lam, eps, np.zeros(p), loss, weights=w)
    omega = carving_omega(X, y, subsample, loss, beta)
    outcome, recon = lasso_reconstruction(X, y, beta, lam, eps, omega, loss)
    _, Sigma_omega = carve_randomization(X, y, subsample, loss, beta, B_reps, rng)
    ridge = 1e-10 * max(np.trace(Sigma_omega) / p, 1e-12)
    chol = np.linalg.cholesky(Sigma_omega + ridge * np.eye(p))
    outcome.method = "carve"
    outcome.info.update(subsample=subsample, rho=rho_eff, Sigma_omega=Sigma_omega,
                        raw_omega=omega)
    return outcome, recon.whiten(chol), RandomizationDist("gaussian", 1.0, p)
