"""Projected Langevin chains and importance weighting for selective densities.

Chains are batched: the state has shape (n_chains, dim) and every chain
takes the unadjusted step

    x <- P_K(x + eta * grad log pi(x) + sqrt(2 eta) * xi)

in lockstep, so many short independent chains cost about as much Python
overhead as one.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .constraints import ProductRegion, Unconstrained
from .randomization import RandomizationDist
from .selectors import AffineReconstruction, MultiViewReconstruction, compose_views


BOUNDARY_RULES = ("reflect", "project")


@dataclass
class SamplerConfig:
    n_samples: int = 5000
    burnin: int = 2000
    eta: float | str | None = None
    thin: int = 1
    n_chains: int = 1
    seed: int | None = 0
    min_ess: float = 200.0
    max_halvings: int = 6
    auto_factor: float = 0.03
    boundary: str = "reflect"

    def __post_init__(self):
        if self.boundary not in BOUNDARY_RULES:
            raise ValueError(f"boundary must be one of {BOUNDARY_RULES}")

    @classmethod
    def from_dict(cls, cfg=None, **overrides):
        cfg = dict(cfg or {})
        if "steps" in cfg:
            cfg["n_samples"] = cfg.pop("steps")
        names = {f.name for f in fields(cls)}
        unknown = set(cfg) - names
        if unknown:
            raise ValueError(f"unknown sampler settings: {sorted(unknown)}")
        cfg.update(overrides)
        return cls(**cfg)


def _config(config, **overrides):
    if config is None:
        config = SamplerConfig()
    elif isinstance(config, dict):
        config = SamplerConfig.from_dict(config)
    return replace(config, **overrides) if overrides else config


@dataclass
class ChainState:
    x: np.ndarray
    blocks: list
    step_size: float
    iteration: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def __post_init__(self):
        self.region = ProductRegion([(label, region) for label, region in self.blocks])
        if self.region.dim != np.shape(self.x)[-1]:
            raise ValueError("state dimension does not match its blocks")

    def block(self, label):
        i = self.region.labels.index(label)
        return self.x[..., self.region.slices[i]]


def _bad_block(region, g):
    bad = ~np.isfinite(g)
    for label, sl in zip(region.labels, region.slices):
        if np.any(bad[..., sl]):
            return label
    return "?"


def _to_region(region, x, boundary):
    return region.reflect(x) if boundary == "reflect" else region.project(x)


def langevin_step(state: ChainState, grad_log_target, noise=None, boundary="project") -> ChainState:
    """One projected Langevin move; the drift is +eta * grad log density.

    ``boundary='reflect'`` mirrors infeasible proposals back into the region
    instead of projecting them onto its boundary.
    """
    if state.step_size <= 0:
        raise ValueError("step size must be positive")
    g = np.asarray(grad_log_target(state.x), dtype=float)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError(f"non-finite gradient in block {_bad_block(state.region, g)!r}")
    xi = state.rng.standard_normal(np.shape(state.x)) if noise is None else noise
    eta = state.step_size
    x = _to_region(state.region, state.x + eta * g + np.sqrt(2 * eta) * xi, boundary)
    out = replace(state, x=x, iteration=state.iteration + 1)
    return out


def run_chain(x0, blocks, grad_fn, config, lipschitz=None):
    """Run ``config.n_chains`` batched chains from ``x0``; return kept draws and info.

    ``eta`` defaults to 0.5 / sqrt(dim); ``eta='auto'`` uses
    ``auto_factor / lipschitz``. The step is halved (up to ``max_halvings``
    times) when more than half the proposals during a trial window have a
    non-finite gradient; such proposals are rejected.
    """
    config = _config(config)
    region = ProductRegion(blocks)
    dim = region.dim
    if config.eta is None:
        eta = 0.5 / np.sqrt(dim)
    elif config.eta == "auto":
        if lipschitz is None or not np.isfinite(lipschitz) or lipschitz <= 0:
            eta = 0.5 / np.sqrt(dim)
        else:
            eta = config.auto_factor / lipschitz
    else:
        eta = float(config.eta)
    if eta <= 0:
        raise ValueError("step size must be positive")
    rng = config.seed if isinstance(config.seed, np.random.Generator) else np.random.default_rng(config.seed)
    n_chains = max(1, int(config.n_chains))
    n_per = int(np.ceil(config.n_samples / n_chains))
    thin = max(1, int(config.thin))
    start = region.project(np.tile(np.asarray(x0, dtype=float), (n_chains, 1)))
    trial = min(config.burnin, 200) if config.burnin > 0 else min(n_per * thin, 200)
    halvings = 0
    while True:
        x = start.copy()
        g = grad_fn(x)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(
                f"non-finite gradient at the starting point in block {_bad_block(region, g)!r}")
        rejected = proposed = 0
        restart = False
        kept = []
        total = config.burnin + n_per * thin
        for it in range(total):
            prop = _to_region(region, x + eta * g + np.sqrt(2 * eta) * rng.standard_normal(x.shape),
                              config.boundary)
            gp = grad_fn(prop)
            ok = np.all(np.isfinite(gp), axis=1)
            proposed += n_chains
            if ok.all():
                x, g = prop, gp
            else:
                rejected += int((~ok).sum())
                x = np.where(ok[:, None], prop, x)
                g = np.where(ok[:, None], gp, g)
            if it + 1 == trial and rejected > 0.5 * proposed and halvings < config.max_halvings:
                restart = True
                break
            if it >= config.burnin and (it - config.burnin + 1) % thin == 0:
                kept.append(x.copy())
        if not restart:
            break
        eta *= 0.5
        halvings += 1
    draws = np.stack(kept, axis=1).reshape(-1, dim)[: config.n_samples] if kept else np.zeros((0, dim))
    info = {"eta": eta, "halvings": halvings, "n_chains": n_chains, "burnin": config.burnin,
            "thin": thin, "steps_per_chain": total, "chain_length": total * n_chains,
            "rejected": rejected, "boundary": config.boundary}
    return draws, info


# bookkeeping for reconstructions -----------------------------------------------

def prepare_views(target, recon, dist=None):
    """Return a MultiViewReconstruction expressed in target coordinates."""
    if isinstance(recon, AffineReconstruction):
        if dist is None:
            raise ValueError("a randomization law is required for a single view")
        mv = compose_views([recon], [dist])
    elif isinstance(recon, MultiViewReconstruction):
        mv = recon if dist is None else compose_views(recon.views, dist)
    else:
        raise TypeError("expected an AffineReconstruction or MultiViewReconstruction")
    targets = target if isinstance(target, (list, tuple)) else [target] * len(mv.views)
    if len(targets) != len(mv.views):
        raise ValueError("need one target decomposition per view")
    views = []
    for v, t in zip(mv.views, targets):
        if v.in_target:
            if v.data_dim != t.dim:
                raise ValueError("view target dimension does not match the target")
            views.append(v)
        else:
            views.append(v.with_target(t))
    return MultiViewReconstruction(views, mv.dists)


def _curvature(dist):
    c = dist.curvature_bound
    return c if c > 0 else 1.0 / dist.scale**2


def _lipschitz(mv, Sigma_inv=None, include_target=True, extra=None):
    L = 0.0 if Sigma_inv is None else float(np.max(np.linalg.eigvalsh(Sigma_inv)))
    for v, d in zip(mv.views, mv.dists):
        mats = [v.opt_matrix]
        if include_target:
            mats.insert(0, v.M if extra is None else v.M @ extra)
        A = np.hstack(mats)
        if A.size:
            L += _curvature(d) * np.linalg.norm(A, 2) ** 2
    return L


def _primary(target):
    return target[0] if isinstance(target, (list, tuple)) else target


@dataclass
class WeightedSample:
    target_draws: np.ndarray
    log_weights: np.ndarray
    theta: np.ndarray
    opt_draws: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.target_draws = np.asarray(self.target_draws, dtype=float).reshape(len(self.log_weights), -1)
        self.log_weights = np.asarray(self.log_weights, dtype=float)
        if not np.all(np.isfinite(self.log_weights) | (self.log_weights == -np.inf)):
            raise ValueError("log-weights must be finite or -inf")

    def __len__(self):
        return self.log_weights.shape[0]

    def weights(self):
        lw = self.log_weights
        m = np.max(lw)
        if not np.isfinite(m):
            from .errors import DegenerateError
            raise DegenerateError("all importance weights are zero")
        w = np.exp(lw - m)
        return w / w.sum()

    @property
    def ess(self):
        return ess(self.log_weights)


def ess(log_weights):
    lw = np.asarray(log_weights, dtype=float)
    m = np.max(lw, axis=-1, keepdims=True)
    w = np.exp(lw - m)
    return np.sum(w, axis=-1) ** 2 / np.sum(w**2, axis=-1)


# selective sampler -----------------------------------------------------------------

def run_selective_sampler(target, recon, dist=None, n_samples=None, config=None):
    """Chain over (T, V_1..V_K) with density phi_theta(T) * prod_k g_k(omega_k(T, V_k))."""
    config = _config(config, **({} if n_samples is None else {"n_samples": n_samples}))
    mv = prepare_views(target, recon, dist)
    tgt = _primary(target)
    a = tgt.dim
    Sinv = tgt.Sigma_T_inv
    theta = tgt.theta
    views = [(v.M, v.opt_matrix, v.L, d, sl) for v, d, sl in zip(mv.views, mv.dists, mv.slices)]

    def grad(x):
        T, V = x[:, :a], x[:, a:]
        gT = -(T - theta) @ Sinv
        gV = np.empty_like(V)
        for M, O, L, d, sl in views:
            s = d.grad_log_density(T @ M.T + V[:, sl] @ O.T + L)
            gT = gT + s @ M
            gV[:, sl] = s @ O
        return np.hstack([gT, gV])

    blocks = [("target", Unconstrained(a))] + list(zip(mv.constraint.labels,
                                                         [r for _, r in mv.constraint.blocks]))
    x0 = np.concatenate([tgt.T_obs, mv.observed_opt])
    draws, info = run_chain(x0, blocks, grad, config, _lipschitz(mv, Sinv))
    info["method"] = "plugin"
    return WeightedSample(draws[:, :a], np.zeros(len(draws)), theta.copy(), draws[:, a:], info)


# weighted optimization sampler ---------------------------------------------------------

def sample_optimization_variables(recon, dist=None, n_samples=None, config=None, data=None):
    """Chain over V alone with the data held at its observed value.

    The density g(omega(D_obs, V)) is the same whichever coordinates the
    data are written in, so one chain serves every target.
    """
    config = _config(config, **({} if n_samples is None else {"n_samples": n_samples}))
    mv = recon if isinstance(recon, MultiViewReconstruction) else compose_views([recon], [dist])
    if dist is not None and isinstance(recon, MultiViewReconstruction):
        mv = compose_views(recon.views, dist)
    datas = [v.observed_data for v in mv.views] if data is None else [data] * len(mv.views)
    views = [(v.M @ x + v.L, v.opt_matrix, d, sl)
             for v, x, d, sl in zip(mv.views, datas, mv.dists, mv.slices)]

    def grad(V):
        gV = np.empty_like(V)
        for base, O, d, sl in views:
            gV[:, sl] = d.grad_log_density(base + V[:, sl] @ O.T) @ O
        return gV

    blocks = list(zip(mv.constraint.labels, [r for _, r in mv.constraint.blocks]))
    draws, info = run_chain(mv.observed_opt, blocks, grad, config,
                            _lipschitz(mv, include_target=False))
    return draws, info


@dataclass
class WeightedGrid:
    """Importance weights for many null values from a single V chain."""

    thetas: np.ndarray
    target_noise: np.ndarray
    log_weights: np.ndarray
    T_obs: np.ndarray
    ess: np.ndarray
    low_ess: np.ndarray
    opt_draws: np.ndarray
    info: dict = field(default_factory=dict)

    def sample(self, i):
        return WeightedSample(self.target_noise + self.thetas[i], self.log_weights[i],
                              self.thetas[i], self.opt_draws, dict(self.info, ess=float(self.ess[i])))

    def cdf(self, t, i=0):
        """Weighted P(T <= t) under null value ``thetas[i]`` (1-D targets)."""
        w = np.exp(self.log_weights[i] - np.max(self.log_weights[i]))
        T = self.target_noise[:, 0] + self.thetas[i, 0]
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.array([np.sum(w * (T <= u)) for u in t_arr]) / np.sum(w)
        return out if np.ndim(t) else float(out[0])

    def one_sided_pivots(self):
        """Weighted P(T^s + theta <= T_obs) for each theta (1-D targets)."""
        if self.thetas.shape[1] != 1:
            raise ValueError("one-sided pivots need a 1-D target")
        lw = self.log_weights - np.max(self.log_weights, axis=1, keepdims=True)
        w = np.exp(lw)
        ind = (self.target_noise[:, 0][None, :] + self.thetas) <= self.T_obs[0]
        return np.sum(w * ind, axis=1) / np.sum(w, axis=1)


def run_weighted_optimization_sampler(target, recon, dist=None, theta_grid=None,
                                      target_draw_source="gaussian", n_samples=None, config=None,
                                      boot_draws=None, opt_draws=None):
    """Sample V at the observed data, then weight independent target draws.

    Each target draw T^s (Gaussian N(0, Sigma_T) or a bootstrap difference) is
    paired with a V draw and weighted for null value theta by

        g(M~ (T^s + theta) + O V + L~) / g(M~ T_obs + O V + L~).
    """
    config = _config(config, **({} if n_samples is None else {"n_samples": n_samples}))
    mv = prepare_views(target, recon, dist)
    tgt = _primary(target)
    a = tgt.dim
    if theta_grid is None:
        theta_grid = [tgt.theta]
    thetas = np.asarray(theta_grid, dtype=float).reshape(-1, a)
    if thetas.shape[0] == 0:
        raise ValueError("theta grid is empty")
    info = {}
    if opt_draws is None:
        opt_draws, info = sample_optimization_variables(mv, None, config.n_samples, config)
    n = opt_draws.shape[0]
    seed = config.seed if isinstance(config.seed, np.random.Generator) else \
        np.random.default_rng(np.random.SeedSequence(config.seed if config.seed is not None else None,
                                                     spawn_key=(7,)))
    if target_draw_source == "gaussian":
        chol = np.linalg.cholesky(tgt.Sigma_T)
        Ts = seed.standard_normal((n, a)) @ chol.T
    elif target_draw_source == "pairs_bootstrap":
        if boot_draws is None:
            raise ValueError("pairs_bootstrap source needs boot_draws (T* - T_obs)")
        boot = np.asarray(boot_draws, dtype=float).reshape(-1, a)
        Ts = boot[seed.integers(0, boot.shape[0], n)]
    else:
        raise ValueError(f"unknown target draw source {target_draw_source!r}")
    base, den = [], np.zeros(n)
    for v, d, sl in zip(mv.views, mv.dists, mv.slices):
        lin = opt_draws[:, sl] @ v.opt_matrix.T + v.L
        base.append((lin + Ts @ v.M.T, v.M, d))
        den += d.log_density(lin + v.M @ tgt.T_obs)
    logw = np.empty((thetas.shape[0], n))
    for i, th in enumerate(thetas):
        num = np.zeros(n)
        for w0, M, d in base:
            num += d.log_density(w0 + M @ th)
        logw[i] = num - den
    e = ess(logw)
    info = dict(info, method="weighted_opt", source=target_draw_source)
    return WeightedGrid(thetas, Ts, logw, tgt.T_obs.copy(), e, e < config.min_ess, opt_draws, info)


# wild bootstrap sampler ------------------------------------------------------------------

def run_wild_bootstrap_sampler(W, target, recon, dist=None, weight_law="normal", n_samples=None,
                               config=None):
    """Chain over (alpha, V) with density prod phi(alpha_i) * prod_k g_k(M~(W alpha + theta) + O V + L~).

    ``W`` maps bootstrap multipliers to the target, T(alpha) = W alpha.
    Returned target draws are W alpha + theta.
    """
    if weight_law != "normal":
        raise ValueError("Langevin needs a smooth multiplier law; use weight_law='normal' "
                         "or direct Monte Carlo for two-point weights")
    config = _config(config, **({} if n_samples is None else {"n_samples": n_samples}))
    mv = prepare_views(target, recon, dist)
    tgt = _primary(target)
    W = np.atleast_2d(np.asarray(W, dtype=float))
    a, n = W.shape
    if a != tgt.dim:
        raise ValueError("W must map multipliers to the target dimension")
    theta = tgt.theta
    views = [(v.M, v.opt_matrix, v.L, d, sl) for v, d, sl in zip(mv.views, mv.dists, mv.slices)]

    def grad(x):
        al, V = x[:, :n], x[:, n:]
        T = al @ W.T + theta
        gT = np.zeros((x.shape[0], a))
        gV = np.empty_like(V)
        for M, O, L, d, sl in views:
            s = d.grad_log_density(T @ M.T + V[:, sl] @ O.T + L)
            gT += s @ M
            gV[:, sl] = s @ O
        return np.hstack([-al + gT @ W, gV])

    blocks = [("alpha", Unconstrained(n))] + list(zip(mv.constraint.labels,
                                                        [r for _, r in mv.constraint.blocks]))
    x0 = np.concatenate([np.zeros(n), mv.observed_opt])
    draws, info = run_chain(x0, blocks, grad, config, 1.0 + _lipschitz(mv, extra=W))
    info["method"] = "wild_bootstrap"
    info["degenerate"] = bool(np.max(np.abs(W), initial=0.0) < 1e-12)
    T = draws[:, :n] @ W.T + theta
    return WeightedSample(T, np.zeros(len(draws)), theta.copy(), draws[:, n:], info)
