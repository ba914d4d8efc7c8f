"""Run several randomized selection procedures and infer on a chosen model.

``run_views`` executes a ``ViewPlan`` and returns the composed
reconstruction, with every view still written in its own data vector D_k.
``infer`` then builds the shared target for each coefficient of the chosen
model, estimates the joint covariance of (T, D_1, ..., D_K) by the pairs
bootstrap and hands the decomposed views to a sampler.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import glm, pivots, selectors
from .randomization import RandomizationDist
from .samplers import (SamplerConfig, _config, prepare_views, run_selective_sampler,
                       run_weighted_optimization_sampler, run_wild_bootstrap_sampler,
                       sample_optimization_variables)
from .selectors import compose_views
from .targets import (DataSpec, TargetSpec, data_vector, joint_covariance, pairs_bootstrap_draws,
                      wild_bootstrap_matrix)

PROCEDURES = ("lasso", "screen", "stepwise", "carve")


@dataclass
class ViewPlan:
    views: list
    final_model_rule: object = "union"

    def __post_init__(self):
        if not self.views:
            raise ValueError("a plan needs at least one view")
        for v in self.views:
            if v.get("procedure", "lasso") not in PROCEDURES:
                raise ValueError(f"unknown procedure {v.get('procedure')!r}")
        rule = self.final_model_rule
        if not (rule in ("union", "intersection") or isinstance(rule, (list, tuple))):
            raise ValueError("final_model_rule must be 'union', 'intersection' or an index list")

    @classmethod
    def from_dict(cls, d):
        return cls(list(d["views"]), d.get("final_model_rule", d.get("final_model", "union")))

    def to_dict(self):
        rule = self.final_model_rule
        return {"views": self.views, "final_model_rule": list(rule) if isinstance(rule, (list, tuple)) else rule}


@dataclass
class ViewsResult:
    outcomes: list
    recon: selectors.MultiViewReconstruction
    active: np.ndarray
    loss: str
    info: dict = field(default_factory=dict)


def _randomization(spec, dim):
    return RandomizationDist.from_config(spec.get("randomization"), dim)


def _run_one(X, y, spec, rng):
    proc = spec.get("procedure", "lasso")
    n, p = X.shape
    loss = spec.get("loss", "gaussian")
    lam = spec.get("lam")
    if proc in ("lasso", "carve") and (lam is None or lam == "default"):
        lam = selectors.default_lambda(X, y, rng, loss=loss)
    if proc == "lasso":
        dist = _randomization(spec, p)
        omega = dist.sample(rng)
        out, rec = selectors.solve_randomized_lasso(X, y, float(lam), spec.get("eps"), omega, loss)
        return [out], [rec], [dist]
    if proc == "screen":
        dist = _randomization(spec, p)
        out, rec = selectors.screening_view(X, y, dist.sample(rng), float(spec["c"]),
                                            spec.get("sigma"))
        return [out], [rec], [dist]
    if proc == "stepwise":
        K = int(spec.get("steps", 1))
        dist = _randomization(spec, p)
        omegas = [dist.sample(rng) for _ in range(K)]
        outs, recs = selectors.forward_stepwise(X, y, K, omegas)
        return outs, recs, [dist.resized(r.omega_dim) for r in recs]
    out, rec, dist = selectors.carved_lasso(X, y, float(spec.get("rho", 0.5)), float(lam),
                                            spec.get("eps"), loss, rng,
                                            int(spec.get("bootstrap_reps", 500)))
    return [out], [rec], [dist]


def _final_model(rule, sets, p):
    if isinstance(rule, (list, tuple, np.ndarray)):
        E = np.unique(np.asarray(rule, dtype=int))
    elif rule == "union":
        E = np.unique(np.concatenate([np.asarray(s, dtype=int) for s in sets])) if sets else np.zeros(0, int)
    else:
        E = set(sets[0].tolist())
        for s in sets[1:]:
            E &= set(s.tolist())
        E = np.array(sorted(E), dtype=int)
    if E.size and (E.min() < 0 or E.max() >= p):
        raise ValueError("final model indices must lie in [0, p)")
    return E


def run_views(X, y, plan: ViewPlan, rng=None):
    """Run each view with its own randomization; choose the final model E."""
    rng = np.random.default_rng(rng)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    outcomes, recons, dists, sets = [], [], [], []
    for spec in plan.views:
        outs, recs, ds = _run_one(X, y, spec, rng)
        outcomes.append(outs)
        recons.extend(recs)
        dists.extend(ds)
        sets.append(outs[-1].active_set)
    E = _final_model(plan.final_model_rule, sets, X.shape[1])
    losses = {spec.get("loss", "gaussian") for spec in plan.views}
    loss = losses.pop() if len(losses) == 1 else "gaussian"
    info = {"view_active_sets": [s.tolist() for s in sets],
            "reconstruction_errors": [r.reconstruction_error() for r in recons]}
    carves = [o[0] for o, spec in zip(outcomes, plan.views) if spec.get("procedure") == "carve"]
    if len(carves) > 1:
        info["split_cross_cov_max_rel"] = split_cross_covariance(X, y, carves, loss, rng=rng)
    return ViewsResult(outcomes, compose_views(recons, dists), E, loss, info)


def split_cross_covariance(X, y, carve_outcomes, loss, B_reps=300, rng=None):
    """Largest |Cov(omega_k, omega_l)| over k != l, relative to the diagonal scale.

    Each replicate resamples rows and redraws every view's split.
    """
    rng = np.random.default_rng(rng)
    n, p = X.shape
    K = len(carve_outcomes)
    psis = [-X * (y - glm.mean_function(X @ o.info["beta_hat"], loss))[:, None] for o in carve_outcomes]
    sizes = [len(o.info["subsample"]) for o in carve_outcomes]
    draws = np.empty((B_reps, K * p))
    for b in range(B_reps):
        rows = rng.integers(0, n, n)
        for k, (psi, m) in enumerate(zip(psis, sizes)):
            coef = np.ones(n)
            coef[rng.permutation(n)[:m]] -= n / m
            draws[b, k * p:(k + 1) * p] = coef @ psi[rows]
    S = np.cov(draws, rowvar=False)
    scale = np.sqrt(np.outer(np.diag(S), np.diag(S)))
    rel = np.abs(S) / np.maximum(scale, 1e-300)
    mask = np.ones_like(rel, dtype=bool)
    for k in range(K):
        mask[k * p:(k + 1) * p, k * p:(k + 1) * p] = False
    return float(rel[mask].max()) if mask.any() else 0.0


# inference -----------------------------------------------------------------------

def _unique_specs(specs):
    uniq, index = [], []
    for s in specs:
        if s not in uniq:
            uniq.append(s)
        index.append(uniq.index(s))
    return uniq, index


def infer(X, y, recon, active, loss="gaussian", coords=None, method="weighted", level=0.9,
          nulls=None, config=None, bootstrap_reps=1000, rng=None, grid_points=200,
          target_draw_source="gaussian", wild_grid_points=21):
    """Selective pivots, p-values and CIs for coefficients of the model ``active``.

    ``recon`` is a MultiViewReconstruction whose views carry data specs.
    ``coords`` selects positions within ``active`` (default: all).
    ``nulls`` gives the null value per selected coordinate (default 0).
    """
    rng = np.random.default_rng(rng)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    E = np.asarray(active, dtype=int)
    if E.size == 0:
        raise ValueError("the final model is empty; nothing to infer")
    if isinstance(recon, selectors.AffineReconstruction):
        raise TypeError("pass a MultiViewReconstruction (see compose_views)")
    if any(v.data_spec is None for v in recon.views):
        raise ValueError("every view needs a data spec for the bootstrap")
    config = _config(config)
    chain_cfg = SamplerConfig(**{**config.__dict__, "seed": rng})
    coords = range(E.size) if coords is None else list(coords)
    nulls = np.zeros(E.size) if nulls is None else np.asarray(nulls, dtype=float)
    target_spec = DataSpec(E, loss)
    specs, index = _unique_specs([target_spec] + [v.data_spec for v in recon.views])
    D_obs = [data_vector(X, y, s.active, s.loss)[0] for s in specs]
    draws = pairs_bootstrap_draws(X, y, specs, bootstrap_reps, rng)
    S, sl = joint_covariance(draws)
    s_T = sl[0]
    opt_draws, chain_info = None, {}
    results = []
    for j in coords:
        tj = s_T.start + j
        T_obs = D_obs[0][j]
        Sigma_T = np.array([[S[tj, tj]]])
        theta0 = float(nulls[j])
        targets = []
        for k in index[1:]:
            Sdt = S[sl[k], tj][:, None]
            targets.append(TargetSpec([T_obs], [theta0], Sigma_T, Sdt, D_obs[k]))
        grid = pivots.ci_grid(T_obs, Sigma_T, grid_points) if grid_points else np.zeros(0)
        diag = {"method": method}
        if method == "weighted":
            if opt_draws is None:
                opt_draws, chain_info = sample_optimization_variables(recon, None, config.n_samples,
                                                                      chain_cfg)
            boot = None
            if target_draw_source == "pairs_bootstrap":
                boot = draws[0][:, j] - T_obs
            wg = run_weighted_optimization_sampler(targets, recon, None,
                                                   np.concatenate([[theta0], grid]),
                                                   target_draw_source, config.n_samples, chain_cfg,
                                                   boot_draws=boot, opt_draws=opt_draws)
            piv = wg.one_sided_pivots()
            one, grid_piv = piv[0], piv[1:]
            diag.update(ess=float(wg.ess[0]), low_ess=bool(wg.low_ess[0]),
                        chain_length=chain_info.get("chain_length"), eta=chain_info.get("eta"))
        elif method == "plugin":
            ref = [t.with_theta([T_obs]) for t in targets]
            smp = run_selective_sampler(ref, recon, None, config.n_samples, chain_cfg)
            at0 = pivots.tilt_reuse(smp, [theta0], Sigma_T, config.min_ess)
            one = pivots.plugin_pivot(at0, [T_obs], [theta0], Sigma_T)[1]
            grid_piv = np.array([pivots.plugin_pivot(pivots.tilt_reuse(smp, [th], Sigma_T), [T_obs],
                                                     [th], Sigma_T)[1] for th in grid])
            diag.update(ess=at0.info["ess"], low_ess=at0.info["low_ess"],
                        chain_length=smp.info["chain_length"], eta=smp.info["eta"])
        elif method == "wild":
            if loss != "gaussian":
                raise ValueError("the wild bootstrap is implemented for the Gaussian loss")
            beta_bar = D_obs[0][: E.size]
            resid = y - X[:, E] @ beta_bar
            e_j = np.zeros(E.size)
            e_j[j] = 1.0
            W = wild_bootstrap_matrix(X[:, E], resid, e_j)

            def wild_pivot(th):
                ts = [t.with_theta([th]) for t in targets]
                smp = run_wild_bootstrap_sampler(W, ts, recon, None, "normal", config.n_samples,
                                                 chain_cfg)
                return pivots.plugin_pivot(smp, [T_obs], [th], Sigma_T)[1], smp

            one, smp = wild_pivot(theta0)
            coarse = np.linspace(grid[0], grid[-1], wild_grid_points) if grid.size else grid
            grid_piv = np.array([wild_pivot(th)[0] for th in coarse])
            grid = coarse
            diag.update(ess=float(len(smp)), chain_length=smp.info["chain_length"],
                        eta=smp.info["eta"], degenerate=smp.info["degenerate"])
        else:
            raise ValueError(f"unknown method {method!r}")
        if grid.size:
            ci = pivots.invert_ci(grid_piv, grid, 1 - level)
            lo, hi = ci.lo, ci.hi
            diag.update(ci_empty=ci.empty, ci_noncontiguous=ci.noncontiguous)
        else:
            lo = hi = float("nan")
        results.append(pivots.InferenceResult(int(E[j]), float(T_obs), theta0, float(one),
                                              pivots.two_sided_p(one), float(lo), float(hi),
                                              level, diag))
    return results


def run_and_infer(X, y, plan: ViewPlan, rng=None, **kwargs):
    rng = np.random.default_rng(rng)
    vr = run_views(X, y, plan, rng)
    if vr.active.size == 0:
        return vr, []
    return vr, infer(X, y, vr.recon, vr.active, vr.loss, rng=rng, **kwargs)
