"""Simulation experiments: pivot uniformity, CI coverage, carving vs splitting.

A scenario either describes a regression problem (design, coefficients,
noise, loss, selection views and pivot method) or the one-dimensional
thresholding example. Every replicate draws from its own child seed, so
results are reproducible from (scenario, seed).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import exact1d, glm, multiview
from .errors import RareEventError
from .randomization import RandomizationDist
from .samplers import SamplerConfig

KS_COEF = 1.63


@dataclass
class Scenario:
    name: str = "scenario"
    kind: str = "regression"
    n: int = 200
    p: int = 10
    beta: list | None = None
    signals: dict | None = None
    design: str = "gaussian"
    design_corr: float = 0.0
    noise: str = "gaussian"
    sigma: float = 1.0
    loss: str = "gaussian"
    views: list = field(default_factory=lambda: [{"procedure": "lasso"}])
    final_model_rule: object = "union"
    method: str = "weighted"
    replicates: int = 300
    max_attempts: int | None = None
    seed: int = 0
    level: float = 0.9
    sampler: dict = field(default_factory=dict)
    bootstrap_reps: int = 500
    grid_points: int = 200
    target_draw_source: str = "gaussian"
    thresholds: dict = field(default_factory=lambda: {"ks_coef": KS_COEF, "coverage_sigmas": 3.0})
    # one-dimensional example
    threshold: float = 0.0
    mu: float = 0.0
    randomization: dict = field(default_factory=lambda: {"family": "logistic", "scale": 1.0})

    def __post_init__(self):
        if self.replicates < 100:
            raise ValueError("scenarios need at least 100 replicates")
        if self.kind not in ("regression", "exact1d"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def coefficients(self):
        if self.beta is not None:
            b = np.asarray(self.beta, dtype=float)
            if b.shape != (self.p,):
                raise ValueError("beta must have length p")
            return b
        b = np.zeros(self.p)
        if self.signals:
            k = int(self.signals.get("k", 0))
            b[:k] = float(self.signals.get("size", 1.0))
        return b

    def sampler_config(self) -> SamplerConfig:
        cfg = {"n_samples": 4000, "n_chains": 40, "thin": 5, "eta": "auto", "burnin": 1000}
        cfg.update(self.sampler)
        return SamplerConfig.from_dict(cfg)


def _child_rngs(seed, count):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def generate(scenario: Scenario, rng):
    """Return (X, y, mean) with columns centered, unit sd and scaled by 1/sqrt(n)."""
    n, p = scenario.n, scenario.p
    Z = rng.standard_normal((n, p))
    if scenario.design == "equicorrelated" and scenario.design_corr:
        r = scenario.design_corr
        Z = np.sqrt(1 - r) * Z + np.sqrt(r) * rng.standard_normal((n, 1))
    elif scenario.design != "gaussian":
        raise ValueError(f"unknown design {scenario.design!r}")
    Z = (Z - Z.mean(0)) / Z.std(0)
    eta = Z @ scenario.coefficients()
    X = Z / np.sqrt(n)
    if scenario.loss == "logistic":
        mean = glm.mean_function(eta, "logistic")
        y = (rng.random(n) < mean).astype(float)
    else:
        mean = eta
        if scenario.noise == "gaussian":
            e = rng.standard_normal(n)
        elif scenario.noise == "laplace":
            e = rng.laplace(0, 1 / np.sqrt(2), n)
        elif scenario.noise == "t5":
            e = rng.standard_t(5, n) / np.sqrt(5 / 3)
        else:
            raise ValueError(f"unknown noise law {scenario.noise!r}")
        y = mean + scenario.sigma * e
    return X, y, mean


def population_target(X, mean, E, loss, rows=None):
    """Fixed-design projection of the true mean onto the columns E."""
    rows = slice(None) if rows is None else rows
    XE = X[rows][:, E]
    return glm.fit_mle(XE, mean[rows], loss)


def _plan(scenario):
    views = [dict(v, loss=v.get("loss", scenario.loss)) for v in scenario.views]
    return multiview.ViewPlan(views, scenario.final_model_rule)


def _ks(pivots_, coef):
    n = len(pivots_)
    if n == 0:
        return float("nan"), float("nan"), False
    ks = stats.kstest(pivots_, "uniform").statistic
    crit = coef / np.sqrt(n)
    return float(ks), float(crit), bool(ks < crit)


def _regression_replicates(scenario, with_ci, rng_list):
    plan = _plan(scenario)
    cfg = scenario.sampler_config()
    records = []
    for rng in rng_list:
        X, y, mean = generate(scenario, rng)
        vr = multiview.run_views(X, y, plan, rng)
        if vr.active.size == 0:
            continue
        E = vr.active
        truth = population_target(X, mean, E, vr.loss)
        j = int(rng.integers(E.size))
        res = multiview.infer(X, y, vr.recon, E, vr.loss, coords=[j], method=scenario.method,
                              level=scenario.level, nulls=truth, config=cfg,
                              bootstrap_reps=scenario.bootstrap_reps, rng=rng,
                              grid_points=scenario.grid_points if with_ci else 0,
                              target_draw_source=scenario.target_draw_source)[0]
        records.append({"coef": res.coef, "truth": float(truth[j]), "pivot": res.pivot,
                        "ci": (res.ci_lo, res.ci_hi), "ess": res.diagnostics.get("ess"),
                        "model": E.tolist()})
        if len(records) >= scenario.replicates:
            break
    return records


def _exact1d_pivots(scenario, rng):
    g = RandomizationDist.from_config(scenario.randomization, 1)
    ex = exact1d.SimpleExample(scenario.n, scenario.threshold, scenario.mu, g)
    exact1d.check_regime(ex)
    z = exact1d.simulate_selected(scenario.n, scenario.threshold, scenario.mu, g,
                                  scenario.replicates, rng)
    return np.asarray(exact1d.exact_plugin_cdf(ex, z))


def uniformity_experiment(scenario: Scenario):
    """KS distance of null pivots to Unif[0, 1] over qualifying replicates."""
    coef = scenario.thresholds.get("ks_coef", KS_COEF)
    if scenario.kind == "exact1d":
        try:
            piv = _exact1d_pivots(scenario, np.random.default_rng(scenario.seed))
        except RareEventError as err:
            return {"ks_stat": float("nan"), "ks_pass": False, "rare_event": True,
                    "message": str(err), "n_qualifying": 0, "pivot_samples": []}
        records = None
    else:
        attempts = scenario.max_attempts or 10 * scenario.replicates
        records = _regression_replicates(scenario, False, _child_rngs(scenario.seed, attempts))
        piv = np.array([r["pivot"] for r in records])
    ks, crit, ok = _ks(piv, coef)
    out = {"ks_stat": ks, "ks_crit": crit, "ks_pass": ok, "n_qualifying": int(len(piv)),
           "inconclusive": len(piv) < 50, "rare_event": False, "pivot_samples": piv.tolist()}
    if records is not None:
        out["mean_ess"] = float(np.mean([r["ess"] for r in records])) if records else float("nan")
    return out


def _coverage_summary(hits, lengths, level, sigmas):
    m = len(hits)
    cov = float(np.mean(hits)) if m else float("nan")
    se = float(np.sqrt(level * (1 - level) / m)) if m else float("nan")
    band = (level - sigmas * se, level + sigmas * se)
    return {"coverage": cov, "binomial_se": se, "band": band,
            "in_band": bool(band[0] <= cov <= band[1]) if m else False,
            "mean_length": float(np.mean(lengths)) if m else float("nan"), "n_qualifying": m}


def coverage_experiment(scenario: Scenario, level=None):
    level = scenario.level if level is None else level
    if level != scenario.level:
        scenario = Scenario.from_dict(dict(scenario.to_dict(), level=level))
    attempts = scenario.max_attempts or 10 * scenario.replicates
    records = _regression_replicates(scenario, True, _child_rngs(scenario.seed, attempts))
    hits = [r["ci"][0] <= r["truth"] <= r["ci"][1] for r in records]
    lengths = [r["ci"][1] - r["ci"][0] for r in records]
    out = _coverage_summary(hits, lengths, level, scenario.thresholds.get("coverage_sigmas", 3.0))
    out["inconclusive"] = len(records) < 50
    return out


def split_interval(X, y, E, j, rows, loss, level):
    """Wald interval for coefficient j of model E fit on the held-out rows."""
    XE = X[rows][:, E]
    b = glm.fit_mle(XE, y[rows], loss)
    full = np.zeros(X.shape[1])
    full[E] = b
    H = glm.hessian(X[rows], full, loss, cols=E)[E]
    if loss == "gaussian":
        r = y[rows] - XE @ b
        H = H / (r @ r / max(len(r) - len(E), 1))
    se = np.sqrt(np.linalg.inv(H)[j, j])
    z = stats.norm.ppf(0.5 + level / 2)
    return b[j] - z * se, b[j] + z * se


def carving_vs_splitting(scenario: Scenario, level=None):
    """Carving CIs (full data, conditional) against Wald CIs on the held-out split."""
    level = scenario.level if level is None else level
    view = dict(scenario.views[0], procedure="carve", loss=scenario.loss)
    plan = multiview.ViewPlan([view], "union")
    cfg = scenario.sampler_config()
    sig = scenario.thresholds.get("coverage_sigmas", 3.0)
    carve_hits, carve_len, split_hits, split_len = [], [], [], []
    attempts = scenario.max_attempts or 10 * scenario.replicates
    for rng in _child_rngs(scenario.seed, attempts):
        X, y, mean = generate(scenario, rng)
        vr = multiview.run_views(X, y, plan, rng)
        E = vr.active
        if E.size == 0:
            continue
        held = np.setdiff1d(np.arange(scenario.n), vr.outcomes[0][0].info["subsample"])
        try:
            truth = population_target(X, mean, E, scenario.loss)
            truth_split = population_target(X, mean, E, scenario.loss, held)
            j = int(rng.integers(E.size))
            lo_s, hi_s = split_interval(X, y, E, j, held, scenario.loss, level)
        except (np.linalg.LinAlgError, RuntimeError):
            continue
        res = multiview.infer(X, y, vr.recon, E, scenario.loss, coords=[j], method=scenario.method,
                              level=level, nulls=truth, config=cfg,
                              bootstrap_reps=scenario.bootstrap_reps, rng=rng,
                              grid_points=scenario.grid_points)[0]
        carve_hits.append(res.ci_lo <= truth[j] <= res.ci_hi)
        carve_len.append(res.ci_hi - res.ci_lo)
        split_hits.append(lo_s <= truth_split[j] <= hi_s)
        split_len.append(hi_s - lo_s)
        if len(carve_hits) >= scenario.replicates:
            break
    carve = _coverage_summary(carve_hits, carve_len, level, sig)
    split = _coverage_summary(split_hits, split_len, level, sig)
    return {"carving": carve, "splitting": split,
            "carving_shorter": bool(carve["mean_length"] < split["mean_length"])}


EXPERIMENTS = {"uniformity": uniformity_experiment, "coverage": coverage_experiment,
               "carving": carving_vs_splitting}
